// SPDX-License-Identifier: Apache-2.0
//
// thzlab - synthetic correlation-sounder laboratory for THz channel studies
// Copyright (C) 2026 The thzlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef thzlab_cir_io_H
#define thzlab_cir_io_H

#include "thzlab/scenario.hpp"
#include "thzlab/waveform.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace thzlab
{
    // Shortest text that round-trips to the same double
    std::string format_double(double v);

    // One row per (record, bin): position_id,band,az_deg,el_deg,timestamp_s,bin,re,im
    void write_cir_csv(std::ostream &out, std::span<const cir_record> records);
    void write_cir_csv(const std::filesystem::path &path, std::span<const cir_record> records);

    // Rows are grouped into records by consecutive (position, band, az, el, timestamp) keys
    std::vector<cir_record> read_cir_csv(const std::filesystem::path &path, double delay_bin_s);

    // Binary container, little-endian:
    //   "TZCR" | u32 version | f64 carrier_hz | f64 bandwidth_hz | u32 sample_count | u32 record_count
    //   | u16 label length | label bytes
    //   then per record: i32 position_id | f64 az_deg | f64 el_deg | f64 timestamp_s | sample_count x (f64 re, f64 im)
    inline constexpr std::uint32_t cir_container_version = 1;

    struct cir_container
    {
        band_config band;
        std::vector<cir_record> records;
    };

    void write_cir_binary(const std::filesystem::path &path, const band_config &band, std::span<const cir_record> records);
    cir_container read_cir_binary(const std::filesystem::path &path);
}

#endif
