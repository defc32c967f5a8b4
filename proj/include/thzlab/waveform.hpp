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

#ifndef thzlab_waveform_H
#define thzlab_waveform_H

#include "thzlab/fft.hpp"

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace thzlab
{
    struct zc_sequence
    {
        int root = 1;
        int length = 1;
        cvec samples;
    };

    // x[n] = exp(-i pi root n (n + 1) / length); length odd, gcd(root, length) = 1
    zc_sequence generate_zc(int root, int length);

    // Circular cross-correlation normalised by the reference length:
    // out[k] = 1/N sum_n received[(n + k) mod L] conj(ref[n]), L = received.size() >= N.
    cvec correlate(std::span<const cplx> received, const zc_sequence &reference);

    // Element-wise mean of equally long vectors
    cvec average_cirs(std::span<const cvec> samples);

    // Circularly-symmetric complex Gaussian noise of the given per-sample power.
    // A non-finite negative power (-inf) disables noise.
    cvec add_noise(std::span<const cplx> signal, double noise_power_db, std::mt19937_64 &rng);

    // Deterministic stream seed from a base seed and a record key
    std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> key);

    // One recorded CIR for one position, band, steering direction and time
    struct cir_record
    {
        int position_id = 0; // 0 marks the direct-connection (system response) record
        std::size_t band_index = 0;
        std::string band_label;
        double az_deg = 0.0;
        double el_deg = 0.0;
        double timestamp_s = 0.0; // since the sync epoch
        double delay_bin_s = 0.0;
        cvec samples;
    };
}

#endif
