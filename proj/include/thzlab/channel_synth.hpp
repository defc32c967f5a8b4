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

#ifndef thzlab_channel_synth_H
#define thzlab_channel_synth_H

#include "thzlab/scenario.hpp"
#include "thzlab/waveform.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thzlab
{
    // Friis free-space path loss -20 log10(c / (4 pi f d)) in dB
    double fspl(double distance_m, double frequency_hz);

    enum class path_kind
    {
        los,
        once_scattered
    };

    struct propagation_path
    {
        path_kind kind = path_kind::los;
        std::optional<std::size_t> scatterer_index; // into scenario::objects
        vec3 interaction_point;                     // specular point; Rx position for LoS
        double length_m = 0.0;
        double delay_s = 0.0;
        double aoa_az_deg = 0.0, aoa_el_deg = 0.0; // arrival direction seen from Rx
        double aod_az_deg = 0.0, aod_el_deg = 0.0; // departure direction seen from Tx
        double scattering_loss_db = 0.0;
        cplx gain_linear; // channel only, no antenna gains
    };

    // LoS (if unobstructed) plus one specular once-scattered path per panel whose image
    // point falls on the panel with both legs unobstructed. Paths longer than the band's
    // maximum path length are dropped.
    std::vector<propagation_path> trace_paths(std::span<const scatterer_panel> panels,
                                              const vec3 &tx, const vec3 &rx,
                                              const band_config &band);
    std::vector<propagation_path> trace_paths(const scenario &s, int rx_id, const band_config &band);

    // Tx boresight: the transmitter is always turned towards the receiver
    vec3 tx_boresight(const scenario &s, int rx_id);

    // Sounder front-end response over the DFT bins (flat when disabled)
    cvec system_response_spectrum(const system_response_config &cfg, std::size_t sample_count);

    struct link_antennas
    {
        antenna_pattern tx;
        vec3 tx_boresight{1.0, 0.0, 0.0};
        antenna_pattern rx;
    };

    // Noise-free CIR seen with the Rx steered to `steer`; every path is placed at
    // delay_s + extra_delay_s with band-limited interpolation. `response` (DFT domain)
    // is applied when non-empty.
    cvec synthesize_cir(std::span<const propagation_path> paths, const band_config &band,
                        const link_antennas &antennas, const direction &steer,
                        double extra_delay_s, std::span<const cplx> response = {});

    // Power gain (dB) of one path at the Rx steering direction, including both antennas
    double path_power_db(const propagation_path &p, const link_antennas &antennas, const direction &steer);

    // One record: noise-free CIR with drift, plus noise and averaging per the probe mode.
    // Throws validation_error if `steer` is not on the scan grid.
    cir_record synthesize_observation(const scenario &s, int rx_id, std::size_t band_index,
                                      const direction &steer, double timestamp_s);

    // Direct-connection measurement at t = 0: system response only, unit gain
    cir_record direct_connection_record(const scenario &s, std::size_t band_index);

    // Timestamp of direction j at the i-th Rx position of the campaign
    double campaign_timestamp(const scenario &s, std::size_t rx_order, std::size_t direction_index);

    // All positions x all directions, ordered by (rx order, direction index).
    // threads = 0 uses the hardware concurrency; output is identical for every thread count.
    std::vector<cir_record> run_campaign(const scenario &s, std::size_t band_index, unsigned threads = 0);
}

#endif
