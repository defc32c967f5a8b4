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

#ifndef thzlab_scenario_H
#define thzlab_scenario_H

#include "thzlab/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace thzlab
{
    enum class material
    {
        metal,
        concrete
    };

    std::string_view to_string(material m);

    // Flat rectangular scatterer. The in-plane axes are derived from the normal:
    // "width" runs horizontally, "height" along normal x width.
    struct scatterer_panel
    {
        std::string id;
        std::string kind; // free text: rack, shelf, wall, pillar, ...
        vec3 center;
        vec3 normal;
        double half_width = 0.0;  // m
        double half_height = 0.0; // m
        material mat = material::metal;
        double scattering_loss_db = 0.0; // ground-truth loss applied in synthesis
        double phase_deg = 0.0;          // fixed phase added to paths via this panel

        vec3 width_axis() const;
        vec3 height_axis() const;

        // True if the point lies on the panel's plane within the rectangle (tolerance in m)
        bool contains(const vec3 &point, double tol = 1e-9) const;

        // True if the open segment a-b crosses the panel rectangle
        bool blocks(const vec3 &a, const vec3 &b) const;
    };

    struct antenna_pattern
    {
        double boresight_gain_dbi = 0.0;
        double hpbw_deg = 360.0;
        double sidelobe_db = -30.0; // floor relative to boresight
    };

    // Gaussian main lobe G0 - 12 (offset / HPBW)^2 dB, floored at G0 + sidelobe_db
    double antenna_gain(const antenna_pattern &pattern, double offset_deg);

    struct placement
    {
        int position_id = 0; // 0 is reserved for the transmitter
        vec3 position;
    };

    struct band_config
    {
        std::string label;
        double carrier_hz = 0.0;
        double bandwidth_hz = 0.0;
        std::size_t sample_count = 0;

        double delay_bin_s() const { return 1.0 / bandwidth_hz; }
    };

    struct band_constants
    {
        double delay_bin_s;       // 1 / bandwidth
        double max_delay_s;       // sample_count delay bins
        double max_path_length_m; // max_delay * c
        double resolution_m;      // one delay bin of path length
    };

    band_constants constants_of(const band_config &band);

    struct direction
    {
        double az_deg = 0.0;
        double el_deg = 0.0;
    };

    // Inclusive start/stop for both axes
    struct scan_grid
    {
        double az_start = 0.0, az_stop = 0.0, az_step = 10.0;
        double el_start = 0.0, el_stop = 0.0, el_step = 10.0;

        std::size_t n_az() const;
        std::size_t n_el() const;
        std::size_t size() const { return n_az() * n_el(); }

        // Elevation-major index of (az_index, el_index)
        std::size_t index(std::size_t az_index, std::size_t el_index) const { return el_index * n_az() + az_index; }

        // Azimuth axis covers the full circle, so az neighbours wrap
        bool az_wraps() const;

        // Index of the grid direction with the smallest angle to the given unit vector
        std::size_t nearest(const vec3 &dir) const;
    };

    // Row-major: elevation outer, azimuth inner. Throws validation_error if a step does not divide its range.
    std::vector<direction> build_direction_grid(const scan_grid &scan);

    struct drift_process
    {
        double rate_ns_per_hour = 0.0;
        double offset_at_epoch_ns = 0.0;

        // Trigger offset in seconds at time t (seconds since sync epoch)
        double offset_s(double t) const { return (offset_at_epoch_ns + rate_ns_per_hour * t / 3600.0) * 1e-9; }
    };

    struct noise_config
    {
        bool enabled = true;
        double floor_db = -160.0; // per-bin noise power after averaging, relative to a unit-gain path
    };

    enum class probe_mode
    {
        equivalent, // post-averaging noise drawn directly
        correlator  // every shot is ZC-convolved, noised, correlated and averaged
    };

    struct probe_config
    {
        probe_mode mode = probe_mode::equivalent;
        int zc_root = 1;
        int zc_length = 1021;
    };

    struct campaign_timing
    {
        double start_s = 600.0;              // first record, seconds after the sync epoch
        double position_duration_s = 1200.0; // time spent per Rx position
    };

    // Pass-band amplitude ripple 1 + depth * cos(2 pi f_index / period) of the sounder front end
    struct system_response_config
    {
        bool enabled = false;
        double ripple_depth = 0.1;
        double ripple_period_bins = 256.0;
    };

    struct processing_options
    {
        double detection_margin_db = 13.0; // above the estimated mean noise power
        double resolution_bins = 1.0;      // minimum separation of two MPCs in one record
        double dedup_margin_db = 6.0;      // tolerance on beam-leakage prediction (covers noise on weak copies)
        double mcd_threshold = 0.35;
        double mcd_zeta = 8.0;
        std::size_t max_components_per_record = 64;
        double dynamic_range_db = 120.0; // components this far below the strongest one are ignored
    };

    struct room_extent
    {
        double length = 0.0; // x
        double width = 0.0;  // y
        double height = 0.0; // z

        bool contains(const vec3 &p) const;
    };

    struct scenario
    {
        room_extent room;
        std::vector<scatterer_panel> objects;
        placement tx;
        antenna_pattern tx_antenna;
        std::vector<placement> rx_list;
        antenna_pattern rx_antenna;
        std::vector<band_config> bands;
        scan_grid scan;
        drift_process drift;
        noise_config noise;
        int averaging_count = 1000;
        std::uint64_t rng_seed = 1;
        probe_config probe;
        campaign_timing campaign;
        system_response_config system_response;
        processing_options processing;

        const placement &rx(int position_id) const;
        const band_config &band(std::string_view label) const;
    };

    // Throws validation_error naming the first offending field
    void validate(const scenario &s);

    // Parses and validates a scenario JSON document; parse_error on malformed input
    scenario scenario_from_json(std::string_view text);
    scenario load_scenario(const std::filesystem::path &path);

    // Geometric LoS delay |tx - rx| / c
    double los_delay(const placement &tx, const placement &rx);
    double los_delay(const vec3 &a, const vec3 &b);
}

#endif
