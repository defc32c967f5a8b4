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

#ifndef thzlab_postproc_H
#define thzlab_postproc_H

#include "thzlab/scenario.hpp"
#include "thzlab/waveform.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace thzlab
{
    // ---- calibration ----

    // Removes the sounder response measured by the direct connection (time-domain record)
    // by regularised spectral division X conj(S) / (|S|^2 + eps max|S|^2). Warns when the
    // response has near-nulls in the band.
    cir_record calibrate(const cir_record &cir, std::span<const cplx> system_response, double regularization = 1e-9);

    // ---- time drift ----

    struct drift_sample
    {
        double t_s = 0.0;     // relative time of the reference-direction record
        double drift_s = 0.0; // measured minus theoretical LoS delay
    };

    // Reference-direction records: for every LoS position, the record steered at the grid
    // direction closest to the transmitter
    std::vector<cir_record> select_reference_records(std::span<const cir_record> records, const scenario &s);

    // True if the Tx-Rx segment is not blocked by any scatterer
    bool has_los(const scenario &s, int rx_id);

    // One sample per record, ordered by timestamp; records with no peak above the noise
    // threshold are skipped with a warning
    std::vector<drift_sample> estimate_drift_samples(std::span<const cir_record> reference_records, const scenario &s);

    // Piecewise-linear interpolant of the samples inside [t_1, t_L] and a least-squares line outside
    class drift_model
    {
    public:
        explicit drift_model(std::vector<drift_sample> samples); // needs >= 2 samples at distinct times

        const std::vector<drift_sample> &samples() const { return samples_; }
        double slope() const { return slope_; }         // s per s
        double intercept() const { return intercept_; } // s

    private:
        std::vector<drift_sample> samples_;
        double slope_ = 0.0;
        double intercept_ = 0.0;
    };

    // Drift at time t
    double correct_drift(double t, const drift_model &model);

    // Shifts each record earlier by correct_drift(timestamp) with a band-limited fractional shift
    std::vector<cir_record> apply_drift_correction(std::span<const cir_record> records, const drift_model &model);

    // ---- multipath components ----

    struct mpc
    {
        int position_id = 0;
        double delay_s = 0.0;
        cplx gain;             // Tx/Rx boresight gains and the Rx pointing loss removed
        double power_db = 0.0; // 20 log10 |gain|
        double aoa_az_deg = 0.0, aoa_el_deg = 0.0; // steering direction of the winning record
        std::size_t direction_index = 0;

        // Arrival direction estimated from the beam pattern over neighbouring scan
        // directions, and the Rx gain lost to pointing error at the winning direction
        bool refined = false;
        double refined_az_deg = 0.0, refined_el_deg = 0.0;
        double misalignment_db = 0.0;
    };

    // Peaks of one record found by successive cancellation
    struct record_component
    {
        double delay_bins = 0.0;
        cplx amplitude;
    };

    // Detection on a single CIR: repeatedly take the strongest bin of the residual, refine
    // it, subtract its band-limited response, until the peak falls below the noise
    // threshold. Peaks closer than resolution_bins to an accepted one are removed from the
    // residual but not reported.
    std::vector<record_component> detect_components(std::span<const cplx> cir, const processing_options &opt,
                                                    std::optional<double> noise_floor_db = std::nullopt);

    // Mean noise power (dB) estimated from the lower half of the bin powers
    double estimate_noise_floor_db(std::span<const cplx> cir);

    struct extraction_antennas
    {
        antenna_pattern tx;
        antenna_pattern rx;
    };

    // MPCs of one position from all its scan directions (calibrated, drift-corrected).
    // A component is kept when no neighbouring scan direction sees the same delay
    // stronger, and it is not explained by beam leakage of a stronger kept MPC.
    std::vector<mpc> extract_mpcs(std::span<const cir_record> records, const scan_grid &scan,
                                  const extraction_antennas &antennas, const processing_options &opt,
                                  std::optional<double> noise_floor_db = std::nullopt);

    struct cluster
    {
        std::vector<mpc> members; // strongest first
        double power_linear = 0.0;
        double delay_s = 0.0; // power-weighted centroid
        double az_deg = 0.0;
        double el_deg = 0.0;
        double cds_s = 0.0;
        double casa_deg = 0.0;
        double cesa_deg = 0.0;

        const mpc &strongest() const { return members.front(); }
    };

    // Multipath component distance: unit-vector distance of the arrival directions plus
    // delay difference scaled by delay_scale (1/s)
    double mcd(const mpc &a, const mpc &b, double delay_scale);

    // Single-linkage clustering under MCD <= threshold, with delay_scale = zeta / (delay span).
    // Clusters are returned strongest first.
    std::vector<cluster> cluster_mpcs(std::span<const mpc> mpcs, double mcd_threshold, double zeta);

    // Recomputes power, centroid and intra-cluster spreads from the members
    void update_cluster_stats(cluster &c);

    // ---- once-scattering tracing ----

    struct once_scattering_match
    {
        vec3 point;                       // scatter point on the Rx ray with matching path length
        std::optional<std::size_t> panel; // index into scenario::objects
        double panel_distance_m = 0.0;
        double delay_s = 0.0;
        double tx_gain_db = 0.0; // Tx pattern gain towards the scatter point
        cplx channel_gain;       // antenna-free gain of the strongest member
    };

    // Locates the scatterer of a cluster from its strongest member's delay and refined arrival
    // direction, and strips the remaining antenna effects from its gain. Returns nullopt for
    // the LoS cluster or when the geometry has no solution.
    std::optional<once_scattering_match> trace_once_scattering(const cluster &c, const scenario &s, int rx_id,
                                                               double max_panel_distance_m = 0.5);

    bool is_los_cluster(const cluster &c, const scenario &s, int rx_id, double delay_bin_s);
}

#endif
