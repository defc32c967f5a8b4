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

#ifndef thzlab_characterize_H
#define thzlab_characterize_H

#include "thzlab/postproc.hpp"
#include "thzlab/scenario.hpp"
#include "thzlab/waveform.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace thzlab
{
    // Per-position channel characteristics
    struct channel_stats
    {
        int position_id = 0;
        std::string band;
        double distance_m = 0.0;
        bool los = false;
        double pl_best_db = 0.0;
        double pl_omni_db = 0.0;
        std::optional<double> k_factor_db; // empty when only one cluster was found
        double ds_s = 0.0;
        double asa_deg = 0.0;
        double esa_deg = 0.0;
        std::size_t n_clusters = 0;
        double cds_s = 0.0;
        double casa_deg = 0.0;
        double cesa_deg = 0.0;
    };

    struct ci_fit_result
    {
        double ple = 0.0;
        double sigma_sf_db = 0.0; // RMS of the residuals
        double d0_m = 1.0;
        std::vector<double> residuals_db;
    };

    enum class fit_domain
    {
        linear, // positive values, normal variate is log10(value)
        decibel // values already in dB are the normal variate
    };

    struct lognormal_fit
    {
        double mu = 0.0;    // mean of log10 samples (linear) or of dB samples
        double sigma = 0.0; // sample standard deviation of the same
        double sample_mean = 0.0;
        std::size_t count = 0;
        fit_domain domain = fit_domain::linear;
    };

    // ---- scattering loss ----

    // -20 log10 |alpha| - FSPL(c tau, f)
    double scattering_loss(cplx alpha, double delay_s, double frequency_hz);
    double scattering_loss(const once_scattering_match &match, double frequency_hz);

    // ---- path loss ----

    enum class pl_normalization
    {
        mean_over_bins, // mean |h[k]|^2 over the record
        total_energy    // sum |h[k]|^2, the power of a band-limited path regardless of its delay
    };

    // -10 log10 of the strongest direction's power, plus antenna_gain_db to remove the
    // antennas when the records still contain them
    double pl_best(std::span<const cir_record> records, pl_normalization norm = pl_normalization::mean_over_bins,
                   double antenna_gain_db = 0.0);

    // -10 log10 sum |alpha_l|^2
    double pl_omni(std::span<const mpc> mpcs);

    struct distance_loss
    {
        double distance_m = 0.0;
        double pl_db = 0.0;
    };

    // Close-in model PL = FSPL(d0) + 10 n log10(d / d0) + X, with X ~ N(0, sigma)
    ci_fit_result fit_ci(std::span<const distance_loss> points, double frequency_hz, double d0_m = 1.0);

    // ---- clusters and spreads ----

    // 10 log10(P_strongest / sum of the others); empty for fewer than two clusters
    std::optional<double> k_factor(std::span<const cluster> clusters);

    struct cluster_summary
    {
        std::size_t count = 0;
        double cds_s = 0.0;
        double casa_deg = 0.0;
        double cesa_deg = 0.0;
    };

    cluster_summary cluster_stats(std::span<const cluster> clusters);

    // DS, ASA and ESA over all MPCs (power |gain|^2); zeros for an empty list
    void mpc_spreads(std::span<const mpc> mpcs, double &ds_s, double &asa_deg, double &esa_deg);

    lognormal_fit fit_lognormal(std::span<const double> samples, fit_domain domain = fit_domain::linear);

    // ---- ensemble and comparison ----

    // One characteristic over the positions of a band, in reporting units
    struct characteristic
    {
        std::string key;  // ds, asa, esa, k_factor, n_clusters, cds, casa, cesa, pl_best, pl_omni
        std::string unit; // ns, deg, dB, count
        fit_domain domain = fit_domain::linear;
        std::vector<double> samples;
        lognormal_fit fit;
    };

    struct ensemble_summary
    {
        std::string band;
        std::vector<characteristic> items;
        std::optional<ci_fit_result> ci_best;
        std::optional<ci_fit_result> ci_omni;
        std::size_t k_factor_excluded = 0; // positions with a single cluster

        const characteristic *find(std::string_view key) const;
    };

    // Fits every characteristic. Samples that cannot enter a log-normal fit (non-positive in
    // the linear domain) are dropped with a warning.
    characteristic make_characteristic(std::string key, std::string unit, fit_domain domain, std::vector<double> samples);

    // Converts per-position statistics of one band to reporting units and fits them. The
    // close-in fits use the LoS positions at d >= d0 only.
    ensemble_summary summarize(std::string band, std::span<const channel_stats> stats, double frequency_hz);

    struct reference_entry
    {
        std::string key;
        std::string band; // empty applies to every band
        double value = 0.0;
        std::string unit;
    };

    struct reference_table
    {
        std::string name;
        std::vector<reference_entry> entries;
    };

    reference_table reference_table_from_json(std::string_view text);
    reference_table load_reference_table(const std::filesystem::path &path);

    struct comparison_row
    {
        std::string band;
        std::string key;
        std::string unit;
        double measured = 0.0;
        double reference = 0.0;
        double delta = 0.0; // measured - reference
        std::string flag;
    };

    // Measured ensemble means (PLE and shadow-fading sigma from the best-direction CI fit)
    // against the table. Raises validation_error on a unit mismatch.
    std::vector<comparison_row> compare_reference(std::span<const ensemble_summary> ensemble, const reference_table &reference);

    // Value rounded to 12 significant digits, the precision used in every report
    double report_value(double v);
}

#endif
