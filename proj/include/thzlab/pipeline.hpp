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

#ifndef thzlab_pipeline_H
#define thzlab_pipeline_H

#include "thzlab/characterize.hpp"
#include "thzlab/postproc.hpp"
#include "thzlab/scenario.hpp"
#include "thzlab/waveform.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thzlab
{
    enum class stage
    {
        synth,
        postproc,
        characterize,
        report
    };

    std::string to_string(stage s);
    stage stage_from_string(std::string_view name);

    enum class cir_format
    {
        binary,
        csv,
        both
    };

    struct pipeline_config
    {
        std::filesystem::path scenario_path;
        std::filesystem::path out_dir = "thzlab_out";
        std::vector<std::string> bands; // labels; empty runs every band of the scenario
        stage first = stage::synth;
        stage last = stage::report; // stages first..last run in order
        std::optional<std::uint64_t> seed;
        std::optional<std::filesystem::path> reference_path; // default: bundled table when present
        unsigned threads = 0;                                 // 0 = hardware concurrency
        cir_format format = cir_format::binary;
        bool svg = true;
    };

    struct artifact
    {
        std::string path; // relative to the output directory, '/' separated
        std::string sha256;
        std::uintmax_t bytes = 0;
    };

    struct pipeline_result
    {
        std::vector<artifact> artifacts; // sorted by path, manifest excluded
        std::size_t cir_records = 0;     // records written by the synth stage
    };

    // Runs the selected stages. Every stage after the first selected one reads its inputs
    // back from the output directory; missing inputs raise missing_input_error.
    pipeline_result run_pipeline(const pipeline_config &config);

    // ---- stage building blocks ----

    // Calibration against the direct-connection record, drift estimation on the
    // reference-direction records and drift correction of the whole band
    struct corrected_band
    {
        std::vector<cir_record> records;
        std::vector<drift_sample> drift;
        std::optional<drift_model> model; // empty when fewer than two drift samples were measured
    };

    corrected_band correct_band(const scenario &s, std::span<const cir_record> raw, const cir_record &direct);

    struct position_result
    {
        int position_id = 0;
        std::vector<mpc> mpcs;
        std::vector<cluster> clusters; // strongest first; cluster_id is the index
    };

    // MPC extraction and clustering per position, in parallel over positions.
    // Records must be grouped by position.
    std::vector<position_result> process_positions(const scenario &s, std::span<const cir_record> records, unsigned threads = 0);

    struct scattering_row
    {
        int position_id = 0;
        std::size_t cluster_id = 0;
        std::string panel_id;
        material mat = material::metal;
        double delay_s = 0.0;
        double loss_db = 0.0;
        double configured_loss_db = 0.0;
        double panel_distance_m = 0.0;
    };

    // Scattering loss of every non-LoS cluster that traces back to a panel
    std::vector<scattering_row> scattering_rows(const scenario &s, const band_config &band, const position_result &pos);

    // records: every direction of the position, calibrated and drift-corrected
    channel_stats characterize_position(const scenario &s, const band_config &band, std::span<const cir_record> records,
                                        const position_result &pos);

    // ---- reports ----

    std::string render_summary_json(std::span<const ensemble_summary> ensemble, std::span<const band_config> bands);
    std::string render_comparison_csv(std::span<const comparison_row> rows);
    std::string render_comparison_text(std::span<const comparison_row> rows, const std::string &reference_name);

    enum class plot_kind
    {
        drift_curve,
        scattering_bars,
        power_delay_profile,
        delay_angle_map
    };

    std::string to_string(plot_kind k);

    struct plot_inputs
    {
        std::string band;
        std::vector<drift_sample> drift;
        std::vector<double> model_times_s; // drift model evaluated here for the fitted series
        std::optional<drift_model> model;
        std::vector<scattering_row> scattering;
        std::vector<cir_record> profiles; // one record per position
        std::vector<mpc> mpcs;
    };

    // Writes <dir>/<band>_<kind>.csv (and .svg when requested); returns the written files.
    // Raises missing_input_error when the kind's inputs are absent.
    std::vector<std::filesystem::path> emit_plot_data(plot_kind kind, const plot_inputs &inputs,
                                                      const std::filesystem::path &dir, bool svg);

    // Power-delay profile (delay_ns, power_db) of one record
    std::vector<std::pair<double, double>> power_delay_profile(const cir_record &record);

    std::string sha256_file(const std::filesystem::path &path);
}

#endif
