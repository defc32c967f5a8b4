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

// thzlab command line: synth, postproc, characterize, report, all

#include "thzlab/errors.hpp"
#include "thzlab/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace
{
    enum exit_code
    {
        ok = 0,
        validation_failure = 1,
        missing_inputs = 2,
        numeric_failure = 3
    };

    std::vector<std::string> band_labels(const std::string &band)
    {
        if (band == "both" || band.empty())
            return {};
        return {band};
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Synthetic THz correlation-sounder campaign: synthesis, post-processing, characterization, reports"};
    app.require_subcommand(1);

    thzlab::pipeline_config cfg;
    std::string config_path = std::string(THZLAB_DATA_DIR) + "/laboratory.json";
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string band = "both";
    std::string stage_from;
    std::string reference;
    std::string format = "binary";
    unsigned threads = 0;
    bool no_svg = false;

    auto add_common = [&](CLI::App *sub)
    {
        sub->add_option("--config", config_path, "Scenario JSON")->capture_default_str();
        sub->add_option("--out", out_dir, "Output directory (default $THZ_OUT_DIR or ./thzlab_out)");
        sub->add_option("--seed", seed, "RNG seed override (default $THZ_SEED or the scenario seed)");
        sub->add_option("--band", band, "Band label to run")->check(CLI::IsMember({"140", "220", "both"}))->capture_default_str();
        sub->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();
        sub->add_option("--cir-format", format, "CIR file format")->check(CLI::IsMember({"binary", "csv", "both"}))->capture_default_str();
        sub->add_option("--reference", reference, "Reference table JSON for the comparison report");
        sub->add_flag("--no-svg", no_svg, "Skip SVG renderings of the plot data");
    };

    CLI::App *synth = app.add_subcommand("synth", "Synthesize the direction-scan campaign CIRs");
    CLI::App *post = app.add_subcommand("postproc", "Calibrate, correct drift, extract and cluster MPCs");
    CLI::App *chr = app.add_subcommand("characterize", "Per-position statistics, scattering loss, ensemble fits");
    CLI::App *rep = app.add_subcommand("report", "Comparison report and plot data");
    CLI::App *all = app.add_subcommand("all", "Run every stage");
    for (CLI::App *sub : {synth, post, chr, rep, all})
        add_common(sub);
    all->add_option("--stage-from", stage_from, "First stage to run")
        ->check(CLI::IsMember({"synth", "postproc", "characterize", "report"}));

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        return app.exit(e) == 0 ? ok : validation_failure;
    }

    try
    {
        CLI::App *sub = app.get_subcommands().front();
        cfg.scenario_path = config_path;

        if (!out_dir.empty())
            cfg.out_dir = out_dir;
        else if (const char *env = std::getenv("THZ_OUT_DIR"); env && *env)
            cfg.out_dir = env;

        if (sub->count("--seed"))
            cfg.seed = seed;
        else if (const char *env = std::getenv("THZ_SEED"); env && *env)
        {
            try
            {
                cfg.seed = std::stoull(env);
            }
            catch (const std::exception &)
            {
                throw thzlab::validation_error(std::string("THZ_SEED is not an unsigned integer: ") + env);
            }
        }

        cfg.bands = band_labels(band);
        cfg.threads = threads;
        cfg.svg = !no_svg;
        cfg.format = format == "csv" ? thzlab::cir_format::csv : format == "both" ? thzlab::cir_format::both : thzlab::cir_format::binary;
        if (!reference.empty())
            cfg.reference_path = reference;

        if (sub == all)
        {
            cfg.first = stage_from.empty() ? thzlab::stage::synth : thzlab::stage_from_string(stage_from);
            cfg.last = thzlab::stage::report;
        }
        else
            cfg.first = cfg.last = thzlab::stage_from_string(sub->get_name());

        const auto result = thzlab::run_pipeline(cfg);
        std::cout << "wrote " << result.artifacts.size() << " artifacts to " << cfg.out_dir.string();
        if (result.cir_records)
            std::cout << " (" << result.cir_records << " CIR records)";
        std::cout << "\n";
        return ok;
    }
    catch (const thzlab::missing_input_error &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return missing_inputs;
    }
    catch (const thzlab::numeric_error &e)
    {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return numeric_failure;
    }
    catch (const thzlab::parse_error &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return validation_failure;
    }
    catch (const thzlab::validation_error &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return validation_failure;
    }
    catch (const std::exception &e)
    {
        std::cerr << "internal failure: " << e.what() << "\n";
        return numeric_failure;
    }
}
