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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any of them fails.

#include "thzlab/channel_synth.hpp"
#include "thzlab/characterize.hpp"
#include "thzlab/errors.hpp"
#include "thzlab/pipeline.hpp"
#include "thzlab/postproc.hpp"
#include "thzlab/spread.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace thzlab;

namespace
{
    struct outcome
    {
        bool pass = false;
        std::string detail;
    };

    std::string fmt(const char *f, double a, double b = 0.0, double c = 0.0)
    {
        char buf[256];
        std::snprintf(buf, sizeof buf, f, a, b, c);
        return buf;
    }

    scenario laboratory() { return load_scenario(fs::path(THZLAB_DATA_DIR) / "laboratory.json"); }

    std::vector<position_result> postprocess(const scenario &s, std::size_t bi, corrected_band *keep = nullptr)
    {
        const auto raw = run_campaign(s, bi);
        const auto cb = correct_band(s, raw, direct_connection_record(s, bi));
        auto pos = process_positions(s, cb.records);
        if (keep)
            *keep = cb;
        return pos;
    }

    const mpc &strongest(const std::vector<mpc> &m)
    {
        return *std::max_element(m.begin(), m.end(), [](const mpc &a, const mpc &b)
                                 { return a.power_db < b.power_db; });
    }

    // ---- 1: drift round-trip
    outcome drift_round_trip()
    {
        scenario s = laboratory();
        s.rx_list.resize(2);
        const double bin_ns = 1e9 / s.bands.front().bandwidth_hz;
        double worst_ns = 0.0, slowest_s = 0.0;
        for (double rate : {10.0, 20.0, 30.0})
        {
            s.drift.rate_ns_per_hour = rate;
            for (std::size_t bi = 0; bi < s.bands.size(); ++bi)
            {
                const auto t0 = std::chrono::steady_clock::now();
                const auto pos = postprocess(s, bi);
                slowest_s = std::max(slowest_s, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                for (const auto &p : pos)
                {
                    if (p.mpcs.empty())
                        return {false, "no MPCs at position " + std::to_string(p.position_id)};
                    const double truth = los_delay(s.tx, s.rx(p.position_id));
                    worst_ns = std::max(worst_ns, std::abs(strongest(p.mpcs).delay_s - truth) * 1e9);
                }
            }
        }
        return {worst_ns <= bin_ns && slowest_s < 60.0,
                fmt("worst LoS delay error %.4f ns (limit %.3f ns), slowest campaign %.1f s", worst_ns, bin_ns, slowest_s)};
    }

    // ---- 2: interpolation endpoints
    outcome drift_endpoints()
    {
        const double a = 3.1e-9, b = 20e-9 / 3600.0;
        auto line = [&](double t)
        { return a + b * t; };
        std::vector<drift_sample> samples;
        for (double t : {600.0, 1790.0, 3010.0, 4200.0, 5400.0})
            samples.push_back({t, line(t)});
        const drift_model model(samples);

        double worst = 0.0;
        for (double t = 0.0; t <= 8000.0; t += 37.5)
            worst = std::max(worst, std::abs(correct_drift(t, model) - line(t)) / std::abs(line(t)));
        bool exact = true;
        for (const auto &p : samples)
            exact &= correct_drift(p.t_s, model) == p.drift_s;
        return {worst <= 1e-12 && exact,
                fmt("max relative deviation %.2e over interpolation and extrapolation; sample times reproduced exactly: ",
                    worst) +
                    (exact ? "yes" : "no")};
    }

    // ---- 3: two paths at one arrival direction
    std::size_t mpcs_for_separation(double separation_m, double phase_rad, std::uint64_t seed)
    {
        band_config band{"140", 140e9, 1.536e9, 2048};
        scan_grid scan{0.0, 350.0, 10.0, -20.0, 20.0, 10.0};
        link_antennas ant{{7.0, 30.0, -30.0}, {1.0, 0.0, 0.0}, {25.0, 8.0, -30.0}};

        std::vector<propagation_path> paths(2);
        const double base_m = 12.3;
        for (std::size_t i = 0; i < 2; ++i)
        {
            auto &p = paths[i];
            p.kind = i == 0 ? path_kind::los : path_kind::once_scattered;
            p.length_m = base_m + separation_m * static_cast<double>(i);
            p.delay_s = p.length_m / speed_of_light;
            p.aoa_az_deg = 120.0;
            p.aoa_el_deg = 0.0;
            p.gain_linear = std::polar(std::pow(10.0, -(80.0 + 2.0 * i) / 20.0), phase_rad * static_cast<double>(i));
        }
        std::mt19937_64 rng(seed);
        std::vector<cir_record> records;
        for (const auto &d : build_direction_grid(scan))
        {
            cir_record r;
            r.position_id = 1;
            r.band_label = band.label;
            r.az_deg = d.az_deg;
            r.el_deg = d.el_deg;
            r.delay_bin_s = band.delay_bin_s();
            r.samples = add_noise(synthesize_cir(paths, band, ant, d, 0.0), -170.0, rng);
            records.push_back(std::move(r));
        }
        return extract_mpcs(records, scan, {ant.tx, ant.rx}, processing_options{}).size();
    }

    outcome resolution()
    {
        const double bin_m = speed_of_light / 1.536e9;
        std::size_t wrong = 0, trials = 0;
        std::string seen;
        for (double phase : {0.0, 1.3, 2.9, 4.4})
        {
            const std::size_t wide = mpcs_for_separation(0.195 + bin_m, phase, 11 + trials);
            const std::size_t narrow = mpcs_for_separation(0.10, phase, 101 + trials);
            wrong += (wide != 2) + (narrow != 1);
            seen += " " + std::to_string(wide) + "/" + std::to_string(narrow);
            ++trials;
        }
        return {wrong == 0, fmt("separation %.4f m vs 0.10 m over 4 phase offsets, MPC counts (wide/narrow):", 0.195 + bin_m) + seen};
    }

    // ---- 4: band constants as reported in the summary
    outcome band_constants_reported()
    {
        const scenario s = laboratory();
        std::vector<ensemble_summary> e;
        for (const auto &b : s.bands)
            e.push_back({b.label, {}, {}, {}, 0});
        const auto j = nlohmann::json::parse(render_summary_json(e, s.bands));
        double worst = 0.0;
        for (const auto &b : j.at("bands"))
        {
            worst = std::max(worst, std::abs(b.at("delay_bin_ns").get<double>() / 0.651 - 1.0));
            worst = std::max(worst, std::abs(b.at("max_delay_ns").get<double>() / 1332.7 - 1.0));
            worst = std::max(worst, std::abs(b.at("max_path_length_m").get<double>() / 399.8 - 1.0));
        }
        const auto &b0 = j.at("bands").at(0);
        return {worst <= 1e-3, fmt("delay bin %.4f ns, max delay %.1f ns, max path %.1f m", b0.at("delay_bin_ns").get<double>(),
                                   b0.at("max_delay_ns").get<double>(), b0.at("max_path_length_m").get<double>()) +
                                   fmt(", worst relative deviation %.2e", worst)};
    }

    // ---- 5: scattering loss on the bundled scenario
    outcome scattering_recovery()
    {
        const scenario s = laboratory();
        for (const auto &p : s.objects)
        {
            const bool ok = p.mat == material::metal ? (p.scattering_loss_db >= 2.0 && p.scattering_loss_db <= 25.0)
                                                     : (p.scattering_loss_db >= 10.0 && p.scattering_loss_db <= 25.0);
            if (!ok)
                return {false, "panel " + p.id + " has a loss outside its material range"};
        }
        double worst = 0.0;
        std::size_t rows = 0;
        for (std::size_t bi = 0; bi < s.bands.size(); ++bi)
            for (const auto &p : postprocess(s, bi))
                for (const auto &r : scattering_rows(s, s.bands[bi], p))
                {
                    worst = std::max(worst, std::abs(r.loss_db - r.configured_loss_db));
                    ++rows;
                }
        return {rows > 0 && worst <= 0.5, fmt("%.0f once-scattering clusters, worst loss error %.3f dB", double(rows), worst)};
    }

    // ---- 6: close-in fit against a least-squares oracle
    outcome ci_recovery()
    {
        const double f = 140e9;
        bool ok = true;
        std::string detail;
        for (double n : {1.8, 2.0, 2.2})
        {
            std::mt19937_64 rng(static_cast<std::uint64_t>(n * 1000));
            std::uniform_real_distribution<double> logd(std::log10(1.5), std::log10(30.0));
            std::normal_distribution<double> shadow(0.0, 1.0);
            const double fspl1 = 20.0 * std::log10(4.0 * std::numbers::pi * f / speed_of_light);
            std::vector<distance_loss> pts;
            for (int i = 0; i < 100; ++i)
            {
                const double d = std::pow(10.0, logd(rng));
                pts.push_back({d, fspl1 + 10.0 * n * std::log10(d) + shadow(rng)});
            }
            // Oracle: minimise sum (y - n x)^2 with x = 10 log10 d, y = PL - FSPL(1 m)
            long double sxy = 0, sxx = 0;
            for (const auto &p : pts)
            {
                const long double x = 10.0L * std::log10((long double)p.distance_m);
                sxy += x * ((long double)p.pl_db - fspl1);
                sxx += x * x;
            }
            const long double n_hat = sxy / sxx;
            long double ss = 0;
            for (const auto &p : pts)
            {
                const long double r = (long double)p.pl_db - fspl1 - n_hat * 10.0L * std::log10((long double)p.distance_m);
                ss += r * r;
            }
            const double sigma_hat = (double)std::sqrt(ss / pts.size());

            const ci_fit_result fit = fit_ci(pts, f);
            const bool agree = std::abs(fit.ple - (double)n_hat) <= 1e-9 && std::abs(fit.sigma_sf_db - sigma_hat) <= 1e-9;
            ok &= agree && std::abs(fit.ple - n) <= 0.05 && std::abs(fit.sigma_sf_db - 1.0) <= 0.3;
            detail += fmt(" n=%.1f: fitted %.4f, sigma %.3f dB;", n, fit.ple, fit.sigma_sf_db) + (agree ? "" : " oracle mismatch;");
        }
        return {ok, detail.substr(1)};
    }

    // ---- 7: free space
    outcome free_space()
    {
        scenario s = laboratory();
        s.objects.clear();
        s.room = {20.0, 20.0, 4.0};
        s.tx.position = {1.0, 1.0, 1.6};
        s.rx_list.clear();
        for (int i = 0; i < 12; ++i)
        {
            // Tx direction from every Rx lies on the scan grid (el 0, az multiple of 10)
            const double d = 3.0 + i, a = 10.0 * (1 + i % 8);
            s.rx_list.push_back({i + 1, s.tx.position + unit_from_az_el(a, 0.0) * d});
        }
        validate(s);

        bool ok = true;
        double worst = 0.0;
        std::string detail;
        for (std::size_t bi = 0; bi < s.bands.size(); ++bi)
        {
            const band_config &band = s.bands[bi];
            corrected_band cb;
            const auto pos = postprocess(s, bi, &cb);
            std::vector<distance_loss> best;
            for (const auto &p : pos)
            {
                std::vector<cir_record> mine;
                for (const auto &r : cb.records)
                    if (r.position_id == p.position_id)
                        mine.push_back(r);
                const channel_stats st = characterize_position(s, band, mine, p);
                const double ref = fspl(st.distance_m, band.carrier_hz);
                worst = std::max({worst, std::abs(st.pl_best_db - ref), std::abs(st.pl_omni_db - ref)});
                best.push_back({st.distance_m, st.pl_best_db});
            }
            const double ple = fit_ci(best, band.carrier_hz).ple;
            ok &= std::abs(ple - 2.0) <= 0.02;
            detail += fmt(" %.0f GHz PLE %.4f;", band.carrier_hz / 1e9, ple);
        }
        ok &= worst <= 0.5;
        return {ok, fmt("worst |PL - FSPL| %.3f dB at 3-14 m;", worst) + detail};
    }

    // ---- 8: spreads against brute force
    double oracle_spread(const std::vector<weighted_value> &v, spread_domain dom)
    {
        long double p = 0;
        for (const auto &x : v)
            p += x.power;
        if (dom == spread_domain::delay)
        {
            long double m = 0, m2 = 0;
            for (const auto &x : v)
                m += x.power * (long double)x.value;
            m /= p;
            for (const auto &x : v)
                m2 += x.power * ((long double)x.value - m) * ((long double)x.value - m);
            return (double)std::sqrt(m2 / p);
        }
        long double c = 0, s = 0;
        for (const auto &x : v)
        {
            const long double a = (long double)x.value * std::numbers::pi_v<long double> / 180.0L;
            c += x.power * std::cos(a);
            s += x.power * std::sin(a);
        }
        const long double r = std::sqrt(c * c + s * s) / p;
        return (double)(std::sqrt(-2.0L * std::log(r)) * 180.0L / std::numbers::pi_v<long double>);
    }

    outcome spread_oracles()
    {
        std::mt19937_64 rng(8);
        std::uniform_int_distribution<int> count(2, 24);
        std::uniform_real_distribution<double> delay(0.0, 400e-9), az(0.0, 360.0), el(-60.0, 60.0), pw(1e-6, 1.0),
            shift(-1e-6, 1e-6), rot(-720.0, 720.0);
        double worst = 0.0;
        bool invariant = true;
        for (int trial = 0; trial < 1000; ++trial)
        {
            const spread_domain dom = trial % 3 == 0 ? spread_domain::delay : trial % 3 == 1 ? spread_domain::azimuth : spread_domain::elevation;
            std::vector<weighted_value> v(static_cast<std::size_t>(count(rng)));
            for (auto &x : v)
            {
                x.value = dom == spread_domain::delay ? delay(rng) : dom == spread_domain::azimuth ? az(rng) : el(rng);
                x.power = pw(rng);
            }
            const double got = rms_spread(v, dom), want = oracle_spread(v, dom);
            worst = std::max(worst, std::abs(got - want) / want);

            // Exact invariance on dyadic inputs: the shifted differences are then exact
            std::vector<weighted_value> q = v, moved = v;
            const double shift_by = dom == spread_domain::delay ? std::ldexp(std::round(std::ldexp(shift(rng), 40)), -40)
                                                                : std::round(rot(rng) * 4.0) / 4.0;
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                q[i].value = dom == spread_domain::delay ? std::ldexp(std::round(std::ldexp(v[i].value, 40)), -40)
                                                         : std::round(v[i].value * 1024.0) / 1024.0;
                moved[i].value = q[i].value + shift_by;
                if (dom == spread_domain::azimuth)
                    moved[i].value = std::fmod(moved[i].value + 720.0, 360.0);
            }
            invariant &= rms_spread(q, dom) == rms_spread(moved, dom);
        }
        return {worst <= 1e-9 && invariant,
                fmt("1000 random inputs, worst relative deviation %.2e; shift/rotation invariance exact: ", worst) +
                    (invariant ? "yes" : "no")};
    }

    // ---- 9: fixture means through the summary writer
    outcome fixture_round_trip()
    {
        std::ifstream in(fs::path(THZLAB_DATA_DIR) / "fixtures" / "campaign_means.json");
        if (!in)
            return {false, "fixture file missing"};
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        const auto fx = nlohmann::json::parse(text);

        const scenario s = laboratory();
        std::vector<ensemble_summary> ensemble;
        for (const auto &[band, means] : fx.at("bands").items())
        {
            ensemble_summary e;
            e.band = band;
            for (const auto &[key, v] : means.items())
            {
                const double m = v.get<double>();
                const fit_domain dom = key == "k_factor" ? fit_domain::decibel : fit_domain::linear;
                // Three samples spread around the mean; the report must print the mean itself
                e.items.push_back(make_characteristic(key, fx.at("units").at(key), dom, {m * 0.8, m, m * 1.2}));
            }
            ensemble.push_back(std::move(e));
        }
        const std::string summary = render_summary_json(ensemble, s.bands);
        const auto out = nlohmann::json::parse(summary);

        std::size_t checked = 0, matched = 0;
        for (const auto &b : out.at("bands"))
            for (const auto &[key, c] : b.at("characteristics").items())
            {
                ++checked;
                const std::string printed = c.at("mean").dump();
                const std::string expected = fx.at("bands").at(b.at("band").get<std::string>()).at(key).dump();
                matched += printed == expected;
            }
        // Verbatim also at the text level, e.g. "mean": 7.94
        bool textual = true;
        for (const char *lit : {"7.94", "7.24", "10.3", "11.3", "28.18", "26.92", "5.5", "3.98", "5.67", "3.44", "1.43", "1.22", "4.42",
                                "3.95", "5.38", "4.84"})
            textual &= summary.find(std::string("\"mean\": ") + lit + ",") != std::string::npos;
        return {checked == 16 && matched == 16 && textual,
                fmt("%.0f of %.0f fixture means printed verbatim", double(matched), double(checked))};
    }

    // ---- 10: determinism
    outcome determinism()
    {
        const fs::path root = fs::temp_directory_path() / ("thzlab_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(root);
        auto run = [&](const std::string &name, unsigned threads)
        {
            pipeline_config c;
            c.scenario_path = fs::path(THZLAB_DATA_DIR) / "laboratory.json";
            c.out_dir = root / name;
            c.threads = threads;
            c.svg = false;
            std::map<std::string, std::string> h;
            for (const auto &a : run_pipeline(c).artifacts)
                h[a.path] = a.sha256;
            return h;
        };
        const auto a = run("a", 4), b = run("b", 4), c = run("c", 1);
        fs::remove_all(root);

        std::size_t key = 0;
        for (const auto &[path, hash] : a)
            if (path.ends_with("cir.bin") || path.ends_with("mpcs.csv") || path.ends_with("stats.csv"))
                ++key;
        return {a == b && a == c && key == 6 && !a.empty(),
                fmt("%.0f artifacts compared across two 4-thread runs and one 1-thread run; identical: ", double(a.size())) +
                    (a == b && a == c ? "yes" : "no")};
    }
}

int main()
{
    set_warning_handler([](std::string_view) {});

    const std::vector<std::pair<const char *, std::function<outcome()>>> criteria = {
        {"drift round-trip", drift_round_trip},
        {"drift interpolation endpoints", drift_endpoints},
        {"delay resolution", resolution},
        {"band constants", band_constants_reported},
        {"scattering-loss recovery", scattering_recovery},
        {"close-in fit recovery", ci_recovery},
        {"free-space sanity", free_space},
        {"spread oracles", spread_oracles},
        {"fixture round-trip", fixture_round_trip},
        {"determinism", determinism},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        outcome o;
        try
        {
            o = criteria[i].second();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
