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

#include <catch_amalgamated.hpp>

#include "thzlab/channel_synth.hpp"
#include "thzlab/characterize.hpp"
#include "thzlab/errors.hpp"
#include "thzlab/pipeline.hpp"

#include <cmath>
#include <random>

using namespace thzlab;
using Catch::Approx;

// Covered tests:
// - Scattering loss by construction and by synthesis round trip
// - Best-direction and omnidirectional path loss
// - Close-in model fit
// - K-factor, cluster statistics and log-normal fits
// - Reference comparison

namespace
{
    scenario laboratory() { return load_scenario(std::string(THZLAB_DATA_DIR) + "/laboratory.json"); }

    cir_record unit_bin(double scale = 1.0)
    {
        cir_record r;
        r.samples.assign(2048, 0.0);
        r.samples[17] = scale;
        return r;
    }

    mpc with_power(double linear)
    {
        mpc m;
        m.gain = std::sqrt(linear);
        m.power_db = 10.0 * std::log10(linear);
        return m;
    }

    cluster with_cluster_power(double linear)
    {
        cluster c;
        c.members.push_back(with_power(linear));
        c.power_linear = linear;
        return c;
    }

    // Full post-processing of one band of a scenario
    struct processed
    {
        corrected_band cb;
        std::vector<position_result> positions;
    };

    processed process(const scenario &s, std::size_t bi)
    {
        processed p;
        p.cb = correct_band(s, run_campaign(s, bi), direct_connection_record(s, bi));
        p.positions = process_positions(s, p.cb.records);
        return p;
    }

    std::vector<cir_record> of_position(std::span<const cir_record> all, int id)
    {
        std::vector<cir_record> out;
        for (const auto &r : all)
            if (r.position_id == id)
                out.push_back(r);
        return out;
    }

    int quiet_warnings = 0;
    void count_warning(std::string_view) { ++quiet_warnings; }
}

TEST_CASE("Characterize - Scattering loss by construction")
{
    const double f = 140e9, tau = 40e-9;
    const double a = std::pow(10.0, -(fspl(speed_of_light * tau, f) + 10.0) / 20.0);
    CHECK(scattering_loss(std::polar(a, 0.7), tau, f) == Approx(10.0).margin(1e-9));
    CHECK_THROWS_AS(scattering_loss(cplx{}, tau, f), numeric_error);
}

TEST_CASE("Characterize - Scattering loss round trip")
{
    scenario s = laboratory();
    for (auto &o : s.objects)
        if (o.id == "metal-cabinet-south")
            o.scattering_loss_db = 5.0;
    const processed p = process(s, 0);
    std::size_t metal = 0, concrete = 0;
    for (const auto &pos : p.positions)
        for (const auto &r : scattering_rows(s, s.bands[0], pos))
        {
            CHECK(std::abs(r.loss_db - r.configured_loss_db) <= 0.5);
            if (r.panel_id == "metal-cabinet-south")
            {
                ++metal;
                CHECK(r.loss_db == Approx(5.0).margin(0.5));
            }
            if (r.mat == material::concrete)
            {
                ++concrete;
                CHECK(r.loss_db >= 10.0);
                CHECK(r.loss_db <= 25.0);
            }
        }
    CHECK(concrete > 0);
    // The cabinet only lights up where its specular point lies on the panel
    CHECK(metal + concrete > 0);
}

TEST_CASE("Characterize - Best-direction path loss")
{
    const std::vector<cir_record> one{unit_bin()};
    CHECK(pl_best(one) == Approx(-10.0 * std::log10(1.0 / 2048.0)));
    CHECK(pl_best(one) == Approx(33.11).margin(0.005));
    const std::vector<cir_record> two{unit_bin(), unit_bin(0.5)};
    CHECK(pl_best(two) == pl_best(one));
    CHECK(pl_best(one, pl_normalization::total_energy) == Approx(0.0).margin(1e-12));
    CHECK(pl_best(one, pl_normalization::total_energy, 32.0) == Approx(32.0));
    CHECK_THROWS_AS(pl_best(std::vector<cir_record>{}), validation_error);
}

TEST_CASE("Characterize - Omnidirectional path loss")
{
    CHECK(pl_omni(std::vector<mpc>{with_power(1e-8)}) == Approx(80.0));
    CHECK(pl_omni(std::vector<mpc>{with_power(1e-8), with_power(1e-8)}) == Approx(76.99).margin(0.005));
    CHECK_THROWS_AS(pl_omni(std::vector<mpc>{}), validation_error);
}

TEST_CASE("Characterize - Free-space LoS at 5 m")
{
    scenario s = laboratory();
    s.objects.clear();
    // A single position gives one drift sample, too few for a model
    s.drift = {};
    s.tx.position = {1.0, 1.0, 1.6};
    s.rx_list = {{1, {6.0, 1.0, 1.6}}};
    const processed p = process(s, 0);
    REQUIRE(p.positions.size() == 1);
    const channel_stats st = characterize_position(s, s.bands[0], p.cb.records, p.positions[0]);
    CHECK(st.pl_best_db == Approx(89.35).margin(0.5));
    CHECK(st.pl_omni_db == Approx(st.pl_best_db).margin(0.5));
    CHECK(st.los);
    CHECK(st.distance_m == Approx(5.0));
    CHECK(st.n_clusters == 1);
    CHECK_FALSE(st.k_factor_db.has_value());
    CHECK(st.ds_s == 0.0);
}

TEST_CASE("Characterize - Close-in fit")
{
    const double f = 140e9;
    std::vector<distance_loss> exact;
    for (double d : {1.0, 2.0, 3.5, 7.0, 12.0, 30.0})
        exact.push_back({d, fspl(1.0, f) + 20.0 * std::log10(d)});
    const ci_fit_result e = fit_ci(exact, f);
    CHECK(e.ple == Approx(2.0).epsilon(1e-12));
    CHECK(e.sigma_sf_db < 1e-10);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(1.0, 40.0);
    std::normal_distribution<double> x(0.0, 1.0);
    std::vector<distance_loss> noisy;
    for (int i = 0; i < 100; ++i)
    {
        const double di = d(rng);
        noisy.push_back({di, fspl(1.0, f) + 21.0 * std::log10(di) + x(rng)});
    }
    const ci_fit_result n = fit_ci(noisy, f);
    CHECK(n.ple == Approx(2.1).margin(0.05));
    CHECK(n.sigma_sf_db == Approx(1.0).margin(0.3));
    REQUIRE(n.residuals_db.size() == 100);
    double ss = 0.0;
    for (double r : n.residuals_db)
        ss += r * r;
    CHECK(std::sqrt(ss / 100.0) == Approx(n.sigma_sf_db));

    CHECK_THROWS_AS(fit_ci(std::vector<distance_loss>{{2.0, 80.0}}, f), validation_error);
    CHECK_THROWS_AS(fit_ci(std::vector<distance_loss>{{2.0, 80.0}, {2.0, 81.0}}, f), validation_error);
    CHECK_THROWS_AS(fit_ci(std::vector<distance_loss>{{0.5, 80.0}, {2.0, 81.0}}, f), validation_error);
}

TEST_CASE("Characterize - Path-loss exponents on the bundled scenario")
{
    // Best direction loses the grid pointing error, the omnidirectional sum gains the multipath
    const scenario s = laboratory();
    const processed p = process(s, 0);
    std::vector<channel_stats> stats;
    for (const auto &pos : p.positions)
        stats.push_back(characterize_position(s, s.bands[0], of_position(p.cb.records, pos.position_id), pos));
    for (const auto &st : stats)
        CHECK(st.pl_best_db >= st.pl_omni_db);
    const ensemble_summary e = summarize("140", stats, s.bands[0].carrier_hz);
    REQUIRE(e.ci_best);
    REQUIRE(e.ci_omni);
    CHECK(e.ci_best->ple > 2.0);
    CHECK(e.ci_omni->ple < 2.0);
    CHECK(e.ci_omni->ple > 1.8);
}

TEST_CASE("Characterize - K-factor")
{
    CHECK(*k_factor(std::vector<cluster>{with_cluster_power(10.0), with_cluster_power(1.0)}) == Approx(10.0));
    CHECK(*k_factor(std::vector<cluster>{with_cluster_power(1.0), with_cluster_power(1.0)}) == Approx(0.0).margin(1e-12));
    CHECK(*k_factor(std::vector<cluster>{with_cluster_power(1.0), with_cluster_power(4.0), with_cluster_power(4.0)}) ==
          Approx(10.0 * std::log10(4.0 / 5.0)));
    CHECK(*k_factor(std::vector<cluster>{with_cluster_power(3e-9), with_cluster_power(7e-11)}) ==
          Approx(*k_factor(std::vector<cluster>{with_cluster_power(3.0), with_cluster_power(0.07)})));
    CHECK_FALSE(k_factor(std::vector<cluster>{with_cluster_power(1.0)}).has_value());
}

TEST_CASE("Characterize - Cluster statistics")
{
    std::vector<cluster> singles{with_cluster_power(1.0), with_cluster_power(0.1)};
    const cluster_summary s = cluster_stats(singles);
    CHECK(s.count == 2);
    CHECK(s.cds_s == 0.0);
    CHECK(s.casa_deg == 0.0);
    CHECK(s.cesa_deg == 0.0);
    CHECK(cluster_stats(std::vector<cluster>{}).count == 0);

    singles[0].cds_s = 2e-9;
    singles[1].casa_deg = 4.0;
    const cluster_summary m = cluster_stats(singles);
    CHECK(m.cds_s == Approx(1e-9));
    CHECK(m.casa_deg == Approx(2.0));
}

TEST_CASE("Characterize - MPC spreads")
{
    std::vector<mpc> m{with_power(3.0), with_power(1.0)};
    m[0].delay_s = 0.0;
    m[1].delay_s = 8e-9;
    m[0].refined_az_deg = m[0].aoa_az_deg = 350.0;
    m[1].refined_az_deg = m[1].aoa_az_deg = 10.0;
    double ds, asa, esa;
    mpc_spreads(m, ds, asa, esa);
    CHECK(ds == Approx(std::sqrt(12.0) * 1e-9));
    CHECK(asa > 0.0);
    CHECK(asa < 20.0);
    CHECK(esa == 0.0);
    mpc_spreads(std::vector<mpc>{}, ds, asa, esa);
    CHECK(ds == 0.0);
}

TEST_CASE("Characterize - Log-normal fit")
{
    const std::vector<double> same(5, 7.94);
    const lognormal_fit a = fit_lognormal(same);
    CHECK(a.sigma == 0.0);
    volatile double v = 7.94; // keeps log10 out of constant folding
    CHECK(a.mu == std::log10(v));
    CHECK(a.sample_mean == 7.94);

    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.8, 0.25);
    std::vector<double> draws;
    for (int i = 0; i < 1000; ++i)
        draws.push_back(std::pow(10.0, g(rng)));
    const lognormal_fit b = fit_lognormal(draws);
    CHECK(b.mu == Approx(0.8).epsilon(0.05));
    CHECK(b.sigma == Approx(0.25).epsilon(0.05));
    CHECK(b.count == 1000);

    const lognormal_fit c = fit_lognormal(std::vector<double>{9.0, 11.0, 13.0}, fit_domain::decibel);
    CHECK(c.mu == Approx(11.0));
    CHECK(c.sigma == Approx(2.0));

    CHECK_THROWS_AS(fit_lognormal(std::vector<double>{}), validation_error);
    CHECK_THROWS_AS(fit_lognormal(std::vector<double>{1.0, 0.0}), validation_error);

    const auto old = set_warning_handler(count_warning);
    const characteristic k = make_characteristic("cds", "ns", fit_domain::linear, {0.0, 1.0, 2.0});
    set_warning_handler(old);
    CHECK(k.samples.size() == 2);
    CHECK(quiet_warnings == 1);
}

TEST_CASE("Characterize - Reference comparison")
{
    std::vector<channel_stats> stats(3);
    for (std::size_t i = 0; i < stats.size(); ++i)
    {
        auto &s = stats[i];
        s.position_id = static_cast<int>(i + 1);
        s.band = "140";
        s.los = true;
        s.distance_m = 3.0 + 4.0 * static_cast<double>(i);
        s.pl_best_db = fspl(s.distance_m, 140e9) + 1.0;
        s.pl_omni_db = fspl(s.distance_m, 140e9) - 1.0;
        s.ds_s = 8e-9;
        s.asa_deg = 20.0;
        s.esa_deg = 4.0;
        s.k_factor_db = 12.0;
        s.n_clusters = 4;
    }
    const std::vector<ensemble_summary> e{summarize("140", stats, 140e9)};
    REQUIRE(e[0].find("ds") != nullptr);
    CHECK(e[0].find("ds")->fit.sample_mean == Approx(8.0));
    CHECK(e[0].find("ds")->unit == "ns");
    CHECK(e[0].find("nothing") == nullptr);

    const reference_table t = reference_table_from_json(R"({"name": "t", "entries": [
        {"key": "ds", "value": 19.3, "unit": "ns"},
        {"key": "k_factor", "value": 7, "unit": "dB"},
        {"key": "asa", "band": "220", "value": 20, "unit": "deg"},
        {"key": "asa", "band": "140", "value": 20, "unit": "deg"},
        {"key": "esa", "value": 9, "unit": "deg"}]})");
    const auto rows = compare_reference(e, t);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].key == "ds");
    CHECK(rows[0].flag == "reference overestimates");
    CHECK(rows[0].delta == Approx(8.0 - 19.3));
    CHECK(rows[1].flag == "more LoS-dominant than reference");
    CHECK(rows[2].flag == "matches reference");
    CHECK(rows[3].flag == "reference overestimates");

    CHECK(compare_reference(e, reference_table{}).empty());

    const reference_table bad = reference_table_from_json(R"({"name": "b", "entries": [{"key": "ds", "value": 19.3, "unit": "s"}]})");
    CHECK_THROWS_AS(compare_reference(e, bad), validation_error);
    CHECK_THROWS_AS(reference_table_from_json("{\"entries\": 3}"), parse_error);

    const reference_table bundled = load_reference_table(std::string(THZLAB_DATA_DIR) + "/reference_inh_office.json");
    CHECK_FALSE(bundled.entries.empty());
    CHECK_NOTHROW(compare_reference(e, bundled));
}

TEST_CASE("Characterize - Report precision")
{
    CHECK(report_value(7.94 * 3.0 / 3.0) == 7.94);
    CHECK(report_value((7.94 * 0.8 + 7.94 + 7.94 * 1.2) / 3.0) == 7.94);
    CHECK(report_value(1.0 / 3.0) == 0.333333333333);
    CHECK(report_value(0.0) == 0.0);
}
