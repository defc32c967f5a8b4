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

#include "thzlab/characterize.hpp"
#include "thzlab/channel_synth.hpp"
#include "thzlab/errors.hpp"
#include "thzlab/spread.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

double thzlab::scattering_loss(cplx alpha, double delay_s, double frequency_hz)
{
    const double a = std::abs(alpha);
    if (!(a > 0.0) || !std::isfinite(a))
        throw numeric_error("scattering_loss: zero or non-finite path gain");
    return -20.0 * std::log10(a) - fspl(speed_of_light * delay_s, frequency_hz);
}

double thzlab::scattering_loss(const once_scattering_match &match, double frequency_hz)
{
    return scattering_loss(match.channel_gain, match.delay_s, frequency_hz);
}

double thzlab::pl_best(std::span<const cir_record> records, pl_normalization norm, double antenna_gain_db)
{
    if (records.empty())
        throw validation_error("pl_best: no records");
    double best = 0.0;
    for (const auto &r : records)
    {
        if (r.samples.empty())
            throw validation_error("pl_best: empty record");
        double p = 0.0;
        for (const auto &v : r.samples)
            p += std::norm(v);
        if (norm == pl_normalization::mean_over_bins)
            p /= static_cast<double>(r.samples.size());
        best = std::max(best, p);
    }
    if (!(best > 0.0))
        throw numeric_error("pl_best: all records carry zero power");
    return -10.0 * std::log10(best) + antenna_gain_db;
}

double thzlab::pl_omni(std::span<const mpc> mpcs)
{
    if (mpcs.empty())
        throw validation_error("pl_omni: no multipath components");
    double p = 0.0;
    for (const auto &m : mpcs)
        p += std::norm(m.gain);
    if (!(p > 0.0))
        throw numeric_error("pl_omni: zero total power");
    return -10.0 * std::log10(p);
}

thzlab::ci_fit_result thzlab::fit_ci(std::span<const distance_loss> points, double frequency_hz, double d0_m)
{
    if (!(d0_m > 0.0))
        throw validation_error("fit_ci: reference distance must be positive");
    if (points.size() < 2)
        throw validation_error("fit_ci: at least two points are required");
    bool distinct = false;
    for (const auto &p : points)
    {
        if (!(p.distance_m >= d0_m))
            throw validation_error("fit_ci: distance below the reference distance");
        distinct |= p.distance_m != points.front().distance_m;
    }
    if (!distinct)
        throw validation_error("fit_ci: all distances are equal");

    // Slope through the origin of (10 log10(d/d0), PL - FSPL(d0))
    const double pl0 = fspl(d0_m, frequency_hz);
    double sxx = 0.0, sxy = 0.0;
    for (const auto &p : points)
    {
        const double x = 10.0 * std::log10(p.distance_m / d0_m);
        sxx += x * x;
        sxy += x * (p.pl_db - pl0);
    }
    if (!(sxx > 0.0))
        throw validation_error("fit_ci: every point sits at the reference distance");

    ci_fit_result out;
    out.d0_m = d0_m;
    out.ple = sxy / sxx;
    double ss = 0.0;
    for (const auto &p : points)
    {
        const double r = p.pl_db - pl0 - out.ple * 10.0 * std::log10(p.distance_m / d0_m);
        out.residuals_db.push_back(r);
        ss += r * r;
    }
    out.sigma_sf_db = std::sqrt(ss / static_cast<double>(points.size()));
    return out;
}

std::optional<double> thzlab::k_factor(std::span<const cluster> clusters)
{
    if (clusters.size() < 2)
        return std::nullopt;
    std::size_t k = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < clusters.size(); ++i)
    {
        total += clusters[i].power_linear;
        if (clusters[i].power_linear > clusters[k].power_linear)
            k = i;
    }
    const double rest = total - clusters[k].power_linear;
    if (!(rest > 0.0))
        return std::nullopt;
    return 10.0 * std::log10(clusters[k].power_linear / rest);
}

thzlab::cluster_summary thzlab::cluster_stats(std::span<const cluster> clusters)
{
    cluster_summary s;
    s.count = clusters.size();
    if (clusters.empty())
        return s;
    for (const auto &c : clusters)
    {
        s.cds_s += c.cds_s;
        s.casa_deg += c.casa_deg;
        s.cesa_deg += c.cesa_deg;
    }
    const double n = static_cast<double>(clusters.size());
    s.cds_s /= n;
    s.casa_deg /= n;
    s.cesa_deg /= n;
    return s;
}

void thzlab::mpc_spreads(std::span<const mpc> mpcs, double &ds_s, double &asa_deg, double &esa_deg)
{
    ds_s = asa_deg = esa_deg = 0.0;
    if (mpcs.empty())
        return;
    std::vector<weighted_value> d, az, el;
    for (const auto &m : mpcs)
    {
        const double p = std::norm(m.gain);
        d.push_back({m.delay_s, p});
        az.push_back({m.aoa_az_deg, p});
        el.push_back({m.aoa_el_deg, p});
    }
    ds_s = rms_spread(d, spread_domain::delay);
    asa_deg = rms_spread(az, spread_domain::azimuth);
    esa_deg = rms_spread(el, spread_domain::elevation);
}

thzlab::lognormal_fit thzlab::fit_lognormal(std::span<const double> samples, fit_domain domain)
{
    if (samples.empty())
        throw validation_error("fit_lognormal: no samples");
    lognormal_fit f;
    f.domain = domain;
    f.count = samples.size();

    std::vector<double> x(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        if (!std::isfinite(samples[i]))
            throw numeric_error("fit_lognormal: non-finite sample");
        if (domain == fit_domain::linear)
        {
            if (!(samples[i] > 0.0))
                throw validation_error("fit_lognormal: non-positive sample in the linear domain");
            x[i] = std::log10(samples[i]);
        }
        else
            x[i] = samples[i];
    }

    // Means about the first sample, so identical samples reproduce it exactly
    const double n = static_cast<double>(x.size());
    auto shifted_mean = [&](std::span<const double> v)
    {
        double acc = 0.0;
        for (double s : v)
            acc += s - v.front();
        return v.front() + acc / n;
    };
    f.mu = shifted_mean(x);
    f.sample_mean = shifted_mean(samples);
    if (x.size() > 1)
    {
        double ss = 0.0;
        for (double s : x)
            ss += (s - f.mu) * (s - f.mu);
        f.sigma = std::sqrt(ss / (n - 1.0));
    }
    return f;
}

double thzlab::report_value(double v)
{
    if (!std::isfinite(v) || v == 0.0)
        return v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

const thzlab::characteristic *thzlab::ensemble_summary::find(std::string_view key) const
{
    for (const auto &c : items)
        if (c.key == key)
            return &c;
    return nullptr;
}

thzlab::characteristic thzlab::make_characteristic(std::string key, std::string unit, fit_domain domain, std::vector<double> samples)
{
    characteristic c{std::move(key), std::move(unit), domain, {}, {}};
    std::size_t dropped = 0;
    for (double v : samples)
    {
        if (!std::isfinite(v) || (domain == fit_domain::linear && !(v > 0.0)))
            ++dropped;
        else
            c.samples.push_back(v);
    }
    if (dropped)
        warn(c.key + ": " + std::to_string(dropped) + " sample(s) excluded from the log-normal fit");
    if (!c.samples.empty())
        c.fit = fit_lognormal(c.samples, domain);
    return c;
}

thzlab::ensemble_summary thzlab::summarize(std::string band, std::span<const channel_stats> stats, double frequency_hz)
{
    ensemble_summary e;
    e.band = std::move(band);

    std::vector<double> ds, asa, esa, k, nc, cds, casa, cesa, plb, plo;
    std::vector<distance_loss> best, omni;
    for (const auto &s : stats)
    {
        ds.push_back(s.ds_s * 1e9);
        asa.push_back(s.asa_deg);
        esa.push_back(s.esa_deg);
        if (s.k_factor_db)
            k.push_back(*s.k_factor_db);
        else
            ++e.k_factor_excluded;
        nc.push_back(static_cast<double>(s.n_clusters));
        cds.push_back(s.cds_s * 1e9);
        casa.push_back(s.casa_deg);
        cesa.push_back(s.cesa_deg);
        plb.push_back(s.pl_best_db);
        plo.push_back(s.pl_omni_db);
        // The close-in model describes LoS links; blocked positions would mix in the obstruction loss
        if (s.los && s.distance_m >= 1.0)
        {
            best.push_back({s.distance_m, s.pl_best_db});
            omni.push_back({s.distance_m, s.pl_omni_db});
        }
    }

    e.items.push_back(make_characteristic("ds", "ns", fit_domain::linear, ds));
    e.items.push_back(make_characteristic("asa", "deg", fit_domain::linear, asa));
    e.items.push_back(make_characteristic("esa", "deg", fit_domain::linear, esa));
    e.items.push_back(make_characteristic("k_factor", "dB", fit_domain::decibel, k));
    e.items.push_back(make_characteristic("n_clusters", "count", fit_domain::linear, nc));
    e.items.push_back(make_characteristic("cds", "ns", fit_domain::linear, cds));
    e.items.push_back(make_characteristic("casa", "deg", fit_domain::linear, casa));
    e.items.push_back(make_characteristic("cesa", "deg", fit_domain::linear, cesa));
    e.items.push_back(make_characteristic("pl_best", "dB", fit_domain::decibel, plb));
    e.items.push_back(make_characteristic("pl_omni", "dB", fit_domain::decibel, plo));

    auto try_fit = [&](std::span<const distance_loss> pts) -> std::optional<ci_fit_result>
    {
        try
        {
            return fit_ci(pts, frequency_hz);
        }
        catch (const validation_error &err)
        {
            warn(std::string("close-in fit skipped: ") + err.what());
            return std::nullopt;
        }
    };
    e.ci_best = try_fit(best);
    e.ci_omni = try_fit(omni);
    return e;
}

thzlab::reference_table thzlab::reference_table_from_json(std::string_view text)
{
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw parse_error(std::string("reference table: ") + e.what());
    }
    reference_table t;
    try
    {
        t.name = j.value("name", std::string{});
        for (const auto &e : j.at("entries"))
        {
            reference_entry r;
            r.key = e.at("key").get<std::string>();
            r.band = e.value("band", std::string{});
            r.value = e.at("value").get<double>();
            r.unit = e.at("unit").get<std::string>();
            t.entries.push_back(std::move(r));
        }
    }
    catch (const nlohmann::json::exception &e)
    {
        throw parse_error(std::string("reference table: ") + e.what());
    }
    return t;
}

thzlab::reference_table thzlab::load_reference_table(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw missing_input_error("cannot open reference table " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return reference_table_from_json(ss.str());
}

std::vector<thzlab::comparison_row> thzlab::compare_reference(std::span<const ensemble_summary> ensemble, const reference_table &reference)
{
    std::vector<comparison_row> rows;
    for (const auto &e : ensemble)
        for (const auto &ref : reference.entries)
        {
            if (!ref.band.empty() && ref.band != e.band)
                continue;

            double measured = 0.0;
            std::string unit;
            if (ref.key == "ple" || ref.key == "sigma_sf")
            {
                if (!e.ci_best)
                    continue;
                measured = ref.key == "ple" ? e.ci_best->ple : e.ci_best->sigma_sf_db;
                unit = ref.key == "ple" ? "1" : "dB";
            }
            else if (const characteristic *c = e.find(ref.key))
            {
                if (c->samples.empty())
                    continue;
                measured = c->fit.sample_mean;
                unit = c->unit;
            }
            else
                continue;

            if (unit != ref.unit)
                throw validation_error("compare_reference: " + ref.key + " is in " + unit + " but the reference uses " + ref.unit);

            comparison_row r{e.band, ref.key, unit, measured, ref.value, measured - ref.value, {}};
            if (r.delta == 0.0)
                r.flag = "matches reference";
            else if (ref.key == "k_factor")
                r.flag = r.delta > 0.0 ? "more LoS-dominant than reference" : "less LoS-dominant than reference";
            else
                r.flag = r.delta < 0.0 ? "reference overestimates" : "reference underestimates";
            rows.push_back(std::move(r));
        }
    return rows;
}
