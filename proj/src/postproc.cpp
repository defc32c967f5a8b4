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

#include "thzlab/postproc.hpp"
#include "thzlab/bandlimited.hpp"
#include "thzlab/channel_synth.hpp"
#include "thzlab/errors.hpp"
#include "thzlab/spread.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

// ---------------------------------------------------------------- calibration

thzlab::cir_record thzlab::calibrate(const cir_record &cir, std::span<const cplx> system_response, double regularization)
{
    if (system_response.size() != cir.samples.size())
        throw validation_error("calibrate: system response length differs from the record length");

    cvec X = fft(cir.samples);
    const cvec S = fft(system_response);
    double max_p = 0.0, min_p = INFINITY;
    for (std::size_t m = 0; m < S.size(); ++m)
    {
        if (S.size() % 2 == 0 && 2 * m == S.size())
            continue; // Nyquist bin is outside the modelled band
        max_p = std::max(max_p, std::norm(S[m]));
        min_p = std::min(min_p, std::norm(S[m]));
    }
    if (!(max_p > 0.0))
        throw numeric_error("calibrate: system response is identically zero");
    if (min_p < 1e-6 * max_p)
        warn("calibrate: system response has near-nulls in the band; using regularised division");

    const double eps = regularization * max_p;
    for (std::size_t m = 0; m < X.size(); ++m)
        X[m] = X[m] * std::conj(S[m]) / (std::norm(S[m]) + eps);

    cir_record out = cir;
    out.samples = ifft(X);
    return out;
}

// ---------------------------------------------------------------- drift

bool thzlab::has_los(const scenario &s, int rx_id)
{
    const vec3 &rx = s.rx(rx_id).position;
    return std::none_of(s.objects.begin(), s.objects.end(), [&](const scatterer_panel &p)
                        { return p.blocks(s.tx.position, rx); });
}

std::vector<thzlab::cir_record> thzlab::select_reference_records(std::span<const cir_record> records, const scenario &s)
{
    const auto grid = build_direction_grid(s.scan);
    std::map<int, std::size_t> reference_dir;
    for (const auto &rx : s.rx_list)
        if (has_los(s, rx.position_id))
            reference_dir[rx.position_id] = s.scan.nearest(normalized(s.tx.position - rx.position));

    std::vector<cir_record> out;
    for (const auto &r : records)
    {
        auto it = reference_dir.find(r.position_id);
        if (it == reference_dir.end())
            continue;
        const direction &d = grid[it->second];
        if (std::abs(wrap_deg(r.az_deg - d.az_deg)) < 1e-6 && std::abs(r.el_deg - d.el_deg) < 1e-6)
            out.push_back(r);
    }
    return out;
}

double thzlab::estimate_noise_floor_db(std::span<const cplx> cir)
{
    if (cir.empty())
        return -INFINITY;
    std::vector<double> p(cir.size());
    std::transform(cir.begin(), cir.end(), p.begin(), [](const cplx &v)
                   { return std::norm(v); });
    // Median of the lower half is the 25th percentile; for exponentially distributed
    // noise power that quantile sits at ln(4/3) times the mean.
    auto q = p.begin() + static_cast<std::ptrdiff_t>(p.size() / 4);
    std::nth_element(p.begin(), q, p.end());
    const double mean_noise = *q / std::log(4.0 / 3.0);
    return 10.0 * std::log10(std::max(mean_noise, 1e-300));
}

std::vector<thzlab::drift_sample> thzlab::estimate_drift_samples(std::span<const cir_record> reference_records, const scenario &s)
{
    std::vector<drift_sample> out;
    for (const auto &r : reference_records)
    {
        const auto &x = r.samples;
        if (x.empty())
            continue;
        std::size_t k = 0;
        for (std::size_t i = 1; i < x.size(); ++i)
            if (std::norm(x[i]) > std::norm(x[k]))
                k = i;
        const double threshold_db = estimate_noise_floor_db(x) + s.processing.detection_margin_db;
        if (10.0 * std::log10(std::norm(x[k])) < threshold_db)
        {
            warn("estimate_drift_samples: no peak above the noise floor at position " + std::to_string(r.position_id) +
                 ", t = " + std::to_string(r.timestamp_s) + " s; record skipped");
            continue;
        }
        const peak_estimate est = refine_peak(x, k);
        const double span_s = static_cast<double>(x.size()) * r.delay_bin_s;
        double drift = est.delay_bins * r.delay_bin_s - los_delay(s.tx, s.rx(r.position_id));
        drift = std::remainder(drift, span_s); // circular delay axis
        out.push_back({r.timestamp_s, drift});
    }
    std::sort(out.begin(), out.end(), [](const drift_sample &a, const drift_sample &b)
              { return a.t_s < b.t_s; });
    return out;
}

thzlab::drift_model::drift_model(std::vector<drift_sample> samples) : samples_(std::move(samples))
{
    std::sort(samples_.begin(), samples_.end(), [](const drift_sample &a, const drift_sample &b)
              { return a.t_s < b.t_s; });
    if (samples_.size() < 2)
        throw validation_error("drift_model: at least two drift samples are required");
    if (!(samples_.back().t_s > samples_.front().t_s))
        throw validation_error("drift_model: drift samples must span more than one time instant");

    // Ordinary least squares about the sample means
    const double n = static_cast<double>(samples_.size());
    double mt = 0.0, md = 0.0;
    for (const auto &p : samples_)
    {
        mt += p.t_s;
        md += p.drift_s;
    }
    mt /= n;
    md /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto &p : samples_)
    {
        sxx += (p.t_s - mt) * (p.t_s - mt);
        sxy += (p.t_s - mt) * (p.drift_s - md);
    }
    slope_ = sxy / sxx;
    intercept_ = md - slope_ * mt;
}

double thzlab::correct_drift(double t, const drift_model &model)
{
    const auto &s = model.samples();
    if (t < s.front().t_s || t > s.back().t_s)
        return model.slope() * t + model.intercept();
    auto hi = std::upper_bound(s.begin(), s.end(), t, [](double v, const drift_sample &p)
                               { return v < p.t_s; });
    if (hi == s.end())
        return s.back().drift_s;
    const auto lo = std::prev(hi);
    // Interpolant anchored at the left sample, so t = t_i returns that sample exactly
    return lo->drift_s + (t - lo->t_s) * (hi->drift_s - lo->drift_s) / (hi->t_s - lo->t_s);
}

std::vector<thzlab::cir_record> thzlab::apply_drift_correction(std::span<const cir_record> records, const drift_model &model)
{
    std::vector<cir_record> out;
    out.reserve(records.size());
    for (const auto &r : records)
    {
        cir_record c = r;
        c.samples = fractional_shift(r.samples, -correct_drift(r.timestamp_s, model) / r.delay_bin_s);
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------- detection

namespace
{
    using thzlab::cplx;
    using thzlab::cvec;

    struct component
    {
        double tau = 0.0; // bins
        cplx g;
        bool reported = true;
    };

    // Derivative of the periodic kernel with respect to its argument
    double dirichlet_slope(double x, std::size_t K)
    {
        const double Kd = static_cast<double>(K);
        const double n = K % 2 == 1 ? Kd : Kd - 1.0;
        const double a = std::numbers::pi * n / Kd, b = std::numbers::pi / Kd;
        x = std::remainder(x, Kd);
        if (std::abs(x) < 1e-6)
            return -(n / Kd) * (a * a - b * b) * x / 3.0;
        const double sb = std::sin(b * x);
        return (a * std::cos(a * x) * sb - b * std::sin(a * x) * std::cos(b * x)) / (Kd * sb * sb);
    }

    // Joint least-squares fit (Levenberg-Marquardt) of a group of nearby components against
    // the signal with every other component removed. Delays stay within one bin of the
    // starting point; the fit is discarded if it does not lower the residual.
    void joint_fit(thzlab::bandlimited_signal &sig, std::vector<component> &comps, const std::vector<std::size_t> &group)
    {
        const std::size_t Kfull = sig.size();
        const std::size_t n = group.size();
        for (std::size_t i : group)
            sig.add(comps[i].g, comps[i].tau);
        const cvec &full = sig.samples();

        // The fit runs over a window around the group; the model is exact on any subset
        // of bins, so this only costs a little noise averaging
        constexpr long long half_window = 24;
        double lo = comps[group.front()].tau, hi = lo;
        for (std::size_t i : group)
        {
            const double t = comps[group.front()].tau + std::remainder(comps[i].tau - comps[group.front()].tau, static_cast<double>(Kfull));
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        const long long first = static_cast<long long>(std::floor(lo)) - half_window;
        const std::size_t K = std::min<std::size_t>(Kfull, static_cast<std::size_t>(std::ceil(hi) - std::floor(lo)) + 2 * half_window + 1);
        std::vector<double> pos(K);
        cvec y(K);
        for (std::size_t k = 0; k < K; ++k)
        {
            const long long j = first + static_cast<long long>(k);
            const auto Kl = static_cast<long long>(Kfull);
            y[k] = full[static_cast<std::size_t>(((j % Kl) + Kl) % Kl)];
            pos[k] = static_cast<double>(j);
        }

        std::vector<component> cur(n), start(n);
        for (std::size_t i = 0; i < n; ++i)
            cur[i] = start[i] = comps[group[i]];

        std::vector<double> kern(n * K), slope(n * K);
        cvec resid(K);
        auto evaluate = [&](const std::vector<component> &c, bool with_slope)
        {
            std::copy(y.begin(), y.end(), resid.begin());
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < K; ++k)
                {
                    const double x = pos[k] - c[i].tau;
                    kern[i * K + k] = thzlab::dirichlet(x, Kfull);
                    if (with_slope)
                        slope[i * K + k] = dirichlet_slope(x, Kfull);
                    resid[k] -= c[i].g * kern[i * K + k];
                }
            double cost = 0.0;
            for (const auto &v : resid)
                cost += std::norm(v);
            return cost;
        };

        const double initial = evaluate(cur, true);
        double cost = initial, lambda = 1e-3;
        const std::size_t P = 3 * n;
        std::vector<double> A(P * P), b(P), delta(P);
        cvec col(P * K);
        for (int it = 0; it < 60; ++it)
        {
            // Columns: d model / d(Re g, Im g, tau)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < K; ++k)
                {
                    col[(3 * i) * K + k] = kern[i * K + k];
                    col[(3 * i + 1) * K + k] = cplx(0.0, kern[i * K + k]);
                    col[(3 * i + 2) * K + k] = -cur[i].g * slope[i * K + k];
                }
            for (std::size_t r = 0; r < P; ++r)
            {
                double br = 0.0;
                for (std::size_t k = 0; k < K; ++k)
                    br += std::real(std::conj(col[r * K + k]) * resid[k]);
                b[r] = br;
                for (std::size_t c = r; c < P; ++c)
                {
                    double a = 0.0;
                    for (std::size_t k = 0; k < K; ++k)
                        a += std::real(std::conj(col[r * K + k]) * col[c * K + k]);
                    A[r * P + c] = A[c * P + r] = a;
                }
            }

            bool improved = false;
            for (int attempt = 0; attempt < 12 && !improved; ++attempt)
            {
                // Solve (A + lambda diag A) delta = b by Gaussian elimination with pivoting
                std::vector<double> M(A), rhs(b);
                for (std::size_t d = 0; d < P; ++d)
                    M[d * P + d] *= 1.0 + lambda;
                bool singular = false;
                for (std::size_t c = 0; c < P && !singular; ++c)
                {
                    std::size_t piv = c;
                    for (std::size_t r = c + 1; r < P; ++r)
                        if (std::abs(M[r * P + c]) > std::abs(M[piv * P + c]))
                            piv = r;
                    if (!(std::abs(M[piv * P + c]) > 0.0))
                    {
                        singular = true;
                        break;
                    }
                    if (piv != c)
                    {
                        for (std::size_t j = 0; j < P; ++j)
                            std::swap(M[c * P + j], M[piv * P + j]);
                        std::swap(rhs[c], rhs[piv]);
                    }
                    for (std::size_t r = c + 1; r < P; ++r)
                    {
                        const double f = M[r * P + c] / M[c * P + c];
                        for (std::size_t j = c; j < P; ++j)
                            M[r * P + j] -= f * M[c * P + j];
                        rhs[r] -= f * rhs[c];
                    }
                }
                if (singular)
                {
                    lambda *= 10.0;
                    continue;
                }
                for (std::size_t c = P; c-- > 0;)
                {
                    double acc = rhs[c];
                    for (std::size_t j = c + 1; j < P; ++j)
                        acc -= M[c * P + j] * delta[j];
                    delta[c] = acc / M[c * P + c];
                }

                std::vector<component> trial = cur;
                bool inside = true;
                for (std::size_t i = 0; i < n; ++i)
                {
                    trial[i].g += cplx(delta[3 * i], delta[3 * i + 1]);
                    trial[i].tau += std::clamp(delta[3 * i + 2], -0.25, 0.25);
                    inside &= std::abs(trial[i].tau - start[i].tau) <= 1.0;
                }
                const double c_new = inside ? evaluate(trial, true) : INFINITY;
                if (c_new < cost)
                {
                    cur = trial;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    improved = true;
                    const double rel = (cost - c_new) / std::max(cost, 1e-300);
                    cost = c_new;
                    if (rel < 1e-12)
                        it = 1000;
                }
                else
                {
                    if (inside)
                        evaluate(cur, true);
                    lambda *= 10.0;
                }
            }
            if (!improved)
                break;
        }

        if (cost < initial)
            for (std::size_t i = 0; i < n; ++i)
                comps[group[i]] = {cur[i].tau, cur[i].g, comps[group[i]].reported};
        for (std::size_t i : group)
            sig.subtract(comps[i].g, comps[i].tau);
    }
}

std::vector<thzlab::record_component> thzlab::detect_components(std::span<const cplx> cir, const processing_options &opt,
                                                                 std::optional<double> noise_floor_db)
{
    std::vector<record_component> found;
    const std::size_t K = cir.size();
    if (K == 0)
        return found;
    const double Kd = static_cast<double>(K);
    bandlimited_signal sig(cir);
    auto separation = [&](double a, double b)
    { return std::abs(std::remainder(a - b, Kd)); };

    // Components closer than this are fitted jointly; beyond it the coupling through the
    // kernel sidelobes is weak enough for one-at-a-time re-estimation
    constexpr double joint_span_bins = 2.5;

    std::vector<component> comps;

    // Re-estimation sweeps: each component is re-fitted with the others removed, until the
    // estimates stop moving
    auto settle = [&]
    {
        for (int sweep = 0; sweep < 10; ++sweep)
        {
            double moved = 0.0;
            for (auto &c : comps)
            {
                sig.add(c.g, c.tau);
                const cvec &r = sig.samples();
                const auto centre = static_cast<long long>(std::llround(c.tau));
                const auto Kl = static_cast<long long>(K);
                std::size_t k = 0;
                double best = -1.0;
                for (long long j = centre - 1; j <= centre + 1; ++j)
                {
                    const auto idx = static_cast<std::size_t>(((j % Kl) + Kl) % Kl);
                    if (std::norm(r[idx]) > best)
                    {
                        best = std::norm(r[idx]);
                        k = idx;
                    }
                }
                const peak_estimate est = refine_peak(sig, k);
                if (separation(est.delay_bins, c.tau) < 0.5)
                {
                    moved = std::max({moved, separation(est.delay_bins, c.tau),
                                      std::abs(est.amplitude - c.g) / std::max(std::abs(c.g), 1e-300)});
                    c.tau = est.delay_bins;
                    c.g = est.amplitude;
                }
                sig.subtract(c.g, c.tau);
            }
            if (moved < 1e-9)
                break;
        }
    };

    std::size_t reported = 0;
    double strongest = 0.0;
    bool settled = true;
    const std::size_t max_iter = 4 * std::max<std::size_t>(opt.max_components_per_record, 1);
    for (std::size_t it = 0; it < max_iter && reported < opt.max_components_per_record; ++it)
    {
        const cvec &r = sig.samples();
        const double floor_db = noise_floor_db ? *noise_floor_db : estimate_noise_floor_db(r);
        const double threshold = std::pow(10.0, (floor_db + opt.detection_margin_db) / 10.0);

        std::size_t k = 0;
        for (std::size_t i = 1; i < K; ++i)
            if (std::norm(r[i]) > std::norm(r[k]))
                k = i;
        if (!(std::norm(r[k]) >= threshold))
        {
            if (settled)
                break;
            settle();
            settled = true;
            continue;
        }

        const peak_estimate est = refine_peak(sig, k);
        const double p = std::norm(est.amplitude);
        if (strongest > 0.0 && p < strongest * std::pow(10.0, -opt.dynamic_range_db / 10.0))
            break;

        const bool leftover = std::any_of(comps.begin(), comps.end(), [&](const component &c)
                                          { return c.reported && separation(c.tau, est.delay_bins) < opt.resolution_bins; });
        if (leftover && !settled)
        {
            // Often the estimation error of a neighbour rather than a new path
            settle();
            settled = true;
            continue;
        }
        sig.subtract(est.amplitude, est.delay_bins);
        comps.push_back({est.delay_bins, est.amplitude, !leftover});
        settled = false;
        if (!leftover)
        {
            ++reported;
            strongest = std::max(strongest, p);
        }

        std::vector<std::size_t> group{comps.size() - 1};
        for (std::size_t g = 0; g < group.size(); ++g)
            for (std::size_t i = 0; i + 1 < comps.size(); ++i)
                if (std::find(group.begin(), group.end(), i) == group.end() &&
                    separation(comps[i].tau, comps[group[g]].tau) < joint_span_bins)
                    group.push_back(i);
        if (group.size() > 1 && group.size() <= 6)
            joint_fit(sig, comps, group);
    }
    if (!settled)
        settle();

    // The joint fit can pull two reported components closer than the resolution; the
    // weaker one is then dropped from the report
    std::vector<const component *> order;
    for (const auto &c : comps)
        if (c.reported)
            order.push_back(&c);
    std::stable_sort(order.begin(), order.end(), [](const component *a, const component *b)
                     { return std::norm(a->g) > std::norm(b->g); });
    std::vector<const component *> kept;
    for (const component *c : order)
        if (std::none_of(kept.begin(), kept.end(), [&](const component *k)
                         { return separation(k->tau, c->tau) < opt.resolution_bins; }))
            kept.push_back(c);

    for (const component *pc : kept)
    {
        const component &c = *pc;
        double tau = std::fmod(c.tau, Kd);
        if (tau < 0.0)
            tau += Kd;
        found.push_back({tau, c.g});
    }
    std::sort(found.begin(), found.end(), [](const record_component &a, const record_component &b)
              { return std::norm(a.amplitude) > std::norm(b.amplitude); });
    return found;
}

// ---------------------------------------------------------------- extraction

namespace
{
    using namespace thzlab;

    struct candidate
    {
        std::size_t dir = 0;
        double delay_bins = 0.0;
        cplx amplitude;
        double power_db = 0.0;
    };

    // 2-D Nelder-Mead, enough for the three-parameter beam fit
    template <typename F>
    std::array<double, 2> nelder_mead(F f, std::array<double, 2> x0, double step)
    {
        std::array<std::array<double, 2>, 3> v{x0, {x0[0] + step, x0[1]}, {x0[0], x0[1] + step}};
        std::array<double, 3> fv{f(v[0]), f(v[1]), f(v[2])};
        for (int it = 0; it < 400; ++it)
        {
            std::array<int, 3> o{0, 1, 2};
            std::sort(o.begin(), o.end(), [&](int a, int b)
                      { return fv[a] < fv[b]; });
            const auto best = v[o[0]], mid = v[o[1]], worst = v[o[2]];
            const double fb = fv[o[0]], fm = fv[o[1]], fw = fv[o[2]];
            if (std::abs(fw - fb) < 1e-14 && std::hypot(worst[0] - best[0], worst[1] - best[1]) < 1e-9)
                break;
            const std::array<double, 2> c{(best[0] + mid[0]) / 2, (best[1] + mid[1]) / 2};
            auto along = [&](double t)
            { return std::array<double, 2>{c[0] + t * (worst[0] - c[0]), c[1] + t * (worst[1] - c[1])}; };
            const auto xr = along(-1.0);
            const double fr = f(xr);
            std::array<double, 2> next;
            double fn;
            if (fr < fb)
            {
                const auto xe = along(-2.0);
                const double fe = f(xe);
                next = fe < fr ? xe : xr;
                fn = std::min(fe, fr);
            }
            else if (fr < fm)
            {
                next = xr;
                fn = fr;
            }
            else
            {
                const auto xc = along(fr < fw ? -0.5 : 0.5);
                const double fc = f(xc);
                if (fc < std::min(fr, fw))
                {
                    next = xc;
                    fn = fc;
                }
                else
                {
                    // shrink towards the best vertex
                    v = {best, {(best[0] + mid[0]) / 2, (best[1] + mid[1]) / 2}, {(best[0] + worst[0]) / 2, (best[1] + worst[1]) / 2}};
                    fv = {fb, f(v[1]), f(v[2])};
                    continue;
                }
            }
            v[o[2]] = next;
            fv[o[2]] = fn;
        }
        std::size_t bi = 0;
        for (std::size_t i = 1; i < 3; ++i)
            if (fv[i] < fv[bi])
                bi = i;
        return v[bi];
    }

    struct grid_layout
    {
        std::vector<direction> dirs;
        std::size_t n_az = 0, n_el = 0;
        bool wraps = false;

        std::vector<std::size_t> neighbours(std::size_t idx) const
        {
            const long long a = static_cast<long long>(idx % n_az), e = static_cast<long long>(idx / n_az);
            std::vector<std::size_t> out;
            for (long long de = -1; de <= 1; ++de)
                for (long long da = -1; da <= 1; ++da)
                {
                    if (da == 0 && de == 0)
                        continue;
                    long long na = a + da;
                    const long long ne = e + de;
                    if (ne < 0 || ne >= static_cast<long long>(n_el))
                        continue;
                    if (na < 0 || na >= static_cast<long long>(n_az))
                    {
                        if (!wraps)
                            continue;
                        na = (na + static_cast<long long>(n_az)) % static_cast<long long>(n_az);
                    }
                    const std::size_t n = static_cast<std::size_t>(ne) * n_az + static_cast<std::size_t>(na);
                    if (std::find(out.begin(), out.end(), n) == out.end() && n != idx)
                        out.push_back(n);
                }
            return out;
        }
    };

    // Candidate of `dir` at (circularly) the same delay, if any
    const candidate *match(const std::vector<std::vector<candidate>> &by_dir, std::size_t dir, double delay_bins,
                           double K, double tol)
    {
        const candidate *best = nullptr;
        double best_sep = tol;
        for (const auto &c : by_dir[dir])
        {
            const double sep = std::abs(std::remainder(c.delay_bins - delay_bins, K));
            if (sep <= best_sep)
            {
                best_sep = sep;
                best = &c;
            }
        }
        return best;
    }
}

std::vector<thzlab::mpc> thzlab::extract_mpcs(std::span<const cir_record> records, const scan_grid &scan,
                                              const extraction_antennas &antennas, const processing_options &opt,
                                              std::optional<double> noise_floor_db)
{
    std::vector<mpc> out;
    if (records.empty())
        return out;

    grid_layout grid{build_direction_grid(scan), scan.n_az(), scan.n_el(), scan.az_wraps()};
    const std::size_t K = records.front().samples.size();
    const double Kd = static_cast<double>(K);
    const double bin_s = records.front().delay_bin_s;
    const int position_id = records.front().position_id;
    const double boresight_db = antennas.tx.boresight_gain_dbi + antennas.rx.boresight_gain_dbi;

    // Per-direction detection
    std::vector<std::vector<candidate>> by_dir(grid.dirs.size());
    for (const auto &r : records)
    {
        if (r.samples.size() != K)
            throw validation_error("extract_mpcs: records have different lengths");
        std::size_t dir = grid.dirs.size();
        for (std::size_t i = 0; i < grid.dirs.size(); ++i)
            if (std::abs(wrap_deg(grid.dirs[i].az_deg - r.az_deg)) < 1e-6 && std::abs(grid.dirs[i].el_deg - r.el_deg) < 1e-6)
                dir = i;
        if (dir == grid.dirs.size())
            throw validation_error("extract_mpcs: record direction is not on the scan grid");
        for (const auto &c : detect_components(r.samples, opt, noise_floor_db))
            by_dir[dir].push_back({dir, c.delay_bins, c.amplitude, 10.0 * std::log10(std::norm(c.amplitude))});
    }

    // Direction-domain local maxima
    constexpr double same_delay = 0.5; // bins
    std::vector<candidate> survivors;
    for (std::size_t d = 0; d < by_dir.size(); ++d)
        for (const auto &c : by_dir[d])
        {
            bool is_max = true;
            for (std::size_t n : grid.neighbours(d))
            {
                const candidate *m = match(by_dir, n, c.delay_bins, Kd, same_delay);
                if (m && (m->power_db > c.power_db || (m->power_db == c.power_db && n < d)))
                {
                    is_max = false;
                    break;
                }
            }
            if (is_max)
                survivors.push_back(c);
        }
    std::sort(survivors.begin(), survivors.end(), [](const candidate &a, const candidate &b)
              {
                  if (a.power_db != b.power_db)
                      return a.power_db > b.power_db;
                  if (a.delay_bins != b.delay_bins)
                      return a.delay_bins < b.delay_bins;
                  return a.dir < b.dir; });

    const double curvature = 12.0 / (antennas.rx.hpbw_deg * antennas.rx.hpbw_deg); // dB per deg^2
    const double mainlobe_db = -antennas.rx.sidelobe_db;

    struct kept
    {
        mpc m;
        vec3 arrival;
        double aligned_power_db;
    };
    std::vector<kept> accepted;

    for (const auto &c : survivors)
    {
        const direction &wd = grid.dirs[c.dir];
        mpc m;
        m.position_id = position_id;
        m.delay_s = c.delay_bins * bin_s;
        m.gain = c.amplitude / std::pow(10.0, boresight_db / 20.0);
        m.power_db = 20.0 * std::log10(std::abs(m.gain));
        m.aoa_az_deg = wd.az_deg;
        m.aoa_el_deg = wd.el_deg;
        m.direction_index = c.dir;
        m.refined_az_deg = wd.az_deg;
        m.refined_el_deg = wd.el_deg;

        // Beam-pattern fit over the neighbourhood for the arrival direction
        struct sample
        {
            vec3 dir;
            double power_db;
        };
        std::vector<sample> pts{{unit_from_az_el(wd.az_deg, wd.el_deg), c.power_db}};
        bool other_az = false, other_el = false;
        for (std::size_t n : grid.neighbours(c.dir))
        {
            const candidate *nm = match(by_dir, n, c.delay_bins, Kd, same_delay);
            if (!nm || nm->power_db < c.power_db - std::min(18.0, mainlobe_db - 3.0))
                continue;
            pts.push_back({unit_from_az_el(grid.dirs[n].az_deg, grid.dirs[n].el_deg), nm->power_db});
            other_az |= grid.dirs[n].az_deg != wd.az_deg;
            other_el |= grid.dirs[n].el_deg != wd.el_deg;
        }
        // A coordinate with no neighbour inside the window stays at the grid value: the
        // pattern then bounds its pointing error to a fraction of a degree
        if (other_az || other_el)
        {
            auto coords = [&](const std::array<double, 2> &x)
            { return std::array<double, 2>{other_az ? x[0] : wd.az_deg, other_el ? x[1] : wd.el_deg}; };
            auto sse = [&](const std::array<double, 2> &x0)
            {
                const auto x = coords(x0);
                const vec3 u = unit_from_az_el(x[0], x[1]);
                double mean = 0.0;
                std::vector<double> pred(pts.size());
                for (std::size_t i = 0; i < pts.size(); ++i)
                {
                    const double th = angle_between_deg(u, pts[i].dir);
                    pred[i] = -curvature * th * th;
                    mean += pts[i].power_db - pred[i];
                }
                mean /= static_cast<double>(pts.size());
                double e = 0.0;
                for (std::size_t i = 0; i < pts.size(); ++i)
                {
                    const double r = pts[i].power_db - mean - pred[i];
                    e += r * r;
                }
                return e;
            };
            const auto x = coords(nelder_mead(sse, {wd.az_deg, wd.el_deg}, 2.0));
            const vec3 u = unit_from_az_el(x[0], x[1]);
            const double off = angle_between_deg(u, pts.front().dir);
            const double max_step = std::max(scan.az_step, scan.el_step);
            if (off <= max_step && curvature * off * off < mainlobe_db)
            {
                m.refined = true;
                az_el_from_vector(u, m.refined_az_deg, m.refined_el_deg);
                m.misalignment_db = curvature * off * off;
            }
        }

        const vec3 arrival = unit_from_az_el(m.refined_az_deg, m.refined_el_deg);
        const double aligned = c.power_db + m.misalignment_db;
        // The path gain excludes the pointing loss of the winning beam as well
        m.gain *= std::pow(10.0, m.misalignment_db / 20.0);
        m.power_db += m.misalignment_db;

        // Beam leakage of a stronger MPC at the same delay
        bool explained = false;
        for (const auto &a : accepted)
        {
            const double sep = std::abs(std::remainder(a.m.delay_s / bin_s - c.delay_bins, Kd));
            if (sep > same_delay)
                continue;
            const double predicted = a.aligned_power_db - antennas.rx.boresight_gain_dbi +
                                     antenna_gain(antennas.rx, angle_between_deg(a.arrival, unit_from_az_el(wd.az_deg, wd.el_deg)));
            if (c.power_db <= predicted + opt.dedup_margin_db)
            {
                explained = true;
                break;
            }
        }
        if (!explained)
            accepted.push_back({m, arrival, aligned});
    }

    out.reserve(accepted.size());
    for (auto &a : accepted)
        out.push_back(std::move(a.m));
    return out;
}

// ---------------------------------------------------------------- clustering

double thzlab::mcd(const mpc &a, const mpc &b, double delay_scale)
{
    const vec3 ua = unit_from_az_el(a.aoa_az_deg, a.aoa_el_deg), ub = unit_from_az_el(b.aoa_az_deg, b.aoa_el_deg);
    const double ang = norm(ua - ub);
    const double del = delay_scale * std::abs(a.delay_s - b.delay_s);
    return std::sqrt(ang * ang + del * del);
}

void thzlab::update_cluster_stats(cluster &c)
{
    c.power_linear = 0.0;
    std::vector<weighted_value> d, az, el;
    for (const auto &m : c.members)
    {
        const double p = std::norm(m.gain);
        c.power_linear += p;
        d.push_back({m.delay_s, p});
        az.push_back({m.aoa_az_deg, p});
        el.push_back({m.aoa_el_deg, p});
    }
    if (c.members.empty())
        return;
    c.delay_s = weighted_mean(d, spread_domain::delay);
    c.az_deg = weighted_mean(az, spread_domain::azimuth);
    c.el_deg = weighted_mean(el, spread_domain::elevation);
    c.cds_s = rms_spread(d, spread_domain::delay);
    c.casa_deg = rms_spread(az, spread_domain::azimuth);
    c.cesa_deg = rms_spread(el, spread_domain::elevation);
}

std::vector<thzlab::cluster> thzlab::cluster_mpcs(std::span<const mpc> mpcs, double mcd_threshold, double zeta)
{
    std::vector<mpc> sorted(mpcs.begin(), mpcs.end());
    std::sort(sorted.begin(), sorted.end(), [](const mpc &a, const mpc &b)
              {
                  if (a.power_db != b.power_db)
                      return a.power_db > b.power_db;
                  if (a.delay_s != b.delay_s)
                      return a.delay_s < b.delay_s;
                  return a.direction_index < b.direction_index; });
    const std::size_t n = sorted.size();
    std::vector<cluster> out;
    if (n == 0)
        return out;

    double lo = sorted.front().delay_s, hi = lo;
    for (const auto &m : sorted)
    {
        lo = std::min(lo, m.delay_s);
        hi = std::max(hi, m.delay_s);
    }
    const double scale = hi > lo ? zeta / (hi - lo) : 0.0;

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i)
    {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (mcd(sorted[i], sorted[j], scale) <= mcd_threshold)
            {
                const std::size_t a = find(i), b = find(j);
                if (a != b)
                    parent[std::max(a, b)] = std::min(a, b); // root is the strongest member
            }

    std::map<std::size_t, std::size_t> slot;
    for (std::size_t i = 0; i < n; ++i)
    {
        const std::size_t root = find(i);
        auto [it, inserted] = slot.try_emplace(root, out.size());
        if (inserted)
            out.emplace_back();
        out[it->second].members.push_back(sorted[i]);
    }

    for (auto &c : out)
        update_cluster_stats(c);
    std::stable_sort(out.begin(), out.end(), [](const cluster &a, const cluster &b)
                     { return a.power_linear > b.power_linear; });
    return out;
}

// ---------------------------------------------------------------- tracing

namespace
{
    double distance_to_panel(const scatterer_panel &p, const vec3 &x)
    {
        const vec3 r = x - p.center;
        const double u = std::clamp(dot(r, p.width_axis()), -p.half_width, p.half_width);
        const double v = std::clamp(dot(r, p.height_axis()), -p.half_height, p.half_height);
        return distance(x, p.center + p.width_axis() * u + p.height_axis() * v);
    }
}

bool thzlab::is_los_cluster(const cluster &c, const scenario &s, int rx_id, double delay_bin_s)
{
    if (!has_los(s, rx_id))
        return false;
    const mpc &m = c.strongest();
    const vec3 to_tx = normalized(s.tx.position - s.rx(rx_id).position);
    const double ang = angle_between_deg(unit_from_az_el(m.aoa_az_deg, m.aoa_el_deg), to_tx);
    return std::abs(m.delay_s - los_delay(s.tx, s.rx(rx_id))) <= delay_bin_s &&
           ang <= std::max(s.scan.az_step, s.scan.el_step);
}

std::optional<thzlab::once_scattering_match> thzlab::trace_once_scattering(const cluster &c, const scenario &s, int rx_id,
                                                                           double max_panel_distance_m)
{
    const mpc &m = c.strongest();
    const vec3 rx = s.rx(rx_id).position;
    const vec3 u = unit_from_az_el(m.refined_az_deg, m.refined_el_deg);
    const vec3 D = s.tx.position - rx;
    const double L = m.delay_s * speed_of_light;
    const double dd = norm(D);
    if (L <= dd * (1.0 + 1e-9))
        return std::nullopt;
    // |D - r u| = L - r  =>  r = (L^2 - |D|^2) / (2 (L - u.D))
    const double denom = 2.0 * (L - dot(u, D));
    if (!(denom > 0.0))
        return std::nullopt;
    const double r = (L * L - dd * dd) / denom;
    if (!(r > 0.0) || r >= L)
        return std::nullopt;

    once_scattering_match out;
    out.point = rx + u * r;
    out.delay_s = m.delay_s;
    double best = INFINITY;
    for (std::size_t i = 0; i < s.objects.size(); ++i)
    {
        const double d = distance_to_panel(s.objects[i], out.point);
        if (d < best)
        {
            best = d;
            out.panel = i;
        }
    }
    out.panel_distance_m = best;
    if (best > max_panel_distance_m)
        out.panel.reset();

    const vec3 boresight = normalized(rx - s.tx.position);
    out.tx_gain_db = antenna_gain(s.tx_antenna, angle_between_deg(boresight, out.point - s.tx.position));
    const double residual_db = out.tx_gain_db - s.tx_antenna.boresight_gain_dbi;
    out.channel_gain = m.gain / std::pow(10.0, residual_db / 20.0);
    return out;
}
