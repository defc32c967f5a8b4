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

#include "thzlab/bandlimited.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using std::numbers::pi;

double thzlab::frequency_index(std::size_t m, std::size_t K)
{
    return (2 * m <= K) ? static_cast<double>(m) : static_cast<double>(m) - static_cast<double>(K);
}

double thzlab::dirichlet(double x, std::size_t K)
{
    const double Kd = static_cast<double>(K);
    x = std::remainder(x, Kd); // (-K/2, K/2]
    const double n = K % 2 == 1 ? Kd : Kd - 1.0; // occupied bins
    if (std::abs(x) < 1e-12)
        return n / Kd;
    return std::sin(pi * x * n / Kd) / std::sin(pi * x / Kd) / Kd;
}

void thzlab::add_delayed_tone(cvec &H, cplx gain, double delay_bins)
{
    const std::size_t K = H.size();
    const double Kd = static_cast<double>(K);
    for (std::size_t m = 0; m < K; ++m)
    {
        if (K % 2 == 1 || 2 * m != K)
            H[m] += gain * std::polar(1.0, -2.0 * pi * frequency_index(m, K) * delay_bins / Kd);
    }
}

thzlab::cvec thzlab::fractional_shift(std::span<const cplx> x, double shift_bins)
{
    cvec X = fft(x);
    const std::size_t K = X.size();
    const double Kd = static_cast<double>(K);
    for (std::size_t m = 0; m < K; ++m)
    {
        if (K % 2 == 0 && 2 * m == K)
            X[m] = 0.0;
        else
            X[m] *= std::polar(1.0, -2.0 * pi * frequency_index(m, K) * shift_bins / Kd);
    }
    return ifft(X);
}

namespace
{
    // z^f for the signed frequency index of every bin, z = exp(i 2 pi t / K); re-seeded
    // from polar() every 64 steps to bound the recurrence error
    void phasors(std::size_t K, double t, thzlab::cvec &out)
    {
        using thzlab::cplx;
        out.resize(K);
        const double Kd = static_cast<double>(K);
        const cplx step = std::polar(1.0, 2.0 * pi * t / Kd);
        cplx z(1.0, 0.0);
        const std::size_t half = K / 2;
        for (std::size_t f = 0; f <= half; ++f)
        {
            if (f % 64 == 0)
                z = std::polar(1.0, 2.0 * pi * t * static_cast<double>(f) / Kd);
            out[f] = z;
            if (f > 0 && f < K - f)
                out[K - f] = std::conj(z);
            z *= step;
        }
    }
}

thzlab::bandlimited_signal::bandlimited_signal(std::span<const cplx> samples)
    : spectrum_(fft(samples)), samples_(samples.begin(), samples.end()), samples_valid_(true)
{
}

thzlab::cplx thzlab::bandlimited_signal::at(double t) const
{
    cplx v, d1, d2;
    at(t, v, d1, d2);
    return v;
}

void thzlab::bandlimited_signal::at(double t, cplx &value, cplx &d1, cplx &d2) const
{
    const std::size_t K = spectrum_.size();
    value = d1 = d2 = cplx{};
    if (K == 0)
        return;
    thread_local cvec z;
    phasors(K, t, z);
    const double Kd = static_cast<double>(K);
    const bool even = K % 2 == 0;
    for (std::size_t m = 0; m < K; ++m)
    {
        if (even && 2 * m == K)
            continue;
        const double w = 2.0 * pi * frequency_index(m, K) / Kd;
        const cplx term = spectrum_[m] * z[m];
        value += term;
        d1 += term * cplx(0.0, w);
        d2 -= term * (w * w);
    }
    value /= Kd;
    d1 /= Kd;
    d2 /= Kd;
}

void thzlab::bandlimited_signal::add(cplx amplitude, double delay_bins)
{
    const std::size_t K = spectrum_.size();
    thread_local cvec z;
    phasors(K, -delay_bins, z);
    for (std::size_t m = 0; m < K; ++m)
    {
        if (K % 2 == 1 || 2 * m != K)
            spectrum_[m] += amplitude * z[m];
    }
    samples_valid_ = false;
}

const thzlab::cvec &thzlab::bandlimited_signal::samples() const
{
    if (!samples_valid_)
    {
        samples_ = ifft(spectrum_);
        samples_valid_ = true;
    }
    return samples_;
}

thzlab::cplx thzlab::interpolate_at(std::span<const cplx> x, double t)
{
    return bandlimited_signal(x).at(t);
}

thzlab::peak_estimate thzlab::refine_peak(const bandlimited_signal &sig, std::size_t k)
{
    const cvec &x = sig.samples();
    const std::size_t K = x.size();
    peak_estimate est;
    est.delay_bins = static_cast<double>(k);
    est.parabolic_delay_bins = est.delay_bins;
    est.amplitude = x[k] / dirichlet(0.0, K);
    if (K < 3)
        return est;

    auto logp = [&](std::size_t i)
    { return 10.0 * std::log10(std::max(std::norm(x[i]), 1e-300)); };
    const double ym = logp((k + K - 1) % K), y0 = logp(k), yp = logp((k + 1) % K);
    const double denom = ym - 2.0 * y0 + yp;
    double offset = 0.0;
    if (denom < 0.0)
        offset = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
    const double kd = static_cast<double>(k);
    est.parabolic_delay_bins = kd + offset;

    // Newton on f(t) = |x(t)|^2, confined to one bin either side of k
    double t = est.parabolic_delay_bins;
    bool converged = false;
    for (int it = 0; it < 50; ++it)
    {
        cplx v, d1, d2;
        sig.at(t, v, d1, d2);
        const double g = 2.0 * std::real(std::conj(v) * d1);
        const double h = 2.0 * (std::norm(d1) + std::real(std::conj(v) * d2));
        if (!(h < 0.0))
            break;
        const double step = -g / h;
        t += std::clamp(step, -0.25, 0.25);
        if (t < kd - 1.0 || t > kd + 1.0)
            break;
        if (std::abs(step) < 1e-12)
        {
            converged = true;
            break;
        }
    }

    if (!converged)
    {
        // Golden-section fallback on the same objective
        auto power = [&](double u)
        { return std::norm(sig.at(u)); };
        double a = kd - 1.0, b = kd + 1.0;
        const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - invphi * (b - a), d = a + invphi * (b - a);
        double fc = power(c), fd = power(d);
        while (b - a > 1e-9)
        {
            if (fc > fd)
            {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = power(c);
            }
            else
            {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = power(d);
            }
        }
        t = 0.5 * (a + b);
    }

    cplx peak = sig.at(t);
    est.delay_bins = t;
    if (std::norm(peak) < std::norm(x[k]))
    {
        est.delay_bins = kd;
        peak = x[k];
    }
    est.amplitude = peak / dirichlet(0.0, K);
    return est;
}

thzlab::peak_estimate thzlab::refine_peak(std::span<const cplx> x, std::size_t k)
{
    return refine_peak(bandlimited_signal(x), k);
}

void thzlab::subtract_component(std::span<cplx> x, cplx amplitude, double delay_bins)
{
    const std::size_t K = x.size();
    for (std::size_t k = 0; k < K; ++k)
        x[k] -= amplitude * dirichlet(static_cast<double>(k) - delay_bins, K);
}

double thzlab::mean_power(std::span<const cplx> x)
{
    if (x.empty())
        return 0.0;
    double acc = 0.0;
    for (const auto &v : x)
        acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}
