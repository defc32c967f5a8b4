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

#include "thzlab/waveform.hpp"
#include "thzlab/errors.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

thzlab::zc_sequence thzlab::generate_zc(int root, int length)
{
    if (length < 1 || length % 2 == 0)
        throw validation_error("generate_zc: length must be odd");
    if (std::gcd(root, length) != 1)
        throw validation_error("generate_zc: root must be coprime with length");

    zc_sequence zc{root, length, cvec(static_cast<std::size_t>(length))};
    // Reduce root n (n + 1) modulo 2 length before scaling so the phase stays exact for long sequences
    const long long L2 = 2LL * length;
    const long long r = ((root % L2) + L2) % L2;
    for (long long n = 0; n < length; ++n)
    {
        const long long idx = (r * ((n * (n + 1)) % L2)) % L2;
        const double phase = -std::numbers::pi * static_cast<double>(idx) / static_cast<double>(length);
        zc.samples[static_cast<std::size_t>(n)] = std::polar(1.0, phase);
    }
    return zc;
}

thzlab::cvec thzlab::correlate(std::span<const cplx> received, const zc_sequence &reference)
{
    const std::size_t N = reference.samples.size();
    const std::size_t L = received.size();
    if (N == 0 || L < N)
        throw validation_error("correlate: received length must be at least the reference length");

    cvec ref(L);
    std::copy(reference.samples.begin(), reference.samples.end(), ref.begin());
    cvec R = fft(received);
    const cvec Q = fft(ref);
    for (std::size_t m = 0; m < L; ++m)
        R[m] *= std::conj(Q[m]);
    cvec out = ifft(R);
    const double scale = 1.0 / static_cast<double>(N);
    for (auto &v : out)
        v *= scale;
    return out;
}

thzlab::cvec thzlab::average_cirs(std::span<const cvec> samples)
{
    if (samples.empty())
        throw validation_error("average_cirs: empty list");
    const std::size_t n = samples.front().size();
    cvec acc(n);
    for (const auto &s : samples)
    {
        if (s.size() != n)
            throw validation_error("average_cirs: vectors have different lengths");
        for (std::size_t k = 0; k < n; ++k)
            acc[k] += s[k];
    }
    const double scale = 1.0 / static_cast<double>(samples.size());
    for (auto &v : acc)
        v *= scale;
    return acc;
}

thzlab::cvec thzlab::add_noise(std::span<const cplx> signal, double noise_power_db, std::mt19937_64 &rng)
{
    cvec out(signal.begin(), signal.end());
    if (!std::isfinite(noise_power_db))
        return out;
    const double sigma = std::sqrt(0.5 * std::pow(10.0, noise_power_db / 10.0));
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto &v : out)
    {
        const double re = normal(rng);
        const double im = normal(rng);
        v += cplx(re, im);
    }
    return out;
}

std::uint64_t thzlab::derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> key)
{
    // splitmix64 finaliser folded over the key
    auto mix = [](std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    for (auto k : key)
        h = mix(h ^ mix(k));
    return h;
}
