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

#include "thzlab/errors.hpp"
#include "thzlab/waveform.hpp"

#include <cmath>
#include <random>

using namespace thzlab;

// Covered tests:
// - Zadoff-Chu sequence: unit modulus and CAZAC autocorrelation
// - Correlation of shifted and superposed copies against brute force
// - Averaging and noise statistics
// - Seed derivation

namespace
{
    // Un-normalised periodic correlation sum_n a[(n + lag) mod N] conj(b[n])
    cplx brute_correlation(std::span<const cplx> a, std::span<const cplx> b, std::size_t lag)
    {
        cplx acc;
        for (std::size_t n = 0; n < b.size(); ++n)
            acc += a[(n + lag) % a.size()] * std::conj(b[n]);
        return acc;
    }

    cvec shifted(const cvec &x, std::size_t by)
    {
        cvec y(x.size());
        for (std::size_t n = 0; n < x.size(); ++n)
            y[(n + by) % x.size()] = x[n];
        return y;
    }
}

TEST_CASE("Waveform - Zadoff-Chu")
{
    const zc_sequence zc = generate_zc(1, 1021);
    REQUIRE(zc.samples.size() == 1021);
    for (const auto &v : zc.samples)
        CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);

    CHECK(std::abs(brute_correlation(zc.samples, zc.samples, 0)) == Catch::Approx(1021.0));
    double worst = 0.0;
    for (std::size_t lag = 1; lag < 1021; ++lag)
        worst = std::max(worst, std::abs(brute_correlation(zc.samples, zc.samples, lag)));
    CHECK(worst <= 1e-6 * 1021.0);

    CHECK_THROWS_AS(generate_zc(1, 1020), validation_error);
    CHECK_THROWS_AS(generate_zc(3, 21), validation_error);
}

TEST_CASE("Waveform - Correlation")
{
    const zc_sequence zc = generate_zc(1, 1021);

    SECTION("Shifted copy")
    {
        const cvec out = correlate(shifted(zc.samples, 7), zc);
        std::size_t k = 0;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (std::abs(out[i]) > std::abs(out[k]))
                k = i;
        CHECK(k == 7);
        CHECK(std::abs(out[7]) == Catch::Approx(1.0));
    }
    SECTION("Scaled copy")
    {
        cvec r = shifted(zc.samples, 7);
        for (auto &v : r)
            v *= 0.5;
        CHECK(std::abs(correlate(r, zc)[7]) == Catch::Approx(0.5));
    }
    SECTION("Two copies against brute force")
    {
        const cvec a = shifted(zc.samples, 5), b = shifted(zc.samples, 40);
        cvec r(a.size());
        for (std::size_t n = 0; n < r.size(); ++n)
            r[n] = a[n] + 0.3 * b[n];
        const cvec out = correlate(r, zc);
        for (std::size_t lag = 0; lag < out.size(); ++lag)
            CHECK(std::abs(out[lag] - brute_correlation(r, zc.samples, lag) / 1021.0) < 1e-9);
        CHECK(std::abs(std::abs(out[5]) - 1.0) < 1e-6);
        CHECK(std::abs(std::abs(out[40]) - 0.3) < 1e-6);
    }
    SECTION("Longer receive window")
    {
        cvec r(2048);
        for (std::size_t n = 0; n < r.size(); ++n)
            r[n] = zc.samples[(n + 1021 - 9) % 1021];
        const cvec out = correlate(r, zc);
        REQUIRE(out.size() == 2048);
        for (std::size_t lag : {0u, 9u, 500u, 2000u})
            CHECK(std::abs(out[lag] - brute_correlation(r, zc.samples, lag) / 1021.0) < 1e-9);
    }
}

TEST_CASE("Waveform - Averaging and noise")
{
    std::mt19937_64 rng(42);
    const cvec x(2048, cplx{0.25, -0.5});

    const std::vector<cvec> same(5, x);
    const cvec avg = average_cirs(same);
    for (std::size_t k = 0; k < x.size(); ++k)
        CHECK(std::abs(avg[k] - x[k]) < 1e-15);

    CHECK(add_noise(x, -INFINITY, rng) == x);

    const cvec zero(2048);
    const cvec n = add_noise(zero, -100.0, rng);
    double p = 0.0;
    for (const auto &v : n)
        p += std::norm(v);
    CHECK(std::abs(10.0 * std::log10(p / 2048.0) + 100.0) < 0.5);

    // 100 realisations: residual noise power falls by 20 dB
    std::vector<cvec> shots;
    for (int m = 0; m < 100; ++m)
        shots.push_back(add_noise(x, -60.0, rng));
    const cvec mean = average_cirs(shots);
    double resid = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
        resid += std::norm(mean[k] - x[k]);
    CHECK(std::abs(10.0 * std::log10(resid / 2048.0) + 80.0) < 1.0);

    std::mt19937_64 a(7), b(7);
    CHECK(add_noise(x, -30.0, a) == add_noise(x, -30.0, b));

    CHECK_THROWS_AS(average_cirs(std::vector<cvec>{}), validation_error);
    CHECK_THROWS_AS(average_cirs(std::vector<cvec>{cvec(3), cvec(4)}), validation_error);
}

TEST_CASE("Waveform - Seed derivation")
{
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(2, {2, 3}));
    CHECK(derive_seed(1, {0}) != derive_seed(1, {0, 0}));
}
