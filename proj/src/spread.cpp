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

#include "thzlab/spread.hpp"
#include "thzlab/errors.hpp"
#include "thzlab/geometry.hpp"

#include <cmath>
#include <complex>

namespace
{
    void check(std::span<const thzlab::weighted_value> values)
    {
        if (values.empty())
            throw thzlab::validation_error("rms_spread: empty input");
        for (const auto &v : values)
            if (!(v.power > 0.0))
                throw thzlab::validation_error("rms_spread: powers must be positive");
    }

    // Mean resultant vector with angles taken relative to the first value, so identical
    // angles give |R| = 1 exactly
    std::complex<double> first_moment(std::span<const thzlab::weighted_value> values)
    {
        const double ref = values.front().value;
        std::complex<double> acc;
        double total = 0.0;
        for (const auto &v : values)
        {
            acc += v.power * std::polar(1.0, std::remainder(v.value - ref, 360.0) * thzlab::deg2rad);
            total += v.power;
        }
        return acc / total;
    }
}

double thzlab::rms_spread(std::span<const weighted_value> values, spread_domain domain)
{
    check(values);
    if (domain == spread_domain::delay)
    {
        // Shift by the first value so large absolute delays do not cost precision
        const double ref = values.front().value;
        double p = 0.0, m1 = 0.0;
        for (const auto &v : values)
        {
            p += v.power;
            m1 += v.power * (v.value - ref);
        }
        const double mean = m1 / p;
        double m2 = 0.0;
        for (const auto &v : values)
        {
            const double d = v.value - ref - mean;
            m2 += v.power * d * d;
        }
        return std::sqrt(m2 / p);
    }
    const double r = std::min(1.0, std::abs(first_moment(values)));
    return std::sqrt(std::max(0.0, -2.0 * std::log(r))) * rad2deg;
}

double thzlab::weighted_mean(std::span<const weighted_value> values, spread_domain domain)
{
    check(values);
    if (domain == spread_domain::delay)
    {
        const double ref = values.front().value;
        double p = 0.0, m1 = 0.0;
        for (const auto &v : values)
        {
            p += v.power;
            m1 += v.power * (v.value - ref);
        }
        return ref + m1 / p;
    }
    double a = values.front().value + std::arg(first_moment(values)) * rad2deg;
    if (domain == spread_domain::azimuth)
    {
        a = std::fmod(a, 360.0);
        if (a < 0.0)
            a += 360.0;
    }
    else
        a = std::remainder(a, 360.0);
    return a;
}
