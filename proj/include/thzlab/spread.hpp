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

#ifndef thzlab_spread_H
#define thzlab_spread_H

#include <span>

namespace thzlab
{
    enum class spread_domain
    {
        delay,     // metric in seconds (or any linear unit)
        azimuth,   // degrees
        elevation  // degrees
    };

    struct weighted_value
    {
        double value = 0.0;
        double power = 0.0; // linear, > 0
    };

    // Delay: power-weighted RMS deviation about the power-weighted mean.
    // Angles: circular spread sqrt(-2 ln |sum p e^{i theta}| / sum p), returned in degrees.
    double rms_spread(std::span<const weighted_value> values, spread_domain domain);

    // Power-weighted mean; circular mean in [0, 360) for azimuth, (-180, 180] for elevation
    double weighted_mean(std::span<const weighted_value> values, spread_domain domain);
}

#endif
