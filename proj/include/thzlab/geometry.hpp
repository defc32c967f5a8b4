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

#ifndef thzlab_geometry_H
#define thzlab_geometry_H

#include <cmath>
#include <algorithm>
#include <numbers>

namespace thzlab
{
    inline constexpr double speed_of_light = 299792458.0; // m/s
    inline constexpr double deg2rad = std::numbers::pi / 180.0;
    inline constexpr double rad2deg = 180.0 / std::numbers::pi;

    struct vec3
    {
        double x = 0.0;
        double y = 0.0;
        double z = 0.0;

        constexpr vec3 operator+(const vec3 &o) const { return {x + o.x, y + o.y, z + o.z}; }
        constexpr vec3 operator-(const vec3 &o) const { return {x - o.x, y - o.y, z - o.z}; }
        constexpr vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
        constexpr vec3 operator-() const { return {-x, -y, -z}; }
        constexpr bool operator==(const vec3 &) const = default;
    };

    constexpr double dot(const vec3 &a, const vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
    constexpr vec3 cross(const vec3 &a, const vec3 &b)
    {
        return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
    }
    inline double norm(const vec3 &a) { return std::sqrt(dot(a, a)); }
    inline double distance(const vec3 &a, const vec3 &b) { return norm(a - b); }
    inline vec3 normalized(const vec3 &a) { return a * (1.0 / norm(a)); }

    // Unit vector for azimuth (from +x towards +y) and elevation (from the xy-plane towards +z)
    inline vec3 unit_from_az_el(double az_deg, double el_deg)
    {
        const double az = az_deg * deg2rad, el = el_deg * deg2rad;
        return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
    }

    // Azimuth in [0, 360), elevation in [-90, 90], both in degrees
    inline void az_el_from_vector(const vec3 &v, double &az_deg, double &el_deg)
    {
        const double n = norm(v);
        az_deg = std::atan2(v.y, v.x) * rad2deg;
        if (az_deg < 0.0)
            az_deg += 360.0;
        if (az_deg >= 360.0)
            az_deg -= 360.0;
        el_deg = std::asin(std::clamp(v.z / n, -1.0, 1.0)) * rad2deg;
    }

    // Angle between two directions in degrees; acos-free for accuracy near 0
    inline double angle_between_deg(const vec3 &a, const vec3 &b)
    {
        return std::atan2(norm(cross(a, b)), dot(a, b)) * rad2deg;
    }

    // Wraps an angle difference into (-180, 180]
    inline double wrap_deg(double a)
    {
        a = std::fmod(a, 360.0);
        if (a > 180.0)
            a -= 360.0;
        else if (a <= -180.0)
            a += 360.0;
        return a;
    }
}

#endif
