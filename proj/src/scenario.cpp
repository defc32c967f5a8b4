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

#include "thzlab/scenario.hpp"
#include "thzlab/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

using json = nlohmann::json;

namespace
{
    using namespace thzlab;

    std::size_t steps_in(double start, double stop, double step, const char *axis)
    {
        if (stop == start)
            return 1;
        if (!(step > 0.0) || stop < start)
            throw validation_error(std::string("scan.") + axis + "_step: must be positive with stop >= start");
        const double ratio = (stop - start) / step;
        const double rounded = std::round(ratio);
        if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded))
            throw validation_error(std::string("scan.") + axis + "_step: does not divide the range evenly");
        return static_cast<std::size_t>(rounded) + 1;
    }

    // --- JSON helpers: every access names the field path on failure ---

    const json &field(const json &j, const std::string &key, const std::string &where)
    {
        if (!j.is_object() || !j.contains(key))
            throw parse_error("missing field '" + where + key + "'");
        return j.at(key);
    }

    double number(const json &j, const std::string &key, const std::string &where)
    {
        const json &v = field(j, key, where);
        if (!v.is_number())
            throw parse_error("field '" + where + key + "' must be a number");
        return v.get<double>();
    }

    double number_or(const json &j, const std::string &key, const std::string &where, double fallback)
    {
        return (j.is_object() && j.contains(key)) ? number(j, key, where) : fallback;
    }

    long long integer(const json &j, const std::string &key, const std::string &where)
    {
        const json &v = field(j, key, where);
        if (!v.is_number_integer())
            throw parse_error("field '" + where + key + "' must be an integer");
        return v.get<long long>();
    }

    vec3 point(const json &j, const std::string &key, const std::string &where)
    {
        const json &v = field(j, key, where);
        if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json &e)
                                                            { return e.is_number(); }))
            throw parse_error("field '" + where + key + "' must be an array of 3 numbers");
        return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    }

    antenna_pattern parse_antenna(const json &j, const std::string &where)
    {
        antenna_pattern a;
        a.boresight_gain_dbi = number(j, "gain_dbi", where);
        a.hpbw_deg = number(j, "hpbw_deg", where);
        a.sidelobe_db = number_or(j, "sidelobe_db", where, -30.0);
        return a;
    }

    material parse_material(const json &j, const std::string &where)
    {
        const json &v = field(j, "material", where);
        if (!v.is_string())
            throw parse_error("field '" + where + "material' must be a string");
        const auto s = v.get<std::string>();
        if (s == "metal")
            return material::metal;
        if (s == "concrete")
            return material::concrete;
        throw validation_error("field '" + where + "material': unknown material '" + s + "'");
    }

    scenario parse(const json &doc)
    {
        if (!doc.is_object())
            throw parse_error("scenario document must be a JSON object");

        scenario s;
        const json &room = field(doc, "room", "");
        s.room.length = number(room, "length", "room.");
        s.room.width = number(room, "width", "room.");
        s.room.height = number(room, "height", "room.");

        if (doc.contains("objects"))
        {
            const json &objs = doc.at("objects");
            if (!objs.is_array())
                throw parse_error("field 'objects' must be an array");
            for (std::size_t i = 0; i < objs.size(); ++i)
            {
                const std::string where = "objects[" + std::to_string(i) + "].";
                const json &o = objs[i];
                scatterer_panel p;
                p.id = o.contains("id") ? o.at("id").get<std::string>() : "panel-" + std::to_string(i);
                p.kind = o.contains("kind") ? o.at("kind").get<std::string>() : "";
                p.mat = parse_material(o, where);
                p.center = point(o, "center", where);
                p.normal = point(o, "normal", where);
                const json &he = field(o, "half_extents", where);
                if (!he.is_array() || he.size() != 2 || !he[0].is_number() || !he[1].is_number())
                    throw parse_error("field '" + where + "half_extents' must be [half_width, half_height]");
                p.half_width = he[0].get<double>();
                p.half_height = he[1].get<double>();
                p.scattering_loss_db = number(o, "scattering_loss_db", where);
                p.phase_deg = number_or(o, "phase_deg", where, 0.0);
                s.objects.push_back(std::move(p));
            }
        }

        const json &tx = field(doc, "tx", "");
        if (!tx.is_object())
            throw validation_error("field 'tx': exactly one transmitter object is required");
        s.tx.position_id = 0;
        s.tx.position = point(tx, "position", "tx.");
        s.tx_antenna = parse_antenna(field(tx, "antenna", "tx."), "tx.antenna.");

        const json &rx = field(doc, "rx", "");
        if (!rx.is_array())
            throw parse_error("field 'rx' must be an array");
        for (std::size_t i = 0; i < rx.size(); ++i)
        {
            const std::string where = "rx[" + std::to_string(i) + "].";
            placement p;
            p.position_id = static_cast<int>(integer(rx[i], "id", where));
            p.position = point(rx[i], "position", where);
            s.rx_list.push_back(p);
        }
        s.rx_antenna = parse_antenna(field(doc, "rx_antenna", ""), "rx_antenna.");

        const json &bands = field(doc, "bands", "");
        if (!bands.is_array())
            throw parse_error("field 'bands' must be an array");
        for (std::size_t i = 0; i < bands.size(); ++i)
        {
            const std::string where = "bands[" + std::to_string(i) + "].";
            band_config b;
            const json &label = field(bands[i], "label", where);
            b.label = label.is_string() ? label.get<std::string>() : label.dump();
            b.carrier_hz = number(bands[i], "carrier_hz", where);
            b.bandwidth_hz = number(bands[i], "bandwidth_hz", where);
            const long long n = integer(bands[i], "sample_count", where);
            if (n < 1)
                throw validation_error("field '" + where + "sample_count': must be >= 1");
            b.sample_count = static_cast<std::size_t>(n);
            s.bands.push_back(std::move(b));
        }

        const json &scan = field(doc, "scan", "");
        s.scan.az_start = number(scan, "az_start", "scan.");
        s.scan.az_stop = number(scan, "az_stop", "scan.");
        s.scan.az_step = number(scan, "az_step", "scan.");
        s.scan.el_start = number(scan, "el_start", "scan.");
        s.scan.el_stop = number(scan, "el_stop", "scan.");
        s.scan.el_step = number(scan, "el_step", "scan.");

        if (doc.contains("drift"))
        {
            const json &d = doc.at("drift");
            s.drift.rate_ns_per_hour = number_or(d, "rate_ns_per_hour", "drift.", 0.0);
            s.drift.offset_at_epoch_ns = number_or(d, "offset_at_epoch_ns", "drift.", 0.0);
        }
        if (doc.contains("noise"))
        {
            const json &n = doc.at("noise");
            s.noise.enabled = n.value("enabled", true);
            s.noise.floor_db = number_or(n, "floor_db", "noise.", -160.0);
        }
        if (doc.contains("averaging"))
            s.averaging_count = static_cast<int>(integer(doc, "averaging", ""));
        if (doc.contains("seed"))
        {
            const long long seed = integer(doc, "seed", "");
            if (seed < 0)
                throw validation_error("field 'seed': must be non-negative");
            s.rng_seed = static_cast<std::uint64_t>(seed);
        }

        if (doc.contains("probe"))
        {
            const json &p = doc.at("probe");
            const std::string mode = p.value("mode", std::string("equivalent"));
            if (mode == "equivalent")
                s.probe.mode = probe_mode::equivalent;
            else if (mode == "correlator")
                s.probe.mode = probe_mode::correlator;
            else
                throw validation_error("field 'probe.mode': expected 'equivalent' or 'correlator'");
            if (p.contains("zc_root"))
                s.probe.zc_root = static_cast<int>(integer(p, "zc_root", "probe."));
            if (p.contains("zc_length"))
                s.probe.zc_length = static_cast<int>(integer(p, "zc_length", "probe."));
        }
        if (doc.contains("campaign"))
        {
            const json &c = doc.at("campaign");
            s.campaign.start_s = number_or(c, "start_s", "campaign.", s.campaign.start_s);
            s.campaign.position_duration_s = number_or(c, "position_duration_s", "campaign.", s.campaign.position_duration_s);
        }
        if (doc.contains("system_response"))
        {
            const json &r = doc.at("system_response");
            s.system_response.enabled = r.value("enabled", false);
            s.system_response.ripple_depth = number_or(r, "ripple_depth", "system_response.", s.system_response.ripple_depth);
            s.system_response.ripple_period_bins = number_or(r, "ripple_period_bins", "system_response.", s.system_response.ripple_period_bins);
        }
        if (doc.contains("processing"))
        {
            const json &p = doc.at("processing");
            auto &o = s.processing;
            o.detection_margin_db = number_or(p, "detection_margin_db", "processing.", o.detection_margin_db);
            o.resolution_bins = number_or(p, "resolution_bins", "processing.", o.resolution_bins);
            o.dedup_margin_db = number_or(p, "dedup_margin_db", "processing.", o.dedup_margin_db);
            o.mcd_threshold = number_or(p, "mcd_threshold", "processing.", o.mcd_threshold);
            o.mcd_zeta = number_or(p, "mcd_zeta", "processing.", o.mcd_zeta);
            o.dynamic_range_db = number_or(p, "dynamic_range_db", "processing.", o.dynamic_range_db);
            if (p.contains("max_components_per_record"))
                o.max_components_per_record = static_cast<std::size_t>(integer(p, "max_components_per_record", "processing."));
        }
        return s;
    }
}

std::string_view thzlab::to_string(material m)
{
    return m == material::metal ? "metal" : "concrete";
}

thzlab::vec3 thzlab::scatterer_panel::width_axis() const
{
    const vec3 up{0.0, 0.0, 1.0};
    const vec3 w = cross(up, normal);
    if (norm(w) < 1e-9) // horizontal panel
        return {1.0, 0.0, 0.0};
    return normalized(w);
}

thzlab::vec3 thzlab::scatterer_panel::height_axis() const
{
    return normalized(cross(normal, width_axis()));
}

bool thzlab::scatterer_panel::contains(const vec3 &p, double tol) const
{
    const vec3 r = p - center;
    return std::abs(dot(r, normal)) <= tol + 1e-9 &&
           std::abs(dot(r, width_axis())) <= half_width + tol &&
           std::abs(dot(r, height_axis())) <= half_height + tol;
}

bool thzlab::scatterer_panel::blocks(const vec3 &a, const vec3 &b) const
{
    const vec3 ab = b - a;
    const double denom = dot(ab, normal);
    if (std::abs(denom) < 1e-12)
        return false;
    const double t = dot(center - a, normal) / denom;
    if (t <= 1e-9 || t >= 1.0 - 1e-9)
        return false;
    const vec3 r = a + ab * t - center;
    return std::abs(dot(r, width_axis())) <= half_width && std::abs(dot(r, height_axis())) <= half_height;
}

double thzlab::antenna_gain(const antenna_pattern &pattern, double offset_deg)
{
    const double x = offset_deg / pattern.hpbw_deg;
    const double g = pattern.boresight_gain_dbi - 12.0 * x * x;
    return std::max(g, pattern.boresight_gain_dbi + pattern.sidelobe_db);
}

thzlab::band_constants thzlab::constants_of(const band_config &band)
{
    band_constants c;
    c.delay_bin_s = band.delay_bin_s();
    c.max_delay_s = static_cast<double>(band.sample_count) * c.delay_bin_s;
    c.max_path_length_m = c.max_delay_s * speed_of_light;
    c.resolution_m = c.delay_bin_s * speed_of_light;
    return c;
}

std::size_t thzlab::scan_grid::n_az() const { return steps_in(az_start, az_stop, az_step, "az"); }
std::size_t thzlab::scan_grid::n_el() const { return steps_in(el_start, el_stop, el_step, "el"); }

bool thzlab::scan_grid::az_wraps() const
{
    return n_az() > 2 && std::abs(static_cast<double>(n_az()) * az_step - 360.0) < 1e-9;
}

std::size_t thzlab::scan_grid::nearest(const vec3 &dir) const
{
    const auto grid = build_direction_grid(*this);
    std::size_t best = 0;
    double best_dot = -2.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        const double d = dot(unit_from_az_el(grid[i].az_deg, grid[i].el_deg), dir);
        if (d > best_dot + 1e-15)
        {
            best_dot = d;
            best = i;
        }
    }
    return best;
}

std::vector<thzlab::direction> thzlab::build_direction_grid(const scan_grid &scan)
{
    const std::size_t naz = scan.n_az(), nel = scan.n_el();
    std::vector<direction> out;
    out.reserve(naz * nel);
    for (std::size_t e = 0; e < nel; ++e)
        for (std::size_t a = 0; a < naz; ++a)
            out.push_back({scan.az_start + static_cast<double>(a) * scan.az_step,
                           scan.el_start + static_cast<double>(e) * scan.el_step});
    return out;
}

bool thzlab::room_extent::contains(const vec3 &p) const
{
    return p.x >= 0.0 && p.x <= length && p.y >= 0.0 && p.y <= width && p.z >= 0.0 && p.z <= height;
}

const thzlab::placement &thzlab::scenario::rx(int position_id) const
{
    for (const auto &r : rx_list)
        if (r.position_id == position_id)
            return r;
    throw validation_error("unknown rx position id " + std::to_string(position_id));
}

const thzlab::band_config &thzlab::scenario::band(std::string_view label) const
{
    for (const auto &b : bands)
        if (b.label == label)
            return b;
    throw validation_error("unknown band '" + std::string(label) + "'");
}

void thzlab::validate(const scenario &s)
{
    if (!(s.room.length > 0.0 && s.room.width > 0.0 && s.room.height > 0.0))
        throw validation_error("room: length, width and height must be positive");

    for (std::size_t i = 0; i < s.objects.size(); ++i)
    {
        const auto &p = s.objects[i];
        const std::string where = "objects[" + std::to_string(i) + "]";
        if (std::abs(norm(p.normal) - 1.0) > 1e-6)
            throw validation_error(where + ".normal: must be a unit vector");
        if (!(p.half_width > 0.0 && p.half_height > 0.0))
            throw validation_error(where + ".half_extents: must be positive");
        if (!(p.scattering_loss_db >= 0.0))
            throw validation_error(where + ".scattering_loss_db: must be >= 0");
        if (!s.room.contains(p.center))
            throw validation_error(where + ".center: outside the room extent");
    }

    if (!s.room.contains(s.tx.position))
        throw validation_error("tx.position: outside the room extent");
    if (s.rx_list.empty())
        throw validation_error("rx: at least one receiver position is required");
    std::set<int> ids;
    for (std::size_t i = 0; i < s.rx_list.size(); ++i)
    {
        const auto &r = s.rx_list[i];
        const std::string where = "rx[" + std::to_string(i) + "]";
        if (r.position_id < 1)
            throw validation_error(where + ".id: must be >= 1");
        if (!ids.insert(r.position_id).second)
            throw validation_error(where + ".id: duplicate position id");
        if (!s.room.contains(r.position))
            throw validation_error(where + ".position: outside the room extent");
    }

    for (const auto *a : {&s.tx_antenna, &s.rx_antenna})
    {
        const char *name = a == &s.tx_antenna ? "tx.antenna" : "rx_antenna";
        if (!(a->hpbw_deg > 0.0))
            throw validation_error(std::string(name) + ".hpbw_deg: must be positive");
        if (!(a->sidelobe_db <= 0.0))
            throw validation_error(std::string(name) + ".sidelobe_db: must be <= 0");
    }

    if (s.bands.empty())
        throw validation_error("bands: at least one band is required");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < s.bands.size(); ++i)
    {
        const auto &b = s.bands[i];
        const std::string where = "bands[" + std::to_string(i) + "]";
        if (b.label.empty() || !labels.insert(b.label).second)
            throw validation_error(where + ".label: must be non-empty and unique");
        if (!(b.carrier_hz > 0.0))
            throw validation_error(where + ".carrier_hz: must be positive");
        if (!(b.bandwidth_hz > 0.0))
            throw validation_error(where + ".bandwidth_hz: must be positive");
        if (b.sample_count < 1)
            throw validation_error(where + ".sample_count: must be >= 1");
    }

    (void)s.scan.n_az();
    (void)s.scan.n_el();

    if (s.averaging_count < 1)
        throw validation_error("averaging: must be >= 1");
    if (s.probe.zc_length < 1 || s.probe.zc_length % 2 == 0)
        throw validation_error("probe.zc_length: must be odd");
    if (std::gcd(s.probe.zc_root, s.probe.zc_length) != 1)
        throw validation_error("probe.zc_root: must be coprime with zc_length");
    if (!(s.campaign.position_duration_s > 0.0) || !(s.campaign.start_s >= 0.0))
        throw validation_error("campaign: position_duration_s must be positive and start_s >= 0");
    if (s.system_response.enabled && !(std::abs(s.system_response.ripple_depth) < 1.0))
        throw validation_error("system_response.ripple_depth: must be within (-1, 1)");
    if (!(s.processing.mcd_threshold > 0.0) || !(s.processing.mcd_zeta > 0.0) || !(s.processing.resolution_bins >= 0.0))
        throw validation_error("processing: mcd_threshold and mcd_zeta must be positive");
}

thzlab::scenario thzlab::scenario_from_json(std::string_view text)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::parse_error &e)
    {
        throw parse_error(std::string("scenario: ") + e.what());
    }
    scenario s;
    try
    {
        s = parse(doc);
    }
    catch (const json::exception &e)
    {
        throw parse_error(std::string("scenario: ") + e.what());
    }
    validate(s);
    return s;
}

thzlab::scenario thzlab::load_scenario(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw missing_input_error("cannot open scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return scenario_from_json(buf.str());
}

double thzlab::los_delay(const vec3 &a, const vec3 &b)
{
    return distance(a, b) / speed_of_light;
}

double thzlab::los_delay(const placement &tx, const placement &rx)
{
    return los_delay(tx.position, rx.position);
}
