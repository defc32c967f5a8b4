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

#include "thzlab/cir_io.hpp"
#include "thzlab/errors.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "binary CIR container assumes a little-endian host");

std::string thzlab::format_double(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

void thzlab::write_cir_csv(std::ostream &out, std::span<const cir_record> records)
{
    out << "position_id,band,az_deg,el_deg,timestamp_s,bin,re,im\n";
    for (const auto &r : records)
    {
        const std::string prefix = std::to_string(r.position_id) + ',' + r.band_label + ',' + format_double(r.az_deg) + ',' +
                                   format_double(r.el_deg) + ',' + format_double(r.timestamp_s) + ',';
        for (std::size_t k = 0; k < r.samples.size(); ++k)
            out << prefix << k << ',' << format_double(r.samples[k].real()) << ',' << format_double(r.samples[k].imag()) << '\n';
    }
}

void thzlab::write_cir_csv(const std::filesystem::path &path, std::span<const cir_record> records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    write_cir_csv(out, records);
}

namespace
{
    double parse_number(const std::string &s, std::size_t line)
    {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw thzlab::parse_error("CIR CSV line " + std::to_string(line) + ": bad number '" + s + "'");
        return v;
    }
}

std::vector<thzlab::cir_record> thzlab::read_cir_csv(const std::filesystem::path &path, double delay_bin_s)
{
    std::ifstream in(path);
    if (!in)
        throw missing_input_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "position_id,band,az_deg,el_deg,timestamp_s,bin,re,im")
        throw parse_error("CIR CSV " + path.string() + ": unexpected header");

    std::vector<cir_record> out;
    std::size_t line_no = 1;
    std::vector<std::string> cols;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        cols.clear();
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ','))
            cols.push_back(c);
        if (cols.size() != 8)
            throw parse_error("CIR CSV line " + std::to_string(line_no) + ": expected 8 columns");
        const int pos = static_cast<int>(parse_number(cols[0], line_no));
        const double az = parse_number(cols[2], line_no), el = parse_number(cols[3], line_no);
        const double ts = parse_number(cols[4], line_no);
        const auto bin = static_cast<std::size_t>(parse_number(cols[5], line_no));
        const cplx v(parse_number(cols[6], line_no), parse_number(cols[7], line_no));

        const bool same = !out.empty() && out.back().position_id == pos && out.back().band_label == cols[1] &&
                          out.back().az_deg == az && out.back().el_deg == el && out.back().timestamp_s == ts;
        if (!same)
        {
            cir_record r;
            r.position_id = pos;
            r.band_label = cols[1];
            r.az_deg = az;
            r.el_deg = el;
            r.timestamp_s = ts;
            r.delay_bin_s = delay_bin_s;
            out.push_back(std::move(r));
        }
        auto &samples = out.back().samples;
        if (bin != samples.size())
            throw parse_error("CIR CSV line " + std::to_string(line_no) + ": bins out of order");
        samples.push_back(v);
    }
    return out;
}

namespace
{
    template <typename T>
    void put(std::ostream &out, T v)
    {
        out.write(reinterpret_cast<const char *>(&v), sizeof(T));
    }

    template <typename T>
    T get(std::istream &in, const std::string &what)
    {
        T v{};
        if (!in.read(reinterpret_cast<char *>(&v), sizeof(T)))
            throw thzlab::parse_error("CIR container truncated while reading " + what);
        return v;
    }
}

void thzlab::write_cir_binary(const std::filesystem::path &path, const band_config &band, std::span<const cir_record> records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out.write("TZCR", 4);
    put<std::uint32_t>(out, cir_container_version);
    put<double>(out, band.carrier_hz);
    put<double>(out, band.bandwidth_hz);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(band.sample_count));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(band.label.size()));
    out.write(band.label.data(), static_cast<std::streamsize>(band.label.size()));
    for (const auto &r : records)
    {
        if (r.samples.size() != band.sample_count)
            throw validation_error("write_cir_binary: record length differs from sample_count");
        put<std::int32_t>(out, r.position_id);
        put<double>(out, r.az_deg);
        put<double>(out, r.el_deg);
        put<double>(out, r.timestamp_s);
        out.write(reinterpret_cast<const char *>(r.samples.data()),
                  static_cast<std::streamsize>(r.samples.size() * sizeof(cplx)));
    }
}

thzlab::cir_container thzlab::read_cir_binary(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw missing_input_error("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "TZCR", 4) != 0)
        throw parse_error("CIR container " + path.string() + ": bad magic");
    const auto version = get<std::uint32_t>(in, "version");
    if (version != cir_container_version)
        throw parse_error("CIR container " + path.string() + ": unsupported version " + std::to_string(version));

    cir_container c;
    c.band.carrier_hz = get<double>(in, "carrier");
    c.band.bandwidth_hz = get<double>(in, "bandwidth");
    c.band.sample_count = get<std::uint32_t>(in, "sample count");
    const auto count = get<std::uint32_t>(in, "record count");
    const auto label_len = get<std::uint16_t>(in, "label length");
    c.band.label.resize(label_len);
    if (!in.read(c.band.label.data(), label_len))
        throw parse_error("CIR container truncated while reading label");

    c.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i)
    {
        cir_record r;
        r.position_id = get<std::int32_t>(in, "position id");
        r.az_deg = get<double>(in, "azimuth");
        r.el_deg = get<double>(in, "elevation");
        r.timestamp_s = get<double>(in, "timestamp");
        r.band_label = c.band.label;
        r.delay_bin_s = c.band.delay_bin_s();
        r.samples.resize(c.band.sample_count);
        if (!in.read(reinterpret_cast<char *>(r.samples.data()),
                     static_cast<std::streamsize>(r.samples.size() * sizeof(cplx))))
            throw parse_error("CIR container truncated in record " + std::to_string(i));
        c.records.push_back(std::move(r));
    }
    return c;
}
