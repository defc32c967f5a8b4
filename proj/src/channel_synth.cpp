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

#include "thzlab/channel_synth.hpp"
#include "thzlab/bandlimited.hpp"
#include "thzlab/errors.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numbers>
#include <thread>

using std::numbers::pi;

namespace
{
    using namespace thzlab;

    cplx channel_gain(double length_m, double loss_db, double phase_deg, double frequency_hz)
    {
        const double amp = std::pow(10.0, -(fspl(length_m, frequency_hz) + loss_db) / 20.0);
        const double cycles = frequency_hz * length_m / speed_of_light;
        const double phase = -2.0 * pi * (cycles - std::floor(cycles)) + phase_deg * deg2rad;
        return std::polar(amp, phase);
    }

    bool obstructed(std::span<const scatterer_panel> panels, const vec3 &a, const vec3 &b,
                    std::optional<std::size_t> skip = std::nullopt)
    {
        for (std::size_t i = 0; i < panels.size(); ++i)
            if ((!skip || *skip != i) && panels[i].blocks(a, b))
                return true;
        return false;
    }

    std::size_t direction_index(const scan_grid &scan, const direction &steer)
    {
        const auto grid = build_direction_grid(scan);
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (std::abs(wrap_deg(grid[i].az_deg - steer.az_deg)) < 1e-9 && std::abs(grid[i].el_deg - steer.el_deg) < 1e-9)
                return i;
        throw validation_error("steering direction (" + std::to_string(steer.az_deg) + ", " +
                               std::to_string(steer.el_deg) + ") is not on the scan grid");
    }
}

double thzlab::fspl(double distance_m, double frequency_hz)
{
    if (!(distance_m > 0.0) || !(frequency_hz > 0.0))
        throw validation_error("fspl: distance and frequency must be positive");
    return -20.0 * std::log10(speed_of_light / (4.0 * pi * frequency_hz * distance_m));
}

std::vector<thzlab::propagation_path> thzlab::trace_paths(std::span<const scatterer_panel> panels,
                                                          const vec3 &tx, const vec3 &rx,
                                                          const band_config &band)
{
    const double max_length = constants_of(band).max_path_length_m;
    const double d = distance(tx, rx);
    if (d < 1e-9)
        throw validation_error("trace_paths: transmitter and receiver are co-located");

    std::vector<propagation_path> paths;
    if (!obstructed(panels, tx, rx) && d <= max_length)
    {
        propagation_path p;
        p.kind = path_kind::los;
        p.interaction_point = rx;
        p.length_m = d;
        p.delay_s = d / speed_of_light;
        az_el_from_vector(tx - rx, p.aoa_az_deg, p.aoa_el_deg);
        az_el_from_vector(rx - tx, p.aod_az_deg, p.aod_el_deg);
        p.gain_linear = channel_gain(d, 0.0, 0.0, band.carrier_hz);
        paths.push_back(p);
    }

    for (std::size_t i = 0; i < panels.size(); ++i)
    {
        const auto &panel = panels[i];
        const double st = dot(tx - panel.center, panel.normal);
        const double sr = dot(rx - panel.center, panel.normal);
        if (st * sr <= 0.0) // both terminals must face the same side
            continue;
        const vec3 image = tx - panel.normal * (2.0 * st);
        const vec3 ray = image - rx;
        const double t = dot(panel.center - rx, panel.normal) / dot(ray, panel.normal);
        const vec3 specular = rx + ray * t;
        if (!panel.contains(specular, 1e-9))
            continue;
        if (obstructed(panels, tx, specular, i) || obstructed(panels, specular, rx, i))
            continue;
        const double length = norm(ray);
        if (length > max_length)
            continue;

        propagation_path p;
        p.kind = path_kind::once_scattered;
        p.scatterer_index = i;
        p.interaction_point = specular;
        p.length_m = length;
        p.delay_s = length / speed_of_light;
        az_el_from_vector(specular - rx, p.aoa_az_deg, p.aoa_el_deg);
        az_el_from_vector(specular - tx, p.aod_az_deg, p.aod_el_deg);
        p.scattering_loss_db = panel.scattering_loss_db;
        p.gain_linear = channel_gain(length, panel.scattering_loss_db, panel.phase_deg, band.carrier_hz);
        paths.push_back(p);
    }
    return paths;
}

std::vector<thzlab::propagation_path> thzlab::trace_paths(const scenario &s, int rx_id, const band_config &band)
{
    return trace_paths(s.objects, s.tx.position, s.rx(rx_id).position, band);
}

thzlab::vec3 thzlab::tx_boresight(const scenario &s, int rx_id)
{
    return normalized(s.rx(rx_id).position - s.tx.position);
}

thzlab::cvec thzlab::system_response_spectrum(const system_response_config &cfg, std::size_t sample_count)
{
    cvec S(sample_count, cplx(1.0, 0.0));
    if (!cfg.enabled)
        return S;
    for (std::size_t m = 0; m < sample_count; ++m)
        S[m] = 1.0 + cfg.ripple_depth * std::cos(2.0 * pi * frequency_index(m, sample_count) / cfg.ripple_period_bins);
    return S;
}

double thzlab::path_power_db(const propagation_path &p, const link_antennas &antennas, const direction &steer)
{
    const double g_tx = antenna_gain(antennas.tx, angle_between_deg(antennas.tx_boresight, unit_from_az_el(p.aod_az_deg, p.aod_el_deg)));
    const double g_rx = antenna_gain(antennas.rx, angle_between_deg(unit_from_az_el(steer.az_deg, steer.el_deg),
                                                                    unit_from_az_el(p.aoa_az_deg, p.aoa_el_deg)));
    return 20.0 * std::log10(std::abs(p.gain_linear)) + g_tx + g_rx;
}

thzlab::cvec thzlab::synthesize_cir(std::span<const propagation_path> paths, const band_config &band,
                                    const link_antennas &antennas, const direction &steer,
                                    double extra_delay_s, std::span<const cplx> response)
{
    const std::size_t K = band.sample_count;
    cvec H(K);
    for (const auto &p : paths)
    {
        const double antenna_db = path_power_db(p, antennas, steer) - 20.0 * std::log10(std::abs(p.gain_linear));
        const cplx amp = p.gain_linear * std::pow(10.0, antenna_db / 20.0);
        add_delayed_tone(H, amp, (p.delay_s + extra_delay_s) / band.delay_bin_s());
    }
    if (!response.empty())
    {
        if (response.size() != K)
            throw validation_error("synthesize_cir: system response length differs from sample_count");
        for (std::size_t m = 0; m < K; ++m)
            H[m] *= response[m];
    }
    return ifft(H);
}

namespace
{
    // Runs the probe chain on a noise-free CIR: noise and averaging per the scenario
    cvec sound(const scenario &s, const band_config &band, const cvec &clean, std::mt19937_64 &rng)
    {
        const double floor_db = s.noise.enabled ? s.noise.floor_db : -INFINITY;
        if (s.probe.mode == probe_mode::equivalent)
            return add_noise(clean, floor_db, rng);

        // Explicit chain: periodic ZC through the channel, per-shot receiver noise, correlation, averaging
        const zc_sequence zc = generate_zc(s.probe.zc_root, s.probe.zc_length);
        const std::size_t N = zc.samples.size();
        const std::size_t K = band.sample_count;
        cvec folded(N);
        for (std::size_t k = 0; k < K; ++k)
            folded[k % N] += clean[k];
        cvec Hf = fft(folded);
        const cvec Z = fft(zc.samples);
        for (std::size_t m = 0; m < N; ++m)
            Hf[m] *= Z[m];
        const cvec received = ifft(Hf);

        const double shot_noise_db = floor_db + 10.0 * std::log10(static_cast<double>(s.averaging_count)) +
                                     10.0 * std::log10(static_cast<double>(N));
        const int shots = std::isfinite(floor_db) ? s.averaging_count : 1;
        std::vector<cvec> cirs;
        cirs.reserve(static_cast<std::size_t>(shots));
        for (int i = 0; i < shots; ++i)
        {
            const cvec noisy = add_noise(received, shot_noise_db, rng);
            cvec cir = correlate(noisy, zc);
            cir.resize(K); // truncate or zero-pad to the record length
            cirs.push_back(std::move(cir));
        }
        return average_cirs(cirs);
    }
}

thzlab::cir_record thzlab::synthesize_observation(const scenario &s, int rx_id, std::size_t band_index,
                                                  const direction &steer, double timestamp_s)
{
    const band_config &band = s.bands.at(band_index);
    const std::size_t dir_index = direction_index(s.scan, steer);
    const auto grid = build_direction_grid(s.scan);

    const auto paths = trace_paths(s, rx_id, band);
    const link_antennas antennas{s.tx_antenna, tx_boresight(s, rx_id), s.rx_antenna};
    const cvec response = system_response_spectrum(s.system_response, band.sample_count);
    const cvec clean = synthesize_cir(paths, band, antennas, grid[dir_index], s.drift.offset_s(timestamp_s), response);

    std::mt19937_64 rng(derive_seed(s.rng_seed, {static_cast<std::uint64_t>(rx_id), band_index, dir_index,
                                                 std::bit_cast<std::uint64_t>(timestamp_s)}));
    cir_record rec;
    rec.position_id = rx_id;
    rec.band_index = band_index;
    rec.band_label = band.label;
    rec.az_deg = grid[dir_index].az_deg;
    rec.el_deg = grid[dir_index].el_deg;
    rec.timestamp_s = timestamp_s;
    rec.delay_bin_s = band.delay_bin_s();
    rec.samples = sound(s, band, clean, rng);
    return rec;
}

thzlab::cir_record thzlab::direct_connection_record(const scenario &s, std::size_t band_index)
{
    const band_config &band = s.bands.at(band_index);
    const std::size_t K = band.sample_count;
    cvec H(K);
    add_delayed_tone(H, cplx(1.0, 0.0), s.drift.offset_s(0.0) / band.delay_bin_s());
    const cvec S = system_response_spectrum(s.system_response, K);
    for (std::size_t m = 0; m < K; ++m)
        H[m] *= S[m];

    std::mt19937_64 rng(derive_seed(s.rng_seed, {0ULL, band_index, 0xdc0ULL}));
    cir_record rec;
    rec.position_id = 0;
    rec.band_index = band_index;
    rec.band_label = band.label;
    rec.timestamp_s = 0.0;
    rec.delay_bin_s = band.delay_bin_s();
    rec.samples = add_noise(ifft(H), s.noise.enabled ? s.noise.floor_db : -INFINITY, rng);
    return rec;
}

double thzlab::campaign_timestamp(const scenario &s, std::size_t rx_order, std::size_t direction_index)
{
    const double dwell = s.campaign.position_duration_s / static_cast<double>(s.scan.size());
    return s.campaign.start_s + static_cast<double>(rx_order) * s.campaign.position_duration_s +
           static_cast<double>(direction_index) * dwell;
}

std::vector<thzlab::cir_record> thzlab::run_campaign(const scenario &s, std::size_t band_index, unsigned threads)
{
    const band_config &band = s.bands.at(band_index);
    const auto grid = build_direction_grid(s.scan);
    const std::size_t n_dir = grid.size();
    const std::size_t total = s.rx_list.size() * n_dir;
    const cvec response = system_response_spectrum(s.system_response, band.sample_count);

    // Geometry is shared by all directions of a position
    std::vector<std::vector<propagation_path>> paths;
    std::vector<link_antennas> antennas;
    for (const auto &rx : s.rx_list)
    {
        paths.push_back(trace_paths(s, rx.position_id, band));
        antennas.push_back({s.tx_antenna, tx_boresight(s, rx.position_id), s.rx_antenna});
    }

    std::vector<cir_record> out(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&]
    {
        for (std::size_t idx = next++; idx < total; idx = next++)
        {
            const std::size_t i = idx / n_dir, j = idx % n_dir;
            const int rx_id = s.rx_list[i].position_id;
            const double t = campaign_timestamp(s, i, j);
            const cvec clean = synthesize_cir(paths[i], band, antennas[i], grid[j], s.drift.offset_s(t), response);
            std::mt19937_64 rng(derive_seed(s.rng_seed, {static_cast<std::uint64_t>(rx_id), band_index, j,
                                                         std::bit_cast<std::uint64_t>(t)}));
            cir_record &rec = out[idx];
            rec.position_id = rx_id;
            rec.band_index = band_index;
            rec.band_label = band.label;
            rec.az_deg = grid[j].az_deg;
            rec.el_deg = grid[j].el_deg;
            rec.timestamp_s = t;
            rec.delay_bin_s = band.delay_bin_s();
            rec.samples = sound(s, band, clean, rng);
        }
    };

    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(total, 1)));
    if (threads <= 1)
        worker();
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }
    return out;
}
