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

#include "thzlab/pipeline.hpp"
#include "thzlab/channel_synth.hpp"
#include "thzlab/cir_io.hpp"
#include "thzlab/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace
{
    using namespace thzlab;

    constexpr int schema_version = 1;

    unsigned worker_count(unsigned requested, std::size_t jobs)
    {
        unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
        return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
    }

    void write_text(const fs::path &path, const std::string &text)
    {
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw validation_error("cannot write " + path.string());
        out << text;
        if (!out)
            throw validation_error("write failed for " + path.string());
    }

    std::string num(double v) { return format_double(report_value(v)); }
    std::string exact(double v) { return format_double(v); }

    // ---- minimal CSV reading for the stage files ----

    struct csv_table
    {
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;

        std::size_t col(const std::string &name) const
        {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end())
                throw parse_error("missing column " + name);
            return static_cast<std::size_t>(it - header.begin());
        }
    };

    std::vector<std::string> split(const std::string &line)
    {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ','))
            out.push_back(cell);
        if (!line.empty() && line.back() == ',')
            out.emplace_back();
        return out;
    }

    csv_table read_csv(const fs::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw missing_input_error("missing stage input " + path.string());
        csv_table t;
        std::string line;
        if (!std::getline(in, line))
            throw parse_error(path.string() + ": empty file");
        t.header = split(line);
        while (std::getline(in, line))
        {
            if (line.empty())
                continue;
            t.rows.push_back(split(line));
            if (t.rows.back().size() != t.header.size())
                throw parse_error(path.string() + ": ragged row");
        }
        return t;
    }

    double to_d(const std::string &s)
    {
        if (s == "nan")
            return std::nan("");
        try
        {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size())
                throw parse_error("bad number '" + s + "'");
            return v;
        }
        catch (const std::logic_error &)
        {
            throw parse_error("bad number '" + s + "'");
        }
    }

    // ---- band directories ----

    fs::path band_dir(const fs::path &out, const band_config &b) { return out / b.label; }

    void write_records(const fs::path &dir, const std::string &stem, const band_config &band,
                       std::span<const cir_record> records, cir_format fmt)
    {
        fs::create_directories(dir);
        if (fmt != cir_format::csv)
            write_cir_binary(dir / (stem + ".bin"), band, records);
        if (fmt != cir_format::binary)
            write_cir_csv(dir / (stem + ".csv"), records);
    }

    std::vector<cir_record> read_records(const fs::path &dir, const std::string &stem, const band_config &band,
                                         std::size_t band_index)
    {
        std::vector<cir_record> recs;
        if (fs::exists(dir / (stem + ".bin")))
        {
            cir_container c = read_cir_binary(dir / (stem + ".bin"));
            if (c.band.sample_count != band.sample_count || c.band.bandwidth_hz != band.bandwidth_hz)
                throw validation_error(dir.string() + ": stored band parameters differ from the scenario");
            recs = std::move(c.records);
        }
        else if (fs::exists(dir / (stem + ".csv")))
            recs = read_cir_csv(dir / (stem + ".csv"), band.delay_bin_s());
        else
            throw missing_input_error("missing stage input " + (dir / stem).string() + ".{bin,csv}; run synth first");
        for (auto &r : recs)
        {
            r.band_index = band_index;
            r.band_label = band.label;
            r.delay_bin_s = band.delay_bin_s();
        }
        return recs;
    }

    // ---- stage files ----

    std::string drift_csv(std::span<const drift_sample> samples)
    {
        std::string s = "t_s,drift_ns\n";
        for (const auto &d : samples)
            s += exact(d.t_s) + "," + exact(d.drift_s * 1e9) + "\n";
        return s;
    }

    std::vector<drift_sample> read_drift(const fs::path &path)
    {
        const csv_table t = read_csv(path);
        const std::size_t ct = t.col("t_s"), cd = t.col("drift_ns");
        std::vector<drift_sample> out;
        for (const auto &r : t.rows)
            out.push_back({to_d(r[ct]), to_d(r[cd]) * 1e-9});
        return out;
    }

    std::optional<drift_model> model_of(std::span<const drift_sample> samples)
    {
        if (samples.empty())
            return std::nullopt;
        if (samples.size() == 1)
        {
            // A single reference record: constant offset
            const auto &d = samples.front();
            return drift_model({d, {d.t_s + 1.0, d.drift_s}});
        }
        return drift_model(std::vector<drift_sample>(samples.begin(), samples.end()));
    }

    std::string mpc_csv(const std::string &band, std::span<const position_result> positions)
    {
        std::string s = "position_id,band,delay_ns,power_db,aoa_az_deg,aoa_el_deg,cluster_id,"
                        "gain_re,gain_im,direction_index,refined,refined_az_deg,refined_el_deg,misalignment_db\n";
        for (const auto &p : positions)
            for (std::size_t c = 0; c < p.clusters.size(); ++c)
                for (const auto &m : p.clusters[c].members)
                    s += std::to_string(m.position_id) + "," + band + "," + exact(m.delay_s * 1e9) + "," + exact(m.power_db) + "," +
                         exact(m.aoa_az_deg) + "," + exact(m.aoa_el_deg) + "," + std::to_string(c) + "," +
                         exact(m.gain.real()) + "," + exact(m.gain.imag()) + "," + std::to_string(m.direction_index) + "," +
                         (m.refined ? "1" : "0") + "," + exact(m.refined_az_deg) + "," + exact(m.refined_el_deg) + "," +
                         exact(m.misalignment_db) + "\n";
        return s;
    }

    std::vector<position_result> read_mpcs(const fs::path &path, const scenario &s)
    {
        const csv_table t = read_csv(path);
        const std::size_t cp = t.col("position_id"), cd = t.col("delay_ns"), cpw = t.col("power_db"), ca = t.col("aoa_az_deg"),
                          ce = t.col("aoa_el_deg"), cc = t.col("cluster_id"), cre = t.col("gain_re"), cim = t.col("gain_im"),
                          cdi = t.col("direction_index"), crf = t.col("refined"), cra = t.col("refined_az_deg"),
                          cre2 = t.col("refined_el_deg"), cmis = t.col("misalignment_db");

        std::map<int, std::map<std::size_t, cluster>> grouped;
        for (const auto &r : t.rows)
        {
            mpc m;
            m.position_id = std::stoi(r[cp]);
            m.delay_s = to_d(r[cd]) * 1e-9;
            m.power_db = to_d(r[cpw]);
            m.aoa_az_deg = to_d(r[ca]);
            m.aoa_el_deg = to_d(r[ce]);
            m.gain = {to_d(r[cre]), to_d(r[cim])};
            m.direction_index = static_cast<std::size_t>(std::stoul(r[cdi]));
            m.refined = r[crf] == "1";
            m.refined_az_deg = to_d(r[cra]);
            m.refined_el_deg = to_d(r[cre2]);
            m.misalignment_db = to_d(r[cmis]);
            grouped[m.position_id][static_cast<std::size_t>(std::stoul(r[cc]))].members.push_back(m);
        }

        std::vector<position_result> out;
        for (const auto &rx : s.rx_list)
        {
            position_result p;
            p.position_id = rx.position_id;
            if (auto it = grouped.find(rx.position_id); it != grouped.end())
                for (auto &[id, c] : it->second)
                {
                    update_cluster_stats(c);
                    for (const auto &m : c.members)
                        p.mpcs.push_back(m);
                    p.clusters.push_back(std::move(c));
                }
            out.push_back(std::move(p));
        }
        return out;
    }

    std::string clusters_csv(const scenario &s, const band_config &band, std::span<const position_result> positions)
    {
        std::string out = "position_id,band,cluster_id,n_mpcs,power_db,delay_ns,az_deg,el_deg,cds_ns,casa_deg,cesa_deg,los\n";
        for (const auto &p : positions)
            for (std::size_t c = 0; c < p.clusters.size(); ++c)
            {
                const cluster &k = p.clusters[c];
                out += std::to_string(p.position_id) + "," + band.label + "," + std::to_string(c) + "," +
                       std::to_string(k.members.size()) + "," + exact(10.0 * std::log10(k.power_linear)) + "," +
                       exact(k.delay_s * 1e9) + "," + exact(k.az_deg) + "," + exact(k.el_deg) + "," + exact(k.cds_s * 1e9) + "," +
                       exact(k.casa_deg) + "," + exact(k.cesa_deg) + "," +
                       (is_los_cluster(k, s, p.position_id, band.delay_bin_s()) ? "1" : "0") + "\n";
            }
        return out;
    }

    std::string stats_csv(std::span<const channel_stats> stats)
    {
        std::string s = "position_id,band,distance_m,los,pl_best_db,pl_omni_db,k_factor_db,ds_ns,asa_deg,esa_deg,n_clusters,cds_ns,casa_deg,cesa_deg\n";
        for (const auto &c : stats)
            s += std::to_string(c.position_id) + "," + c.band + "," + exact(c.distance_m) + "," + (c.los ? "1" : "0") + "," +
                 exact(c.pl_best_db) + "," + exact(c.pl_omni_db) + "," + (c.k_factor_db ? exact(*c.k_factor_db) : std::string{}) + "," +
                 exact(c.ds_s * 1e9) + "," + exact(c.asa_deg) + "," + exact(c.esa_deg) + "," + std::to_string(c.n_clusters) + "," +
                 exact(c.cds_s * 1e9) + "," + exact(c.casa_deg) + "," + exact(c.cesa_deg) + "\n";
        return s;
    }

    std::vector<channel_stats> read_stats(const fs::path &path)
    {
        const csv_table t = read_csv(path);
        std::vector<channel_stats> out;
        for (const auto &r : t.rows)
        {
            channel_stats c;
            c.position_id = std::stoi(r[t.col("position_id")]);
            c.band = r[t.col("band")];
            c.distance_m = to_d(r[t.col("distance_m")]);
            c.los = r[t.col("los")] == "1";
            c.pl_best_db = to_d(r[t.col("pl_best_db")]);
            c.pl_omni_db = to_d(r[t.col("pl_omni_db")]);
            if (const auto &k = r[t.col("k_factor_db")]; !k.empty())
                c.k_factor_db = to_d(k);
            c.ds_s = to_d(r[t.col("ds_ns")]) * 1e-9;
            c.asa_deg = to_d(r[t.col("asa_deg")]);
            c.esa_deg = to_d(r[t.col("esa_deg")]);
            c.n_clusters = static_cast<std::size_t>(std::stoul(r[t.col("n_clusters")]));
            c.cds_s = to_d(r[t.col("cds_ns")]) * 1e-9;
            c.casa_deg = to_d(r[t.col("casa_deg")]);
            c.cesa_deg = to_d(r[t.col("cesa_deg")]);
            out.push_back(std::move(c));
        }
        return out;
    }

    std::string scattering_csv(const std::string &band, std::span<const scattering_row> rows)
    {
        std::string s = "position_id,band,cluster_id,panel_id,material,delay_ns,loss_db,configured_loss_db,panel_distance_m\n";
        for (const auto &r : rows)
            s += std::to_string(r.position_id) + "," + band + "," + std::to_string(r.cluster_id) + "," + r.panel_id + "," +
                 std::string(to_string(r.mat)) + "," + exact(r.delay_s * 1e9) + "," + exact(r.loss_db) + "," + exact(r.configured_loss_db) + "," +
                 exact(r.panel_distance_m) + "\n";
        return s;
    }

    std::vector<scattering_row> read_scattering(const fs::path &path)
    {
        const csv_table t = read_csv(path);
        std::vector<scattering_row> out;
        for (const auto &r : t.rows)
        {
            scattering_row x;
            x.position_id = std::stoi(r[t.col("position_id")]);
            x.cluster_id = static_cast<std::size_t>(std::stoul(r[t.col("cluster_id")]));
            x.panel_id = r[t.col("panel_id")];
            x.mat = r[t.col("material")] == "concrete" ? material::concrete : material::metal;
            x.delay_s = to_d(r[t.col("delay_ns")]) * 1e-9;
            x.loss_db = to_d(r[t.col("loss_db")]);
            x.configured_loss_db = to_d(r[t.col("configured_loss_db")]);
            x.panel_distance_m = to_d(r[t.col("panel_distance_m")]);
            out.push_back(std::move(x));
        }
        return out;
    }

    std::string band_constants_json(const band_config &b)
    {
        const band_constants c = constants_of(b);
        json j;
        j["schema_version"] = schema_version;
        j["band"] = b.label;
        j["carrier_hz"] = b.carrier_hz;
        j["bandwidth_hz"] = b.bandwidth_hz;
        j["sample_count"] = b.sample_count;
        j["delay_bin_ns"] = report_value(c.delay_bin_s * 1e9);
        j["max_delay_ns"] = report_value(c.max_delay_s * 1e9);
        j["max_path_length_m"] = report_value(c.max_path_length_m);
        j["resolution_m"] = report_value(c.resolution_m);
        return j.dump(2) + "\n";
    }

    // Records of one position are contiguous in campaign order
    std::vector<std::span<const cir_record>> by_position(std::span<const cir_record> records)
    {
        std::vector<std::span<const cir_record>> out;
        std::size_t i = 0;
        while (i < records.size())
        {
            std::size_t j = i;
            while (j < records.size() && records[j].position_id == records[i].position_id)
                ++j;
            out.push_back(records.subspan(i, j - i));
            i = j;
        }
        return out;
    }

    const cir_record &best_record(std::span<const cir_record> records)
    {
        std::size_t best = 0;
        double best_p = -1.0;
        for (std::size_t i = 0; i < records.size(); ++i)
        {
            double p = 0.0;
            for (const auto &v : records[i].samples)
                p += std::norm(v);
            if (p > best_p)
            {
                best_p = p;
                best = i;
            }
        }
        return records[best];
    }

    std::string utc_now()
    {
        const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::ostringstream ss;
        ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        return ss.str();
    }
}

std::string thzlab::to_string(stage s)
{
    switch (s)
    {
    case stage::synth:
        return "synth";
    case stage::postproc:
        return "postproc";
    case stage::characterize:
        return "characterize";
    case stage::report:
        return "report";
    }
    return "unknown";
}

thzlab::stage thzlab::stage_from_string(std::string_view name)
{
    for (stage s : {stage::synth, stage::postproc, stage::characterize, stage::report})
        if (to_string(s) == name)
            return s;
    throw validation_error("unknown stage '" + std::string(name) + "'");
}

std::string thzlab::to_string(plot_kind k)
{
    switch (k)
    {
    case plot_kind::drift_curve:
        return "drift_curve";
    case plot_kind::scattering_bars:
        return "scattering_bars";
    case plot_kind::power_delay_profile:
        return "power_delay_profile";
    case plot_kind::delay_angle_map:
        return "delay_angle_map";
    }
    return "unknown";
}

// ---------------------------------------------------------------- building blocks

thzlab::corrected_band thzlab::correct_band(const scenario &s, std::span<const cir_record> raw, const cir_record &direct)
{
    corrected_band out;
    out.records.reserve(raw.size());
    for (const auto &r : raw)
        out.records.push_back(calibrate(r, direct.samples));

    out.drift = estimate_drift_samples(select_reference_records(out.records, s), s);
    out.model = model_of(out.drift);
    if (out.model)
        out.records = apply_drift_correction(out.records, *out.model);
    else
        warn("no LoS reference record above the noise floor; records are not drift corrected");
    return out;
}

std::vector<thzlab::position_result> thzlab::process_positions(const scenario &s, std::span<const cir_record> records, unsigned threads)
{
    const auto groups = by_position(records);
    std::vector<position_result> out(groups.size());
    const extraction_antennas ant{s.tx_antenna, s.rx_antenna};

    auto work = [&](std::size_t i)
    {
        position_result &p = out[i];
        p.position_id = groups[i].front().position_id;
        p.mpcs = extract_mpcs(groups[i], s.scan, ant, s.processing);
        p.clusters = cluster_mpcs(p.mpcs, s.processing.mcd_threshold, s.processing.mcd_zeta);
    };

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < worker_count(threads, groups.size()); ++w)
            pool.emplace_back([&]
                              {
                                  for (std::size_t i = next++; i < groups.size(); i = next++)
                                  {
                                      try
                                      {
                                          work(i);
                                      }
                                      catch (...)
                                      {
                                          std::lock_guard lock(failure_lock);
                                          if (!failure)
                                              failure = std::current_exception();
                                      }
                                  } });
    }
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

std::vector<thzlab::scattering_row> thzlab::scattering_rows(const scenario &s, const band_config &band, const position_result &pos)
{
    std::vector<scattering_row> rows;
    for (std::size_t c = 0; c < pos.clusters.size(); ++c)
    {
        const cluster &k = pos.clusters[c];
        if (is_los_cluster(k, s, pos.position_id, band.delay_bin_s()))
            continue;
        const auto match = trace_once_scattering(k, s, pos.position_id);
        if (!match || !match->panel)
            continue;
        const scatterer_panel &panel = s.objects[*match->panel];
        rows.push_back({pos.position_id, c, panel.id, panel.mat, match->delay_s, scattering_loss(*match, band.carrier_hz),
                        panel.scattering_loss_db, match->panel_distance_m});
    }
    return rows;
}

thzlab::channel_stats thzlab::characterize_position(const scenario &s, const band_config &band, std::span<const cir_record> records,
                                                    const position_result &pos)
{
    channel_stats st;
    st.position_id = pos.position_id;
    st.band = band.label;
    st.distance_m = distance(s.tx.position, s.rx(pos.position_id).position);
    st.los = has_los(s, pos.position_id);
    st.pl_best_db = pl_best(records, pl_normalization::total_energy,
                            s.tx_antenna.boresight_gain_dbi + s.rx_antenna.boresight_gain_dbi);
    if (pos.mpcs.empty())
    {
        warn("position " + std::to_string(pos.position_id) + ": no multipath components detected");
        st.pl_omni_db = std::nan("");
    }
    else
        st.pl_omni_db = pl_omni(pos.mpcs);
    st.k_factor_db = k_factor(pos.clusters);
    mpc_spreads(pos.mpcs, st.ds_s, st.asa_deg, st.esa_deg);
    const cluster_summary cs = cluster_stats(pos.clusters);
    st.n_clusters = cs.count;
    st.cds_s = cs.cds_s;
    st.casa_deg = cs.casa_deg;
    st.cesa_deg = cs.cesa_deg;
    return st;
}

// ---------------------------------------------------------------- reports

std::string thzlab::render_summary_json(std::span<const ensemble_summary> ensemble, std::span<const band_config> bands)
{
    json j;
    j["schema_version"] = schema_version;
    j["bands"] = json::array();
    for (const auto &e : ensemble)
    {
        json b;
        b["band"] = e.band;
        for (const auto &cfg : bands)
            if (cfg.label == e.band)
            {
                const band_constants c = constants_of(cfg);
                b["carrier_hz"] = cfg.carrier_hz;
                b["delay_bin_ns"] = report_value(c.delay_bin_s * 1e9);
                b["max_delay_ns"] = report_value(c.max_delay_s * 1e9);
                b["max_path_length_m"] = report_value(c.max_path_length_m);
            }
        json items = json::object();
        for (const auto &c : e.items)
        {
            json x;
            x["unit"] = c.unit;
            x["domain"] = c.domain == fit_domain::linear ? "log10" : "dB";
            x["count"] = c.samples.size();
            if (!c.samples.empty())
            {
                x["mean"] = report_value(c.fit.sample_mean);
                x["mu"] = report_value(c.fit.mu);
                x["sigma"] = report_value(c.fit.sigma);
            }
            items[c.key] = x;
        }
        b["characteristics"] = items;
        auto ci = [](const std::optional<ci_fit_result> &f) -> json
        {
            if (!f)
                return nullptr;
            return {{"ple", report_value(f->ple)}, {"sigma_sf_db", report_value(f->sigma_sf_db)}, {"d0_m", f->d0_m}};
        };
        b["ci_best"] = ci(e.ci_best);
        b["ci_omni"] = ci(e.ci_omni);
        b["k_factor_excluded_positions"] = e.k_factor_excluded;
        j["bands"].push_back(b);
    }
    return j.dump(2) + "\n";
}

std::string thzlab::render_comparison_csv(std::span<const comparison_row> rows)
{
    std::string s = "band,characteristic,unit,measured,reference,delta,flag\n";
    for (const auto &r : rows)
        s += r.band + "," + r.key + "," + r.unit + "," + num(r.measured) + "," + num(r.reference) + "," + num(r.delta) + "," + r.flag + "\n";
    return s;
}

std::string thzlab::render_comparison_text(std::span<const comparison_row> rows, const std::string &reference_name)
{
    std::ostringstream s;
    s << "Measured ensemble means against " << (reference_name.empty() ? "the reference table" : reference_name) << "\n\n";
    s << std::left << std::setw(6) << "band" << std::setw(12) << "quantity" << std::setw(7) << "unit" << std::right
      << std::setw(12) << "measured" << std::setw(12) << "reference" << "  flag\n";
    for (const auto &r : rows)
    {
        s << std::left << std::setw(6) << r.band << std::setw(12) << r.key << std::setw(7) << r.unit << std::right << std::fixed
          << std::setprecision(2) << std::setw(12) << r.measured << std::setw(12) << r.reference << "  " << r.flag << "\n";
    }
    if (rows.empty())
        s << "(no comparable entries)\n";
    return s.str();
}

std::vector<std::pair<double, double>> thzlab::power_delay_profile(const cir_record &record)
{
    std::vector<std::pair<double, double>> out;
    out.reserve(record.samples.size());
    for (std::size_t k = 0; k < record.samples.size(); ++k)
        out.emplace_back(static_cast<double>(k) * record.delay_bin_s * 1e9,
                         10.0 * std::log10(std::max(std::norm(record.samples[k]), 1e-300)));
    return out;
}

namespace
{
    // Polyline or bar chart of (x, y) series; deliberately plain
    std::string svg_chart(const std::string &title, const std::string &xlabel, const std::string &ylabel,
                          const std::vector<std::pair<double, double>> &pts, bool bars, const std::vector<std::string> &bar_class = {})
    {
        const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
        double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
        for (const auto &[x, y] : pts)
        {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
        if (pts.empty())
            x0 = y0 = 0, x1 = y1 = 1;
        if (bars)
            y0 = std::min(y0, 0.0), x0 -= 0.5, x1 += 0.5;
        if (x1 == x0)
            x1 = x0 + 1;
        if (y1 == y0)
            y1 = y0 + 1;
        auto px = [&](double x)
        { return L + (x - x0) / (x1 - x0) * (W - L - R); };
        auto py = [&](double y)
        { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

        std::ostringstream s;
        s << std::setprecision(6);
        s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
        s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
        s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
        s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
        s << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << H / 2
          << ")\">" << ylabel << "</text>\n";
        s << "<text x=\"" << L - 6 << "\" y=\"" << py(y1) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << y1 << "</text>\n";
        s << "<text x=\"" << L - 6 << "\" y=\"" << py(y0) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << y0 << "</text>\n";
        if (bars)
        {
            const double w = 0.8 * (W - L - R) / (x1 - x0);
            for (std::size_t i = 0; i < pts.size(); ++i)
            {
                const auto &[x, y] = pts[i];
                const std::string colour = i < bar_class.size() && bar_class[i] == "concrete" ? "#999999" : "#3366aa";
                s << "<rect x=\"" << px(x) - w / 2 << "\" y=\"" << std::min(py(y), py(0)) << "\" width=\"" << w << "\" height=\""
                  << std::abs(py(0) - py(y)) << "\" fill=\"" << colour << "\"/>\n";
            }
        }
        else
        {
            s << "<polyline fill=\"none\" stroke=\"#3366aa\" stroke-width=\"1.5\" points=\"";
            for (const auto &[x, y] : pts)
                s << px(x) << "," << py(y) << " ";
            s << "\"/>\n";
            for (const auto &[x, y] : pts)
                s << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.5\" fill=\"#3366aa\"/>\n";
        }
        s << "</svg>\n";
        return s.str();
    }
}

std::vector<fs::path> thzlab::emit_plot_data(plot_kind kind, const plot_inputs &in, const fs::path &dir, bool svg)
{
    const fs::path stem = dir / (in.band + "_" + to_string(kind));
    std::vector<fs::path> written;
    std::string csv;

    switch (kind)
    {
    case plot_kind::drift_curve:
    {
        if (in.drift.empty())
            throw missing_input_error("drift_curve: no drift samples");
        csv = "t_s,drift_ns,series\n";
        std::vector<std::pair<double, double>> pts;
        for (const auto &d : in.drift)
        {
            csv += exact(d.t_s) + "," + exact(d.drift_s * 1e9) + ",measured\n";
            pts.emplace_back(d.t_s, d.drift_s * 1e9);
        }
        if (in.model)
            for (double t : in.model_times_s)
                csv += exact(t) + "," + exact(correct_drift(t, *in.model) * 1e9) + ",model\n";
        if (svg)
        {
            write_text(fs::path(stem.string() + ".svg"), svg_chart("Time drift (" + in.band + ")", "time (s)", "drift (ns)", pts, false));
            written.emplace_back(stem.string() + ".svg");
        }
        break;
    }
    case plot_kind::scattering_bars:
    {
        std::vector<scattering_row> rows = in.scattering;
        std::stable_sort(rows.begin(), rows.end(), [](const scattering_row &a, const scattering_row &b)
                         { return to_string(a.mat) < to_string(b.mat); });
        csv = "bar,material,position_id,cluster_id,panel_id,loss_db,configured_loss_db\n";
        std::vector<std::pair<double, double>> pts;
        std::vector<std::string> cls;
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            const auto &r = rows[i];
            csv += std::to_string(i) + "," + std::string(to_string(r.mat)) + "," + std::to_string(r.position_id) + "," + std::to_string(r.cluster_id) +
                   "," + r.panel_id + "," + exact(r.loss_db) + "," + exact(r.configured_loss_db) + "\n";
            pts.emplace_back(static_cast<double>(i), r.loss_db);
            cls.push_back(std::string(to_string(r.mat)));
        }
        if (svg)
        {
            write_text(fs::path(stem.string() + ".svg"),
                       svg_chart("Scattering loss per cluster (" + in.band + ")", "cluster (metal blue, concrete grey)", "loss (dB)", pts, true, cls));
            written.emplace_back(stem.string() + ".svg");
        }
        break;
    }
    case plot_kind::power_delay_profile:
    {
        if (in.profiles.empty())
            throw missing_input_error("power_delay_profile: no records");
        csv = "position_id,az_deg,el_deg,delay_ns,power_db\n";
        for (const auto &r : in.profiles)
            for (const auto &[d, p] : power_delay_profile(r))
                csv += std::to_string(r.position_id) + "," + exact(r.az_deg) + "," + exact(r.el_deg) + "," + exact(d) + "," + exact(p) + "\n";
        break;
    }
    case plot_kind::delay_angle_map:
        csv = "position_id,delay_ns,aoa_az_deg,aoa_el_deg,power_db\n";
        for (const auto &m : in.mpcs)
            csv += std::to_string(m.position_id) + "," + exact(m.delay_s * 1e9) + "," + exact(m.aoa_az_deg) + "," + exact(m.aoa_el_deg) +
                   "," + exact(m.power_db) + "\n";
        break;
    }
    write_text(fs::path(stem.string() + ".csv"), csv);
    written.insert(written.begin(), fs::path(stem.string() + ".csv"));
    return written;
}

std::string thzlab::sha256_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw missing_input_error("cannot open " + path.string());
    EVP_MD_CTX *ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    {
        EVP_MD_CTX_free(ctx);
        throw numeric_error("sha256 initialisation failed");
    }
    std::vector<char> buf(1 << 16);
    while (in)
    {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0)
            EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

// ---------------------------------------------------------------- orchestration

thzlab::pipeline_result thzlab::run_pipeline(const pipeline_config &config)
{
    if (config.first > config.last)
        throw validation_error("stage " + to_string(config.first) + " comes after " + to_string(config.last));

    scenario s = load_scenario(config.scenario_path);
    if (config.seed)
        s.rng_seed = *config.seed;

    std::vector<std::size_t> band_indices;
    if (config.bands.empty())
        for (std::size_t i = 0; i < s.bands.size(); ++i)
            band_indices.push_back(i);
    for (const auto &label : config.bands)
    {
        auto it = std::find_if(s.bands.begin(), s.bands.end(), [&](const band_config &b)
                               { return b.label == label; });
        if (it == s.bands.end())
            throw validation_error("scenario has no band '" + label + "'");
        band_indices.push_back(static_cast<std::size_t>(it - s.bands.begin()));
    }

    const fs::path out = config.out_dir;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out))
        throw validation_error("cannot create output directory " + out.string());

    auto runs = [&](stage st)
    { return config.first <= st && st <= config.last; };

    pipeline_result result;
    std::vector<ensemble_summary> ensemble;
    std::vector<band_config> used_bands;

    for (std::size_t bi : band_indices)
    {
        const band_config &band = s.bands[bi];
        used_bands.push_back(band);
        const fs::path dir = band_dir(out, band);

        if (runs(stage::synth))
        {
            const auto records = run_campaign(s, bi, config.threads);
            write_records(dir, "cir", band, records, config.format);
            const cir_record direct = direct_connection_record(s, bi);
            write_records(dir, "direct_connection", band, std::span(&direct, 1), config.format);
            write_text(dir / "band_constants.json", band_constants_json(band));
            result.cir_records += records.size();
        }
        if (config.last == stage::synth)
            continue;

        // Later stages work on calibrated, drift-corrected records
        std::optional<corrected_band> corrected;
        auto corrected_records = [&]() -> const corrected_band &
        {
            if (!corrected)
            {
                const auto raw = read_records(dir, "cir", band, bi);
                const auto direct = read_records(dir, "direct_connection", band, bi);
                if (direct.size() != 1)
                    throw parse_error("direct connection file must hold one record");
                if (runs(stage::postproc))
                    corrected = correct_band(s, raw, direct.front());
                else
                {
                    // Reuse the drift measured by the postproc stage
                    corrected.emplace();
                    for (const auto &r : raw)
                        corrected->records.push_back(calibrate(r, direct.front().samples));
                    corrected->drift = read_drift(dir / "drift.csv");
                    corrected->model = model_of(corrected->drift);
                    if (corrected->model)
                        corrected->records = apply_drift_correction(corrected->records, *corrected->model);
                }
            }
            return *corrected;
        };

        std::vector<position_result> positions;
        if (runs(stage::postproc))
        {
            const corrected_band &cb = corrected_records();
            positions = process_positions(s, cb.records, config.threads);
            write_text(dir / "drift.csv", drift_csv(cb.drift));
            write_text(dir / "mpcs.csv", mpc_csv(band.label, positions));
            write_text(dir / "clusters.csv", clusters_csv(s, band, positions));
        }
        if (config.last == stage::postproc)
            continue;
        if (positions.empty())
        {
            if (!fs::exists(dir / "mpcs.csv") || !fs::exists(dir / "drift.csv"))
                throw missing_input_error("missing postproc outputs in " + dir.string() + "; run postproc first");
            positions = read_mpcs(dir / "mpcs.csv", s);
        }

        std::vector<channel_stats> stats;
        std::vector<scattering_row> scattering;
        if (runs(stage::characterize))
        {
            const corrected_band &cb = corrected_records();
            const auto groups = by_position(cb.records);
            for (const auto &p : positions)
            {
                auto g = std::find_if(groups.begin(), groups.end(), [&](std::span<const cir_record> x)
                                      { return x.front().position_id == p.position_id; });
                if (g == groups.end())
                    throw missing_input_error("no CIR records for position " + std::to_string(p.position_id));
                stats.push_back(characterize_position(s, band, *g, p));
                const auto rows = scattering_rows(s, band, p);
                scattering.insert(scattering.end(), rows.begin(), rows.end());
            }
            write_text(dir / "stats.csv", stats_csv(stats));
            write_text(dir / "scattering.csv", scattering_csv(band.label, scattering));
        }
        else if (runs(stage::report))
        {
            if (!fs::exists(dir / "stats.csv"))
                throw missing_input_error("missing characterize outputs in " + dir.string() + "; run characterize first");
            stats = read_stats(dir / "stats.csv");
            scattering = read_scattering(dir / "scattering.csv");
        }
        ensemble.push_back(summarize(band.label, stats, band.carrier_hz));

        if (runs(stage::report))
        {
            const corrected_band &cb = corrected_records();
            plot_inputs in;
            in.band = band.label;
            in.drift = cb.drift;
            in.model = cb.model;
            for (std::size_t i = 0; i < s.rx_list.size(); ++i)
            {
                in.model_times_s.push_back(campaign_timestamp(s, i, 0));
                in.model_times_s.push_back(campaign_timestamp(s, i, s.scan.size() - 1));
            }
            in.scattering = scattering;
            for (const auto &g : by_position(cb.records))
                in.profiles.push_back(best_record(g));
            for (const auto &p : positions)
                in.mpcs.insert(in.mpcs.end(), p.mpcs.begin(), p.mpcs.end());
            const fs::path plots = out / "plots";
            for (plot_kind k : {plot_kind::drift_curve, plot_kind::scattering_bars, plot_kind::power_delay_profile, plot_kind::delay_angle_map})
            {
                if (k == plot_kind::drift_curve && in.drift.empty())
                {
                    warn("no drift samples; drift curve skipped");
                    continue;
                }
                emit_plot_data(k, in, plots, config.svg);
            }
        }
    }

    if (runs(stage::characterize) || runs(stage::report))
        write_text(out / "summary.json", render_summary_json(ensemble, used_bands));

    if (runs(stage::report))
    {
        std::optional<fs::path> ref = config.reference_path;
        if (!ref && fs::exists(fs::path(THZLAB_DATA_DIR) / "reference_inh_office.json"))
            ref = fs::path(THZLAB_DATA_DIR) / "reference_inh_office.json";
        if (ref)
        {
            const reference_table table = load_reference_table(*ref);
            const auto rows = compare_reference(ensemble, table);
            write_text(out / "comparison.csv", render_comparison_csv(rows));
            write_text(out / "comparison.txt", render_comparison_text(rows, table.name));
        }
        else
            warn("no reference table; comparison skipped");
    }

    // Manifest over everything in the output directory
    for (const auto &entry : fs::recursive_directory_iterator(out))
    {
        if (!entry.is_regular_file())
            continue;
        const std::string rel = fs::relative(entry.path(), out).generic_string();
        if (rel == "manifest.json")
            continue;
        result.artifacts.push_back({rel, sha256_file(entry.path()), entry.file_size()});
    }
    std::sort(result.artifacts.begin(), result.artifacts.end(), [](const artifact &a, const artifact &b)
              { return a.path < b.path; });

    json m;
    m["schema_version"] = schema_version;
    m["generated_at"] = utc_now();
    m["scenario"] = {{"path", config.scenario_path.generic_string()}, {"sha256", sha256_file(config.scenario_path)}};
    m["seed"] = s.rng_seed;
    json stages = json::array();
    for (stage st : {stage::synth, stage::postproc, stage::characterize, stage::report})
        if (runs(st))
            stages.push_back(to_string(st));
    m["stages"] = stages;
    m["cir_records"] = result.cir_records;
    json arts = json::array();
    for (const auto &a : result.artifacts)
        arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    m["artifacts"] = arts;
    write_text(out / "manifest.json", m.dump(2) + "\n");
    return result;
}
