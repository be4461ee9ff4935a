#pragma once

// Artifact writing: tables as CSV or JSON, and the run manifest.

#include "cedn/cli/scenario.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cedn::cli {

namespace fs = std::filesystem;

/// Column names carry their unit suffix (_hz, _ps, _s, _bps, _V, _db).
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    void add(std::vector<json> row)
    {
        if (row.size() != columns.size()) throw std::logic_error("table row width mismatch");
        rows.push_back(std::move(row));
    }
};

inline std::string csv_cell(const json& v)
{
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isnan(d)) return "nan";
        if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
        std::ostringstream os;
        os << std::setprecision(12) << d;
        return os.str();
    }
    return v.dump();
}

inline void write_table_csv(std::ostream& os, const Table& t)
{
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_cell(r[i]);
        os << '\n';
    }
}

inline json table_json(const Table& t)
{
    json arr = json::array();
    for (const auto& r : t.rows) {
        json o = json::object();
        for (std::size_t i = 0; i < r.size(); ++i) {
            const auto& v = r[i];
            o[t.columns[i]] = v.is_number_float() && !std::isfinite(v.get<double>()) ? json() : v;
        }
        arr.push_back(std::move(o));
    }
    return arr;
}

struct Artifact {
    std::string path; // relative to the output directory
    std::uintmax_t bytes = 0;
};

class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw data_error("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    const fs::path& dir() const { return dir_; }
    const std::vector<Artifact>& artifacts() const { return artifacts_; }

    /// Opens `rel` for writing, calls fn(stream), records the artifact.
    template <class Fn>
    void write(const std::string& rel, Fn&& fn, bool binary = false)
    {
        const auto path = dir_ / rel;
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        {
            std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
            if (!os) throw data_error("cannot write " + path.string());
            fn(os);
            if (!os) throw data_error("write failed for " + path.string());
        }
        artifacts_.push_back({rel, fs::file_size(path)});
    }

    void table(const std::string& stem, const Table& t, const std::string& format)
    {
        if (format == "json") write(stem + ".json", [&](std::ostream& os) { os << table_json(t).dump(2) << '\n'; });
        else write(stem + ".csv", [&](std::ostream& os) { write_table_csv(os, t); });
    }

    void json_file(const std::string& rel, const json& j)
    {
        write(rel, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    }

private:
    fs::path dir_;
    std::vector<Artifact> artifacts_;
};

inline std::string utc_timestamp(std::chrono::system_clock::time_point t)
{
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunManifest {
    std::string command;
    std::string scenario_hash;
    std::string tool_version = cli::tool_version;
    std::optional<std::uint64_t> seed;
    std::string started_utc;
    std::string finished_utc;
    double wall_s = 0.0;
    std::vector<Artifact> artifacts;
    std::vector<std::string> warnings;
    json scenario;
    json summary = json::object();

    json to_json() const
    {
        json arts = json::array();
        for (const auto& a : artifacts) arts.push_back({{"path", a.path}, {"bytes", a.bytes}});
        json j = {{"command", command},          {"scenario_hash", scenario_hash}, {"tool_version", tool_version},
                  {"started_utc", started_utc},  {"finished_utc", finished_utc},   {"wall_s", wall_s},
                  {"artifacts", arts},           {"warnings", warnings},           {"scenario", scenario},
                  {"summary", summary}};
        j["seed"] = seed ? json(*seed) : json();
        return j;
    }
};

} // namespace cedn::cli
