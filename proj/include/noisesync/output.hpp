// output.hpp - CSV rendering, atomic file writes, run manifests
#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace noisesync {

inline constexpr const char* kArtifactVersion = "1.0.0";

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
    return s;
}

// Rows of numbers; a missing value renders as an empty field.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<std::optional<double>>& row) {
        if (row.size() != header_.size()) throw std::logic_error("csv: row width does not match header");
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            if (row[i]) line += format_double(*row[i]);
        }
        rows_.push_back(std::move(line));
    }
    void add_text_row(const std::vector<std::string>& row) {
        if (row.size() != header_.size()) throw std::logic_error("csv: row width does not match header");
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) line += (i ? "," : "") + row[i];
        rows_.push_back(std::move(line));
    }
    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
        out += '\n';
        for (const auto& r : rows_) out += r + '\n';
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

// Write to a temporary sibling, then rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("output: cannot open '" + tmp.string() + "' for writing");
        f.write(content.data(), std::streamsize(content.size()));
        f.flush();
        if (!f) throw std::runtime_error("output: write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Collects the files of one run; the manifest is written last.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        write_atomic(dir_ / name, content);
        files_.push_back({{"file", name}, {"bytes", content.size()}, {"fnv1a64", hex64(fnv1a64(content))}});
    }
    void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

    nlohmann::json manifest(const RunConfig& cfg, const std::string& subcommand, const nlohmann::json& summary) const {
        nlohmann::json config = nlohmann::json::object();
        for (const auto& k : config_keys()) config[k] = get_key(cfg, k);
        return {{"artifact", "noisesync"}, {"version", kArtifactVersion}, {"subcommand", subcommand},
                {"timestamp", utc_timestamp()}, {"config", config}, {"outputs", files_}, {"summary", summary}};
    }
    void write_manifest(const RunConfig& cfg, const std::string& subcommand, const nlohmann::json& summary) {
        write_atomic(dir_ / "manifest.json", manifest(cfg, subcommand, summary).dump(2) + "\n");
    }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    nlohmann::json files_ = nlohmann::json::array();
};

}  // namespace noisesync
