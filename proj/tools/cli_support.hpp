#pragma once

// Plumbing for the command-line tool: file digests, atomic writes, run
// manifests and small text-table helpers.

#include <openssl/evp.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "factorial/dataset.hpp"
#include "factorial/error.hpp"

namespace cli {

using nlohmann::json;

class IoError : public factorial::Error {
public:
    using factorial::Error::Error;
};

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline json read_json(const std::string& path) {
    const auto text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw factorial::ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

// Write to a sibling temporary file, then rename over the target.
inline void write_atomic(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write '" + tmp.string() + "': " + std::strerror(errno));
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.flush();
        if (!os) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path + "'");
    }
}

// ISO 8601 UTC; SOURCE_DATE_EPOCH wins over the clock.
inline std::string timestamp_now() {
    std::time_t t = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(sde, &end, 10);
        if (end != sde && *end == '\0') t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunManifest {
    explicit RunManifest(std::string cmd) : command(std::move(cmd)) {}

    std::string command;
    std::vector<std::pair<std::string, std::string>> inputs;  // (path, sha256)
    std::optional<std::uint64_t> seed;
    json parameters = json::object();

    void add_input(const std::string& path) { inputs.emplace_back(path, sha256_hex(read_file(path))); }
};

// {"manifest": {...}, "result": result}. The content digest covers the whole
// document with the timestamp and the digest itself removed.
inline json make_document(const RunManifest& m, const json& result) {
    json inputs = json::array();
    for (const auto& [p, d] : m.inputs) inputs.push_back({{"path", p}, {"sha256", d}});
    json manifest{{"command", m.command},
                  {"inputs", inputs},
                  {"parameters", m.parameters},
                  {"seed", m.seed ? json(*m.seed) : json(nullptr)},
                  {"tool_version", FACTORIAL_VERSION}};
    json doc{{"manifest", manifest}, {"result", result}};
    doc["manifest"]["content_digest"] = sha256_hex(doc.dump());
    doc["manifest"]["timestamp"] = timestamp_now();
    return doc;
}

// Recomputes the digest of a document produced by make_document.
inline std::string content_digest(json doc) {
    doc["manifest"].erase("timestamp");
    doc["manifest"].erase("content_digest");
    return sha256_hex(doc.dump());
}

// unit_id followed by covariate columns.
inline std::pair<std::vector<std::string>, std::vector<factorial::UnitCovariates>> read_units_csv(
    const std::string& path) {
    std::istringstream is(read_file(path));
    std::string line;
    if (!std::getline(is, line)) throw factorial::CsvError(path + ": empty file", 0, "");
    const auto header = factorial::detail::split_csv_line(line);
    if (header.empty() || header[0] != "unit_id") {
        throw factorial::MissingColumnError(path + ": first column must be unit_id", 1, "unit_id");
    }
    std::vector<std::string> schema(header.begin() + 1, header.end());
    std::vector<factorial::UnitCovariates> units;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = factorial::detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw factorial::CsvError(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                          " fields, header has " + std::to_string(header.size()),
                                      row, "");
        }
        factorial::UnitCovariates u;
        u.unit_id = cells[0];
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const auto v = factorial::detail::parse_double(cells[c]);
            if (!v) {
                throw factorial::MissingValueError(path + ": row " + std::to_string(row) + ", column '" + header[c] +
                                                       "': '" + cells[c] + "' is not a number",
                                                   row, header[c]);
            }
            u.covariates.push_back(*v);
        }
        units.push_back(std::move(u));
    }
    return {schema, units};
}

inline std::string fixed(double x, int digits) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << x;
    return ss.str();
}

inline std::string general(double x, int digits = 6) {
    std::ostringstream ss;
    ss << std::setprecision(digits) << x;
    return ss.str();
}

// Left-aligned first column, right-aligned rest.
class Table {
public:
    explicit Table(std::vector<std::string> header) : rows_{std::move(header)} {}
    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    std::string str() const {
        std::vector<std::size_t> w;
        for (const auto& r : rows_) {
            if (w.size() < r.size()) w.resize(r.size(), 0);
            for (std::size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], r[c].size());
        }
        std::ostringstream os;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            for (std::size_t c = 0; c < rows_[i].size(); ++c) {
                if (c) os << "  ";
                if (c == 0) os << std::left << std::setw(static_cast<int>(w[c])) << rows_[i][c];
                else os << std::right << std::setw(static_cast<int>(w[c])) << rows_[i][c];
            }
            os << '\n';
            if (i == 0) {
                std::size_t total = 0;
                for (auto x : w) total += x;
                os << std::string(total + 2 * (w.size() - 1), '-') << '\n';
            }
        }
        return os.str();
    }

private:
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace cli
