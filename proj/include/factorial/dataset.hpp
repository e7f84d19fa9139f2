#pragma once

// Experimental units: covariates, assigned variant, outcome, propensity.
// CSV layout (header required, column order free on read):
//
//   unit_id,<covariate>...,<factor>...,outcome,propensity
//
// Factor columns hold level names. `outcome` may be empty (not yet observed).
// `propensity` is optional on read; absent, it is taken from the design.
// Numbers are written with 17 significant digits (std::to_chars general), so
// write -> load -> write is byte-identical.

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "factorial/design.hpp"
#include "factorial/error.hpp"
#include "factorial/rng.hpp"

namespace factorial {

struct UnitRecord {
    std::string unit_id;
    std::vector<double> covariates;
    Variant assigned;
    std::optional<double> outcome;
    double propensity = 1.0;
};

class Dataset {
public:
    Dataset() = default;

    Dataset(Design design, std::vector<std::string> schema, std::vector<UnitRecord> records)
        : design_(std::move(design)), schema_(std::move(schema)), records_(std::move(records)) {
        std::set<std::string> names;
        for (const auto& s : schema_) {
            if (!names.insert(s).second) throw ValidationError("duplicate covariate '" + s + "'");
        }
        std::set<std::string> ids;
        for (const auto& r : records_) {
            if (!ids.insert(r.unit_id).second) {
                throw ValidationError("duplicate unit_id '" + r.unit_id + "'");
            }
            if (r.covariates.size() != schema_.size()) {
                throw DimensionMismatch("unit '" + r.unit_id + "' has wrong covariate count");
            }
            for (double x : r.covariates) {
                if (!std::isfinite(x)) {
                    throw ValidationError("unit '" + r.unit_id + "' has a missing covariate value");
                }
            }
            if (!design_.contains(r.assigned)) {
                throw ValidationError("unit '" + r.unit_id + "' is assigned a variant outside the design");
            }
            if (!(r.propensity > 0.0 && r.propensity <= 1.0)) {
                throw ValidationError("unit '" + r.unit_id + "' has propensity outside (0, 1]");
            }
        }
    }

    const Design& design() const noexcept { return design_; }
    const FactorSpace& space() const noexcept { return design_.space(); }
    const std::vector<std::string>& schema() const noexcept { return schema_; }
    const std::vector<UnitRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }

    std::size_t covariate_index(const std::string& name) const {
        for (std::size_t i = 0; i < schema_.size(); ++i) {
            if (schema_[i] == name) return i;
        }
        throw ValidationError("unknown covariate '" + name + "'");
    }

    std::vector<std::size_t> covariate_indices(const std::vector<std::string>& names) const {
        std::vector<std::size_t> out;
        for (const auto& n : names) out.push_back(covariate_index(n));
        return out;
    }

    std::vector<const UnitRecord*> units_in(const Variant& v) const {
        std::vector<const UnitRecord*> out;
        for (const auto& r : records_) {
            if (r.assigned == v) out.push_back(&r);
        }
        return out;
    }

    // Same units with outcomes replaced (e.g. after simulation or a shift).
    Dataset with_outcomes(const std::vector<std::optional<double>>& y) const {
        if (y.size() != records_.size()) throw DimensionMismatch("outcome vector has wrong length");
        auto recs = records_;
        for (std::size_t i = 0; i < recs.size(); ++i) recs[i].outcome = y[i];
        return Dataset(design_, schema_, std::move(recs));
    }

    Dataset filtered(const std::function<bool(const UnitRecord&)>& keep) const {
        std::vector<UnitRecord> recs;
        for (const auto& r : records_) {
            if (keep(r)) recs.push_back(r);
        }
        return Dataset(design_, schema_, std::move(recs));
    }

private:
    Design design_;
    std::vector<std::string> schema_;
    std::vector<UnitRecord> records_;
};

struct UnitCovariates {
    std::string unit_id;
    std::vector<double> covariates;
};

// Each unit independently draws one run with probability weight / total
// weight; the propensity recorded is that probability.
inline Dataset randomize(const std::vector<std::string>& schema, const std::vector<UnitCovariates>& units,
                         const Design& design, std::uint64_t seed) {
    if (design.runs().empty()) throw ValidationError("cannot randomize over an empty design");
    const double total = design.total_weight();
    if (!(total > 0.0)) throw ValidationError("design weights sum to zero");
    std::vector<double> cum;
    double acc = 0.0;
    for (const auto& r : design.runs()) {
        acc += r.weight / total;
        cum.push_back(acc);
    }
    auto rng = make_rng(seed, "dataset.randomize");
    std::vector<UnitRecord> recs;
    recs.reserve(units.size());
    for (const auto& u : units) {
        const double x = uniform01(rng);
        std::size_t k = 0;
        while (k + 1 < cum.size() && x >= cum[k]) ++k;
        while (design.runs()[k].weight == 0.0 && k > 0) --k;
        const auto& run = design.runs()[k];
        recs.push_back({u.unit_id, u.covariates, run.variant, std::nullopt, run.weight / total});
    }
    return Dataset(design, schema, std::move(recs));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------
inline std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) return std::nullopt;
    return v;
}

inline void check_csv_safe(const std::string& s, const char* what) {
    if (s.find_first_of(",\n\r") != std::string::npos) {
        throw ValidationError(std::string(what) + " '" + s + "' contains a CSV separator");
    }
}

}  // namespace detail

inline void write_csv(const Dataset& data, std::ostream& os) {
    const auto& space = data.space();
    os << "unit_id";
    for (const auto& c : data.schema()) os << ',' << c;
    for (const auto& f : space.factors()) os << ',' << f.name();
    os << ",outcome,propensity\n";
    for (const auto& r : data.records()) {
        detail::check_csv_safe(r.unit_id, "unit_id");
        os << r.unit_id;
        for (double x : r.covariates) os << ',' << format_number(x);
        for (std::size_t f = 0; f < space.factor_count(); ++f) {
            os << ',' << space.factor(f).level_name(r.assigned[f]);
        }
        os << ',';
        if (r.outcome) os << format_number(*r.outcome);
        os << ',' << format_number(r.propensity) << '\n';
    }
}

inline void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open '" + path + "' for writing");
    write_csv(data, os);
}

inline Dataset load_csv(std::istream& is, const Design& design, const std::string& source = "<stream>") {
    const auto& space = design.space();
    std::string line;
    if (!std::getline(is, line)) throw MissingColumnError(source + ": empty file", 0, "unit_id");
    const auto header = detail::split_csv_line(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!col.emplace(header[i], i).second) {
            throw ValidationError(source + ": duplicate column '" + header[i] + "'");
        }
    }
    auto require = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) {
            throw MissingColumnError(source + ": missing column '" + name + "'", 1, name);
        }
        return it->second;
    };
    const std::size_t id_col = require("unit_id");
    const std::size_t y_col = require("outcome");
    std::vector<std::size_t> factor_cols;
    for (const auto& f : space.factors()) factor_cols.push_back(require(f.name()));
    std::optional<std::size_t> p_col;
    if (auto it = col.find("propensity"); it != col.end()) p_col = it->second;

    std::set<std::size_t> reserved{id_col, y_col};
    reserved.insert(factor_cols.begin(), factor_cols.end());
    if (p_col) reserved.insert(*p_col);
    std::vector<std::string> schema;
    std::vector<std::size_t> cov_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!reserved.count(i)) {
            schema.push_back(header[i]);
            cov_cols.push_back(i);
        }
    }

    std::vector<UnitRecord> recs;
    std::set<std::string> ids;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ValidationError(source + ": row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(header.size()));
        }
        UnitRecord r;
        r.unit_id = cells[id_col];
        if (!ids.insert(r.unit_id).second) {
            throw DuplicateUnitError(source + ": row " + std::to_string(row) + ", column unit_id: duplicate unit_id '" +
                                         r.unit_id + "'",
                                     row, "unit_id");
        }
        for (std::size_t k = 0; k < cov_cols.size(); ++k) {
            auto v = detail::parse_double(cells[cov_cols[k]]);
            if (!v) {
                throw MissingValueError(source + ": row " + std::to_string(row) + ", column " +
                                            schema[k] + ": missing or non-numeric covariate value",
                                        row, schema[k]);
            }
            r.covariates.push_back(*v);
        }
        for (std::size_t f = 0; f < space.factor_count(); ++f) {
            const auto& name = cells[factor_cols[f]];
            auto idx = space.factor(f).level_index(name);
            if (!idx) {
                throw UnknownLevelError(source + ": row " + std::to_string(row) + ", column " +
                                            space.factor(f).name() + ": unknown level '" + name + "'",
                                        row, space.factor(f).name());
            }
            r.assigned.levels.push_back(*idx);
        }
        if (!cells[y_col].empty()) {
            r.outcome = detail::parse_double(cells[y_col]);
            if (!r.outcome) {
                throw MissingValueError(source + ": row " + std::to_string(row) +
                                            ", column outcome: non-numeric value",
                                        row, "outcome");
            }
        }
        if (!design.contains(r.assigned)) {
            throw UnknownLevelError(source + ": row " + std::to_string(row) +
                                        ": assigned variant is not a run of the design",
                                    row, space.factor(0).name());
        }
        if (p_col && !cells[*p_col].empty()) {
            auto p = detail::parse_double(cells[*p_col]);
            if (!p) {
                throw MissingValueError(source + ": row " + std::to_string(row) +
                                            ", column propensity: non-numeric value",
                                        row, "propensity");
            }
            r.propensity = *p;
        } else {
            r.propensity = design.propensity(r.assigned);
        }
        recs.push_back(std::move(r));
    }
    return Dataset(design, std::move(schema), std::move(recs));
}

inline Dataset load_csv(const std::string& path, const Design& design) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open '" + path + "'");
    return load_csv(is, design, path);
}

}  // namespace factorial
