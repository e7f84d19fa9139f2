#pragma once

// Policy space as an ordered list of factors, each with named levels.
// Declaration order of factors and levels is the only ordering used anywhere.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "factorial/error.hpp"

namespace factorial {

class Factor {
public:
    Factor(std::string name, std::vector<std::string> levels, std::size_t baseline = 0)
        : name_(std::move(name)), levels_(std::move(levels)), baseline_(baseline) {
        if (name_.empty()) throw ValidationError("factor name must be non-empty");
        if (levels_.size() < 2) {
            throw ValidationError("factor '" + name_ + "' needs at least 2 levels");
        }
        std::set<std::string> seen;
        for (const auto& l : levels_) {
            if (!seen.insert(l).second) {
                throw ValidationError("factor '" + name_ + "' has duplicate level '" + l + "'");
            }
        }
        if (baseline_ >= levels_.size()) {
            throw ValidationError("factor '" + name_ + "' baseline index out of range");
        }
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& levels() const noexcept { return levels_; }
    std::size_t level_count() const noexcept { return levels_.size(); }
    std::size_t baseline() const noexcept { return baseline_; }
    const std::string& level_name(std::size_t i) const { return levels_.at(i); }

    std::optional<std::size_t> level_index(const std::string& level) const {
        auto it = std::find(levels_.begin(), levels_.end(), level);
        if (it == levels_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - levels_.begin());
    }

    // Non-baseline levels in declaration order; these carry coefficients.
    std::vector<std::size_t> effect_levels() const {
        std::vector<std::size_t> out;
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            if (l != baseline_) out.push_back(l);
        }
        return out;
    }

    bool operator==(const Factor&) const = default;

private:
    std::string name_;
    std::vector<std::string> levels_;
    std::size_t baseline_;
};

// One level index per factor, in factor order.
struct Variant {
    std::vector<std::size_t> levels;

    Variant() = default;
    explicit Variant(std::vector<std::size_t> l) : levels(std::move(l)) {}
    Variant(std::initializer_list<std::size_t> l) : levels(l) {}

    std::size_t size() const noexcept { return levels.size(); }
    std::size_t operator[](std::size_t f) const { return levels[f]; }

    auto operator<=>(const Variant&) const = default;
    bool operator==(const Variant&) const = default;
};

class FactorSpace {
public:
    FactorSpace() = default;

    explicit FactorSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
        if (factors_.empty()) throw ValidationError("factor space needs at least one factor");
        std::set<std::string> seen;
        for (const auto& f : factors_) {
            if (!seen.insert(f.name()).second) {
                throw ValidationError("duplicate factor name '" + f.name() + "'");
            }
        }
    }

    const std::vector<Factor>& factors() const noexcept { return factors_; }
    std::size_t factor_count() const noexcept { return factors_.size(); }
    const Factor& factor(std::size_t i) const { return factors_.at(i); }

    std::optional<std::size_t> factor_index(const std::string& name) const {
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            if (factors_[i].name() == name) return i;
        }
        return std::nullopt;
    }

    std::size_t variant_count() const noexcept {
        std::size_t n = 1;
        for (const auto& f : factors_) n *= f.level_count();
        return n;
    }

    std::size_t sum_levels() const noexcept {
        std::size_t n = 0;
        for (const auto& f : factors_) n += f.level_count();
        return n;
    }

    void check(const Variant& v) const {
        if (v.size() != factors_.size()) {
            throw DimensionMismatch("variant has " + std::to_string(v.size()) +
                                    " levels, space has " + std::to_string(factors_.size()) +
                                    " factors");
        }
        for (std::size_t f = 0; f < factors_.size(); ++f) {
            if (v[f] >= factors_[f].level_count()) {
                throw ValidationError("level index out of range for factor '" +
                                      factors_[f].name() + "'");
            }
        }
    }

    Variant baseline_variant() const {
        Variant v;
        for (const auto& f : factors_) v.levels.push_back(f.baseline());
        return v;
    }

    Variant variant_from_names(const std::vector<std::string>& names) const {
        if (names.size() != factors_.size()) {
            throw DimensionMismatch("expected " + std::to_string(factors_.size()) +
                                    " level names, got " + std::to_string(names.size()));
        }
        Variant v;
        for (std::size_t f = 0; f < factors_.size(); ++f) {
            auto idx = factors_[f].level_index(names[f]);
            if (!idx) {
                throw ValidationError("unknown level '" + names[f] + "' for factor '" +
                                      factors_[f].name() + "'");
            }
            v.levels.push_back(*idx);
        }
        return v;
    }

    std::vector<std::string> level_names(const Variant& v) const {
        check(v);
        std::vector<std::string> out;
        for (std::size_t f = 0; f < factors_.size(); ++f) out.push_back(factors_[f].level_name(v[f]));
        return out;
    }

    // "Upfront/Level3/Ongoing/Generic"
    std::string label(const Variant& v, const std::string& sep = "/") const {
        std::string s;
        auto names = level_names(v);
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (i) s += sep;
            s += names[i];
        }
        return s;
    }

    bool operator==(const FactorSpace&) const = default;

private:
    std::vector<Factor> factors_;
};

inline std::size_t variant_count(const FactorSpace& space) { return space.variant_count(); }

// All variants in lexicographic order of level indices.
inline std::vector<Variant> enumerate_variants(const FactorSpace& space) {
    std::vector<Variant> out;
    out.reserve(space.variant_count());
    Variant cur(std::vector<std::size_t>(space.factor_count(), 0));
    while (true) {
        out.push_back(cur);
        std::size_t f = space.factor_count();
        while (f > 0) {
            --f;
            if (++cur.levels[f] < space.factor(f).level_count()) break;
            cur.levels[f] = 0;
            if (f == 0) return out;
        }
    }
}

inline std::size_t encoded_width(const FactorSpace& space, bool drop_baseline) {
    return drop_baseline ? space.sum_levels() - space.factor_count() : space.sum_levels();
}

inline std::vector<double> encode_one_hot(const FactorSpace& space, const Variant& variant,
                                          bool drop_baseline) {
    if (variant.size() != space.factor_count()) {
        throw DimensionMismatch("variant length " + std::to_string(variant.size()) +
                                " does not match factor count " +
                                std::to_string(space.factor_count()));
    }
    space.check(variant);
    std::vector<double> row;
    row.reserve(encoded_width(space, drop_baseline));
    for (std::size_t f = 0; f < space.factor_count(); ++f) {
        const auto& fac = space.factor(f);
        for (std::size_t l = 0; l < fac.level_count(); ++l) {
            if (drop_baseline && l == fac.baseline()) continue;
            row.push_back(variant[f] == l ? 1.0 : 0.0);
        }
    }
    return row;
}

inline Variant decode_one_hot(const FactorSpace& space, std::span<const double> row,
                              bool drop_baseline) {
    if (row.size() != encoded_width(space, drop_baseline)) {
        throw DimensionMismatch("one-hot row has wrong width");
    }
    Variant v;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < space.factor_count(); ++f) {
        const auto& fac = space.factor(f);
        std::optional<std::size_t> active;
        for (std::size_t l = 0; l < fac.level_count(); ++l) {
            if (drop_baseline && l == fac.baseline()) continue;
            if (row[pos++] != 0.0) {
                if (active) throw ValidationError("one-hot block has several active levels");
                active = l;
            }
        }
        if (!active) {
            if (!drop_baseline) throw ValidationError("one-hot block has no active level");
            active = fac.baseline();
        }
        v.levels.push_back(*active);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Factor-space definition file
//
//   {"factors": [{"name": "promo_spread", "levels": ["Spread", "Upfront"],
//                 "baseline": "Spread"}, ...]}
//
// "baseline" may be a level name or an index and defaults to the first level.
// ---------------------------------------------------------------------------
inline nlohmann::json to_json(const FactorSpace& space) {
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& f : space.factors()) {
        factors.push_back({{"name", f.name()},
                           {"levels", f.levels()},
                           {"baseline", f.level_name(f.baseline())}});
    }
    return {{"factors", factors}};
}

inline FactorSpace factor_space_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("factors") || !j["factors"].is_array()) {
        throw ValidationError("factor space document needs a 'factors' array");
    }
    std::vector<Factor> factors;
    for (const auto& jf : j["factors"]) {
        if (!jf.contains("name") || !jf.contains("levels")) {
            throw ValidationError("each factor needs 'name' and 'levels'");
        }
        auto name = jf["name"].get<std::string>();
        auto levels = jf["levels"].get<std::vector<std::string>>();
        std::size_t baseline = 0;
        if (jf.contains("baseline")) {
            const auto& b = jf["baseline"];
            if (b.is_string()) {
                auto it = std::find(levels.begin(), levels.end(), b.get<std::string>());
                if (it == levels.end()) {
                    throw ValidationError("baseline '" + b.get<std::string>() +
                                          "' is not a level of factor '" + name + "'");
                }
                baseline = static_cast<std::size_t>(it - levels.begin());
            } else {
                baseline = b.get<std::size_t>();
            }
        }
        factors.emplace_back(std::move(name), std::move(levels), baseline);
    }
    return FactorSpace(std::move(factors));
}

}  // namespace factorial
