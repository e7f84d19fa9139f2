#pragma once

// Experimental designs over a FactorSpace: full factorials, regular two-level
// fractions, Plackett-Burman screening designs, searched mixed-level fractions,
// and the balance/alias audit used to check them.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factorial/error.hpp"
#include "factorial/factor_space.hpp"
#include "factorial/rng.hpp"

namespace factorial {

enum class Role { in_sample, holdout, control };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::in_sample: return "in_sample";
        case Role::holdout: return "holdout";
        case Role::control: return "control";
    }
    return "in_sample";
}

inline Role role_from_string(const std::string& s) {
    if (s == "in_sample") return Role::in_sample;
    if (s == "holdout") return Role::holdout;
    if (s == "control") return Role::control;
    throw ValidationError("unknown run role '" + s + "'");
}

struct Run {
    Variant variant;
    double weight = 0.0;
    Role role = Role::in_sample;
};

class Design {
public:
    Design() = default;

    Design(FactorSpace space, std::vector<Run> runs, std::string generator_spec = {})
        : space_(std::move(space)), runs_(std::move(runs)), generator_spec_(std::move(generator_spec)) {
        if (runs_.empty()) throw ValidationError("design has no runs");
        std::vector<Variant> seen;
        double non_control = 0.0;
        int holdouts = 0;
        for (const auto& r : runs_) {
            space_.check(r.variant);
            if (!(r.weight >= 0.0) || !std::isfinite(r.weight)) {
                throw ValidationError("allocation weights must be finite and nonnegative");
            }
            seen.push_back(r.variant);
            if (r.role != Role::control) non_control += r.weight;
            if (r.role == Role::holdout) ++holdouts;
        }
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
            throw ValidationError("design runs must be distinct by variant");
        }
        if (std::abs(non_control - 1.0) > 1e-12) {
            throw ValidationError("allocation weights of non-control runs must sum to 1");
        }
        if (holdouts > 1) throw ValidationError("design has more than one holdout run");
    }

    const FactorSpace& space() const noexcept { return space_; }
    const std::vector<Run>& runs() const noexcept { return runs_; }
    const std::string& generator_spec() const noexcept { return generator_spec_; }
    std::size_t run_count() const noexcept { return runs_.size(); }

    std::optional<std::size_t> run_index(const Variant& v) const {
        for (std::size_t i = 0; i < runs_.size(); ++i) {
            if (runs_[i].variant == v) return i;
        }
        return std::nullopt;
    }

    bool contains(const Variant& v) const { return run_index(v).has_value(); }

    double total_weight() const {
        double t = 0.0;
        for (const auto& r : runs_) t += r.weight;
        return t;
    }

    // Probability that a randomized unit lands on `v`; 0 when v is not a run.
    double propensity(const Variant& v) const {
        auto i = run_index(v);
        return i ? runs_[*i].weight / total_weight() : 0.0;
    }

    std::vector<Variant> variants_with_role(Role role) const {
        std::vector<Variant> out;
        for (const auto& r : runs_) {
            if (r.role == role) out.push_back(r.variant);
        }
        return out;
    }

    std::optional<Variant> holdout() const {
        for (const auto& r : runs_) {
            if (r.role == Role::holdout) return r.variant;
        }
        return std::nullopt;
    }

    Role role_of(const Variant& v) const {
        auto i = run_index(v);
        if (!i) throw ValidationError("variant is not a run of the design");
        return runs_[*i].role;
    }

    // Appends `v` as the holdout arm. With m non-control runs the holdout gets
    // weight 1/(m+1) and existing non-control weights are scaled by m/(m+1).
    Design with_holdout(const Variant& v) const {
        if (holdout()) throw ValidationError("design already has a holdout run");
        if (contains(v)) throw ValidationError("holdout variant is already a run of the design");
        std::size_t m = 0;
        for (const auto& r : runs_) m += r.role != Role::control;
        const double scale = static_cast<double>(m) / static_cast<double>(m + 1);
        std::vector<Run> runs = runs_;
        for (auto& r : runs) {
            if (r.role != Role::control) r.weight *= scale;
        }
        runs.push_back({v, 1.0 - scale, Role::holdout});
        return Design(space_, std::move(runs), generator_spec_);
    }

private:
    FactorSpace space_;
    std::vector<Run> runs_;
    std::string generator_spec_;
};

// ---------------------------------------------------------------------------
// BalanceReport
// ---------------------------------------------------------------------------
struct PairTable {
    std::size_t factor_a = 0;
    std::size_t factor_b = 0;
    std::vector<std::vector<double>> counts;  // [level of a][level of b]
};

struct BalanceReport {
    std::size_t run_count = 0;
    std::vector<std::vector<double>> level_counts;  // [factor][level]
    std::vector<PairTable> pair_tables;
    bool proportional_frequencies_ok = false;
    double max_proportionality_deviation = 0.0;
    std::optional<int> resolution;
    std::vector<std::string> defining_relation;
    std::vector<std::vector<std::string>> alias_groups;
};

namespace detail {

inline std::string factor_letter(std::size_t f) {
    if (f < 26) return std::string(1, static_cast<char>('A' + f));
    return "F" + std::to_string(f + 1);
}

inline std::string word_name(std::uint32_t mask, std::size_t p, bool negative = false) {
    if (mask == 0) return negative ? "-I" : "I";
    std::string s = negative ? "-" : "";
    for (std::size_t f = 0; f < p; ++f) {
        if (mask & (1u << f)) s += factor_letter(f);
    }
    return s;
}

// "ABC", "-ABD" or "D=ABC" (equivalent to ABCD). Returns (mask, negative).
inline std::pair<std::uint32_t, bool> parse_word(const std::string& text, std::size_t p) {
    std::string w;
    for (char c : text) {
        if (c != ' ') w += c;
    }
    bool negative = false;
    std::uint32_t mask = 0;
    auto eq = w.find('=');
    if (eq != std::string::npos) {
        auto lhs = w.substr(0, eq);
        auto rhs = w.substr(eq + 1);
        auto [lm, ln] = parse_word(lhs, p);
        auto [rm, rn] = parse_word(rhs, p);
        return {lm ^ rm, ln != rn};
    }
    std::size_t i = 0;
    if (!w.empty() && (w[0] == '-' || w[0] == '+')) {
        negative = w[0] == '-';
        i = 1;
    }
    if (i == w.size()) throw ValidationError("empty generator word '" + text + "'");
    for (; i < w.size(); ++i) {
        const char c = w[i];
        if (c < 'A' || c > 'Z' || static_cast<std::size_t>(c - 'A') >= p) {
            throw ValidationError("generator word '" + text + "' uses an unknown factor letter");
        }
        mask ^= 1u << (c - 'A');
    }
    return {mask, negative};
}

// Level index 0 -> -1, 1 -> +1.
inline int sign_code(std::size_t level) { return level == 0 ? -1 : 1; }

inline bool all_two_level(const FactorSpace& space) {
    for (const auto& f : space.factors()) {
        if (f.level_count() != 2) return false;
    }
    return true;
}

inline std::size_t word_length(std::uint32_t mask) {
    return static_cast<std::size_t>(std::popcount(mask));
}

}  // namespace detail

inline Design full_factorial(const FactorSpace& space) {
    auto variants = enumerate_variants(space);
    const double w = 1.0 / static_cast<double>(variants.size());
    std::vector<Run> runs;
    for (auto& v : variants) runs.push_back({std::move(v), w, Role::in_sample});
    return Design(space, std::move(runs), "full factorial");
}

// 2^(p-q) fraction: runs where every generator word's product of +/-1 codes
// equals its sign (+1 unless written with a leading '-').
inline Design regular_two_level_fraction(const FactorSpace& space,
                                         const std::vector<std::string>& generators) {
    if (!detail::all_two_level(space)) {
        throw ValidationError("regular two-level fractions need every factor to have 2 levels");
    }
    const std::size_t p = space.factor_count();
    if (p > 30) throw ValidationError("too many factors for a regular fraction");
    std::vector<std::pair<std::uint32_t, bool>> words;
    for (const auto& g : generators) words.push_back(detail::parse_word(g, p));

    const std::size_t q = words.size();
    if (q >= 31) throw ValidationError("too many generators");
    for (std::uint64_t sub = 1; sub < (1ULL << q); ++sub) {
        std::uint32_t m = 0;
        for (std::size_t k = 0; k < q; ++k) {
            if (sub & (1ULL << k)) m ^= words[k].first;
        }
        if (m == 0) throw ValidationError("generators are not independent");
    }

    std::vector<Run> runs;
    for (const auto& v : enumerate_variants(space)) {
        bool keep = true;
        for (const auto& [mask, negative] : words) {
            int prod = 1;
            for (std::size_t f = 0; f < p; ++f) {
                if (mask & (1u << f)) prod *= detail::sign_code(v[f]);
            }
            if (prod != (negative ? -1 : 1)) {
                keep = false;
                break;
            }
        }
        if (keep) runs.push_back({v, 0.0, Role::in_sample});
    }
    const double w = 1.0 / static_cast<double>(runs.size());
    for (auto& r : runs) r.weight = w;
    std::string spec;
    for (const auto& g : generators) spec += (spec.empty() ? "I=" : "=") + g;
    return Design(space, std::move(runs), spec.empty() ? "full factorial" : spec);
}

namespace detail {

// Standard Plackett-Burman generating rows.
inline const char* pb_first_row(std::size_t n) {
    switch (n) {
        case 4: return "++-";
        case 8: return "+++-+--";
        case 12: return "++-+++---+-";
        case 20: return "++--++++-+-+----++-";
        case 24: return "+++++-+-++--++--+-+----";
        default: return nullptr;
    }
}

}  // namespace detail

// Raw +/-1 matrix (run_count x (run_count - 1)): cyclic shifts of the first row
// followed by an all-minus row.
inline std::vector<std::vector<int>> plackett_burman_matrix(std::size_t run_count) {
    const char* first = detail::pb_first_row(run_count);
    if (!first) {
        throw ValidationError("unsupported Plackett-Burman run count " +
                              std::to_string(run_count) + " (use 4, 8, 12, 20 or 24)");
    }
    const std::size_t k = run_count - 1;
    std::vector<std::vector<int>> m(run_count, std::vector<int>(k, -1));
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < k; ++c) {
            m[r][c] = first[(c + k - r) % k] == '+' ? 1 : -1;
        }
    }
    return m;
}

// Uses the first factor_count columns. Level 0 of each factor is coded -1.
// Rows that coincide on the kept columns are merged and their weights summed.
inline Design plackett_burman(const FactorSpace& space, std::size_t run_count) {
    if (!detail::all_two_level(space)) {
        throw ValidationError("Plackett-Burman designs need two-level factors");
    }
    auto m = plackett_burman_matrix(run_count);
    if (space.factor_count() > run_count - 1) {
        throw ValidationError("Plackett-Burman with " + std::to_string(run_count) +
                              " runs supports at most " + std::to_string(run_count - 1) +
                              " factors");
    }
    std::map<Variant, double> merged;
    for (const auto& row : m) {
        Variant v;
        for (std::size_t f = 0; f < space.factor_count(); ++f) v.levels.push_back(row[f] > 0 ? 1 : 0);
        merged[v] += 1.0 / static_cast<double>(run_count);
    }
    std::vector<Run> runs;
    for (const auto& [v, w] : merged) runs.push_back({v, w, Role::in_sample});
    return Design(space, std::move(runs), "Plackett-Burman N=" + std::to_string(run_count));
}

inline FactorSpace two_level_space(std::size_t factor_count) {
    std::vector<Factor> fs;
    for (std::size_t f = 0; f < factor_count; ++f) {
        fs.emplace_back(detail::factor_letter(f), std::vector<std::string>{"-", "+"});
    }
    return FactorSpace(std::move(fs));
}

inline Design plackett_burman(std::size_t two_level_factor_count, std::size_t run_count) {
    return plackett_burman(two_level_space(two_level_factor_count), run_count);
}

// ---------------------------------------------------------------------------
// check_design
// ---------------------------------------------------------------------------
namespace detail {

inline void alias_analysis(const FactorSpace& space, const std::vector<Run>& runs,
                           BalanceReport& report) {
    const std::size_t p = space.factor_count();
    if (!all_two_level(space) || p > 16) return;
    const std::uint32_t full = (1u << p) - 1;
    std::vector<std::pair<std::uint32_t, bool>> defining;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        int first = 0;
        bool constant = true;
        double weighted = 0.0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            int prod = 1;
            for (std::size_t f = 0; f < p; ++f) {
                if (mask & (1u << f)) prod *= sign_code(runs[r].variant[f]);
            }
            if (r == 0) first = prod;
            else if (prod != first) constant = false;
            weighted += prod * runs[r].weight;
        }
        if (constant) {
            defining.emplace_back(mask, first < 0);
        } else if (std::abs(weighted) > 1e-9) {
            // Partially confounded: not a regular fraction.
            report.defining_relation.clear();
            return;
        }
    }
    if (defining.empty()) return;
    std::size_t res = p + 1;
    for (const auto& [mask, neg] : defining) {
        res = std::min(res, word_length(mask));
        report.defining_relation.push_back(word_name(mask, p, neg));
    }
    report.resolution = static_cast<int>(res);

    std::vector<bool> grouped(full + 1, false);
    for (std::uint32_t e = 1; e <= full; ++e) {
        if (word_length(e) > 2 || grouped[e]) continue;
        std::vector<std::pair<std::uint32_t, bool>> coset{{e, false}};
        for (const auto& [mask, neg] : defining) coset.emplace_back(e ^ mask, neg);
        std::sort(coset.begin(), coset.end(), [](const auto& a, const auto& b) {
            const auto la = word_length(a.first), lb = word_length(b.first);
            return la != lb ? la < lb : a.first < b.first;
        });
        std::vector<std::string> group;
        for (const auto& [m, neg] : coset) {
            grouped[m] = true;
            group.push_back(word_name(m, p, neg));
        }
        report.alias_groups.push_back(std::move(group));
    }
}

}  // namespace detail

// Audits the in-sample runs. Counts are allocation-weighted and rescaled so
// they sum to the run count N; proportionality requires n_ij * N == n_i * n_j.
inline BalanceReport check_design(const Design& design) {
    const auto& space = design.space();
    std::vector<Run> runs;
    for (const auto& r : design.runs()) {
        if (r.role == Role::in_sample) runs.push_back(r);
    }
    BalanceReport rep;
    rep.run_count = runs.size();
    if (runs.empty()) {
        rep.proportional_frequencies_ok = false;
        return rep;
    }
    double wsum = 0.0;
    for (const auto& r : runs) wsum += r.weight;
    const double n = static_cast<double>(runs.size());
    // Equal allocations count exactly one per run.
    const bool equal = std::all_of(runs.begin(), runs.end(), [&](const Run& r) { return r.weight == runs[0].weight; });
    auto scaled = [&](const Run& r) {
        return equal || !(wsum > 0.0) ? 1.0 : r.weight * n / wsum;
    };

    const std::size_t F = space.factor_count();
    rep.level_counts.resize(F);
    for (std::size_t f = 0; f < F; ++f) {
        rep.level_counts[f].assign(space.factor(f).level_count(), 0.0);
    }
    for (const auto& r : runs) {
        for (std::size_t f = 0; f < F; ++f) rep.level_counts[f][r.variant[f]] += scaled(r);
    }

    rep.proportional_frequencies_ok = true;
    for (std::size_t a = 0; a < F; ++a) {
        for (std::size_t b = a + 1; b < F; ++b) {
            PairTable t{a, b, std::vector<std::vector<double>>(
                                  space.factor(a).level_count(),
                                  std::vector<double>(space.factor(b).level_count(), 0.0))};
            for (const auto& r : runs) t.counts[r.variant[a]][r.variant[b]] += scaled(r);
            for (std::size_t i = 0; i < t.counts.size(); ++i) {
                for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
                    const double lhs = t.counts[i][j] * n;
                    const double rhs = rep.level_counts[a][i] * rep.level_counts[b][j];
                    const double dev = std::abs(lhs - rhs) / (n * n);
                    rep.max_proportionality_deviation = std::max(rep.max_proportionality_deviation, dev);
                    if (std::abs(lhs - rhs) > 1e-9 * std::max(1.0, rhs)) {
                        rep.proportional_frequencies_ok = false;
                    }
                }
            }
            rep.pair_tables.push_back(std::move(t));
        }
    }
    detail::alias_analysis(space, runs, rep);
    return rep;
}

// ---------------------------------------------------------------------------
// mixed_level_fraction
// ---------------------------------------------------------------------------
struct MixedLevelResult {
    Design design;
    bool proportional = false;
    // Sum over factor pairs and cells of (n_ij - n_i n_j / N)^2.
    double deviation = 0.0;
    std::size_t restarts_used = 0;
};

namespace detail {

inline void compositions(std::size_t total, std::size_t parts, std::vector<std::size_t>& cur,
                         std::vector<std::vector<std::size_t>>& out) {
    if (parts == 1) {
        if (total >= 1) {
            cur.push_back(total);
            out.push_back(cur);
            cur.pop_back();
        }
        return;
    }
    for (std::size_t x = 1; x + (parts - 1) <= total; ++x) {
        cur.push_back(x);
        compositions(total - x, parts - 1, cur, out);
        cur.pop_back();
    }
}

// Necessary condition for proportional frequencies with every level present:
// each factor needs a marginal composition of N such that, for every other
// factor, some composition makes all n_i * n_j / N integral.
inline bool marginals_feasible(const FactorSpace& space, std::size_t n) {
    const std::size_t F = space.factor_count();
    std::vector<std::vector<std::vector<std::size_t>>> cand(F);
    for (std::size_t f = 0; f < F; ++f) {
        std::vector<std::size_t> cur;
        compositions(n, space.factor(f).level_count(), cur, cand[f]);
        if (cand[f].empty()) return false;
    }
    auto compatible = [n](const std::vector<std::size_t>& r, const std::vector<std::size_t>& c) {
        for (auto ri : r) {
            for (auto cj : c) {
                if ((ri * cj) % n != 0) return false;
            }
        }
        return true;
    };
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t a = 0; a < F; ++a) {
            std::vector<std::vector<std::size_t>> keep;
            for (const auto& r : cand[a]) {
                bool ok = true;
                for (std::size_t b = 0; b < F && ok; ++b) {
                    if (b == a) continue;
                    ok = std::any_of(cand[b].begin(), cand[b].end(),
                                     [&](const auto& c) { return compatible(r, c); });
                }
                if (ok) keep.push_back(r);
            }
            if (keep.size() != cand[a].size()) changed = true;
            cand[a] = std::move(keep);
            if (cand[a].empty()) return false;
        }
    }
    return true;
}

class ProportionalityObjective {
public:
    ProportionalityObjective(const FactorSpace& space, std::int64_t n) : space_(space), n_(n) {
        const std::size_t F = space.factor_count();
        marg_.resize(F);
        for (std::size_t f = 0; f < F; ++f) marg_[f].assign(space.factor(f).level_count(), 0);
        for (std::size_t a = 0; a < F; ++a) {
            for (std::size_t b = a + 1; b < F; ++b) {
                pairs_.push_back({a, b, std::vector<std::int64_t>(
                                            space.factor(a).level_count() *
                                            space.factor(b).level_count(), 0)});
            }
        }
    }

    void add(const Variant& v, std::int64_t sign) {
        for (std::size_t f = 0; f < marg_.size(); ++f) marg_[f][v[f]] += sign;
        for (auto& p : pairs_) {
            p.cells[v[p.a] * space_.factor(p.b).level_count() + v[p.b]] += sign;
        }
    }

    // Sum of (n_ij N - n_i n_j)^2 plus a large penalty per absent level.
    std::int64_t value() const {
        std::int64_t total = 0;
        const std::int64_t penalty = n_ * n_ * n_ * n_ + 1;
        for (const auto& m : marg_) {
            for (auto c : m) {
                if (c == 0) total += penalty;
            }
        }
        for (const auto& p : pairs_) {
            const std::size_t lb = space_.factor(p.b).level_count();
            for (std::size_t i = 0; i < marg_[p.a].size(); ++i) {
                for (std::size_t j = 0; j < lb; ++j) {
                    const std::int64_t d = p.cells[i * lb + j] * n_ - marg_[p.a][i] * marg_[p.b][j];
                    total += d * d;
                }
            }
        }
        return total;
    }

private:
    struct Pair {
        std::size_t a, b;
        std::vector<std::int64_t> cells;
    };
    const FactorSpace& space_;
    std::int64_t n_;
    std::vector<std::vector<std::int64_t>> marg_;
    std::vector<Pair> pairs_;
};

}  // namespace detail

// Random-restart swap descent for `target_runs` distinct variants with
// proportional two-way frequencies. Swaps exchange one selected variant with
// one unselected variant; the first improving swap in scan order is taken.
inline MixedLevelResult mixed_level_fraction(const FactorSpace& space, std::size_t target_runs,
                                             std::uint64_t seed, std::size_t max_restarts = 500) {
    const std::size_t total = space.variant_count();
    if (target_runs >= total) {
        throw ValidationError("target_runs must be smaller than the variant count (" +
                              std::to_string(total) + ")");
    }
    std::size_t max_levels = 0;
    for (const auto& f : space.factors()) max_levels = std::max(max_levels, f.level_count());
    if (target_runs < max_levels || !detail::marginals_feasible(space, target_runs)) {
        throw InfeasibleDesignError("no " + std::to_string(target_runs) +
                                    "-run design can have proportional two-way frequencies "
                                    "with every level present");
    }

    const auto all = enumerate_variants(space);
    auto rng = make_rng(seed, "design.mixed_level");
    const auto n = static_cast<std::int64_t>(target_runs);

    std::vector<std::size_t> best_sel;
    std::int64_t best_val = INT64_MAX;
    std::size_t restarts = 0;
    for (; restarts < max_restarts && best_val != 0; ++restarts) {
        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = total - 1; i > 0; --i) {
            std::swap(order[i], order[uniform_index(rng, i + 1)]);
        }
        std::vector<std::size_t> sel(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_runs));
        std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(target_runs), order.end());
        std::sort(sel.begin(), sel.end());
        std::sort(rest.begin(), rest.end());

        detail::ProportionalityObjective obj(space, n);
        for (auto i : sel) obj.add(all[i], 1);
        std::int64_t cur = obj.value();

        bool improved = true;
        while (improved && cur != 0) {
            improved = false;
            for (std::size_t si = 0; si < sel.size() && !improved; ++si) {
                for (std::size_t ri = 0; ri < rest.size() && !improved; ++ri) {
                    obj.add(all[sel[si]], -1);
                    obj.add(all[rest[ri]], 1);
                    const std::int64_t cand = obj.value();
                    if (cand < cur) {
                        cur = cand;
                        std::swap(sel[si], rest[ri]);
                        improved = true;
                    } else {
                        obj.add(all[rest[ri]], -1);
                        obj.add(all[sel[si]], 1);
                    }
                }
            }
        }
        if (cur < best_val) {
            best_val = cur;
            best_sel = sel;
        }
    }

    std::sort(best_sel.begin(), best_sel.end());
    std::vector<Run> runs;
    const double w = 1.0 / static_cast<double>(target_runs);
    for (auto i : best_sel) runs.push_back({all[i], w, Role::in_sample});
    MixedLevelResult out{
        Design(space, std::move(runs),
               "mixed-level search N=" + std::to_string(target_runs) + " seed=" + std::to_string(seed)),
        best_val == 0, static_cast<double>(best_val) / static_cast<double>(n * n), restarts};
    return out;
}

// Uniform draw from variants not yet covered by the design.
inline Variant select_holdout(const Design& design, std::uint64_t seed) {
    std::vector<Variant> excluded;
    for (const auto& v : enumerate_variants(design.space())) {
        if (!design.contains(v)) excluded.push_back(v);
    }
    if (excluded.empty()) {
        throw ValidationError("design covers every variant; no holdout candidate remains");
    }
    auto rng = make_rng(seed, "design.holdout");
    return excluded[uniform_index(rng, excluded.size())];
}

// ---------------------------------------------------------------------------
// Design file
//
//   {"space": {...factor space...}, "generator_spec": "I=ABC",
//    "runs": [{"levels": ["Upfront", "Level2", "Ongoing", "Generic"],
//              "weight": 0.125, "role": "in_sample"}, ...]}
// ---------------------------------------------------------------------------
inline nlohmann::json to_json(const Design& d) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : d.runs()) {
        runs.push_back({{"levels", d.space().level_names(r.variant)},
                        {"weight", r.weight},
                        {"role", to_string(r.role)}});
    }
    return {{"space", to_json(d.space())}, {"generator_spec", d.generator_spec()}, {"runs", runs}};
}

inline Design design_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("space") || !j.contains("runs")) {
        throw ValidationError("design document needs 'space' and 'runs'");
    }
    auto space = factor_space_from_json(j["space"]);
    std::vector<Run> runs;
    for (const auto& jr : j["runs"]) {
        Run r;
        r.variant = space.variant_from_names(jr.at("levels").get<std::vector<std::string>>());
        r.weight = jr.at("weight").get<double>();
        r.role = role_from_string(jr.value("role", std::string("in_sample")));
        runs.push_back(std::move(r));
    }
    return Design(std::move(space), std::move(runs), j.value("generator_spec", std::string()));
}

inline nlohmann::json to_json(const BalanceReport& r, const FactorSpace& space) {
    nlohmann::json levels = nlohmann::json::object();
    for (std::size_t f = 0; f < r.level_counts.size(); ++f) {
        nlohmann::json m = nlohmann::json::object();
        for (std::size_t l = 0; l < r.level_counts[f].size(); ++l) {
            m[space.factor(f).level_name(l)] = r.level_counts[f][l];
        }
        levels[space.factor(f).name()] = m;
    }
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& t : r.pair_tables) {
        pairs.push_back({{"factor_a", space.factor(t.factor_a).name()},
                         {"factor_b", space.factor(t.factor_b).name()},
                         {"counts", t.counts}});
    }
    nlohmann::json out{{"run_count", r.run_count},
                       {"level_counts", levels},
                       {"pair_tables", pairs},
                       {"proportional_frequencies_ok", r.proportional_frequencies_ok},
                       {"max_proportionality_deviation", r.max_proportionality_deviation},
                       {"defining_relation", r.defining_relation},
                       {"alias_groups", r.alias_groups}};
    out["resolution"] = r.resolution ? nlohmann::json(*r.resolution) : nlohmann::json(nullptr);
    return out;
}

}  // namespace factorial
