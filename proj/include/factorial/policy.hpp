#pragma once

// Optimal policy selection. The models are additive across factors, so the
// argmax over all variants is the per-factor argmax of each level's term.

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factorial/design.hpp"
#include "factorial/estimate.hpp"

namespace factorial {

namespace detail {

// Per factor, the level with the largest term; lowest index wins ties.
inline Variant argmax_levels(const EffectsFit& fit, std::span<const double> x) {
    const auto& space = fit.space();
    Variant v;
    for (std::size_t f = 0; f < space.factor_count(); ++f) {
        std::size_t best = 0;
        double best_val = 0.0;
        for (std::size_t l = 0; l < space.factor(f).level_count(); ++l) {
            double val = fit.beta(f, l);
            for (std::size_t c = 0; c < x.size(); ++c) val += fit.lambda(f, l, c) * x[c];
            if (l == 0 || val > best_val) {
                best = l;
                best_val = val;
            }
        }
        v.levels.push_back(best);
    }
    return v;
}

}  // namespace detail

inline Variant optimal_global(const EffectsFit& fit) { return detail::argmax_levels(fit, {}); }

inline Variant optimal_personalized(const EffectsFit& fit, std::span<const double> x) {
    if (x.size() != fit.covariates().size()) {
        throw DimensionMismatch("personalized policy needs " + std::to_string(fit.covariates().size()) +
                              " covariate values");
    }
    return detail::argmax_levels(fit, x);
}

struct PolicyPrediction {
    Variant variant;
    double predicted_outcome = 0.0;
    bool in_sample = false;
};

// Every variant of the fit's space, sorted by predicted outcome (descending).
// Covariate terms, if any, are evaluated at x (default all zeros).
inline std::vector<PolicyPrediction> predict_all(const EffectsFit& fit, const Design& design,
                                                 std::span<const double> x = {}) {
    std::vector<double> zeros(fit.covariates().size(), 0.0);
    if (x.empty()) x = zeros;
    std::vector<PolicyPrediction> out;
    for (const auto& v : enumerate_variants(fit.space())) {
        bool in = false;
        if (auto i = design.run_index(v)) in = design.runs()[*i].role == Role::in_sample;
        out.push_back({v, predict_outcome(fit, v, x), in});
    }
    std::stable_sort(out.begin(), out.end(), [](const PolicyPrediction& a, const PolicyPrediction& b) {
        return a.predicted_outcome > b.predicted_outcome;
    });
    return out;
}

struct SegmentPolicyRow {
    long lo = 0;
    long hi = 0;  // inclusive
    Variant optimal_variant;
    double constant = 0.0;  // prediction = constant + slope * covariate
    double slope = 0.0;
};

// Evaluates the personalized argmax at each integer grid point of one
// covariate (others held at `reference`, default 0) and merges runs of equal
// optimal variants into intervals.
inline std::vector<SegmentPolicyRow> segment_policy_table(const EffectsFit& fit, const std::string& covariate,
                                                          long grid_lo, long grid_hi,
                                                          const std::map<std::string, double>& reference = {}) {
    if (grid_hi < grid_lo) throw ValidationError("segment table grid is empty");
    const std::size_t C = fit.covariates().size();
    std::optional<std::size_t> target;
    if (C > 0) target = fit.covariate_position(covariate);
    std::vector<double> x(C, 0.0);
    for (const auto& [name, val] : reference) {
        const auto c = fit.covariate_position(name);
        if (target && c == *target) continue;
        x[c] = val;
    }

    std::vector<SegmentPolicyRow> rows;
    for (long g = grid_lo; g <= grid_hi; ++g) {
        if (target) x[*target] = static_cast<double>(g);
        const auto v = detail::argmax_levels(fit, x);
        if (!rows.empty() && rows.back().optimal_variant == v) {
            rows.back().hi = g;
            continue;
        }
        SegmentPolicyRow row;
        row.lo = row.hi = g;
        row.optimal_variant = v;
        row.constant = fit.intercept();
        for (std::size_t f = 0; f < fit.space().factor_count(); ++f) row.constant += fit.beta(f, v[f]);
        for (std::size_t c = 0; c < C; ++c) {
            double coef = fit.gamma(c);
            for (std::size_t f = 0; f < fit.space().factor_count(); ++f) coef += fit.lambda(f, v[f], c);
            if (target && c == *target) row.slope = coef;
            else row.constant += coef * x[c];
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace factorial
