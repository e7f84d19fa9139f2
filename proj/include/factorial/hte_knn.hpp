#pragma once

// Causal K-nearest-neighbour CATE estimates and transformed-outcome tuning.
// Distances are Euclidean over z-scored covariates (dataset mean and SD);
// ties in distance are broken by unit_id.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "factorial/dataset.hpp"
#include "factorial/error.hpp"

namespace factorial {

struct CateEstimate {
    std::vector<double> x;
    Variant variant_a;
    Variant variant_b;
    std::size_t k = 0;
    double tau_hat = 0.0;
};

namespace detail {

struct Standardizer {
    std::vector<std::size_t> columns;
    std::vector<double> mean;
    std::vector<double> scale;

    Standardizer(const Dataset& data, const std::vector<std::string>& covariates)
        : columns(data.covariate_indices(covariates)) {
        const double n = static_cast<double>(data.size());
        for (auto col : columns) {
            double s = 0.0, ss = 0.0;
            for (const auto& r : data.records()) s += r.covariates[col];
            const double m = n > 0 ? s / n : 0.0;
            for (const auto& r : data.records()) ss += (r.covariates[col] - m) * (r.covariates[col] - m);
            const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
            mean.push_back(m);
            scale.push_back(sd > 0.0 ? sd : 1.0);
        }
    }

    std::vector<double> unit(const UnitRecord& r) const {
        std::vector<double> z(columns.size());
        for (std::size_t k = 0; k < columns.size(); ++k) z[k] = (r.covariates[columns[k]] - mean[k]) / scale[k];
        return z;
    }

    std::vector<double> query(std::span<const double> x) const {
        if (x.size() != columns.size()) throw DimensionMismatch("query has wrong covariate count");
        std::vector<double> z(columns.size());
        for (std::size_t k = 0; k < columns.size(); ++k) z[k] = (x[k] - mean[k]) / scale[k];
        return z;
    }
};

struct ArmPoint {
    const UnitRecord* unit;
    std::vector<double> z;
};

inline std::vector<ArmPoint> arm_points(const Dataset& data, const Variant& v, const Standardizer& st) {
    std::vector<ArmPoint> out;
    for (const auto& r : data.records()) {
        if (r.assigned == v && r.outcome) out.push_back({&r, st.unit(r)});
    }
    return out;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
    return d;
}

// Indices of the `k` nearest arm points to `z`, nearest first, skipping `skip`.
inline std::vector<std::size_t> nearest(const std::vector<ArmPoint>& arm, const std::vector<double>& z,
                                        std::size_t k, const UnitRecord* skip = nullptr) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(arm.size());
    for (std::size_t i = 0; i < arm.size(); ++i) {
        if (arm[i].unit == skip) continue;
        d.emplace_back(sq_dist(arm[i].z, z), i);
    }
    if (k > d.size()) throw InsufficientDataError("not enough neighbours in arm");
    auto cmp = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return arm[a.second].unit->unit_id < arm[b.second].unit->unit_id;
    };
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end(), cmp);
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
    return out;
}

inline double mean_outcome(const std::vector<ArmPoint>& arm, const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (auto i : idx) s += *arm[i].unit->outcome;
    return s / static_cast<double>(idx.size());
}

}  // namespace detail

// tau_hat(x) = mean Y over the k nearest a-units - mean Y over the k nearest b-units.
inline CateEstimate knn_cate(const Dataset& data, std::span<const double> x, const Variant& a,
                             const Variant& b, std::size_t k, const std::vector<std::string>& covariates) {
    if (k == 0) throw ValidationError("k must be at least 1");
    detail::Standardizer st(data, covariates);
    const auto arm_a = detail::arm_points(data, a, st);
    const auto arm_b = detail::arm_points(data, b, st);
    if (arm_a.size() < k || arm_b.size() < k) {
        throw InsufficientDataError("knn_cate: k=" + std::to_string(k) + " exceeds arm sizes (" +
                                    std::to_string(arm_a.size()) + ", " + std::to_string(arm_b.size()) + ")");
    }
    const auto z = st.query(x);
    CateEstimate est;
    est.x.assign(x.begin(), x.end());
    est.variant_a = a;
    est.variant_b = b;
    est.k = k;
    est.tau_hat = detail::mean_outcome(arm_a, detail::nearest(arm_a, z, k)) -
                  detail::mean_outcome(arm_b, detail::nearest(arm_b, z, k));
    return est;
}

struct TransformedOutcome {
    std::vector<const UnitRecord*> units;  // a-units and b-units in dataset order
    std::vector<double> values;            // Y*
    double p = 0.5;                        // Pr(a | a or b)
};

// Y* = (W - p) / (p (1 - p)) * Y over units assigned a (W = 1) or b (W = 0),
// with p = e(a) / (e(a) + e(b)) from the design allocation.
inline TransformedOutcome transformed_outcome(const Dataset& data, const Variant& a, const Variant& b) {
    const double ea = data.design().propensity(a);
    const double eb = data.design().propensity(b);
    if (!(ea > 0.0) || !(eb > 0.0)) {
        throw ValidationError("transformed outcome: both variants need positive propensity");
    }
    TransformedOutcome out;
    out.p = ea / (ea + eb);
    if (!(out.p > 0.0 && out.p < 1.0)) throw ValidationError("transformed outcome: propensity is 0 or 1");
    const double denom = out.p * (1.0 - out.p);
    for (const auto& r : data.records()) {
        if (!r.outcome) continue;
        const bool is_a = r.assigned == a;
        if (!is_a && r.assigned != b) continue;
        out.units.push_back(&r);
        out.values.push_back(((is_a ? 1.0 : 0.0) - out.p) / denom * *r.outcome);
    }
    return out;
}

struct TuneResult {
    std::size_t k = 0;
    std::vector<std::pair<std::size_t, double>> loss;  // (k, mean squared error)
};

// Leave-one-out transformed-outcome loss for every k in the grid; the
// smallest k attains ties.
inline TuneResult tune_k_report(const Dataset& data, const Variant& a, const Variant& b,
                                std::vector<std::size_t> k_grid, const std::vector<std::string>& covariates) {
    if (k_grid.empty()) throw ValidationError("k grid is empty");
    detail::Standardizer st(data, covariates);
    const auto arm_a = detail::arm_points(data, a, st);
    const auto arm_b = detail::arm_points(data, b, st);
    const std::size_t limit = std::min(arm_a.size(), arm_b.size());
    std::sort(k_grid.begin(), k_grid.end());
    k_grid.erase(std::unique(k_grid.begin(), k_grid.end()), k_grid.end());
    for (auto k : k_grid) {
        if (k == 0 || k + 1 > limit) {
            throw ValidationError("grid value k=" + std::to_string(k) + " exceeds leave-one-out arm size " +
                                  std::to_string(limit == 0 ? 0 : limit - 1));
        }
    }
    const std::size_t kmax = k_grid.back();
    const auto yt = transformed_outcome(data, a, b);

    std::vector<double> sse(k_grid.size(), 0.0);
    for (std::size_t i = 0; i < yt.units.size(); ++i) {
        const auto* u = yt.units[i];
        const auto z = st.unit(*u);
        const auto na = detail::nearest(arm_a, z, kmax, u);
        const auto nb = detail::nearest(arm_b, z, kmax, u);
        double sa = 0.0, sb = 0.0;
        std::size_t g = 0;
        for (std::size_t k = 1; k <= kmax; ++k) {
            sa += *arm_a[na[k - 1]].unit->outcome;
            sb += *arm_b[nb[k - 1]].unit->outcome;
            if (k == k_grid[g]) {
                const double tau = (sa - sb) / static_cast<double>(k);
                const double e = yt.values[i] - tau;
                sse[g] += e * e;
                ++g;
            }
        }
    }
    TuneResult res;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
        const double mse = sse[g] / static_cast<double>(yt.units.size());
        res.loss.emplace_back(k_grid[g], mse);
        if (mse < best) {
            best = mse;
            res.k = k_grid[g];
        }
    }
    return res;
}

inline std::size_t tune_k(const Dataset& data, const Variant& a, const Variant& b,
                          const std::vector<std::size_t>& k_grid, const std::vector<std::string>& covariates) {
    return tune_k_report(data, a, b, k_grid, covariates).k;
}

}  // namespace factorial
