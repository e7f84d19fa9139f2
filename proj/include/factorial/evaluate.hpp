#pragma once

// Validation of the additive model against a holdout arm, segment-level
// predicted-versus-observed comparison, and policy value estimates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factorial/dataset.hpp"
#include "factorial/estimate.hpp"
#include "factorial/policy.hpp"
#include "factorial/special.hpp"

namespace factorial {

struct HoldoutArmRow {
    Variant arm;
    std::size_t n = 0;
    double observed_diff = 0.0;  // mean(holdout) - mean(arm)
    double observed_se = 0.0;
    double predicted_diff = 0.0;
    double predicted_se = 0.0;
};

struct HoldoutReport {
    Variant holdout;
    std::size_t n_holdout = 0;
    std::vector<HoldoutArmRow> rows;
    double statistic = 0.0;
    std::size_t dof = 0;  // rank of the covariance of (observed - predicted)
    double p_value = 1.0;
};

namespace detail {

struct ArmSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0;
    Eigen::VectorXd mean_row;
};

inline ArmSummary summarize_arm(const Dataset& data, const EffectsFit& fit, const Variant& v) {
    ArmSummary s;
    s.mean_row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fit.size()));
    double sum = 0.0;
    std::vector<double> ys;
    for (const auto& r : data.records()) {
        if (r.assigned != v || !r.outcome) continue;
        ys.push_back(*r.outcome);
        sum += *r.outcome;
        s.mean_row += fit.regression_row(v, fit_covariates(fit, data, r));
    }
    s.n = ys.size();
    if (s.n == 0) return s;
    s.mean = sum / static_cast<double>(s.n);
    s.mean_row /= static_cast<double>(s.n);
    double ss = 0.0;
    for (double y : ys) ss += (y - s.mean) * (y - s.mean);
    s.var = s.n > 1 ? ss / static_cast<double>(s.n - 1) : 0.0;
    return s;
}

// Wald statistic e' S^+ e with the pseudo-inverse over eigenvalues above a
// relative threshold; returns (statistic, rank).
inline std::pair<double, std::size_t> pseudo_wald(const Eigen::VectorXd& e, const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    const auto& w = es.eigenvalues();
    const double wmax = w.size() ? w.maxCoeff() : 0.0;
    if (!(wmax > 0.0)) return {0.0, 0};
    const Eigen::VectorXd z = es.eigenvectors().transpose() * e;
    double stat = 0.0;
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w(i) > 1e-9 * wmax) {
            stat += z(i) * z(i) / w(i);
            ++rank;
        }
    }
    return {stat, rank};
}

}  // namespace detail

// Joint test that observed holdout-vs-arm differences match the fit's
// predictions. Predicted differences use each arm's average regression row,
// so (observed - predicted) is the holdout mean residual minus the arm mean
// residual. Its covariance, for arms drawn from the fit's training units, is
//   v_H 11' + s^2 diag(1/n_j) - Xbar V Xbar'
// with v_H = s_H^2/n_H + xbar_H' V xbar_H. The statistic uses the
// pseudo-inverse and is referred to chi-square with dof = rank.
inline HoldoutReport validate_holdout(const Dataset& data, const EffectsFit& fit) {
    const auto hv = data.design().holdout();
    if (!hv) throw ValidationError("validate_holdout: design has no holdout arm");
    const auto hs = detail::summarize_arm(data, fit, *hv);
    if (hs.n < 2) throw InsufficientDataError("validate_holdout: holdout arm needs at least 2 units with outcomes");

    const auto arms = data.design().variants_with_role(Role::in_sample);
    const auto J = static_cast<Eigen::Index>(arms.size());
    const auto p = static_cast<Eigen::Index>(fit.size());
    Eigen::MatrixXd Xbar(J, p);
    Eigen::VectorXd e(J);
    Eigen::VectorXd inv_n(J);
    const Eigen::VectorXd& b = fit.coefficients();
    const Eigen::MatrixXd& V = fit.covariance();
    const double s2 = fit.residual_sd() * fit.residual_sd();

    HoldoutReport rep;
    rep.holdout = *hv;
    rep.n_holdout = hs.n;
    for (Eigen::Index j = 0; j < J; ++j) {
        const auto& arm = arms[static_cast<std::size_t>(j)];
        const auto as = detail::summarize_arm(data, fit, arm);
        if (as.n == 0) {
            throw InsufficientDataError("validate_holdout: arm " + data.space().label(arm) + " has no units");
        }
        Xbar.row(j) = as.mean_row.transpose();
        const Eigen::VectorXd c = hs.mean_row - as.mean_row;
        HoldoutArmRow row;
        row.arm = arm;
        row.n = as.n;
        row.observed_diff = hs.mean - as.mean;
        row.observed_se = std::sqrt(hs.var / static_cast<double>(hs.n) + as.var / static_cast<double>(as.n));
        row.predicted_diff = c.dot(b);
        row.predicted_se = std::sqrt(std::max(0.0, c.dot(V * c)));
        e(j) = row.observed_diff - row.predicted_diff;
        inv_n(j) = 1.0 / static_cast<double>(as.n);
        rep.rows.push_back(row);
    }
    const double vh = hs.var / static_cast<double>(hs.n) + hs.mean_row.dot(V * hs.mean_row);
    Eigen::MatrixXd S = Eigen::MatrixXd::Constant(J, J, vh);
    S.diagonal() += s2 * inv_n;
    S -= Xbar * V * Xbar.transpose();

    if (e.cwiseAbs().maxCoeff() == 0.0) {
        rep.statistic = 0.0;
        rep.dof = static_cast<std::size_t>(J);
        rep.p_value = 1.0;
        return rep;
    }
    auto [stat, rank] = detail::pseudo_wald(e, S);
    rep.statistic = stat;
    rep.dof = rank;
    rep.p_value = rank > 0 ? special::chi2_sf(stat, static_cast<double>(rank)) : 1.0;
    return rep;
}

struct SegmentRow {
    std::size_t group = 0;
    Variant arm;
    double predicted_diff = 0.0;  // arm - holdout
    double observed_diff = 0.0;   // arm - holdout
    double observed_se = 0.0;
};

struct SegmentReport {
    std::size_t k = 0;
    std::vector<std::size_t> group_sizes;
    std::vector<SegmentRow> rows;
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    double slope_p = 1.0;
    double predicted_variance = 0.0;
    double observed_variance = 0.0;
    // Group index per record (dataset order); -1 for units not grouped.
    std::vector<int> unit_group;
};

// (1) covariates -> (2) OLS of Y on X over in-sample units -> (3) K equal
// quantile groups of predicted Y over in-sample and holdout units ->
// (4) predicted arm-vs-holdout effect from `fit` -> (5) observed effect ->
// (6) regression of observed on predicted across all group x arm cells.
inline SegmentReport segment_validation(const Dataset& data, const EffectsFit& fit, std::size_t k_groups,
                                        const std::vector<std::string>& outcome_covariates) {
    if (k_groups < 2) throw ValidationError("segment_validation: K must be at least 2");
    const auto hv = data.design().holdout();
    if (!hv) throw ValidationError("segment_validation: design has no holdout arm");
    const auto cols = data.covariate_indices(outcome_covariates);
    const auto q = static_cast<Eigen::Index>(cols.size()) + 1;

    std::vector<std::size_t> idx;  // in-sample + holdout units with outcomes
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data.records()[i];
        if (!r.outcome) continue;
        const auto role = data.design().role_of(r.assigned);
        if (role == Role::in_sample || role == Role::holdout) idx.push_back(i);
    }

    // Step 2: plain outcome model on in-sample units.
    std::vector<std::size_t> train;
    for (auto i : idx) {
        if (data.design().role_of(data.records()[i].assigned) == Role::in_sample) train.push_back(i);
    }
    if (static_cast<Eigen::Index>(train.size()) <= q) throw InsufficientDataError("segment_validation: too few units");
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(train.size()), q);
    Eigen::VectorXd yz(Z.rows());
    for (std::size_t t = 0; t < train.size(); ++t) {
        const auto& r = data.records()[train[t]];
        Z(static_cast<Eigen::Index>(t), 0) = 1.0;
        for (std::size_t c = 0; c < cols.size(); ++c) Z(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c) + 1) = r.covariates[cols[c]];
        yz(static_cast<Eigen::Index>(t)) = *r.outcome;
    }
    const Eigen::VectorXd g = Z.colPivHouseholderQr().solve(yz);
    auto outcome_score = [&](const UnitRecord& r) {
        double s = g(0);
        for (std::size_t c = 0; c < cols.size(); ++c) s += g(static_cast<Eigen::Index>(c) + 1) * r.covariates[cols[c]];
        return s;
    };

    // Step 3: equal-sized groups, sizes differ by at most one.
    std::vector<std::pair<double, std::size_t>> scored;
    for (auto i : idx) scored.emplace_back(outcome_score(data.records()[i]), i);
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return data.records()[a.second].unit_id < data.records()[b.second].unit_id;
    });
    SegmentReport rep;
    rep.k = k_groups;
    rep.unit_group.assign(data.size(), -1);
    rep.group_sizes.assign(k_groups, 0);
    const std::size_t n = scored.size();
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t grp = pos * k_groups / n;
        rep.unit_group[scored[pos].second] = static_cast<int>(grp);
        ++rep.group_sizes[grp];
    }

    // Steps 4-5.
    const auto arms = data.design().variants_with_role(Role::in_sample);
    struct Acc {
        std::size_t n = 0;
        double pred = 0.0, y = 0.0, yy = 0.0;
    };
    auto accumulate = [&](std::size_t grp, const Variant& v) {
        Acc a;
        for (auto i : idx) {
            const auto& r = data.records()[i];
            if (rep.unit_group[i] != static_cast<int>(grp) || r.assigned != v) continue;
            ++a.n;
            a.pred += predict_outcome(fit, v, fit_covariates(fit, data, r));
            a.y += *r.outcome;
            a.yy += *r.outcome * *r.outcome;
        }
        return a;
    };
    auto var_of = [](const Acc& a) {
        const double m = a.y / static_cast<double>(a.n);
        return (a.yy - static_cast<double>(a.n) * m * m) / static_cast<double>(a.n - 1);
    };
    for (std::size_t grp = 0; grp < k_groups; ++grp) {
        const Acc h = accumulate(grp, *hv);
        if (h.n < 2) {
            throw InsufficientDataError("segment_validation: group " + std::to_string(grp) +
                                        " has fewer than 2 holdout units");
        }
        for (const auto& arm : arms) {
            const Acc a = accumulate(grp, arm);
            if (a.n < 2) {
                throw InsufficientDataError("segment_validation: group " + std::to_string(grp) + " has fewer than 2 units in arm " +
                                            data.space().label(arm));
            }
            SegmentRow row;
            row.group = grp;
            row.arm = arm;
            row.predicted_diff = a.pred / static_cast<double>(a.n) - h.pred / static_cast<double>(h.n);
            row.observed_diff = a.y / static_cast<double>(a.n) - h.y / static_cast<double>(h.n);
            row.observed_se = std::sqrt(var_of(a) / static_cast<double>(a.n) + var_of(h) / static_cast<double>(h.n));
            rep.rows.push_back(row);
        }
    }

    // Step 6: observed = a + slope * predicted.
    const double m = static_cast<double>(rep.rows.size());
    double mp = 0.0, mo = 0.0;
    for (const auto& r : rep.rows) {
        mp += r.predicted_diff;
        mo += r.observed_diff;
    }
    mp /= m;
    mo /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& r : rep.rows) {
        sxx += (r.predicted_diff - mp) * (r.predicted_diff - mp);
        sxy += (r.predicted_diff - mp) * (r.observed_diff - mo);
        syy += (r.observed_diff - mo) * (r.observed_diff - mo);
    }
    rep.predicted_variance = sxx / (m - 1.0);
    rep.observed_variance = syy / (m - 1.0);
    if (sxx > 0.0 && m > 2.0) {
        rep.slope = sxy / sxx;
        rep.intercept = mo - rep.slope * mp;
        const double rss = std::max(0.0, syy - rep.slope * sxy);
        rep.slope_se = std::sqrt(rss / (m - 2.0) / sxx);
        rep.slope_p = rep.slope_se > 0.0 ? special::t_two_sided_p(rep.slope / rep.slope_se, m - 2.0) : 0.0;
    }
    return rep;
}

// Mean over units of the fit's prediction under each unit's personalized optimum.
inline double eval_optimal_prediction(const EffectsFit& fit, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    double s = 0.0;
    for (const auto& r : data.records()) {
        const auto x = fit_covariates(fit, data, r);
        s += predict_outcome(fit, optimal_personalized(fit, x), x);
    }
    return s / static_cast<double>(data.size());
}

using Policy = std::function<Variant(const UnitRecord&)>;

// A policy that serves the fit's personalized optimum for each unit.
inline Policy personalized_policy(const EffectsFit& fit, const Dataset& data) {
    return [&fit, &data](const UnitRecord& r) { return optimal_personalized(fit, fit_covariates(fit, data, r)); };
}

inline Policy constant_policy(Variant v) {
    return [v = std::move(v)](const UnitRecord&) { return v; };
}

struct EruptResult {
    double value = 0.0;
    std::size_t n = 0;
    std::size_t matched = 0;
    // Units whose proposed variant has no run in the design (never matchable).
    std::size_t unassignable = 0;
};

// Inverse-propensity estimate: mean over units of Y 1{W = pi(X)} / e(X, pi(X)).
inline EruptResult erupt(const Dataset& data, const Policy& policy) {
    EruptResult res;
    double s = 0.0;
    for (const auto& r : data.records()) {
        if (!r.outcome) continue;
        ++res.n;
        const Variant proposed = policy(r);
        if (!data.design().contains(proposed)) {
            ++res.unassignable;
            continue;
        }
        if (proposed != r.assigned) continue;
        if (!(r.propensity > 0.0)) throw ValidationError("erupt: matched unit '" + r.unit_id + "' has zero propensity");
        ++res.matched;
        s += *r.outcome / r.propensity;
    }
    res.value = res.n ? s / static_cast<double>(res.n) : 0.0;
    return res;
}

}  // namespace factorial
