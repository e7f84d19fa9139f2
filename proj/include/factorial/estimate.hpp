#pragma once

// Least-squares estimation of the additive main-effects model
//   Y = b0 + sum_fl W_fl beta_fl + eps
// and the linear heterogeneous-effects model
//   Y = b0 + sum_fl W_fl (beta_fl + lambda_fl' X) + gamma' X + eps
// with classical (or HC1) inference and Wald joint tests.

#include <cmath>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "factorial/dataset.hpp"
#include "factorial/error.hpp"
#include "factorial/factor_space.hpp"
#include "factorial/special.hpp"

namespace factorial {

enum class CoefKind { intercept, beta, gamma, lambda };

struct CoefKey {
    CoefKind kind = CoefKind::intercept;
    std::size_t factor = 0;
    std::size_t level = 0;
    std::size_t covariate = 0;

    auto operator<=>(const CoefKey&) const = default;
};

struct FitOptions {
    bool robust = false;       // HC1 sandwich covariance
    bool standardize = false;  // fit on z-scored covariates, report raw-unit coefficients
};

struct CoefficientRow {
    std::string name;
    double coef = 0.0;
    double std_err = 0.0;
    double t = 0.0;
    double p = 1.0;
};

class EffectsFit {
public:
    EffectsFit() = default;

    // Zero-initialized coefficient layout: intercept, beta (factor order,
    // non-baseline levels), gamma (covariate order), lambda (beta x covariate).
    EffectsFit(FactorSpace space, std::vector<std::string> covariates)
        : space_(std::move(space)), covariates_(std::move(covariates)) {
        keys_.push_back({CoefKind::intercept});
        for (std::size_t f = 0; f < space_.factor_count(); ++f) {
            for (auto l : space_.factor(f).effect_levels()) keys_.push_back({CoefKind::beta, f, l});
        }
        for (std::size_t c = 0; c < covariates_.size(); ++c) keys_.push_back({CoefKind::gamma, 0, 0, c});
        for (std::size_t f = 0; f < space_.factor_count(); ++f) {
            for (auto l : space_.factor(f).effect_levels()) {
                for (std::size_t c = 0; c < covariates_.size(); ++c) {
                    keys_.push_back({CoefKind::lambda, f, l, c});
                }
            }
        }
        coef_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(keys_.size()));
        cov_ = Eigen::MatrixXd::Zero(coef_.size(), coef_.size());
    }

    const FactorSpace& space() const noexcept { return space_; }
    const std::vector<std::string>& covariates() const noexcept { return covariates_; }
    bool has_covariates() const noexcept { return !covariates_.empty(); }
    const std::vector<CoefKey>& keys() const noexcept { return keys_; }
    std::size_t size() const noexcept { return keys_.size(); }
    const Eigen::VectorXd& coefficients() const noexcept { return coef_; }
    const Eigen::MatrixXd& covariance() const noexcept { return cov_; }
    double residual_sd() const noexcept { return residual_sd_; }
    std::int64_t dof() const noexcept { return dof_; }
    std::size_t n_used() const noexcept { return n_used_; }
    bool robust() const noexcept { return robust_; }

    std::optional<std::size_t> find(const CoefKey& k) const {
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            if (keys_[i] == k) return i;
        }
        return std::nullopt;
    }

    std::size_t index(const CoefKey& k) const {
        auto i = find(k);
        if (!i) throw ValidationError("coefficient not present in fit");
        return *i;
    }

    std::string name(const CoefKey& k) const {
        switch (k.kind) {
            case CoefKind::intercept: return "Intercept";
            case CoefKind::beta:
                return space_.factor(k.factor).name() + "[" + space_.factor(k.factor).level_name(k.level) + "]";
            case CoefKind::gamma: return covariates_.at(k.covariate);
            case CoefKind::lambda:
                return space_.factor(k.factor).name() + "[" + space_.factor(k.factor).level_name(k.level) +
                       "]:" + covariates_.at(k.covariate);
        }
        return {};
    }

    std::string name(std::size_t i) const { return name(keys_.at(i)); }

    CoefKey key_by_name(const std::string& n) const {
        for (const auto& k : keys_) {
            if (name(k) == n) return k;
        }
        throw ValidationError("fit has no coefficient named '" + n + "'");
    }

    double value(const CoefKey& k) const { return coef_(static_cast<Eigen::Index>(index(k))); }

    double intercept() const { return coef_(0); }

    // Baseline levels (and absent terms) contribute 0.
    double beta(std::size_t f, std::size_t l) const {
        auto i = find({CoefKind::beta, f, l});
        return i ? coef_(static_cast<Eigen::Index>(*i)) : 0.0;
    }

    double gamma(std::size_t c) const {
        auto i = find({CoefKind::gamma, 0, 0, c});
        return i ? coef_(static_cast<Eigen::Index>(*i)) : 0.0;
    }

    double lambda(std::size_t f, std::size_t l, std::size_t c) const {
        auto i = find({CoefKind::lambda, f, l, c});
        return i ? coef_(static_cast<Eigen::Index>(*i)) : 0.0;
    }

    std::size_t covariate_position(const std::string& cov) const {
        for (std::size_t c = 0; c < covariates_.size(); ++c) {
            if (covariates_[c] == cov) return c;
        }
        throw ValidationError("fit has no covariate '" + cov + "'");
    }

    void set(const CoefKey& k, double v) { coef_(static_cast<Eigen::Index>(index(k))) = v; }
    void set(const std::string& coef_name, double v) { set(key_by_name(coef_name), v); }

    std::vector<CoefKey> lambda_keys() const {
        std::vector<CoefKey> out;
        for (const auto& k : keys_) {
            if (k.kind == CoefKind::lambda) out.push_back(k);
        }
        return out;
    }

    std::vector<CoefKey> lambda_keys_for(const std::string& cov) const {
        const auto c = covariate_position(cov);
        std::vector<CoefKey> out;
        for (const auto& k : keys_) {
            if (k.kind == CoefKind::lambda && k.covariate == c) out.push_back(k);
        }
        return out;
    }

    // Design-matrix row for (variant, x) in coefficient order.
    Eigen::VectorXd regression_row(const Variant& v, std::span<const double> x) const {
        space_.check(v);
        if (x.size() != covariates_.size()) {
            throw DimensionMismatch("covariate vector has " + std::to_string(x.size()) +
                                    " entries, fit expects " + std::to_string(covariates_.size()));
        }
        Eigen::VectorXd row(static_cast<Eigen::Index>(keys_.size()));
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            const auto& k = keys_[i];
            double val = 0.0;
            switch (k.kind) {
                case CoefKind::intercept: val = 1.0; break;
                case CoefKind::beta: val = v[k.factor] == k.level ? 1.0 : 0.0; break;
                case CoefKind::gamma: val = x[k.covariate]; break;
                case CoefKind::lambda: val = v[k.factor] == k.level ? x[k.covariate] : 0.0; break;
            }
            row(static_cast<Eigen::Index>(i)) = val;
        }
        return row;
    }

    double std_error(std::size_t i) const {
        return std::sqrt(std::max(0.0, cov_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
    }

    std::vector<CoefficientRow> table() const {
        std::vector<CoefficientRow> rows;
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            CoefficientRow r;
            r.name = name(i);
            r.coef = coef_(static_cast<Eigen::Index>(i));
            r.std_err = std_error(i);
            if (r.std_err > 0.0 && dof_ > 0) {
                r.t = r.coef / r.std_err;
                r.p = special::t_two_sided_p(r.t, static_cast<double>(dof_));
            } else {
                r.t = 0.0;
                r.p = 1.0;
            }
            rows.push_back(r);
        }
        return rows;
    }

    // Populated by the estimators and by deserialization.
    void set_inference(Eigen::VectorXd coef, Eigen::MatrixXd cov, double residual_sd, std::int64_t dof,
                       std::size_t n_used, bool robust) {
        if (coef.size() != coef_.size() || cov.rows() != coef_.size() || cov.cols() != coef_.size()) {
            throw DimensionMismatch("inference arrays do not match coefficient layout");
        }
        coef_ = std::move(coef);
        cov_ = std::move(cov);
        residual_sd_ = residual_sd;
        dof_ = dof;
        n_used_ = n_used;
        robust_ = robust;
    }

private:
    FactorSpace space_;
    std::vector<std::string> covariates_;
    std::vector<CoefKey> keys_;
    Eigen::VectorXd coef_;
    Eigen::MatrixXd cov_;
    double residual_sd_ = 0.0;
    std::int64_t dof_ = 0;
    std::size_t n_used_ = 0;
    bool robust_ = false;
};

// Covariates of `r` restricted to `fit.covariates()`, given the dataset schema.
inline std::vector<double> fit_covariates(const EffectsFit& fit, const Dataset& data, const UnitRecord& r) {
    std::vector<double> x;
    x.reserve(fit.covariates().size());
    for (const auto& c : fit.covariates()) x.push_back(r.covariates[data.covariate_index(c)]);
    return x;
}

namespace detail {

// Units entering the fit: in-sample runs with an observed outcome.
inline std::vector<const UnitRecord*> training_units(const Dataset& data) {
    std::vector<const UnitRecord*> out;
    std::vector<bool> seen(data.design().run_count(), false);
    for (const auto& r : data.records()) {
        const auto idx = *data.design().run_index(r.assigned);
        if (data.design().runs()[idx].role != Role::in_sample || !r.outcome) continue;
        seen[idx] = true;
        out.push_back(&r);
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (data.design().runs()[i].role == Role::in_sample && !seen[i]) {
            throw InsufficientDataError("in-sample run " + data.space().label(data.design().runs()[i].variant) +
                                        " has no unit with an observed outcome");
        }
    }
    return out;
}

}  // namespace detail

// Ordinary least squares via column-pivoted Householder QR.
inline EffectsFit fit_hte(const Dataset& data, const std::vector<std::string>& covariate_subset,
                          const FitOptions& opts = {}) {
    EffectsFit fit(data.space(), covariate_subset);
    const auto cov_idx = data.covariate_indices(covariate_subset);
    const auto units = detail::training_units(data);
    const auto n = static_cast<Eigen::Index>(units.size());
    const auto p = static_cast<Eigen::Index>(fit.size());
    if (n <= p) {
        throw InsufficientDataError("need more than " + std::to_string(p) + " observations, have " +
                                    std::to_string(n));
    }

    const std::size_t C = covariate_subset.size();
    std::vector<double> mean(C, 0.0), scale(C, 1.0);
    if (opts.standardize) {
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0, ss = 0.0;
            for (const auto* u : units) s += u->covariates[cov_idx[c]];
            mean[c] = s / static_cast<double>(n);
            for (const auto* u : units) {
                const double d = u->covariates[cov_idx[c]] - mean[c];
                ss += d * d;
            }
            scale[c] = std::sqrt(ss / static_cast<double>(n - 1));
            if (!(scale[c] > 0.0)) scale[c] = 1.0;
        }
    }

    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    std::vector<double> x(C);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto* u = units[static_cast<std::size_t>(i)];
        for (std::size_t c = 0; c < C; ++c) x[c] = (u->covariates[cov_idx[c]] - mean[c]) / scale[c];
        X.row(i) = fit.regression_row(u->assigned, x).transpose();
        y(i) = *u->outcome;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p) {
        std::vector<std::string> cols;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) cols.push_back(fit.name(static_cast<std::size_t>(perm(k))));
        std::string msg = "design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                          std::to_string(p) + "); collinear columns:";
        for (const auto& c : cols) msg += " " + c;
        throw RankDeficientError(msg, cols);
    }
    Eigen::VectorXd b = qr.solve(y);
    const Eigen::VectorXd resid = y - X * b;
    const std::int64_t dof = n - p;
    const double s2 = resid.squaredNorm() / static_cast<double>(dof);

    // (X'X)^{-1} = P R^{-1} R^{-T} P'
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd xtx_inv_perm = Rinv * Rinv.transpose();
    const auto P = qr.colsPermutation();
    Eigen::MatrixXd xtx_inv = P * xtx_inv_perm * P.transpose();

    Eigen::MatrixXd V;
    if (opts.robust) {
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index i = 0; i < n; ++i) meat.noalias() += resid(i) * resid(i) * X.row(i).transpose() * X.row(i);
        V = xtx_inv * meat * xtx_inv * (static_cast<double>(n) / static_cast<double>(dof));
    } else {
        V = s2 * xtx_inv;
    }
    V = 0.5 * (V + V.transpose());

    if (opts.standardize && C > 0) {
        // raw = T * standardized
        Eigen::MatrixXd T = Eigen::MatrixXd::Identity(p, p);
        for (std::size_t c = 0; c < C; ++c) {
            const auto g = static_cast<Eigen::Index>(fit.index({CoefKind::gamma, 0, 0, c}));
            T(g, g) = 1.0 / scale[c];
            T(0, g) = -mean[c] / scale[c];
        }
        for (const auto& k : fit.keys()) {
            if (k.kind != CoefKind::lambda) continue;
            const auto li = static_cast<Eigen::Index>(fit.index(k));
            const auto bi = static_cast<Eigen::Index>(fit.index({CoefKind::beta, k.factor, k.level}));
            T(li, li) = 1.0 / scale[k.covariate];
            T(bi, li) = -mean[k.covariate] / scale[k.covariate];
        }
        b = T * b;
        V = T * V * T.transpose();
    }

    fit.set_inference(std::move(b), std::move(V), std::sqrt(s2), dof, static_cast<std::size_t>(n), opts.robust);
    return fit;
}

inline EffectsFit fit_main_effects(const Dataset& data, const FitOptions& opts = {}) {
    return fit_hte(data, {}, opts);
}

inline double predict_outcome(const EffectsFit& fit, const Variant& v, std::span<const double> x = {}) {
    if (fit.has_covariates() && x.size() != fit.covariates().size()) {
        throw DimensionMismatch("prediction needs " + std::to_string(fit.covariates().size()) +
                              " covariate values");
    }
    if (!fit.has_covariates() && !x.empty()) {
        throw DimensionMismatch("fit has no covariate terms but covariates were supplied");
    }
    return fit.regression_row(v, x).dot(fit.coefficients());
}

// Intercept and gamma'x cancel; computed from the contrast row so that
// predict_effect(a, b) == -predict_effect(b, a) exactly.
inline double predict_effect(const EffectsFit& fit, const Variant& a, const Variant& b,
                             std::span<const double> x = {}) {
    if (fit.has_covariates() && x.size() != fit.covariates().size()) {
        throw DimensionMismatch("prediction needs " + std::to_string(fit.covariates().size()) +
                              " covariate values");
    }
    double sum = 0.0;
    for (std::size_t f = 0; f < fit.space().factor_count(); ++f) {
        double ta = fit.beta(f, a[f]);
        double tb = fit.beta(f, b[f]);
        for (std::size_t c = 0; c < fit.covariates().size(); ++c) {
            ta += fit.lambda(f, a[f], c) * x[c];
            tb += fit.lambda(f, b[f], c) * x[c];
        }
        sum += ta - tb;
    }
    return sum;
}

struct JointTestResult {
    double statistic = 0.0;
    std::int64_t dof_numerator = 0;
    std::optional<std::int64_t> dof_denominator;  // absent for the chi-square form
    double p_value = 1.0;
    std::size_t restriction_count = 0;
};

// Wald F test of H0: selected coefficients are all zero.
inline JointTestResult joint_test(const EffectsFit& fit, const std::vector<CoefKey>& selector) {
    if (selector.empty()) throw ValidationError("joint test needs at least one coefficient");
    const auto q = static_cast<Eigen::Index>(selector.size());
    Eigen::VectorXd b(q);
    Eigen::MatrixXd V(q, q);
    std::vector<Eigen::Index> idx;
    for (const auto& k : selector) idx.push_back(static_cast<Eigen::Index>(fit.index(k)));
    for (Eigen::Index i = 0; i < q; ++i) {
        b(i) = fit.coefficients()(idx[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < q; ++j) {
            V(i, j) = fit.covariance()(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success || V.diagonal().minCoeff() <= 0.0) {
        throw SingularMatrixError("selected covariance block is singular");
    }
    JointTestResult r;
    r.restriction_count = static_cast<std::size_t>(q);
    r.dof_numerator = q;
    r.statistic = b.dot(llt.solve(b)) / static_cast<double>(q);
    if (fit.dof() > 0) {
        r.dof_denominator = fit.dof();
        r.p_value = special::f_sf(r.statistic, static_cast<double>(q), static_cast<double>(fit.dof()));
    } else {
        r.statistic *= static_cast<double>(q);
        r.p_value = special::chi2_sf(r.statistic, static_cast<double>(q));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Fit document
// ---------------------------------------------------------------------------
inline nlohmann::json to_json(const EffectsFit& fit) {
    nlohmann::json coefs = nlohmann::json::array();
    for (const auto& r : fit.table()) {
        coefs.push_back({{"name", r.name}, {"coef", r.coef}, {"std_err", r.std_err}, {"t", r.t}, {"p", r.p}});
    }
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index i = 0; i < fit.covariance().rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < fit.covariance().cols(); ++j) row.push_back(fit.covariance()(i, j));
        cov.push_back(row);
    }
    return {{"space", to_json(fit.space())},   {"covariates", fit.covariates()}, {"coefficients", coefs},
            {"covariance", cov},               {"residual_sd", fit.residual_sd()}, {"dof", fit.dof()},
            {"n_used", fit.n_used()},          {"robust", fit.robust()}};
}

inline EffectsFit effects_fit_from_json(const nlohmann::json& j) {
    auto space = factor_space_from_json(j.at("space"));
    EffectsFit fit(space, j.value("covariates", std::vector<std::string>{}));
    const auto p = static_cast<Eigen::Index>(fit.size());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (const auto& c : j.at("coefficients")) {
        b(static_cast<Eigen::Index>(fit.index(fit.key_by_name(c.at("name").get<std::string>())))) =
            c.at("coef").get<double>();
    }
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(p, p);
    if (j.contains("covariance") && !j["covariance"].empty()) {
        const auto& jc = j["covariance"];
        if (static_cast<Eigen::Index>(jc.size()) != p) throw DimensionMismatch("covariance has wrong size");
        for (Eigen::Index r = 0; r < p; ++r) {
            for (Eigen::Index c = 0; c < p; ++c) V(r, c) = jc[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
    }
    fit.set_inference(std::move(b), std::move(V), j.value("residual_sd", 0.0), j.value("dof", std::int64_t{0}),
                      j.value("n_used", std::size_t{0}), j.value("robust", false));
    return fit;
}

}  // namespace factorial
