#pragma once

// Synthetic experiments with known truth. The outcome for variant v and
// covariates x is
//   intercept + sum_f beta[f][v_f] + sum_{pairs} interaction
//   + sum_c (gamma_c + sum_f lambda[f][v_f][c]) x_c + noise.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "factorial/dataset.hpp"
#include "factorial/design.hpp"
#include "factorial/error.hpp"
#include "factorial/factor_space.hpp"
#include "factorial/rng.hpp"
#include "factorial/special.hpp"

namespace factorial {

enum class Distribution { uniform, normal, lognormal };

inline std::string to_string(Distribution d) {
    switch (d) {
        case Distribution::uniform: return "uniform";
        case Distribution::normal: return "normal";
        case Distribution::lognormal: return "lognormal";
    }
    return "?";
}

inline Distribution distribution_from_string(const std::string& s) {
    if (s == "uniform") return Distribution::uniform;
    if (s == "normal") return Distribution::normal;
    if (s == "lognormal") return Distribution::lognormal;
    throw ValidationError("unknown distribution '" + s + "'");
}

// uniform: [a, b]; normal: mean a, sd b; lognormal: log-mean a, log-sd b.
struct CovariateGenerator {
    std::string name;
    Distribution kind = Distribution::normal;
    double a = 0.0;
    double b = 1.0;

    double draw(Rng& rng) const {
        switch (kind) {
            case Distribution::uniform: return a + (b - a) * uniform01(rng);
            case Distribution::normal: return a + b * standard_normal(rng);
            case Distribution::lognormal: return std::exp(a + b * standard_normal(rng));
        }
        return 0.0;
    }

    double mean() const {
        switch (kind) {
            case Distribution::uniform: return 0.5 * (a + b);
            case Distribution::normal: return a;
            case Distribution::lognormal: return std::exp(a + 0.5 * b * b);
        }
        return 0.0;
    }
};

struct Interaction {
    std::size_t factor_a = 0, level_a = 0;
    std::size_t factor_b = 0, level_b = 0;
    double value = 0.0;
};

struct SimConfig {
    FactorSpace space;
    double intercept = 0.0;
    std::vector<std::vector<double>> beta;  // [factor][level]
    std::vector<Interaction> interactions;
    std::vector<CovariateGenerator> covariates;
    std::vector<double> gamma;                            // [covariate]
    std::vector<std::vector<std::vector<double>>> lambda;  // [factor][level][covariate]
    double noise_sd = 1.0;
    std::uint64_t seed = 0;

    SimConfig() = default;

    // All-zero truth over `space` with the given covariates.
    explicit SimConfig(FactorSpace s, std::vector<CovariateGenerator> covs = {})
        : space(std::move(s)), covariates(std::move(covs)) {
        const auto C = covariates.size();
        gamma.assign(C, 0.0);
        for (const auto& f : space.factors()) {
            beta.emplace_back(f.level_count(), 0.0);
            lambda.emplace_back(f.level_count(), std::vector<double>(C, 0.0));
        }
    }

    std::vector<std::string> covariate_names() const {
        std::vector<std::string> out;
        for (const auto& c : covariates) out.push_back(c.name);
        return out;
    }

    std::size_t covariate_position(const std::string& name) const {
        for (std::size_t c = 0; c < covariates.size(); ++c) {
            if (covariates[c].name == name) return c;
        }
        throw ValidationError("unknown covariate '" + name + "'");
    }

    std::pair<std::size_t, std::size_t> locate(const std::string& factor, const std::string& level) const {
        const auto f = space.factor_index(factor);
        if (!f) throw ValidationError("unknown factor '" + factor + "'");
        const auto l = space.factor(*f).level_index(level);
        if (!l) throw ValidationError("factor '" + factor + "' has no level '" + level + "'");
        return {*f, *l};
    }

    void set_beta(const std::string& factor, const std::string& level, double v) {
        auto [f, l] = locate(factor, level);
        beta[f][l] = v;
    }

    void set_gamma(const std::string& cov, double v) { gamma[covariate_position(cov)] = v; }

    void set_lambda(const std::string& factor, const std::string& level, const std::string& cov, double v) {
        auto [f, l] = locate(factor, level);
        lambda[f][l][covariate_position(cov)] = v;
    }

    void add_interaction(const std::string& fa, const std::string& la, const std::string& fb, const std::string& lb,
                         double v) {
        auto [f1, l1] = locate(fa, la);
        auto [f2, l2] = locate(fb, lb);
        interactions.push_back({f1, l1, f2, l2, v});
    }

    bool additive() const {
        for (const auto& i : interactions) {
            if (i.value != 0.0) return false;
        }
        return true;
    }

    void validate() const {
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ValidationError("noise_sd must be >= 0");
        const auto F = space.factor_count();
        const auto C = covariates.size();
        if (beta.size() != F || lambda.size() != F || gamma.size() != C) {
            throw DimensionMismatch("simulation truth does not match the factor space");
        }
        for (std::size_t f = 0; f < F; ++f) {
            const auto& fac = space.factor(f);
            if (beta[f].size() != fac.level_count() || lambda[f].size() != fac.level_count()) {
                throw DimensionMismatch("simulation truth for factor '" + fac.name() + "' has wrong level count");
            }
            if (beta[f][fac.baseline()] != 0.0) {
                throw ValidationError("baseline level of factor '" + fac.name() + "' must have beta 0");
            }
            for (std::size_t l = 0; l < fac.level_count(); ++l) {
                if (lambda[f][l].size() != C) throw DimensionMismatch("lambda has wrong covariate count");
                if (l == fac.baseline()) {
                    for (double x : lambda[f][l]) {
                        if (x != 0.0) {
                            throw ValidationError("baseline level of factor '" + fac.name() + "' must have lambda 0");
                        }
                    }
                }
            }
        }
        for (const auto& i : interactions) {
            if (i.factor_a >= F || i.factor_b >= F || i.factor_a == i.factor_b ||
                i.level_a >= space.factor(i.factor_a).level_count() ||
                i.level_b >= space.factor(i.factor_b).level_count()) {
                throw ValidationError("interaction must join levels of two distinct factors");
            }
        }
        for (const auto& c : covariates) {
            if (c.kind == Distribution::uniform && !(c.a <= c.b)) throw ValidationError("uniform needs a <= b");
            if (c.kind != Distribution::uniform && !(c.b >= 0.0)) throw ValidationError("scale must be >= 0");
        }
    }
};

// Noise-free mean outcome. Empty x means every covariate at zero.
inline double true_mean(const SimConfig& cfg, const Variant& v, std::span<const double> x = {}) {
    cfg.space.check(v);
    if (!x.empty() && x.size() != cfg.covariates.size()) throw DimensionMismatch("covariate vector has wrong length");
    double y = cfg.intercept;
    for (std::size_t f = 0; f < v.levels.size(); ++f) y += cfg.beta[f][v.levels[f]];
    for (const auto& i : cfg.interactions) {
        if (v.levels[i.factor_a] == i.level_a && v.levels[i.factor_b] == i.level_b) y += i.value;
    }
    for (std::size_t c = 0; c < x.size(); ++c) {
        double slope = cfg.gamma[c];
        for (std::size_t f = 0; f < v.levels.size(); ++f) slope += cfg.lambda[f][v.levels[f]][c];
        y += slope * x[c];
    }
    return y;
}

// Exact effect of a over b at x. Without x the effect is averaged over the
// covariate distributions (it is linear in x, so the means suffice).
inline double oracle_effect(const SimConfig& cfg, const Variant& a, const Variant& b,
                            std::optional<std::span<const double>> x = std::nullopt) {
    if (x) return true_mean(cfg, a, *x) - true_mean(cfg, b, *x);
    std::vector<double> m;
    for (const auto& c : cfg.covariates) m.push_back(c.mean());
    return true_mean(cfg, a, m) - true_mean(cfg, b, m);
}

namespace detail {

inline std::string unit_name(std::size_t i, std::size_t n) {
    std::string digits = std::to_string(i);
    const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
    return "u" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

inline std::vector<UnitCovariates> draw_units(const SimConfig& cfg, std::size_t n, std::string_view stream,
                                              std::uint64_t seed) {
    auto rng = make_rng(seed, stream);
    std::vector<UnitCovariates> units(n);
    for (std::size_t i = 0; i < n; ++i) {
        units[i].unit_id = unit_name(i, n);
        for (const auto& c : cfg.covariates) units[i].covariates.push_back(c.draw(rng));
    }
    return units;
}

}  // namespace detail

inline Dataset generate(const SimConfig& cfg, const Design& design, std::size_t n_units) {
    cfg.validate();
    if (design.space() != cfg.space) throw ValidationError("design and simulation use different factor spaces");
    auto units = detail::draw_units(cfg, n_units, "sim.covariates", cfg.seed);
    auto data = randomize(cfg.covariate_names(), units, design, derive_seed(cfg.seed, "sim.assign"));
    auto noise = make_rng(cfg.seed, "sim.noise");
    std::vector<std::optional<double>> y;
    y.reserve(n_units);
    for (const auto& r : data.records()) {
        const double e = cfg.noise_sd > 0.0 ? cfg.noise_sd * standard_normal(noise) : 0.0;
        y.emplace_back(true_mean(cfg, r.assigned, r.covariates) + e);
    }
    return data.with_outcomes(y);
}

struct FrameworkComparison {
    std::size_t sum_levels = 0;
    std::size_t product_levels = 0;
    std::size_t units_per_cell = 0;
    std::size_t replications = 0;
    double oracle_contrast = 0.0;
    double abn_mean = 0.0;
    double factorial_mean = 0.0;
    double abn_variance = 0.0;
    double factorial_variance = 0.0;
    double abn_theoretical_variance = 0.0;
    double factorial_theoretical_variance = 0.0;
    double empirical_ratio = 0.0;
    double theoretical_ratio = 0.0;
};

// Monte Carlo over a balanced full factorial with total_units / prod(L) units
// per cell. The contrast is the all-last-level policy against the all-baseline
// policy (every factor differs). A/B/n estimates it by the difference of the
// two cell means; the factorial estimate sums, per factor, the difference of
// level means over all cells.
inline FrameworkComparison compare_frameworks(const SimConfig& cfg, const FactorSpace& space, std::size_t total_units,
                                              std::size_t replications) {
    cfg.validate();
    if (space != cfg.space) throw ValidationError("space does not match the simulation config");
    if (!cfg.additive()) throw ValidationError("compare_frameworks needs an additive config");
    if (replications < 2) throw ValidationError("compare_frameworks needs at least 2 replications");
    const auto cells = enumerate_variants(space);
    const std::size_t P = cells.size();
    const std::size_t m = total_units / P;
    if (m < 1) throw InsufficientDataError("fewer units than variants");
    const std::size_t F = space.factor_count();

    Variant top = space.baseline_variant();
    for (std::size_t f = 0; f < F; ++f) {
        const auto& fac = space.factor(f);
        top.levels[f] = fac.baseline() == fac.level_count() - 1 ? 0 : fac.level_count() - 1;
    }
    const Variant base = space.baseline_variant();

    FrameworkComparison out;
    out.sum_levels = space.sum_levels();
    out.product_levels = P;
    out.units_per_cell = m;
    out.replications = replications;
    out.oracle_contrast = oracle_effect(cfg, top, base);
    const double I = static_cast<double>(m * P);
    const double s2 = cfg.noise_sd * cfg.noise_sd;
    out.abn_theoretical_variance = 2.0 * s2 * static_cast<double>(P) / I;
    out.factorial_theoretical_variance = 2.0 * s2 * static_cast<double>(out.sum_levels) / I;
    out.theoretical_ratio = static_cast<double>(out.sum_levels) / static_cast<double>(P);

    std::vector<double> ab(replications), fa(replications);
    std::vector<double> cell_mean(P);
    std::vector<std::vector<double>> level_sum(F);
    for (std::size_t r = 0; r < replications; ++r) {
        auto rng = make_rng(cfg.seed, "sim.compare", r);
        std::size_t top_i = 0, base_i = 0;
        for (std::size_t c = 0; c < P; ++c) {
            double s = 0.0;
            for (std::size_t u = 0; u < m; ++u) {
                std::vector<double> x;
                for (const auto& g : cfg.covariates) x.push_back(g.draw(rng));
                s += true_mean(cfg, cells[c], x) + cfg.noise_sd * standard_normal(rng);
            }
            cell_mean[c] = s / static_cast<double>(m);
            if (cells[c] == top) top_i = c;
            if (cells[c] == base) base_i = c;
        }
        ab[r] = cell_mean[top_i] - cell_mean[base_i];
        double est = 0.0;
        for (std::size_t f = 0; f < F; ++f) {
            level_sum[f].assign(space.factor(f).level_count(), 0.0);
            for (std::size_t c = 0; c < P; ++c) level_sum[f][cells[c].levels[f]] += cell_mean[c];
            // Each level holds the same number of cells, so sums share a divisor.
            const double cells_per_level = static_cast<double>(P / space.factor(f).level_count());
            est += (level_sum[f][top.levels[f]] - level_sum[f][base.levels[f]]) / cells_per_level;
        }
        fa[r] = est;
    }
    auto mean_var = [](const std::vector<double>& v) {
        double mu = 0.0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mu) * (x - mu);
        return std::pair{mu, ss / static_cast<double>(v.size() - 1)};
    };
    std::tie(out.abn_mean, out.abn_variance) = mean_var(ab);
    std::tie(out.factorial_mean, out.factorial_variance) = mean_var(fa);
    out.empirical_ratio = out.abn_variance > 0.0 ? out.factorial_variance / out.abn_variance : 0.0;
    return out;
}

using CovariatePolicy = std::function<Variant(std::span<const double>)>;

struct RolloutReport {
    std::size_t n_a = 0, n_b = 0;
    double mean_a = 0.0, mean_b = 0.0;
    double difference = 0.0;  // mean_a - mean_b
    double se = 0.0;
    double dof = 0.0;  // Welch
    double p_value = 1.0;
    // Mean over all rollout units of the noise-free gap between the policies.
    double oracle_gap = 0.0;
};

// Fresh randomized comparison of two policies: each unit is sent to arm A or B
// with probability 1/2 and served that arm's policy.
inline RolloutReport rollout_experiment(const SimConfig& cfg, const CovariatePolicy& policy_a,
                                        const CovariatePolicy& policy_b, std::size_t n_units, std::uint64_t seed) {
    cfg.validate();
    auto units = detail::draw_units(cfg, n_units, "sim.rollout.covariates", seed);
    auto coin = make_rng(seed, "sim.rollout.assign");
    auto noise = make_rng(seed, "sim.rollout.noise");
    double sa = 0.0, sb = 0.0, qa = 0.0, qb = 0.0, gap = 0.0;
    RolloutReport rep;
    for (const auto& u : units) {
        const Variant va = policy_a(u.covariates);
        const Variant vb = policy_b(u.covariates);
        const double ma = true_mean(cfg, va, u.covariates);
        const double mb = true_mean(cfg, vb, u.covariates);
        gap += ma - mb;
        const bool to_a = uniform01(coin) < 0.5;
        const double y = (to_a ? ma : mb) + (cfg.noise_sd > 0.0 ? cfg.noise_sd * standard_normal(noise) : 0.0);
        if (to_a) {
            ++rep.n_a;
            sa += y;
            qa += y * y;
        } else {
            ++rep.n_b;
            sb += y;
            qb += y * y;
        }
    }
    if (rep.n_a < 2 || rep.n_b < 2) throw InsufficientDataError("rollout needs at least 2 units per arm");
    const double na = static_cast<double>(rep.n_a), nb = static_cast<double>(rep.n_b);
    rep.mean_a = sa / na;
    rep.mean_b = sb / nb;
    rep.difference = rep.mean_a - rep.mean_b;
    rep.oracle_gap = gap / static_cast<double>(n_units);
    const double va = std::max(0.0, (qa - na * rep.mean_a * rep.mean_a) / (na - 1.0)) / na;
    const double vb = std::max(0.0, (qb - nb * rep.mean_b * rep.mean_b) / (nb - 1.0)) / nb;
    rep.se = std::sqrt(va + vb);
    if (rep.se > 0.0) {
        rep.dof = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
        rep.p_value = special::t_two_sided_p(rep.difference / rep.se, rep.dof);
    } else {
        rep.dof = na + nb - 2.0;
        rep.p_value = rep.difference == 0.0 ? 1.0 : 0.0;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON:
//   {"space": {...}, "intercept": 7.35, "noise_sd": 1.0, "seed": 7,
//    "beta": {"discount": {"Level2": 0.4}},
//    "interactions": [{"a": ["discount", "Level2"], "b": ["trigger", "weekday"], "value": 0.1}],
//    "covariates": [{"name": "aos", "distribution": "lognormal", "params": [3.2, 0.75],
//                    "gamma": 0.2, "lambda": {"discount": {"Level2": -0.01}}}]}
// ---------------------------------------------------------------------------
inline nlohmann::json to_json(const SimConfig& cfg) {
    nlohmann::json beta = nlohmann::json::object();
    for (std::size_t f = 0; f < cfg.space.factor_count(); ++f) {
        const auto& fac = cfg.space.factor(f);
        for (auto l : fac.effect_levels()) beta[fac.name()][fac.level_name(l)] = cfg.beta[f][l];
    }
    nlohmann::json inter = nlohmann::json::array();
    for (const auto& i : cfg.interactions) {
        const auto& fa = cfg.space.factor(i.factor_a);
        const auto& fb = cfg.space.factor(i.factor_b);
        inter.push_back({{"a", {fa.name(), fa.level_name(i.level_a)}},
                         {"b", {fb.name(), fb.level_name(i.level_b)}},
                         {"value", i.value}});
    }
    nlohmann::json covs = nlohmann::json::array();
    for (std::size_t c = 0; c < cfg.covariates.size(); ++c) {
        const auto& g = cfg.covariates[c];
        nlohmann::json lam = nlohmann::json::object();
        for (std::size_t f = 0; f < cfg.space.factor_count(); ++f) {
            const auto& fac = cfg.space.factor(f);
            for (auto l : fac.effect_levels()) lam[fac.name()][fac.level_name(l)] = cfg.lambda[f][l][c];
        }
        covs.push_back({{"name", g.name},
                        {"distribution", to_string(g.kind)},
                        {"params", {g.a, g.b}},
                        {"gamma", cfg.gamma[c]},
                        {"lambda", lam}});
    }
    return {{"space", to_json(cfg.space)}, {"intercept", cfg.intercept}, {"beta", beta},
            {"interactions", inter},       {"covariates", covs},          {"noise_sd", cfg.noise_sd},
            {"seed", cfg.seed}};
}

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("space")) throw ValidationError("simulation config needs a 'space'");
    std::vector<CovariateGenerator> gens;
    if (j.contains("covariates")) {
        for (const auto& jc : j["covariates"]) {
            CovariateGenerator g;
            g.name = jc.at("name").get<std::string>();
            g.kind = distribution_from_string(jc.value("distribution", std::string("normal")));
            const auto params = jc.value("params", std::vector<double>{0.0, 1.0});
            if (params.size() != 2) throw ValidationError("covariate '" + g.name + "' needs two params");
            g.a = params[0];
            g.b = params[1];
            gens.push_back(g);
        }
    }
    SimConfig cfg(factor_space_from_json(j["space"]), gens);
    cfg.intercept = j.value("intercept", 0.0);
    cfg.noise_sd = j.value("noise_sd", 1.0);
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("beta")) {
        for (const auto& [fname, levels] : j["beta"].items()) {
            for (const auto& [lname, v] : levels.items()) cfg.set_beta(fname, lname, v.get<double>());
        }
    }
    if (j.contains("interactions")) {
        for (const auto& ji : j["interactions"]) {
            const auto a = ji.at("a").get<std::vector<std::string>>();
            const auto b = ji.at("b").get<std::vector<std::string>>();
            if (a.size() != 2 || b.size() != 2) throw ValidationError("interaction ends must be [factor, level]");
            cfg.add_interaction(a[0], a[1], b[0], b[1], ji.at("value").get<double>());
        }
    }
    if (j.contains("covariates")) {
        for (const auto& jc : j["covariates"]) {
            const auto name = jc.at("name").get<std::string>();
            cfg.set_gamma(name, jc.value("gamma", 0.0));
            if (jc.contains("lambda")) {
                for (const auto& [fname, levels] : jc["lambda"].items()) {
                    for (const auto& [lname, v] : levels.items()) cfg.set_lambda(fname, lname, name, v.get<double>());
                }
            }
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace factorial
