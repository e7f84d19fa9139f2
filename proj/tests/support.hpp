#pragma once

// Small fixtures shared by the test binaries.

#include <string>
#include <vector>

#include "factorial/case_study.hpp"
#include "factorial/dataset.hpp"
#include "factorial/sim.hpp"

namespace testing_support {

using namespace factorial;

inline FactorSpace make_space(const std::vector<std::size_t>& levels) {
    std::vector<Factor> fs;
    for (std::size_t f = 0; f < levels.size(); ++f) {
        std::vector<std::string> names;
        for (std::size_t l = 0; l < levels[f]; ++l) names.push_back("l" + std::to_string(l));
        fs.emplace_back("f" + std::to_string(f), names);
    }
    return FactorSpace(fs);
}

// Exactly m units on every non-control run, covariates and noise drawn from
// the config's generators, outcome = truth + noise.
inline Dataset balanced_data(const SimConfig& cfg, const Design& design, std::size_t m, std::uint64_t seed) {
    auto rng = make_rng(seed, "test.balanced");
    std::vector<UnitRecord> recs;
    std::size_t id = 0;
    for (const auto& run : design.runs()) {
        if (run.role == Role::control) continue;
        for (std::size_t u = 0; u < m; ++u) {
            UnitRecord r;
            r.unit_id = "b" + std::to_string(id++);
            for (const auto& g : cfg.covariates) r.covariates.push_back(g.draw(rng));
            r.assigned = run.variant;
            r.outcome = true_mean(cfg, run.variant, r.covariates) + cfg.noise_sd * standard_normal(rng);
            r.propensity = design.propensity(run.variant);
            recs.push_back(std::move(r));
        }
    }
    return Dataset(design, cfg.covariate_names(), std::move(recs));
}

inline Design nine_arm_design() {
    return case_study::in_sample_design().with_holdout(case_study::variant('U', 3, false, false));
}

// Published main-effects truth on the case-study space, no covariates.
inline SimConfig main_effects_config(double noise_sd, std::uint64_t seed) {
    SimConfig cfg(case_study::space());
    const auto fit = case_study::main_effects_fit();
    cfg.intercept = fit.intercept();
    for (std::size_t f = 0; f < cfg.space.factor_count(); ++f) {
        for (auto l : cfg.space.factor(f).effect_levels()) cfg.beta[f][l] = fit.beta(f, l);
    }
    cfg.noise_sd = noise_sd;
    cfg.seed = seed;
    return cfg;
}

}  // namespace testing_support
