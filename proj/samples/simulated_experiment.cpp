// Run a simulated twelve-arm fractional experiment with a holdout, fit the
// interaction model, validate it and score the personalized policy.

#include <iostream>

#include "factorial/case_study.hpp"
#include "factorial/design.hpp"
#include "factorial/evaluate.hpp"
#include "factorial/sim.hpp"

int main() {
    using namespace factorial;
    const auto cfg = case_study::analogue_config(7);
    const auto frac = mixed_level_fraction(cfg.space, 12, 7);
    const auto design = frac.design.with_holdout(select_holdout(frac.design, 7));

    const auto data = generate(cfg, design, 30000);
    const auto fit = fit_hte(data, {"aos"});
    const auto h = validate_holdout(data, fit);
    std::cout << "holdout " << cfg.space.label(h.holdout) << ": statistic " << h.statistic << " on " << h.dof
              << " dof, p = " << h.p_value << '\n';

    const auto best = optimal_global(fit);
    std::cout << "global optimum " << cfg.space.label(best) << '\n';
    std::cout << "personalized ERUPT " << erupt(data, personalized_policy(fit, data)).value << '\n';
    std::cout << "personalized predicted " << eval_optimal_prediction(fit, data) << '\n';
}
