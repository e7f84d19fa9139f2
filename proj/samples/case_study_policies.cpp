// Rank every promotion policy under the published main-effects fit and print
// the spend-segmented optimal policy table.

#include <iomanip>
#include <iostream>

#include "factorial/case_study.hpp"
#include "factorial/policy.hpp"

int main() {
    using namespace factorial;
    const auto fit = case_study::main_effects_fit();
    std::cout << std::fixed << std::setprecision(5);
    for (const auto& p : predict_all(fit, case_study::in_sample_design())) {
        std::cout << case_study::short_label(p.variant) << "  " << p.predicted_outcome
                  << (p.in_sample ? "  in sample" : "") << '\n';
    }

    std::cout << '\n';
    for (const auto& r : segment_policy_table(case_study::spend_interaction_fit(), "aos", 0, 100)) {
        std::cout << "aos " << r.lo << ".." << r.hi << "  " << case_study::short_label(r.optimal_variant) << '\n';
    }
}
