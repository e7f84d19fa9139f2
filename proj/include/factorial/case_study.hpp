#pragma once

// Published numbers from the promotion case study: the 2x3x2x2 space, the
// main-effects and avg-order-spend interaction fits, the per-spend segment
// table, and the full 24-row predicted-profit ranking. Used by the
// reproduce-paper command and the acceptance suite.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "factorial/design.hpp"
#include "factorial/estimate.hpp"
#include "factorial/factor_space.hpp"
#include "factorial/sim.hpp"

namespace factorial::case_study {

inline FactorSpace space() {
    return FactorSpace({
        Factor("promo_spread", {"Spread", "Upfront"}),
        Factor("discount", {"Level1", "Level2", "Level3"}),
        Factor("trigger", {"Ongoing", "Weekday"}),
        Factor("messaging", {"Generic", "Mxrec"}),
    });
}

// Short labels as printed: U/S, L1-L3, On/wk, G/M.
inline Variant variant(char promo, int level, bool weekday, bool mxrec) {
    return Variant{static_cast<std::size_t>(promo == 'U' ? 1 : 0), static_cast<std::size_t>(level - 1),
                   static_cast<std::size_t>(weekday ? 1 : 0), static_cast<std::size_t>(mxrec ? 1 : 0)};
}

inline EffectsFit main_effects_fit() {
    EffectsFit fit(space(), {});
    fit.set("Intercept", 7.35231);
    fit.set("promo_spread[Upfront]", 0.12905);
    fit.set("discount[Level2]", 0.40757);
    fit.set("discount[Level3]", 0.41950);
    fit.set("trigger[Weekday]", -0.01350);
    fit.set("messaging[Mxrec]", -0.02732);
    return fit;
}

inline EffectsFit spend_interaction_fit() {
    EffectsFit fit(space(), {"aos"});
    fit.set("Intercept", 1.25977);
    fit.set("promo_spread[Upfront]", 0.26784);
    fit.set("discount[Level2]", 0.63302);
    fit.set("discount[Level3]", 0.93321);
    fit.set("trigger[Weekday]", 0.36361);
    fit.set("messaging[Mxrec]", 0.01256);
    fit.set("aos", 0.23864);
    fit.set("promo_spread[Upfront]:aos", -0.00534);
    fit.set("discount[Level2]:aos", -0.00848);
    fit.set("discount[Level3]:aos", -0.01947);
    fit.set("trigger[Weekday]:aos", -0.01476);
    fit.set("messaging[Mxrec]:aos", -0.00126);
    return fit;
}

struct RankedRow {
    Variant variant;
    double profit;
    bool in_sample;
};

// Descending predicted profit, as published.
inline std::vector<RankedRow> ranked_profits() {
    return {
        {variant('U', 3, false, false), 7.90091, false}, {variant('U', 2, false, false), 7.88897, true},
        {variant('U', 3, true, false), 7.88752, false},  {variant('U', 2, true, false), 7.87558, true},
        {variant('U', 3, false, true), 7.87374, true},   {variant('U', 2, false, true), 7.86181, false},
        {variant('U', 3, true, true), 7.86036, false},   {variant('U', 2, true, true), 7.84842, false},
        {variant('S', 3, false, false), 7.77188, false}, {variant('S', 2, false, false), 7.75994, false},
        {variant('S', 3, true, false), 7.75849, true},   {variant('S', 2, true, false), 7.74656, false},
        {variant('S', 3, false, true), 7.74472, false},  {variant('S', 2, false, true), 7.73278, true},
        {variant('S', 3, true, true), 7.73133, false},   {variant('S', 2, true, true), 7.71939, true},
        {variant('U', 1, false, false), 7.48146, false}, {variant('U', 1, true, false), 7.46807, false},
        {variant('U', 1, false, true), 7.45429, false},  {variant('U', 1, true, true), 7.44091, true},
        {variant('S', 1, false, false), 7.35242, true},  {variant('S', 1, true, false), 7.33904, false},
        {variant('S', 1, false, true), 7.32526, false},  {variant('S', 1, true, true), 7.31188, false},
    };
}

inline std::vector<Variant> in_sample_variants() {
    std::vector<Variant> out;
    for (const auto& r : ranked_profits()) {
        if (r.in_sample) out.push_back(r.variant);
    }
    return out;
}

// The eight in-sample arms with equal weight.
inline Design in_sample_design() {
    const auto vs = in_sample_variants();
    std::vector<Run> runs;
    for (const auto& v : vs) runs.push_back({v, 1.0 / static_cast<double>(vs.size()), Role::in_sample});
    return Design(space(), std::move(runs), "case study in-sample arms");
}

struct SegmentRow {
    long lo;
    long hi;  // inclusive; LONG_MAX for the open top row
    Variant variant;
    double constant;
    double slope;
};

inline std::vector<SegmentRow> segment_table() {
    constexpr long open = std::numeric_limits<long>::max();
    return {
        {0, 10, variant('U', 3, true, true), 2.837, 0.1975},
        {11, 24, variant('U', 3, true, false), 2.824, 0.1986},
        {25, 26, variant('U', 3, false, false), 2.461, 0.2134},
        {27, 48, variant('U', 2, false, false), 2.160, 0.2247},
        {49, 75, variant('S', 2, false, false), 1.893, 0.2301},
        {76, open, variant('S', 1, false, false), 1.260, 0.2385},
    };
}

inline std::string short_label(const Variant& v) {
    static const std::array<const char*, 2> promo{"S", "U"};
    static const std::array<const char*, 3> disc{"L1", "L2", "L3"};
    static const std::array<const char*, 2> trig{"On", "wk"};
    static const std::array<const char*, 2> msg{"G", "M"};
    return std::string(promo.at(v[0])) + "/" + disc.at(v[1]) + "/" + trig.at(v[2]) + "/" + msg.at(v[3]);
}

// Interaction-fit truth with avg-order-spend ~ lognormal, median 25, log-sd
// 0.75. The noise level is a free choice; the published metric is rescaled.
inline SimConfig analogue_config(std::uint64_t seed = 2024, double noise_sd = 2.0) {
    SimConfig cfg(space(), {{"aos", Distribution::lognormal, std::log(25.0), 0.75}});
    const auto fit = spend_interaction_fit();
    cfg.intercept = fit.intercept();
    cfg.gamma[0] = fit.gamma(0);
    for (std::size_t f = 0; f < cfg.space.factor_count(); ++f) {
        for (auto l : cfg.space.factor(f).effect_levels()) {
            cfg.beta[f][l] = fit.beta(f, l);
            cfg.lambda[f][l][0] = fit.lambda(f, l, 0);
        }
    }
    cfg.noise_sd = noise_sd;
    cfg.seed = seed;
    return cfg;
}

}  // namespace factorial::case_study
