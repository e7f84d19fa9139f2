#pragma once

// Sample-size and velocity arithmetic for factorial versus A/B/n experiments.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "factorial/error.hpp"
#include "factorial/factor_space.hpp"
#include "factorial/special.hpp"

namespace factorial {

struct PowerSpec {
    double sigma = 1.0;  // outcome standard deviation
    double mde = 0.1;    // minimum detectable effect, metric units
    double alpha = 0.05;
    double beta = 0.20;
    bool two_sided = false;

    void validate() const {
        if (!(sigma > 0.0)) throw ValidationError("power spec: sigma must be > 0");
        if (!(mde > 0.0)) throw ValidationError("power spec: mde must be > 0");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("power spec: alpha must be in (0,1)");
        if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("power spec: beta must be in (0,1)");
    }
};

// n = ceil(((z_{1-alpha} + z_{1-beta}) sigma / d)^2), with z_{1-alpha/2} when
// two-sided.
inline std::int64_t per_level_sample_size(const PowerSpec& spec) {
    spec.validate();
    const double za = special::normal_quantile(1.0 - (spec.two_sided ? spec.alpha / 2.0 : spec.alpha));
    const double zb = special::normal_quantile(1.0 - spec.beta);
    const double root = (za + zb) * spec.sigma / spec.mde;
    const double n = root * root;
    // Guard against n landing a few ulps above an integer it should equal.
    const double rounded = std::round(n);
    if (std::abs(n - rounded) <= 1e-9 * std::max(1.0, rounded)) {
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(rounded));
    }
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(n)));
}

// Largest per-factor total (per-level n times level count).
inline std::int64_t design_sample_size(const FactorSpace& space,
                                       const std::map<std::string, PowerSpec>& per_factor) {
    std::int64_t best = 0;
    for (const auto& f : space.factors()) {
        auto it = per_factor.find(f.name());
        if (it == per_factor.end()) {
            throw ValidationError("no power spec for factor '" + f.name() + "'");
        }
        best = std::max(best, per_level_sample_size(it->second) *
                                  static_cast<std::int64_t>(f.level_count()));
    }
    return best;
}

struct VelocityReport {
    std::size_t sum_levels = 0;
    std::size_t product_levels = 0;
    double sample_size_ratio = 1.0;  // sum / product
    double mde_ratio = 1.0;          // sqrt(sum / product)
    double speed_multiplier = 1.0;   // product / sum
};

inline VelocityReport velocity(const FactorSpace& space) {
    VelocityReport r;
    r.sum_levels = space.sum_levels();
    r.product_levels = space.variant_count();
    // A single factor has sum == product exactly.
    if (space.factor_count() == 1) return r;
    r.sample_size_ratio = static_cast<double>(r.sum_levels) / static_cast<double>(r.product_levels);
    r.mde_ratio = std::sqrt(r.sample_size_ratio);
    r.speed_multiplier = static_cast<double>(r.product_levels) / static_cast<double>(r.sum_levels);
    return r;
}

}  // namespace factorial
