#include <gtest/gtest.h>

#include <cmath>

#include "factorial/case_study.hpp"
#include "factorial/estimate.hpp"
#include "factorial/sim.hpp"
#include "support.hpp"

using namespace factorial;
using namespace testing_support;

namespace {

double max_abs_diff(const EffectsFit& a, const EffectsFit& b) {
    return (a.coefficients() - b.coefficients()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Estimate, ZeroNoiseMainEffectsRecovery) {
    auto cfg = main_effects_config(0.0, 1);
    auto data = generate(cfg, case_study::in_sample_design(), 400);
    auto fit = fit_main_effects(data);
    EXPECT_LT(max_abs_diff(fit, case_study::main_effects_fit()), 1e-10);
}

TEST(Estimate, NoisyMainEffectsWithinThreeSe) {
    auto cfg = main_effects_config(0.5, 2);
    auto data = generate(cfg, case_study::in_sample_design(), 4000);
    auto fit = fit_main_effects(data);
    const auto truth = case_study::main_effects_fit();
    for (std::size_t i = 0; i < fit.size(); ++i) {
        EXPECT_LT(std::abs(fit.coefficients()(i) - truth.coefficients()(i)), 3.0 * fit.std_error(i)) << fit.name(i);
    }
    EXPECT_GT(fit.dof(), 0);
    EXPECT_EQ(fit.dof(), static_cast<std::int64_t>(fit.n_used()) - static_cast<std::int64_t>(fit.size()));
}

TEST(Estimate, ConstantOutcomes) {
    SimConfig cfg(case_study::space());
    cfg.intercept = 4.25;
    cfg.noise_sd = 0.0;
    auto fit = fit_main_effects(generate(cfg, case_study::in_sample_design(), 200));
    EXPECT_NEAR(fit.intercept(), 4.25, 1e-12);
    for (std::size_t i = 1; i < fit.size(); ++i) EXPECT_NEAR(fit.coefficients()(i), 0.0, 1e-12);
}

TEST(Estimate, ZeroNoiseHteRecovery) {
    auto cfg = case_study::analogue_config(4, 0.0);
    auto data = generate(cfg, case_study::in_sample_design(), 600);
    auto fit = fit_hte(data, {"aos"});
    EXPECT_LT(max_abs_diff(fit, case_study::spend_interaction_fit()), 1e-10);
    EXPECT_NEAR(fit.value(fit.key_by_name("trigger[Weekday]")), 0.36361, 1e-10);
    EXPECT_NEAR(fit.value(fit.key_by_name("trigger[Weekday]:aos")), -0.01476, 1e-10);
    EXPECT_NEAR(fit.value(fit.key_by_name("aos")), 0.23864, 1e-10);
}

TEST(Estimate, EmptyCovariatesMatchMainEffects) {
    auto cfg = case_study::analogue_config(5);
    auto data = generate(cfg, case_study::in_sample_design(), 800);
    auto a = fit_hte(data, {});
    auto b = fit_main_effects(data);
    EXPECT_EQ(a.coefficients(), b.coefficients());
    EXPECT_EQ(a.covariance(), b.covariance());
}

TEST(Estimate, NullLambdaWithinThreeSe) {
    auto cfg = main_effects_config(1.0, 6);
    cfg.covariates = {{"x", Distribution::normal, 0.0, 1.0}};
    cfg = SimConfig(cfg.space, cfg.covariates);
    cfg.intercept = 1.0;
    cfg.gamma[0] = 0.5;
    cfg.seed = 6;
    auto data = generate(cfg, case_study::in_sample_design(), 5000);
    auto fit = fit_hte(data, {"x"});
    for (const auto& k : fit.lambda_keys()) {
        EXPECT_LT(std::abs(fit.value(k)), 3.0 * fit.std_error(fit.index(k))) << fit.name(k);
    }
}

TEST(Estimate, PredictionsFromPublishedCoefficients) {
    const auto t1 = case_study::main_effects_fit();
    EXPECT_NEAR(predict_outcome(t1, case_study::variant('U', 3, false, false)), 7.90086, 1e-12);
    EXPECT_NEAR(predict_outcome(t1, case_study::variant('U', 3, false, false)), 7.90091, 5e-4);
    EXPECT_NEAR(predict_outcome(t1, case_study::space().baseline_variant()), 7.35231, 1e-12);
    EXPECT_NEAR(predict_outcome(t1, case_study::space().baseline_variant()), 7.35242, 5e-4);

    const auto t2 = case_study::spend_interaction_fit();
    const double zero[] = {0.0};
    EXPECT_NEAR(predict_outcome(t2, case_study::variant('U', 3, true, true), zero), 2.83699, 1e-12);
    EXPECT_THROW(predict_outcome(t2, case_study::variant('U', 3, true, true)), DimensionMismatch);
}

TEST(Estimate, PredictEffectIdentities) {
    const auto t1 = case_study::main_effects_fit();
    const auto t2 = case_study::spend_interaction_fit();
    const auto a = case_study::variant('U', 3, false, false);
    EXPECT_EQ(predict_effect(t1, a, a), 0.0);
    EXPECT_NEAR(predict_effect(t1, a, case_study::variant('U', 2, false, false)), 0.01193, 1e-12);
    for (double aos : {0.0, 10.0, 24.6, 80.0}) {
        const double x[] = {aos};
        const auto wk = case_study::variant('S', 2, true, false);
        const auto on = case_study::variant('S', 2, false, false);
        EXPECT_NEAR(predict_effect(t2, wk, on, x), 0.36361 - 0.01476 * aos, 1e-12);
        for (const auto& u : enumerate_variants(t2.space())) {
            EXPECT_EQ(predict_effect(t2, u, on, x), -predict_effect(t2, on, u, x));
        }
    }
}

TEST(Estimate, ResidualsOrthogonalToRegressors) {
    auto cfg = case_study::analogue_config(8);
    auto data = generate(cfg, nine_arm_design(), 3000);
    auto fit = fit_hte(data, {"aos"});
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fit.size()));
    double scale = 0.0;
    for (const auto& r : data.records()) {
        if (data.design().role_of(r.assigned) != Role::in_sample) continue;
        const auto x = fit_covariates(fit, data, r);
        const auto row = fit.regression_row(r.assigned, x);
        const double e = *r.outcome - row.dot(fit.coefficients());
        acc += e * row;
        scale += row.cwiseAbs().sum() * std::abs(*r.outcome);
    }
    EXPECT_LT(acc.cwiseAbs().maxCoeff(), 1e-8 * scale);
}

TEST(Estimate, ShiftChangesOnlyIntercept) {
    auto cfg = case_study::analogue_config(9);
    auto data = generate(cfg, case_study::in_sample_design(), 2000);
    std::vector<std::optional<double>> y;
    for (const auto& r : data.records()) y.push_back(*r.outcome + 123.0);
    auto a = fit_hte(data, {"aos"});
    auto b = fit_hte(data.with_outcomes(y), {"aos"});
    EXPECT_NEAR(b.intercept() - a.intercept(), 123.0, 1e-9);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_NEAR(a.coefficients()(i), b.coefficients()(i), 1e-10);
    const double x[] = {30.0};
    for (const auto& v : enumerate_variants(a.space())) {
        EXPECT_NEAR(predict_effect(a, v, a.space().baseline_variant(), x),
                    predict_effect(b, v, a.space().baseline_variant(), x), 1e-10);
    }
}

TEST(Estimate, BalancedDesignsGiveLevelMeanContrasts) {
    for (const auto& design : {full_factorial(make_space({2, 3, 2})), case_study::in_sample_design()}) {
        SimConfig cfg(design.space());
        cfg.intercept = 2.0;
        cfg.beta[0][1] = 0.7;
        cfg.noise_sd = 1.0;
        auto data = balanced_data(cfg, design, 5, 12);
        auto fit = fit_main_effects(data);
        const auto& s = design.space();
        for (std::size_t f = 0; f < s.factor_count(); ++f) {
            std::vector<double> sum(s.factor(f).level_count(), 0.0), cnt(s.factor(f).level_count(), 0.0);
            for (const auto& r : data.records()) {
                sum[r.assigned[f]] += *r.outcome;
                cnt[r.assigned[f]] += 1.0;
            }
            for (auto l : s.factor(f).effect_levels()) {
                const double contrast = sum[l] / cnt[l] - sum[0] / cnt[0];
                EXPECT_NEAR(fit.beta(f, l), contrast, 1e-10) << f << "," << l;
            }
        }
    }
}

TEST(Estimate, RankDeficiencyNamesColumns) {
    auto s = case_study::space();
    std::vector<factorial::Run> runs;
    for (const auto& v : case_study::in_sample_variants()) {
        if (v[0] == 0) runs.push_back({v, 0.25, Role::in_sample});
    }
    Design d(s, runs);
    SimConfig cfg(s);
    cfg.noise_sd = 1.0;
    auto data = balanced_data(cfg, d, 10, 1);
    try {
        fit_main_effects(data);
        FAIL();
    } catch (const RankDeficientError& e) {
        ASSERT_FALSE(e.columns().empty());
        bool named = false;
        for (const auto& c : e.columns()) named |= c == "promo_spread[Upfront]";
        EXPECT_TRUE(named);
    }
}

TEST(Estimate, InsufficientData) {
    auto d = case_study::in_sample_design();
    auto cfg = main_effects_config(1.0, 1);
    auto data = balanced_data(cfg, d, 3, 1);
    auto missing = data.filtered([&](const UnitRecord& r) { return r.assigned != d.runs()[0].variant; });
    EXPECT_THROW(fit_main_effects(missing), InsufficientDataError);
    auto tiny = balanced_data(cfg, d, 0, 1);
    EXPECT_THROW(fit_main_effects(tiny), InsufficientDataError);
}

TEST(Estimate, RobustAndStandardizedOptions) {
    auto cfg = case_study::analogue_config(13);
    auto data = generate(cfg, case_study::in_sample_design(), 6000);
    auto plain = fit_hte(data, {"aos"});
    auto robust = fit_hte(data, {"aos"}, {true, false});
    auto stdz = fit_hte(data, {"aos"}, {false, true});
    EXPECT_EQ(plain.coefficients(), robust.coefficients());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        EXPECT_NEAR(robust.std_error(i) / plain.std_error(i), 1.0, 0.15) << plain.name(i);
        EXPECT_NEAR(stdz.coefficients()(i), plain.coefficients()(i), 1e-8 * (1.0 + std::abs(plain.coefficients()(i))));
        EXPECT_NEAR(stdz.std_error(i), plain.std_error(i), 1e-8 * plain.std_error(i) + 1e-12);
    }
}

TEST(Estimate, JointTestBasics) {
    auto cfg = case_study::analogue_config(14);
    auto data = generate(cfg, case_study::in_sample_design(), 3000);
    auto fit = fit_hte(data, {"aos"});
    EXPECT_THROW(joint_test(fit, {}), ValidationError);
    auto r = joint_test(fit, fit.lambda_keys());
    EXPECT_GE(r.statistic, 0.0);
    EXPECT_EQ(r.restriction_count, 5u);
    EXPECT_EQ(r.dof_numerator, 5u);
    ASSERT_TRUE(r.dof_denominator);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    // Published fit has no covariance: the block is singular.
    EXPECT_THROW(joint_test(case_study::spend_interaction_fit(), case_study::spend_interaction_fit().lambda_keys()),
                 SingularMatrixError);
}

// Interactions only with aos, plus four irrelevant covariates: the aos-only
// block rejects while the all-covariate block, diluted over 25 restrictions,
// does not.
TEST(Estimate, DilutedJointTestPattern) {
    std::vector<CovariateGenerator> gens{{"aos", Distribution::lognormal, std::log(25.0), 0.75}};
    for (int i = 0; i < 4; ++i) gens.push_back({"z" + std::to_string(i), Distribution::normal, 0.0, 1.0});
    auto base = case_study::analogue_config();
    SimConfig cfg(case_study::space(), gens);
    cfg.intercept = base.intercept;
    cfg.beta = base.beta;
    cfg.gamma[0] = base.gamma[0];
    for (std::size_t f = 0; f < 4; ++f) {
        for (std::size_t l = 0; l < cfg.beta[f].size(); ++l) cfg.lambda[f][l][0] = base.lambda[f][l][0];
    }
    cfg.noise_sd = 5.0;
    int pattern = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.seed = seed;
        auto data = generate(cfg, case_study::in_sample_design(), 2500);
        auto fit = fit_hte(data, cfg.covariate_names());
        const double p_all = joint_test(fit, fit.lambda_keys()).p_value;
        const double p_aos = joint_test(fit, fit.lambda_keys_for("aos")).p_value;
        pattern += p_aos < 0.05 && p_all > 0.05;
    }
    EXPECT_GT(pattern, 0);
}

TEST(Estimate, TablePValues) {
    EffectsFit fit(case_study::space(), {});
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fit.size()));
    b(1) = 0.0;
    b(2) = 0.1;
    b(3) = 0.3;
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(b.size(), b.size()) * 0.01;
    fit.set_inference(b, V, 1.0, 100, 106, false);
    auto t = fit.table();
    EXPECT_EQ(t[1].p, 1.0);
    EXPECT_GT(t[2].p, t[3].p);
}

TEST(Estimate, JsonRoundTrip) {
    auto cfg = case_study::analogue_config(15);
    auto fit = fit_hte(generate(cfg, case_study::in_sample_design(), 1500), {"aos"});
    auto back = effects_fit_from_json(to_json(fit));
    EXPECT_EQ(back.coefficients(), fit.coefficients());
    EXPECT_EQ(back.covariance(), fit.covariance());
    EXPECT_EQ(back.dof(), fit.dof());
    EXPECT_EQ(back.residual_sd(), fit.residual_sd());
}
