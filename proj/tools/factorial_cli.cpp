// factorial: design, analyse and evaluate factorial policy experiments.
// Exit status 0 on success, 2 on invalid input, 1 when reproduce-paper finds
// a mismatch.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "factorial/case_study.hpp"
#include "factorial/design.hpp"
#include "factorial/evaluate.hpp"
#include "factorial/hte_knn.hpp"
#include "factorial/policy.hpp"
#include "factorial/power.hpp"
#include "factorial/sim.hpp"

using namespace factorial;
using cli::json;

namespace {

struct Common {
    std::string format = "text";
    std::string out;
};

struct Output {
    std::string text;
    json result;
};

// Reports go to --out when given, stdout otherwise.
void emit_report(const Common& c, const cli::RunManifest& m, const Output& o) {
    std::string bytes = c.format == "structured" ? cli::make_document(m, o.result).dump(2) + "\n" : o.text;
    if (c.out.empty()) std::cout << bytes;
    else cli::write_atomic(c.out, bytes);
}

// Artifact commands: the artifact goes to --out, the report to stdout.
void emit_with_artifact(const Common& c, const cli::RunManifest& m, const Output& report) {
    if (c.format == "structured") std::cout << cli::make_document(m, report.result).dump(2) << "\n";
    else std::cout << report.text;
}

Variant parse_variant(const FactorSpace& space, const std::string& text) {
    std::vector<std::string> names;
    std::string cur;
    for (char ch : text) {
        if (ch == '/' || ch == ',') {
            names.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    names.push_back(cur);
    return space.variant_from_names(names);
}

Design load_design(cli::RunManifest& m, const std::string& path) {
    m.add_input(path);
    return design_from_json(cli::read_json(path));
}

Dataset load_data(cli::RunManifest& m, const std::string& path, const Design& d) {
    m.add_input(path);
    return load_csv(path, d);
}

EffectsFit load_fit(cli::RunManifest& m, const std::string& path) {
    m.add_input(path);
    auto j = cli::read_json(path);
    return effects_fit_from_json(j.contains("fit") ? j["fit"] : j);
}

json variant_json(const FactorSpace& s, const Variant& v) { return s.level_names(v); }

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--format", c.format, "text or structured")->check(CLI::IsMember({"text", "structured"}));
    sub->add_option("--out", c.out, "output file");
}

// ------------------------------------------------------------------ design

struct DesignArgs {
    Common c;
    std::string space;
    std::string kind = "full";
    std::vector<std::string> generators;
    std::size_t runs = 0;
    bool holdout = false;
    std::uint64_t seed = 0;
};

int run_design(const DesignArgs& a) {
    cli::RunManifest m{"design"};
    m.add_input(a.space);
    m.seed = a.seed;
    m.parameters = {{"kind", a.kind}, {"generators", a.generators}, {"runs", a.runs}, {"holdout", a.holdout}};
    const auto space = factor_space_from_json(cli::read_json(a.space));
    Design d = [&] {
        if (a.kind == "full") return full_factorial(space);
        if (a.kind == "fraction") return regular_two_level_fraction(space, a.generators);
        if (a.kind == "pb") {
            if (!a.runs) throw ValidationError("--runs is required for a Plackett-Burman design");
            return plackett_burman(space, a.runs);
        }
        if (!a.runs) throw ValidationError("--runs is required for a mixed-level design");
        auto res = mixed_level_fraction(space, a.runs, a.seed);
        if (!res.proportional) {
            throw InfeasibleDesignError("no proportional " + std::to_string(a.runs) + "-run design found");
        }
        return res.design;
    }();
    if (a.holdout) d = d.with_holdout(select_holdout(d, a.seed));
    const auto rep = check_design(d);

    std::ostringstream t;
    t << "design: " << (d.generator_spec().empty() ? a.kind : d.generator_spec()) << ", " << d.runs().size()
      << " runs\n\n";
    cli::Table runs({"run", "variant", "weight", "role"});
    for (std::size_t i = 0; i < d.runs().size(); ++i) {
        const auto& r = d.runs()[i];
        runs.add({std::to_string(i + 1), space.label(r.variant), cli::fixed(r.weight, 4), to_string(r.role)});
    }
    t << runs.str() << "\nlevel counts (in-sample runs)\n";
    for (std::size_t f = 0; f < space.factor_count(); ++f) {
        t << "  " << space.factor(f).name() << ":";
        for (std::size_t l = 0; l < rep.level_counts[f].size(); ++l) {
            t << ' ' << space.factor(f).level_name(l) << '=' << cli::general(rep.level_counts[f][l]);
        }
        t << '\n';
    }
    t << "proportional frequencies: " << (rep.proportional_frequencies_ok ? "yes" : "no")
      << " (max deviation " << cli::general(rep.max_proportionality_deviation) << ")\n";
    if (rep.resolution) t << "resolution: " << *rep.resolution << '\n';
    if (!rep.defining_relation.empty()) {
        t << "defining relation: I";
        for (const auto& w : rep.defining_relation) t << " = " << w;
        t << '\n';
    }

    Output o{t.str(), {{"design", to_json(d)}, {"balance", to_json(rep, space)}}};
    if (!a.c.out.empty()) {
        auto doc = cli::make_document(m, to_json(d));
        // Design loaders read the top level, so the design fields sit beside the manifest.
        json file = to_json(d);
        file["manifest"] = doc["manifest"];
        cli::write_atomic(a.c.out, file.dump(2) + "\n");
    }
    emit_with_artifact(a.c, m, o);
    return 0;
}

// ------------------------------------------------------------------ power

struct PowerArgs {
    Common c;
    std::string space;
    double sigma = 1.0, mde = 0.1, alpha = 0.05, beta = 0.2;
    bool two_sided = false;
};

int run_power(const PowerArgs& a) {
    cli::RunManifest m{"power"};
    m.add_input(a.space);
    m.parameters = {{"sigma", a.sigma}, {"mde", a.mde}, {"alpha", a.alpha}, {"beta", a.beta}, {"two_sided", a.two_sided}};
    const auto space = factor_space_from_json(cli::read_json(a.space));
    const auto v = velocity(space);
    PowerSpec spec{a.sigma, a.mde, a.alpha, a.beta, a.two_sided};
    const auto per_level = per_level_sample_size(spec);
    std::map<std::string, PowerSpec> per_factor;
    for (const auto& f : space.factors()) per_factor[f.name()] = spec;
    const auto total = design_sample_size(space, per_factor);
    const auto abn = per_level * static_cast<std::int64_t>(v.product_levels);

    std::ostringstream t;
    t << "sum of levels:        " << v.sum_levels << "\n"
      << "variants (product):   " << v.product_levels << "\n"
      << "sample size ratio:    " << cli::fixed(v.sample_size_ratio, 4) << "\n"
      << "speed multiplier:     " << cli::fixed(v.speed_multiplier, 4) << "\n"
      << "MDE ratio:            " << cli::fixed(v.mde_ratio, 4) << "\n\n"
      << "per-level sample size: " << per_level << " (" << (a.two_sided ? "two" : "one") << "-sided, alpha "
      << a.alpha << ", power " << 1.0 - a.beta << ")\n"
      << "factorial experiment:  " << total << " units\n"
      << "A/B/n experiment:      " << abn << " units\n";
    Output o{t.str(),
             {{"sum_levels", v.sum_levels},
              {"product_levels", v.product_levels},
              {"sample_size_ratio", v.sample_size_ratio},
              {"speed_multiplier", v.speed_multiplier},
              {"mde_ratio", v.mde_ratio},
              {"per_level_sample_size", per_level},
              {"factorial_sample_size", total},
              {"abn_sample_size", abn}}};
    emit_report(a.c, m, o);
    return 0;
}

// ------------------------------------------------------------------ assign

struct AssignArgs {
    Common c;
    std::string design, units;
    std::uint64_t seed = 0;
};

std::string run_counts(const Dataset& data) {
    cli::Table t({"variant", "role", "units", "propensity"});
    for (const auto& r : data.design().runs()) {
        std::size_t n = 0;
        for (const auto& u : data.records()) n += u.assigned == r.variant;
        t.add({data.space().label(r.variant), to_string(r.role), std::to_string(n),
               cli::fixed(data.design().propensity(r.variant), 4)});
    }
    return t.str();
}

void write_dataset(const Common& c, const cli::RunManifest& m, const Dataset& data) {
    std::ostringstream csv;
    write_csv(data, csv);
    const auto doc = cli::make_document(m, {{"units", data.size()}, {"sha256", cli::sha256_hex(csv.str())}});
    cli::write_atomic(c.out, csv.str());
    cli::write_atomic(c.out + ".manifest.json", doc.dump(2) + "\n");
}

int run_assign(const AssignArgs& a) {
    cli::RunManifest m{"assign"};
    m.seed = a.seed;
    const auto d = load_design(m, a.design);
    m.add_input(a.units);
    auto [schema, units] = cli::read_units_csv(a.units);
    const auto data = randomize(schema, units, d, a.seed);
    write_dataset(a.c, m, data);
    json counts = json::array();
    for (const auto& r : d.runs()) {
        std::size_t n = 0;
        for (const auto& u : data.records()) n += u.assigned == r.variant;
        counts.push_back({{"variant", variant_json(d.space(), r.variant)}, {"units", n}});
    }
    emit_with_artifact(a.c, m, {"assigned " + std::to_string(data.size()) + " units to " + a.c.out + "\n\n" +
                                    run_counts(data),
                                {{"units", data.size()}, {"runs", counts}, {"out", a.c.out}}});
    return 0;
}

// ------------------------------------------------------------------ fit

struct FitArgs {
    Common c;
    std::string design, data;
    std::vector<std::string> covariates;
    bool robust = false, standardize = false;
};

json table_json(const EffectsFit& fit) {
    json rows = json::array();
    for (const auto& r : fit.table()) {
        rows.push_back({{"term", r.name}, {"coef", r.coef}, {"std_err", r.std_err}, {"t", r.t}, {"p", r.p}});
    }
    return rows;
}

std::string p_text(double p) { return p < 1e-4 ? "<0.0001" : cli::fixed(p, 4); }

int run_fit(const FitArgs& a) {
    cli::RunManifest m{"fit"};
    m.parameters = {{"covariates", a.covariates}, {"robust", a.robust}, {"standardize", a.standardize}};
    const auto d = load_design(m, a.design);
    const auto data = load_data(m, a.data, d);
    const auto fit = fit_hte(data, a.covariates, {a.robust, a.standardize});

    std::ostringstream t;
    cli::Table tab({"term", "coef", "std err", "t", "p"});
    for (const auto& r : fit.table()) {
        tab.add({r.name, cli::fixed(r.coef, 5), cli::fixed(r.std_err, 5), cli::fixed(r.t, 3), p_text(r.p)});
    }
    t << tab.str() << "\nunits " << fit.n_used() << ", residual dof " << fit.dof() << ", residual sd "
      << cli::general(fit.residual_sd()) << (a.robust ? ", HC1 standard errors" : "") << "\n";
    json joint = json::array();
    if (fit.has_covariates()) {
        t << "\njoint tests of interaction blocks\n";
        cli::Table jt({"block", "restrictions", "statistic", "p"});
        auto add = [&](const std::string& name, const std::vector<CoefKey>& keys) {
            const auto r = joint_test(fit, keys);
            jt.add({name, std::to_string(r.restriction_count), cli::fixed(r.statistic, 4), p_text(r.p_value)});
            joint.push_back({{"block", name},
                             {"restrictions", r.restriction_count},
                             {"statistic", r.statistic},
                             {"p_value", r.p_value}});
        };
        add("all", fit.lambda_keys());
        for (const auto& cname : fit.covariates()) add(cname, fit.lambda_keys_for(cname));
        t << jt.str();
    }
    if (!a.c.out.empty()) {
        json file = to_json(fit);
        file["manifest"] = cli::make_document(m, to_json(fit))["manifest"];
        cli::write_atomic(a.c.out, file.dump(2) + "\n");
    }
    emit_with_artifact(a.c, m, {t.str(), {{"table", table_json(fit)}, {"joint_tests", joint}, {"fit", to_json(fit)}}});
    return 0;
}

// ------------------------------------------------------------------ cate

struct CateArgs {
    Common c;
    std::string design, data, a, b;
    std::vector<double> x;
    std::vector<std::string> covariates;
    std::size_t k = 0;
    std::vector<std::size_t> grid;
};

int run_cate(const CateArgs& a) {
    cli::RunManifest m{"cate"};
    m.parameters = {{"a", a.a}, {"b", a.b}, {"x", a.x}, {"covariates", a.covariates}, {"k", a.k}, {"grid", a.grid}};
    const auto d = load_design(m, a.design);
    const auto data = load_data(m, a.data, d);
    const auto va = parse_variant(d.space(), a.a);
    const auto vb = parse_variant(d.space(), a.b);
    for (const auto& v : {va, vb}) {
        if (!d.contains(v)) throw ValidationError("variant " + d.space().label(v) + " is not a run of the design");
    }
    const auto covs = a.covariates.empty() ? data.schema() : a.covariates;
    std::size_t k = a.k;
    json tuning = nullptr;
    std::ostringstream t;
    if (!a.grid.empty()) {
        const auto rep = tune_k_report(data, va, vb, a.grid, covs);
        k = rep.k;
        tuning = json::array();
        cli::Table tab({"k", "loss"});
        for (const auto& [kk, loss] : rep.loss) {
            tuning.push_back({{"k", kk}, {"loss", loss}});
            tab.add({std::to_string(kk), cli::fixed(loss, 6)});
        }
        t << "leave-one-out transformed-outcome loss\n" << tab.str() << "selected k = " << k << "\n\n";
    }
    if (k == 0) throw ValidationError("give --k or --grid");
    const auto est = knn_cate(data, a.x, va, vb, k, covs);
    t << "CATE(" << d.space().label(va) << " vs " << d.space().label(vb) << ") at x = [";
    for (std::size_t i = 0; i < a.x.size(); ++i) t << (i ? ", " : "") << a.x[i];
    t << "] with k = " << k << ": " << cli::fixed(est.tau_hat, 6) << "\n";
    emit_report(a.c, m,
                {t.str(),
                 {{"a", variant_json(d.space(), va)},
                  {"b", variant_json(d.space(), vb)},
                  {"x", a.x},
                  {"covariates", covs},
                  {"k", k},
                  {"tau_hat", est.tau_hat},
                  {"tuning", tuning}}});
    return 0;
}

// ------------------------------------------------------------------ optimize

struct OptimizeArgs {
    Common c;
    std::string fit, design, mode = "global", covariate;
    std::vector<double> x;
    long from = 0, to = 100;
};

int run_optimize(const OptimizeArgs& a) {
    cli::RunManifest m{"optimize"};
    m.parameters = {{"mode", a.mode}, {"x", a.x}, {"covariate", a.covariate}, {"from", a.from}, {"to", a.to}};
    const auto fit = load_fit(m, a.fit);
    const auto& s = fit.space();
    std::ostringstream t;
    json result;
    if (a.mode == "global") {
        const auto v = optimal_global(fit);
        t << "global optimum: " << s.label(v) << "\n";
        result = {{"variant", variant_json(s, v)}};
    } else if (a.mode == "personalized") {
        const auto v = optimal_personalized(fit, a.x);
        const double y = predict_outcome(fit, v, a.x);
        t << "personalized optimum: " << s.label(v) << " (predicted " << cli::fixed(y, 5) << ")\n";
        result = {{"variant", variant_json(s, v)}, {"x", a.x}, {"predicted_outcome", y}};
    } else if (a.mode == "table") {
        if (a.covariate.empty()) throw ValidationError("--covariate is required for the table mode");
        const auto rows = segment_policy_table(fit, a.covariate, a.from, a.to);
        cli::Table tab({a.covariate, "optimal policy", "constant", "slope"});
        result = json::array();
        for (const auto& r : rows) {
            tab.add({"[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]", s.label(r.optimal_variant),
                     cli::fixed(r.constant, 4), cli::fixed(r.slope, 5)});
            result.push_back({{"lo", r.lo},
                              {"hi", r.hi},
                              {"variant", variant_json(s, r.optimal_variant)},
                              {"constant", r.constant},
                              {"slope", r.slope}});
        }
        t << tab.str();
    } else {
        std::optional<Design> d;
        if (!a.design.empty()) d = load_design(m, a.design);
        const auto rows = predict_all(fit, d ? *d : full_factorial(s), a.x);
        cli::Table tab({"rank", "policy", "predicted", "in sample"});
        result = json::array();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            tab.add({std::to_string(i + 1), s.label(rows[i].variant), cli::fixed(rows[i].predicted_outcome, 5),
                     d && rows[i].in_sample ? "yes" : ""});
            result.push_back({{"variant", variant_json(s, rows[i].variant)},
                              {"predicted_outcome", rows[i].predicted_outcome},
                              {"in_sample", d ? json(rows[i].in_sample) : json(nullptr)}});
        }
        t << tab.str();
    }
    emit_report(a.c, m, {t.str(), {{"mode", a.mode}, {"rows", result}}});
    return 0;
}

// ------------------------------------------------------------------ validate

struct ValidateArgs {
    Common c;
    std::string design, data, fit;
    std::size_t groups = 0;
    std::vector<std::string> outcome_covariates;
    double alpha = 0.05;
};

int run_validate(const ValidateArgs& a) {
    cli::RunManifest m{"validate"};
    m.parameters = {{"groups", a.groups}, {"outcome_covariates", a.outcome_covariates}, {"alpha", a.alpha}};
    const auto d = load_design(m, a.design);
    const auto data = load_data(m, a.data, d);
    const auto fit = load_fit(m, a.fit);
    const auto& s = d.space();
    const auto h = validate_holdout(data, fit);

    std::ostringstream t;
    t << "holdout " << s.label(h.holdout) << " (" << h.n_holdout << " units)\n\n";
    cli::Table tab({"arm", "units", "observed", "se", "predicted", "se"});
    json rows = json::array();
    for (const auto& r : h.rows) {
        tab.add({s.label(r.arm), std::to_string(r.n), cli::fixed(r.observed_diff, 5), cli::fixed(r.observed_se, 5),
                 cli::fixed(r.predicted_diff, 5), cli::fixed(r.predicted_se, 5)});
        rows.push_back({{"arm", variant_json(s, r.arm)},
                        {"units", r.n},
                        {"observed_diff", r.observed_diff},
                        {"observed_se", r.observed_se},
                        {"predicted_diff", r.predicted_diff},
                        {"predicted_se", r.predicted_se}});
    }
    t << tab.str() << "\njoint statistic " << cli::fixed(h.statistic, 4) << " on " << h.dof << " dof, p = "
      << p_text(h.p_value) << (h.p_value < a.alpha ? "  (reject at alpha " : "  (consistent at alpha ") << a.alpha
      << ")\n";
    json result{{"holdout",
                 {{"variant", variant_json(s, h.holdout)},
                  {"units", h.n_holdout},
                  {"rows", rows},
                  {"statistic", h.statistic},
                  {"dof", h.dof},
                  {"p_value", h.p_value}}}};

    if (a.groups) {
        const auto covs = a.outcome_covariates.empty() ? data.schema() : a.outcome_covariates;
        const auto seg = segment_validation(data, fit, a.groups, covs);
        json srows = json::array();
        for (const auto& r : seg.rows) {
            srows.push_back({{"group", r.group},
                             {"arm", variant_json(s, r.arm)},
                             {"predicted_diff", r.predicted_diff},
                             {"observed_diff", r.observed_diff},
                             {"observed_se", r.observed_se}});
        }
        t << "\nsegment validation, " << seg.k << " groups x " << seg.rows.size() / seg.k << " arms = "
          << seg.rows.size() << " comparisons\n"
          << "observed = " << cli::fixed(seg.intercept, 4) << " + " << cli::fixed(seg.slope, 4)
          << " predicted (slope se " << cli::fixed(seg.slope_se, 4) << ", p = " << p_text(seg.slope_p) << ")\n"
          << "variance of predicted " << cli::general(seg.predicted_variance) << ", observed "
          << cli::general(seg.observed_variance) << "\n";
        result["segments"] = {{"k", seg.k},
                              {"group_sizes", seg.group_sizes},
                              {"rows", srows},
                              {"intercept", seg.intercept},
                              {"slope", seg.slope},
                              {"slope_se", seg.slope_se},
                              {"slope_p", seg.slope_p},
                              {"predicted_variance", seg.predicted_variance},
                              {"observed_variance", seg.observed_variance}};
    }
    emit_report(a.c, m, {t.str(), result});
    return 0;
}

// ------------------------------------------------------------------ erupt

struct EruptArgs {
    Common c;
    std::string design, data, fit, policy = "personalized";
};

int run_erupt(const EruptArgs& a) {
    cli::RunManifest m{"erupt"};
    m.parameters = {{"policy", a.policy}};
    const auto d = load_design(m, a.design);
    const auto data = load_data(m, a.data, d);
    std::optional<EffectsFit> fit;
    if (!a.fit.empty()) fit = load_fit(m, a.fit);
    Policy pol;
    if (a.policy == "personalized" || a.policy == "global") {
        if (!fit) throw ValidationError("--fit is required for the " + a.policy + " policy");
        pol = a.policy == "personalized" ? personalized_policy(*fit, data) : constant_policy(optimal_global(*fit));
    } else {
        pol = constant_policy(parse_variant(d.space(), a.policy));
    }
    const auto r = erupt(data, pol);
    std::ostringstream t;
    t << "ERUPT value of the " << a.policy << " policy: " << cli::fixed(r.value, 5) << "\n"
      << "units " << r.n << ", matched " << r.matched << ", proposed variant not in design " << r.unassignable
      << "\n";
    json result{{"policy", a.policy}, {"value", r.value}, {"units", r.n}, {"matched", r.matched},
                {"unassignable", r.unassignable}};
    if (fit && fit->has_covariates()) {
        const double pred = eval_optimal_prediction(*fit, data);
        t << "mean predicted outcome under personalized optima: " << cli::fixed(pred, 5) << "\n";
        result["predicted_personalized_value"] = pred;
    }
    emit_report(a.c, m, {t.str(), result});
    return 0;
}

// ------------------------------------------------------------------ simulate

struct SimulateArgs {
    Common c;
    std::string config, design;
    std::size_t n = 0;
    std::optional<std::uint64_t> seed;
    std::size_t compare = 0;
};

int run_simulate(const SimulateArgs& a) {
    cli::RunManifest m{"simulate"};
    m.add_input(a.config);
    auto cfg = sim_config_from_json(cli::read_json(a.config));
    if (a.seed) cfg.seed = *a.seed;
    m.seed = cfg.seed;
    m.parameters = {{"units", a.n}, {"compare_replications", a.compare}};
    if (a.n == 0) throw ValidationError("--n must be positive");

    if (a.compare) {
        const auto r = compare_frameworks(cfg, cfg.space, a.n, a.compare);
        std::ostringstream t;
        t << "framework comparison, " << r.replications << " replications, " << r.units_per_cell
          << " units per cell\n\n";
        cli::Table tab({"estimator", "mean", "variance", "theory"});
        tab.add({"A/B/n", cli::fixed(r.abn_mean, 5), cli::general(r.abn_variance),
                 cli::general(r.abn_theoretical_variance)});
        tab.add({"factorial", cli::fixed(r.factorial_mean, 5), cli::general(r.factorial_variance),
                 cli::general(r.factorial_theoretical_variance)});
        t << tab.str() << "\noracle contrast " << cli::fixed(r.oracle_contrast, 5) << "\nvariance ratio "
          << cli::fixed(r.empirical_ratio, 4) << " (theory " << cli::fixed(r.theoretical_ratio, 4) << " = "
          << r.sum_levels << "/" << r.product_levels << ")\n";
        emit_report(a.c, m,
                    {t.str(),
                     {{"sum_levels", r.sum_levels},
                      {"product_levels", r.product_levels},
                      {"units_per_cell", r.units_per_cell},
                      {"replications", r.replications},
                      {"oracle_contrast", r.oracle_contrast},
                      {"abn_mean", r.abn_mean},
                      {"factorial_mean", r.factorial_mean},
                      {"abn_variance", r.abn_variance},
                      {"factorial_variance", r.factorial_variance},
                      {"abn_theoretical_variance", r.abn_theoretical_variance},
                      {"factorial_theoretical_variance", r.factorial_theoretical_variance},
                      {"empirical_ratio", r.empirical_ratio},
                      {"theoretical_ratio", r.theoretical_ratio}}});
        return 0;
    }
    if (a.design.empty()) throw ValidationError("--design is required to simulate a dataset");
    if (a.c.out.empty()) throw ValidationError("--out is required to simulate a dataset");
    const auto d = load_design(m, a.design);
    const auto data = generate(cfg, d, a.n);
    write_dataset(a.c, m, data);
    emit_with_artifact(a.c, m,
                       {"simulated " + std::to_string(data.size()) + " units to " + a.c.out + "\n\n" + run_counts(data),
                        {{"units", data.size()}, {"out", a.c.out}}});
    return 0;
}

// ------------------------------------------------------------------ reproduce-paper

int run_reproduce(const Common& c) {
    cli::RunManifest m{"reproduce-paper"};
    const auto t1 = case_study::main_effects_fit();
    const auto t2 = case_study::spend_interaction_fit();
    const auto s = case_study::space();
    std::ostringstream t;

    t << "main-effects coefficients\n";
    cli::Table c1({"term", "coef"});
    for (const auto& r : t1.table()) c1.add({r.name, cli::fixed(r.coef, 5)});
    t << c1.str();

    const auto rows = predict_all(t1, case_study::in_sample_design());
    const auto pub = case_study::ranked_profits();
    bool ok = rows.size() == pub.size();
    double worst = 0.0;
    json all = json::array();
    t << "\npredicted profit of every policy\n";
    cli::Table c4({"rank", "policy", "predicted", "published", "diff", "in sample"});
    for (std::size_t i = 0; i < rows.size() && i < pub.size(); ++i) {
        const double diff = rows[i].predicted_outcome - pub[i].profit;
        worst = std::max(worst, std::abs(diff));
        ok &= rows[i].variant == pub[i].variant && std::abs(diff) <= 5e-4;
        c4.add({std::to_string(i + 1), case_study::short_label(rows[i].variant), cli::fixed(rows[i].predicted_outcome, 5),
                cli::fixed(pub[i].profit, 5), cli::fixed(diff, 5), rows[i].in_sample ? "yes" : ""});
        all.push_back({{"variant", variant_json(s, rows[i].variant)},
                       {"predicted", rows[i].predicted_outcome},
                       {"published", pub[i].profit},
                       {"in_sample", rows[i].in_sample}});
    }
    t << c4.str() << "max |diff| " << cli::general(worst, 3) << (ok ? ", order and values agree\n" : ", MISMATCH\n");

    const auto seg = segment_policy_table(t2, "aos", 0, 100);
    const auto pseg = case_study::segment_table();
    t << "\noptimal policy by average order spend\n";
    cli::Table c3({"aos", "policy", "constant", "slope", "published aos", "published policy", "constant", "slope"});
    json segs = json::array();
    for (std::size_t i = 0; i < std::max(seg.size(), pseg.size()); ++i) {
        std::vector<std::string> row(8);
        if (i < seg.size()) {
            row[0] = "[" + std::to_string(seg[i].lo) + ", " + std::to_string(seg[i].hi) + "]";
            row[1] = case_study::short_label(seg[i].optimal_variant);
            row[2] = cli::fixed(seg[i].constant, 3);
            row[3] = cli::fixed(seg[i].slope, 4);
            segs.push_back({{"lo", seg[i].lo},
                            {"hi", seg[i].hi},
                            {"variant", variant_json(s, seg[i].optimal_variant)},
                            {"constant", seg[i].constant},
                            {"slope", seg[i].slope}});
        }
        if (i < pseg.size()) {
            const bool open = pseg[i].hi == std::numeric_limits<long>::max();
            row[4] = "[" + std::to_string(pseg[i].lo) + ", " + (open ? std::string("inf") : std::to_string(pseg[i].hi)) + "]";
            row[5] = case_study::short_label(pseg[i].variant);
            row[6] = cli::fixed(pseg[i].constant, 3);
            row[7] = cli::fixed(pseg[i].slope, 4);
        }
        c3.add(row);
    }
    t << c3.str()
      << "row boundaries here are the crossings implied by the rounded coefficients and can differ\n"
         "from the published boundaries by a few units of spend\n";

    const auto v = velocity(s);
    t << "\nfactor space: sum of levels " << v.sum_levels << ", variants " << v.product_levels
      << ", sample size ratio " << cli::fixed(v.sample_size_ratio, 4) << ", MDE ratio "
      << cli::fixed(v.mde_ratio, 4) << "\n";

    emit_report(c, m,
                {t.str(),
                 {{"all_policies", all},
                  {"all_policies_agree", ok},
                  {"max_abs_diff", worst},
                  {"segment_table", segs},
                  {"velocity",
                   {{"sum_levels", v.sum_levels},
                    {"product_levels", v.product_levels},
                    {"sample_size_ratio", v.sample_size_ratio},
                    {"mde_ratio", v.mde_ratio}}}}});
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factorial policy experiments: design, power, estimation, validation and policy choice"};
    app.require_subcommand(1);
    app.set_version_flag("--version", FACTORIAL_VERSION);

    DesignArgs da;
    auto* design = app.add_subcommand("design", "build a design from a factor-space file");
    design->add_option("--space", da.space, "factor-space JSON")->required();
    design->add_option("--kind", da.kind, "full | fraction | pb | mixed")
        ->check(CLI::IsMember({"full", "fraction", "pb", "mixed"}));
    design->add_option("--generators", da.generators, "generator words for --kind fraction, e.g. D=ABC");
    design->add_option("--runs", da.runs, "run count for pb and mixed designs");
    design->add_flag("--holdout", da.holdout, "add one uncovered variant as the holdout arm");
    design->add_option("--seed", da.seed, "seed for the mixed-level search and holdout choice");
    add_common(design, da.c);

    PowerArgs pa;
    auto* power = app.add_subcommand("power", "velocity ratios and sample sizes");
    power->add_option("--space", pa.space, "factor-space JSON")->required();
    power->add_option("--sigma", pa.sigma, "outcome standard deviation");
    power->add_option("--mde", pa.mde, "minimum detectable effect");
    power->add_option("--alpha", pa.alpha, "type I error rate");
    power->add_option("--beta", pa.beta, "type II error rate");
    power->add_flag("--two-sided", pa.two_sided, "two-sided test");
    add_common(power, pa.c);

    AssignArgs aa;
    auto* assign = app.add_subcommand("assign", "randomize units to design runs");
    assign->add_option("--design", aa.design, "design JSON")->required();
    assign->add_option("--units", aa.units, "CSV with unit_id and covariate columns")->required();
    assign->add_option("--seed", aa.seed, "randomization seed");
    add_common(assign, aa.c);
    assign->get_option("--out")->required();

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "fit main effects, or interactions with --covariates");
    fit->add_option("--design", fa.design, "design JSON")->required();
    fit->add_option("--data", fa.data, "dataset CSV")->required();
    fit->add_option("--covariates", fa.covariates, "covariates interacted with every factor")->delimiter(',');
    fit->add_flag("--robust", fa.robust, "HC1 standard errors");
    fit->add_flag("--standardize", fa.standardize, "fit on z-scored covariates");
    add_common(fit, fa.c);

    CateArgs ca;
    auto* cate = app.add_subcommand("cate", "nearest-neighbour CATE between two variants");
    cate->add_option("--design", ca.design, "design JSON")->required();
    cate->add_option("--data", ca.data, "dataset CSV")->required();
    cate->add_option("--a", ca.a, "variant A as level names, e.g. Upfront/Level3/Ongoing/Generic")->required();
    cate->add_option("--b", ca.b, "variant B")->required();
    cate->add_option("--x", ca.x, "query covariate values")->delimiter(',')->required();
    cate->add_option("--covariates", ca.covariates, "distance covariates (default: all)")->delimiter(',');
    cate->add_option("--k", ca.k, "neighbour count");
    cate->add_option("--grid", ca.grid, "tune k over this grid")->delimiter(',');
    add_common(cate, ca.c);

    OptimizeArgs oa;
    auto* opt = app.add_subcommand("optimize", "optimal policies from a fit");
    opt->add_option("--fit", oa.fit, "fit JSON")->required();
    opt->add_option("--mode", oa.mode, "global | personalized | table | all-policies")
        ->check(CLI::IsMember({"global", "personalized", "table", "all-policies"}));
    opt->add_option("--x", oa.x, "covariate values")->delimiter(',');
    opt->add_option("--covariate", oa.covariate, "segmenting covariate for the table mode");
    opt->add_option("--from", oa.from, "first grid point");
    opt->add_option("--to", oa.to, "last grid point");
    opt->add_option("--design", oa.design, "design JSON for in-sample flags");
    add_common(opt, oa.c);

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "holdout and segment validation of a fit");
    validate->add_option("--design", va.design, "design JSON with a holdout run")->required();
    validate->add_option("--data", va.data, "dataset CSV")->required();
    validate->add_option("--fit", va.fit, "fit JSON")->required();
    validate->add_option("--groups", va.groups, "segment groups K (0 skips segment validation)");
    validate->add_option("--outcome-covariates", va.outcome_covariates, "covariates of the outcome model")
        ->delimiter(',');
    validate->add_option("--alpha", va.alpha, "significance level for the verdict");
    add_common(validate, va.c);

    EruptArgs ea;
    auto* er = app.add_subcommand("erupt", "inverse-propensity value of a policy");
    er->add_option("--design", ea.design, "design JSON")->required();
    er->add_option("--data", ea.data, "dataset CSV")->required();
    er->add_option("--fit", ea.fit, "fit JSON");
    er->add_option("--policy", ea.policy, "personalized | global | a variant");
    add_common(er, ea.c);

    SimulateArgs sa;
    std::uint64_t sim_seed = 0;
    auto* sim = app.add_subcommand("simulate", "simulate a dataset or compare frameworks");
    sim->add_option("--config", sa.config, "simulation config JSON")->required();
    sim->add_option("--design", sa.design, "design JSON");
    sim->add_option("--n", sa.n, "units")->required();
    auto* seed_opt = sim->add_option("--seed", sim_seed, "override the config seed");
    sim->add_option("--compare", sa.compare, "replications for an A/B/n vs factorial comparison");
    add_common(sim, sa.c);

    Common rc;
    auto* rep = app.add_subcommand("reproduce-paper", "rebuild the published tables from their coefficients");
    add_common(rep, rc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (seed_opt->count()) sa.seed = sim_seed;

    try {
        if (*design) return run_design(da);
        if (*power) return run_power(pa);
        if (*assign) return run_assign(aa);
        if (*fit) return run_fit(fa);
        if (*cate) return run_cate(ca);
        if (*opt) return run_optimize(oa);
        if (*validate) return run_validate(va);
        if (*er) return run_erupt(ea);
        if (*sim) return run_simulate(sa);
        if (*rep) return run_reproduce(rc);
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const RankDeficientError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed document: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
