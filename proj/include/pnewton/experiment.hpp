#pragma once

// Batch experiment runner behind the command-line tool: config parsing, the
// problem registry and the run / check-region / audit commands.

#include "pnewton/analysis.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace pnewton {

using nlohmann::json;

struct ProblemSpec {
    std::string name;
    json parameters = json::object();
    std::uint64_t seed = 0;
};

struct OutputSpec {
    std::string trace_path;
    std::string report_path;
};

struct ExperimentConfig {
    ProblemSpec problem;
    Algorithm algorithm = Algorithm::Alg2;
    SolverConfig solver;
    OutputSpec output;
    int repeat = 1;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get_as(const json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad or missing '" + key + "' in " + where);
    }
}

template <class T>
std::optional<T> get_opt(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) return std::nullopt;
    return get_as<T>(obj, key, where);
}

}  // namespace detail

inline const std::vector<std::string>& problem_names() {
    static const std::vector<std::string> names{"quadratic_singular", "lasso_degenerate", "holder", "box_ge",
                                                "nonmonotone_ge"};
    return names;
}

/// Builds a registered fixture from its JSON parameters.
inline ProblemInstance make_problem(const std::string& name, const json& params, std::uint64_t seed) {
    using detail::get_as;
    using detail::get_opt;
    const std::string where = "problem.parameters";
    if (name == "quadratic_singular") {
        detail::reject_unknown(params, {"n", "rank"}, where);
        return make_quadratic_singular(get_as<int>(params, "n", where), get_as<int>(params, "rank", where), seed);
    }
    if (name == "lasso_degenerate") {
        detail::reject_unknown(params, {"m", "n", "rank", "lambda", "lambda_ratio"}, where);
        const int m = get_as<int>(params, "m", where);
        const int n = get_as<int>(params, "n", where);
        const int rank = get_as<int>(params, "rank", where);
        auto lambda = get_opt<double>(params, "lambda", where);
        auto ratio = get_opt<double>(params, "lambda_ratio", where);
        if (lambda.has_value() == ratio.has_value())
            throw ConfigError("lasso_degenerate needs exactly one of 'lambda' and 'lambda_ratio'");
        if (ratio) lambda = *ratio * make_lasso_data(m, n, rank, seed).lambda_max;
        return make_lasso_degenerate(m, n, rank, *lambda, seed);
    }
    if (name == "holder") {
        detail::reject_unknown(params, {"n", "gamma", "lambda"}, where);
        return make_holder(get_as<int>(params, "n", where), get_as<double>(params, "gamma", where), seed,
                           get_opt<double>(params, "lambda", where).value_or(0.0));
    }
    if (name == "box_ge") {
        detail::reject_unknown(params, {"n", "nonsymmetric"}, where);
        return make_box_ge(get_as<int>(params, "n", where), seed,
                           get_opt<bool>(params, "nonsymmetric", where).value_or(true));
    }
    if (name == "nonmonotone_ge") {
        detail::reject_unknown(params, {"n", "eps"}, where);
        return make_nonmonotone_ge(get_as<int>(params, "n", where), get_as<double>(params, "eps", where), seed);
    }
    throw ConfigError("unknown problem '" + name + "'");
}

inline SolverConfig parse_solver_config(const json& j) {
    using detail::get_opt;
    const std::string where = "solver";
    detail::reject_unknown(j, {"c", "rho", "nu", "theta", "beta", "gamma", "delta", "sigma", "c_bar", "max_outer",
                               "max_inner", "max_backtracks", "r_tol", "subres_floor", "damping_mode", "modulus",
                               "inner_method", "relaxed_acceptance", "jacobian_noise", "noise_seed"},
                           where);
    ConfigParams p;
    p.c = get_opt<double>(j, "c", where);
    p.rho = get_opt<double>(j, "rho", where);
    p.nu = get_opt<double>(j, "nu", where);
    p.theta = get_opt<double>(j, "theta", where);
    p.beta = get_opt<double>(j, "beta", where);
    p.gamma = get_opt<double>(j, "gamma", where);
    p.delta = get_opt<double>(j, "delta", where);
    p.sigma = get_opt<double>(j, "sigma", where);
    p.c_bar = get_opt<double>(j, "c_bar", where);
    p.max_outer = get_opt<int>(j, "max_outer", where);
    p.max_inner = get_opt<int>(j, "max_inner", where);
    p.max_backtracks = get_opt<int>(j, "max_backtracks", where);
    p.r_tol = get_opt<double>(j, "r_tol", where);
    p.subres_floor = get_opt<double>(j, "subres_floor", where);
    p.relaxed_acceptance = get_opt<bool>(j, "relaxed_acceptance", where);
    p.jacobian_noise = get_opt<double>(j, "jacobian_noise", where);
    p.noise_seed = get_opt<std::uint64_t>(j, "noise_seed", where);
    if (auto mode = get_opt<std::string>(j, "damping_mode", where)) {
        if (*mode == "power") p.damping_mode = DampingMode::Power;
        else if (*mode == "modulus") p.damping_mode = DampingMode::Modulus;
        else throw ConfigError("unknown damping_mode '" + *mode + "'");
    }
    if (auto m = get_opt<std::string>(j, "modulus", where)) p.modulus = modulus_by_name(*m);
    if (auto im = get_opt<std::string>(j, "inner_method", where)) {
        if (*im == "auto") p.inner_method = InnerMethod::Auto;
        else if (*im == "fb") p.inner_method = InnerMethod::ForwardBackward;
        else if (*im == "accelerated") p.inner_method = InnerMethod::Accelerated;
        else if (*im == "fbf") p.inner_method = InnerMethod::ForwardBackwardForward;
        else throw ConfigError("unknown inner_method '" + *im + "'");
    }
    return make_config(p);
}

inline bool is_generalized_equation(const std::string& problem_name) {
    return problem_name == "box_ge" || problem_name == "nonmonotone_ge";
}

inline ExperimentConfig parse_experiment_config(const json& j) {
    using detail::get_as;
    detail::reject_unknown(j, {"problem", "algorithm", "solver", "output", "repeat"}, "config");
    ExperimentConfig cfg;

    const json& pj = j.contains("problem") ? j.at("problem") : throw ConfigError("missing 'problem'");
    detail::reject_unknown(pj, {"name", "parameters", "seed"}, "problem");
    cfg.problem.name = get_as<std::string>(pj, "name", "problem");
    if (std::find(problem_names().begin(), problem_names().end(), cfg.problem.name) == problem_names().end())
        throw ConfigError("unknown problem '" + cfg.problem.name + "'");
    if (pj.contains("parameters")) cfg.problem.parameters = pj.at("parameters");
    if (!cfg.problem.parameters.is_object()) throw ConfigError("problem.parameters must be an object");
    cfg.problem.seed = detail::get_opt<std::uint64_t>(pj, "seed", "problem").value_or(0);

    cfg.algorithm = algorithm_from_string(get_as<std::string>(j, "algorithm", "config"));
    if (cfg.algorithm != Algorithm::Local && is_generalized_equation(cfg.problem.name))
        throw ConfigError("line search requires objective: algorithm '" + to_string(cfg.algorithm) +
                          "' cannot run on generalized equation '" + cfg.problem.name + "'");

    cfg.solver = parse_solver_config(j.contains("solver") ? j.at("solver") : json::object());

    if (j.contains("output")) {
        const json& oj = j.at("output");
        detail::reject_unknown(oj, {"trace_path", "report_path"}, "output");
        cfg.output.trace_path = detail::get_opt<std::string>(oj, "trace_path", "output").value_or("");
        cfg.output.report_path = detail::get_opt<std::string>(oj, "report_path", "output").value_or("");
    }
    cfg.repeat = detail::get_opt<int>(j, "repeat", "config").value_or(1);
    if (cfg.repeat < 1) throw ConfigError("repeat must be >= 1");
    return cfg;
}

inline json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(read_json_file(path));
}

/// "out/trace.csv" with index 2 -> "out/trace_2.csv".
inline std::string suffixed_path(const std::string& path, int index) {
    std::filesystem::path p(path);
    std::string stem = p.stem().string() + "_" + std::to_string(index);
    return (p.parent_path() / (stem + p.extension().string())).string();
}

inline json make_report(const RunResult& result, const std::vector<Violation>& violations) {
    json rep;
    rep["termination"] = to_string(result.termination);
    rep["diagnostic"] = result.diagnostic;
    rep["final_r"] = result.final_r;
    rep["iterations"] = result.trace.empty() ? 0 : result.trace.back().t;
    try {
        rep["rate"] = to_json(estimate_rate(result.trace));
    } catch (const RateError& e) {
        rep["rate"] = nullptr;
        rep["rate_error"] = e.what();
    }
    rep["audit"] = {{"violations", to_json(violations)}, {"count", violations.size()}};
    return rep;
}

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitViolations = 2, kExitOnlyR = 3, kExitInfeasible = 4 };

/// run: executes the configured experiment(s) and writes trace CSV + report JSON.
inline int cmd_run(const std::string& config_path, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const ExperimentConfig cfg = load_experiment_config(config_path);
        bool any_violation = false;
        bool solver_failed = false;
        for (int i = 0; i < cfg.repeat; ++i) {
            const std::uint64_t seed = cfg.problem.seed + static_cast<std::uint64_t>(i);
            const ProblemInstance problem = make_problem(cfg.problem.name, cfg.problem.parameters, seed);
            const RunResult result = run(cfg.algorithm, problem, problem.default_x0, cfg.solver);
            const auto violations = audit_trace(result.trace, problem, cfg.solver);
            any_violation |= !violations.empty();
            solver_failed |= result.termination == Termination::InnerBudgetExhausted;

            const json report = make_report(result, violations);
            if (!cfg.output.trace_path.empty()) {
                write_trace_csv(result.trace,
                                cfg.repeat > 1 ? suffixed_path(cfg.output.trace_path, i) : cfg.output.trace_path);
            }
            if (!cfg.output.report_path.empty()) {
                const std::string path =
                    cfg.repeat > 1 ? suffixed_path(cfg.output.report_path, i) : cfg.output.report_path;
                std::ofstream os(path, std::ios::trunc);
                if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
                os << report.dump(2) << '\n';
            }
            out << "run " << i << ": " << report["termination"].get<std::string>() << ", "
                << report["iterations"].get<int>() << " iterations, final r = " << result.final_r << ", "
                << violations.size() << " violations\n";
            if (result.termination == Termination::InnerBudgetExhausted) err << "error: " << result.diagnostic << '\n';
        }
        if (solver_failed) return kExitError;
        return any_violation ? kExitViolations : kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

/// check-region: prints the report; 0 if Q-feasible, 3 if only R-feasible, 4 if neither.
inline int cmd_check_region(double p, double q, double rho, double delta, std::ostream& out = std::cout,
                            std::ostream& err = std::cerr) {
    try {
        const RegionReport rep = check_region(p, q, rho);
        out << to_json(rep, delta).dump(2) << '\n';
        if (rep.feasible_Q) return kExitOk;
        return rep.feasible_R ? kExitOnlyR : kExitInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

/// audit: re-checks a trace CSV against the experiment config that produced it.
inline int cmd_audit(const std::string& trace_path, const std::string& config_path, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
    try {
        const ExperimentConfig cfg = load_experiment_config(config_path);
        IterateTrace trace = read_trace_csv(trace_path);
        trace.algorithm = cfg.algorithm;
        const ProblemInstance problem = make_problem(cfg.problem.name, cfg.problem.parameters, cfg.problem.seed);
        const auto violations = audit_trace(trace, problem, cfg.solver);
        out << json{{"violations", to_json(violations)}, {"count", violations.size()}}.dump(2) << '\n';
        return violations.empty() ? kExitOk : kExitViolations;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace pnewton
