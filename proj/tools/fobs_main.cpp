// fobs: design and validate low-order functional observers for
// discrete-time systems.

#include "fobs/fobs.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace fobs;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;

Vector parse_vector(const std::string& text, const std::string& what) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw io::InputError(what + ": malformed number '" + item + "'");
        }
    }
    if (values.empty()) throw io::InputError(what + ": empty list");
    Vector v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) v[i] = values[i];
    return v;
}

std::string describe_component(int v, int k) {
    // row T_{v-k}: q F^k + sum alpha_i q F^{k-i} - sum beta_i H F^{k-i}
    auto compose = [](const std::string& fn, int depth) {
        std::string s = fn + "(";
        for (int i = 0; i < depth; ++i) s += "F(";
        s += "x";
        for (int i = 0; i < depth + 1; ++i) s += ")";
        return s;
    };
    std::string s = "T_" + std::to_string(v - k) + "(x) = " + compose("q", k);
    for (int i = 1; i <= k; ++i) s += " + alpha_" + std::to_string(i) + "*" + compose("q", k - i);
    for (int i = 0; i <= k; ++i) s += " - beta_" + std::to_string(i) + "*" + compose("H", k - i);
    return s;
}

std::vector<std::string> transformation_descriptions(int v) {
    std::vector<std::string> out;
    for (int k = v - 1; k >= 0; --k) out.push_back(describe_component(v, k));
    return out;
}

int cmd_design_linear(const std::string& system_path, const std::string& eigen_text, int order,
                      bool strict_span, double feas_tol, const std::string& out_path) {
    const io::SystemSpec spec = io::system_from_json(io::load_json_file(system_path));
    if (!spec.is_linear()) throw io::InputError("design-linear requires a linear system spec");

    const auto roots = io::parse_eigenvalue_list(eigen_text);
    if (static_cast<int>(roots.size()) != order)
        throw io::InputError("eigenvalue count (" + std::to_string(roots.size()) +
                             ") must equal --order (" + std::to_string(order) + ")");
    const CharPoly cp = poly_from_eigenvalues(roots);

    io::DesignReport report;
    report.kind = "linear";
    report.order = order;
    report.alpha = cp.alpha;
    if (!schur_stable(roots))
        report.diagnostics.push_back("requested eigenvalues are not Schur-stable; "
                                     "initialization errors will not decay");

    SolveOptions opts;
    opts.strict_span = strict_span;
    opts.feas_tol = feas_tol;
    const auto solved = solve_beta(*spec.linear, cp, opts);
    report.residuals["feasibility"] = solved.residual;
    report.feasible = solved.feasible();

    if (report.feasible) {
        const auto design = design_linear(*spec.linear, cp, opts);
        report.beta = design->beta;
        report.observer = design->observer;
        report.t_matrix = design->t;
        report.residuals["res_dyn"] = design->residuals.res_dyn;
        report.residuals["res_out"] = design->residuals.res_out;
    }

    if (!out_path.empty()) io::save_json_file(out_path, io::report_to_json(report));
    if (report.feasible) {
        std::cout << "feasible at order " << order << ", residual " << solved.residual << "\n";
        return kExitOk;
    }
    std::cout << "infeasible at order " << order << ", residual " << solved.residual << "\n";
    return kExitInfeasible;
}

int cmd_verify_nonlinear(const std::string& system_path, const std::string& eigen_text, int order,
                         const std::string& beta_path, bool fit, int samples, std::uint64_t seed,
                         const std::string& out_path) {
    const io::SystemSpec spec = io::system_from_json(io::load_json_file(system_path));
    if (spec.is_linear()) throw io::InputError("verify-nonlinear requires a nonlinear system spec");
    if (beta_path.empty() && !fit) throw io::InputError("supply --beta <file> or --fit");
    if (!beta_path.empty() && fit) throw io::InputError("--beta and --fit are mutually exclusive");

    const auto roots = io::parse_eigenvalue_list(eigen_text);
    if (static_cast<int>(roots.size()) != order)
        throw io::InputError("eigenvalue count must equal --order");
    const CharPoly cp = poly_from_eigenvalues(roots);
    const NonlinearSystem sys = spec.nonlinear->compile();

    io::DesignReport report;
    report.kind = "nonlinear";
    report.order = order;
    report.alpha = cp.alpha;
    report.diagnostics.push_back("verified on domain_box only");
    if (!schur_stable(roots))
        report.diagnostics.push_back("requested eigenvalues are not Schur-stable; "
                                     "initialization errors will not decay");

    const SampleSet validate = sample_box(sys.domain, samples, seed + 1);
    BetaCoefficients beta;
    if (fit) {
        const SampleSet train = sample_box(sys.domain, samples, seed);
        const FitResult res = fit_beta(sys, cp, train, validate);
        beta = res.beta;
        report.residuals["train"] = res.train_residual;
        report.residuals["validation"] = res.validation_residual;
        report.residuals["scale"] = res.scale;
        report.feasible = res.candidate;
        if (res.degenerate)
            report.diagnostics.push_back("sample stack is rank-deficient (rank " +
                                         std::to_string(res.rank) +
                                         "); returned the minimum-norm representative");
    } else {
        beta = io::beta_from_json(io::load_json_file(beta_path));
        if (beta.order() != order || beta.output_dim() != sys.output_dim())
            throw io::InputError("beta dimensions do not match the system/order");
        double max_res = 0.0, max_target = 0.0;
        for (const Vector& x : validate.points) {
            max_res = std::max(max_res, std::abs(condition_residual(sys, cp, beta, x)));
            max_target = std::max(max_target, std::abs(condition_target(sys, cp, x)));
        }
        const double scale = std::max(1.0, max_target);
        report.residuals["validation"] = max_res;
        report.residuals["scale"] = scale;
        report.feasible = max_res <= 1e-6 * scale;
    }

    report.beta = beta;
    const auto obs = realize_observer(cp, beta);
    report.observer = obs;
    report.t_components = transformation_descriptions(order);
    const auto t = transformation_map(sys, cp, beta);
    const auto cond = verify_design_conditions(sys, obs, t, validate);
    report.residuals["max_res_dyn"] = cond.max_res_dyn;
    report.residuals["max_res_out"] = cond.max_res_out;

    if (!out_path.empty()) io::save_json_file(out_path, io::report_to_json(report));
    std::cout << (report.feasible ? "condition satisfied" : "condition violated")
              << " on the sampled box: residual " << report.residuals["validation"] << " (scale "
              << report.residuals["scale"] << ")\n";
    return report.feasible ? kExitOk : kExitInfeasible;
}

int cmd_simulate(const std::string& system_path, const std::string& observer_path,
                 const std::string& x0_text, const std::string& xi0_text, bool consistent,
                 std::optional<double> init_error, long steps, const std::string& out_path) {
    const io::SystemSpec spec = io::system_from_json(io::load_json_file(system_path));
    const io::DesignReport report = io::report_from_json(io::load_json_file(observer_path));
    if (!report.observer) throw io::InputError("observer report carries no realization");
    if (!report.beta) throw io::InputError("observer report carries no beta coefficients");
    const ObserverRealization& obs = *report.observer;
    const CharPoly cp(report.alpha);

    const Vector x0 = parse_vector(x0_text, "--x0");
    if (x0.size() != spec.state_dim()) throw io::InputError("--x0 dimension mismatch");

    const int choices = (!xi0_text.empty()) + consistent + init_error.has_value();
    if (choices != 1)
        throw io::InputError("choose exactly one of --xi0, --consistent, --init-error");

    Trajectory traj;
    ErrorAnalysis errors;
    if (spec.is_linear()) {
        const LinearSystem& sys = *spec.linear;
        const Matrix t = transformation_matrix(sys, cp, *report.beta);
        Vector xi0 = t * x0;
        if (!xi0_text.empty()) xi0 = parse_vector(xi0_text, "--xi0");
        if (init_error) xi0.array() += *init_error;
        if (xi0.size() != obs.order()) throw io::InputError("--xi0 dimension mismatch");
        traj = simulate(sys, obs, x0, xi0, steps);
        errors = error_analysis(traj, obs, t);
    } else {
        const NonlinearSystem sys = spec.nonlinear->compile();
        const auto t = transformation_map(sys, cp, *report.beta);
        Vector xi0 = t(x0);
        if (!xi0_text.empty()) xi0 = parse_vector(xi0_text, "--xi0");
        if (init_error) xi0.array() += *init_error;
        if (xi0.size() != obs.order()) throw io::InputError("--xi0 dimension mismatch");
        traj = simulate(sys, obs, x0, xi0, steps);
        errors = error_analysis(traj, obs, [&t](const Vector& x) { return t(x); });
    }

    std::ofstream out(out_path);
    if (!out) throw io::InputError("cannot write '" + out_path + "'");
    write_trajectory_csv(out, traj, errors);
    if (traj.truncated_at)
        std::cerr << "warning: state overflowed; trajectory truncated at step "
                  << *traj.truncated_at << "\n";
    std::cout << "wrote " << traj.states.size() << " rows to " << out_path << "\n";
    return kExitOk;
}

int cmd_cstr(double init_error, long steps, const std::string& out_path) {
    const auto result = cstr::run_case_study(init_error, steps);

    std::ofstream out(out_path);
    if (!out) throw io::InputError("cannot write '" + out_path + "'");
    const Trajectory abs_traj = cstr::to_absolute(result.trajectory);
    write_trajectory_csv(out, abs_traj, result.errors);

    std::printf("reactor case study: %ld steps, initialization error %g\n",
                result.trajectory.steps(), init_error);
    std::printf("  observer eigenvalue   %.17g\n", -result.design.alpha1);
    std::printf("  output injection B    [%.17g, %.17g]\n", result.design.observer.B(0, 0),
                result.design.observer.B(0, 1));
    std::printf("  direct term D         [%.17g, %.17g]\n", result.design.observer.D(0),
                result.design.observer.D(1));
    std::printf("  |zhat - z| at end     %.3g\n", std::abs(result.errors.observed.back()));
    std::printf("  max |observed - C A^k e0| = %.3g\n", result.errors.max_dev);
    std::printf("  reference fixed-point defect (abs model): [%.3g, %.3g, %.3g, %.3g]\n",
                result.defect[0], result.defect[1], result.defect[2], result.defect[3]);
    std::printf("wrote %zu rows to %s\n", abs_traj.states.size(), out_path.c_str());
    return kExitOk;
}

int cmd_obs_index(const std::string& system_path) {
    const io::SystemSpec spec = io::system_from_json(io::load_json_file(system_path));
    if (!spec.is_linear()) throw io::InputError("obs-index requires a linear system spec");
    const auto vo = observability_index(*spec.linear);
    if (vo) {
        std::cout << *vo << "\n";
        return kExitOk;
    }
    std::cout << "unobservable\n";
    return kExitInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lower-order functional observer design for discrete-time systems"};
    app.require_subcommand(1);

    // design-linear
    std::string dl_system, dl_eigen, dl_out;
    int dl_order = 1;
    bool dl_strict = false;
    double dl_feas_tol = 1e-9;
    auto* dl = app.add_subcommand("design-linear",
                                  "decide feasibility and construct the observer and map");
    dl->add_option("--system", dl_system, "system spec JSON")->required();
    dl->add_option("--eigenvalues", dl_eigen, "comma-separated eigenvalues, complex as a+bi")
        ->required();
    dl->add_option("--order", dl_order, "observer order v")->required();
    dl->add_flag("--strict-span", dl_strict,
                 "restrict the span to H F^0..H F^{v-1} (forces D = 0)");
    dl->add_option("--feas-tol", dl_feas_tol, "relative feasibility tolerance");
    dl->add_option("--out", dl_out, "design report path");

    // verify-nonlinear
    std::string vn_system, vn_eigen, vn_beta, vn_out;
    int vn_order = 1, vn_samples = 1000;
    std::uint64_t vn_seed = 20240;
    bool vn_fit = false;
    auto* vn = app.add_subcommand("verify-nonlinear",
                                  "check the existence condition on sampled states");
    vn->add_option("--system", vn_system, "system spec JSON")->required();
    vn->add_option("--eigenvalues", vn_eigen, "comma-separated eigenvalues")->required();
    vn->add_option("--order", vn_order, "observer order v")->required();
    vn->add_option("--beta", vn_beta, "coefficient file to verify");
    vn->add_flag("--fit", vn_fit, "fit beta by least squares instead");
    vn->add_option("--samples", vn_samples, "points per sample set");
    vn->add_option("--seed", vn_seed, "RNG seed")->envname("FOBS_SEED");
    vn->add_option("--out", vn_out, "design report path");

    // simulate
    std::string sm_system, sm_observer, sm_x0, sm_xi0, sm_out;
    bool sm_consistent = false;
    std::optional<double> sm_init_error;
    long sm_steps = 100;
    auto* sm = app.add_subcommand("simulate", "run the plant-observer cascade to CSV");
    sm->add_option("--system", sm_system, "system spec JSON")->required();
    sm->add_option("--observer", sm_observer, "design report JSON")->required();
    sm->add_option("--x0", sm_x0, "initial plant state, comma-separated")->required();
    sm->add_option("--xi0", sm_xi0, "initial observer state");
    sm->add_flag("--consistent", sm_consistent, "initialize on the invariant manifold");
    sm->add_option("--init-error", sm_init_error, "offset added to the consistent initialization");
    sm->add_option("--steps", sm_steps, "horizon N");
    sm->add_option("--out", sm_out, "trajectory CSV path")->required();

    // cstr
    double cs_init_error = 1.0;
    long cs_steps = 600;
    std::string cs_out = "cstr.csv";
    auto* cs = app.add_subcommand("cstr", "reactor case study in absolute variables");
    cs->add_option("--init-error", cs_init_error, "observer initialization error");
    cs->add_option("--steps", cs_steps, "horizon N");
    cs->add_option("--out", cs_out, "trajectory CSV path");

    // obs-index
    std::string oi_system;
    auto* oi = app.add_subcommand("obs-index", "print the observability index");
    oi->add_option("--system", oi_system, "system spec JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (dl->parsed())
            return cmd_design_linear(dl_system, dl_eigen, dl_order, dl_strict, dl_feas_tol, dl_out);
        if (vn->parsed())
            return cmd_verify_nonlinear(vn_system, vn_eigen, vn_order, vn_beta, vn_fit, vn_samples,
                                        vn_seed, vn_out);
        if (sm->parsed())
            return cmd_simulate(sm_system, sm_observer, sm_x0, sm_xi0, sm_consistent, sm_init_error,
                                sm_steps, sm_out);
        if (cs->parsed()) return cmd_cstr(cs_init_error, cs_steps, cs_out);
        if (oi->parsed()) return cmd_obs_index(oi_system);
    } catch (const io::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
