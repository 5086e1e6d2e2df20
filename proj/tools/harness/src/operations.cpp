#include "stein_harness/operations.hpp"

#include "stein/identities.hpp"
#include "stein/rng.hpp"
#include "stein/semigroup.hpp"
#include "stein/spectral.hpp"
#include "stein/stein_bound.hpp"
#include "stein_harness/json_io.hpp"
#include "stein_harness/suites.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace stein::harness {

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_row(double t, double v, double se) {
    std::ostringstream os;
    os.precision(17);
    os << t << "," << v << "," << se << "\n";
    return os.str();
}

const std::string kCsvHeader = "t,value,std_error\n";

SimOptions sim_options(const ExperimentConfig& c, const RunOptions& o) {
    SimOptions s;
    s.path.steps_per_unit = c.steps_per_unit_time;
    s.exec.workers = o.workers;
    s.exec.strict = o.strict;
    return s;
}

Vec frame_direction(const json& params, const std::string& key, int n, int axis) {
    if (params.contains(key)) {
        const Vec d = json_vec(params.at(key));
        if (d.size() != n) throw ConfigError("params." + key + " must have one entry per tangent dimension");
        return d;
    }
    Vec d = Vec::Zero(n);
    d(axis % n) = 1.0;
    return d;
}

// Points for geometry checks: uniform on compact spaces, spread around the default point elsewhere.
std::vector<Vec> test_points(const Manifold& M, const Vec& x0, std::size_t n, std::uint64_t seed) {
    if (M.compact()) return sample_uniform(M, n, seed);
    std::vector<Vec> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = path_rng(seed, i);
        std::normal_distribution<double> nd(0.0, 1.0);
        Vec c(M.dim());
        for (int k = 0; k < M.dim(); ++k) c(k) = nd(rng);
        pts[i] = M.exp(x0, M.tangent_basis(x0) * c);
    }
    return pts;
}

json verify_geometry(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed) {
    require_keys(c.params, {"points", "functions", "x"}, "params");
    const ManifoldPtr M = build_manifold(c.manifold);
    const PotentialSpec pot = build_potential(c.potential, *M);
    const std::size_t n = param_size(c.params, "points", 100);
    const std::size_t nf = std::min(n, param_size(c.params, "functions", 3));
    const Vec x0 = start_point(c.params, *M);
    const auto pts = test_points(*M, x0, n, seed);
    const double inj = M->injectivity_radius();
    const double vmax = std::isfinite(inj) ? 0.9 * inj : 1.0;
    const int d = M->dim();

    std::vector<double> rt(n), tr(n), ric(n), flat(n);
    parallel_for(n, o.workers, [&](std::size_t i) {
        auto rng = path_rng(seed + 1, i);
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const Mat F = M->tangent_basis(pts[i]);
        auto draw = [&] {
            Vec cc(d);
            for (int k = 0; k < d; ++k) cc(k) = nd(rng);
            return Vec(F * (cc / cc.norm()));
        };
        const Vec v = U(rng) * vmax * draw();
        const Vec q = M->exp(pts[i], v);
        rt[i] = M->norm(pts[i], M->log(pts[i], q) - v);
        const Vec a = draw(), b = draw();
        tr[i] = std::abs(M->inner(q, M->transport_along(pts[i], v, a), M->transport_along(pts[i], v, b)) -
                         M->inner(pts[i], a, b));
        const auto cb = curvature_at(*M, pts[i], F, PotentialSpec::zero(), CurvatureLevel::Ricci);
        const double expect = (d - 1) * M->sectional_curvature();
        ric[i] = M->constant_curvature() ? (cb.ric - expect * Mat::Identity(d, d)).cwiseAbs().maxCoeff() : 0.0;
        flat[i] = cb.R.max_abs();
    });
    std::vector<IdentityReport> ids(nf);
    parallel_for(nf, o.workers, [&](std::size_t k) {
        ids[k] = verify_tensor_identities(*M, pts[k], pot, random_polynomial(M->ambient_dim(), 3, seed + 100 + k));
    });
    json idj = json::array();
    double id_max = 0.0;
    for (const auto& r : ids) {
        idj.push_back(to_json(r));
        id_max = std::max(id_max, r.max());
    }
    auto mx = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
    json out{{"manifold_kind", manifold_kind_name(M->kind())},
             {"points", n},
             {"max_speed", vmax},
             {"max_roundtrip_error", mx(rt)},
             {"max_transport_drift", mx(tr)},
             {"max_curvature_abs", mx(flat)},
             {"identity_residuals", idj},
             {"max_identity_residual", id_max}};
    if (M->constant_curvature()) out["max_ricci_error"] = mx(ric);
    return out;
}

json simulate(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, RunOutput& run) {
    require_keys(c.params, {"x", "t", "paths"}, "params");
    const ManifoldPtr M = build_manifold(c.manifold);
    const PotentialSpec pot = build_potential(c.potential, *M);
    const Vec x0 = start_point(c.params, *M);
    const double t = param_double(c.params, "t", 1.0);
    if (!(t > 0.0)) throw ConfigError("params.t must be positive");
    const std::size_t n = param_size(c.params, "paths", std::min<std::size_t>(c.n_samples, 64));
    PathOptions po;
    po.steps_per_unit = c.steps_per_unit_time;
    const int steps = step_count(t, po);
    const Mat F0 = M->tangent_basis(x0);
    run.paths.resize(n);
    parallel_for(n, o.workers, [&](std::size_t i) { run.paths[i] = simulate_path(*M, x0, F0, pot, t, steps, seed, i); });
    Vec mean = Vec::Zero(x0.size());
    double resid = 0.0, dist = 0.0;
    for (const auto& p : run.paths) {
        mean += p.points.back();
        dist += M->distance(x0, p.points.back());
        for (const auto& x : p.points) resid = std::max(resid, M->constraint_residual(x));
    }
    mean /= double(n);
    return {{"paths", n},
            {"steps", steps},
            {"t", t},
            {"x0", vec_json(x0)},
            {"endpoint_mean", vec_json(mean)},
            {"mean_endpoint_distance", dist / double(n)},
            {"max_constraint_residual", resid}};
}

json estimate(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, RunOutput& run) {
    require_keys(c.params, {"quantity", "x", "f", "t", "t_grid", "u", "v", "w", "variant"}, "params");
    const ManifoldPtr M = build_manifold(c.manifold);
    const PotentialSpec pot = build_potential(c.potential, *M);
    const std::string q = param_string(c.params, "quantity", "grad");
    if (q != "ptf" && q != "grad" && q != "hess" && q != "third")
        throw ConfigError("params.quantity must be one of ptf, grad, hess, third");
    if (!c.params.contains("f")) throw ConfigError("params.f is required");
    const ScalarField f = build_function(c.params.at("f"), *M);
    const std::vector<double> ts = param_doubles(c.params, "t_grid", {param_double(c.params, "t", 1.0)});
    for (double t : ts)
        if (!(t > 0.0)) throw ConfigError("times must be positive");
    const int n = M->dim();
    const Vec u = frame_direction(c.params, "u", n, 0), v = frame_direction(c.params, "v", n, 1),
              w = frame_direction(c.params, "w", n, 2);
    const std::string vs = param_string(c.params, "variant", "c1");
    if (vs != "c1" && vs != "c2") throw ConfigError("params.variant must be c1 or c2");
    const ThirdVariant variant = vs == "c1" ? ThirdVariant::C1 : ThirdVariant::C2;
    const Vec x0 = start_point(c.params, *M);
    const FramedPoint x(M, x0, M->tangent_basis(x0));
    const SimOptions so = sim_options(c, o);
    json rows = json::array();
    run.csv = kCsvHeader;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const std::uint64_t s = seed + i;
        McEstimate e;
        if (q == "ptf") e = estimate_Ptf(x, f, pot, ts[i], c.n_samples, s, so);
        else if (q == "grad") e = bismut_gradient(x, f, pot, ts[i], u, c.n_samples, s, so);
        else if (q == "hess") e = bismut_hessian(x, f, pot, ts[i], u, v, c.n_samples, s, so);
        else e = bismut_third(x, f, pot, ts[i], u, v, w, c.n_samples, s, variant, so);
        rows.push_back(to_json(e));
        run.csv += csv_row(e.t, e.value, e.std_error);
    }
    return {{"quantity", q}, {"x", vec_json(x0)}, {"estimates", rows}};
}

json solve(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, RunOutput& run) {
    require_keys(c.params, {"x", "h", "K", "T_max", "t_min", "ratio", "lipschitz", "mu_samples"}, "params");
    const ManifoldPtr M = build_manifold(c.manifold);
    const PotentialSpec pot = build_potential(c.potential, *M);
    if (!c.params.contains("h")) throw ConfigError("params.h is required");
    const ScalarField h = build_function(c.params.at("h"), *M);
    const Vec x0 = start_point(c.params, *M);
    SolveOptions so;
    so.sim = sim_options(c, o);
    so.t_min = param_double(c.params, "t_min", so.t_min);
    so.ratio = param_double(c.params, "ratio", so.ratio);
    so.lipschitz = param_double(c.params, "lipschitz", so.lipschitz);
    so.mu_samples = param_size(c.params, "mu_samples", so.mu_samples);
    const double K = param_double(c.params, "K", pot.K);
    const double T = param_double(c.params, "T_max", 10.0);
    const SteinSolution s = solve_stein(FramedPoint(M, x0, M->tangent_basis(x0)), h, pot, K, T, c.n_samples, seed, so);
    run.csv = kCsvHeader;
    for (std::size_t i = 0; i < s.t_grid.size(); ++i) run.csv += csv_row(s.t_grid[i], s.integrand[i], s.integrand_std_error[i]);
    return {{"x", vec_json(x0)}, {"K", K}, {"solution", to_json(s)}};
}

json decay(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, RunOutput& run) {
    require_keys(c.params, {"x", "f", "order", "t_grid", "configurations", "large_t_min", "small_t_max"}, "params");
    const ManifoldPtr M = build_manifold(c.manifold);
    const PotentialSpec pot = build_potential(c.potential, *M);
    if (!c.params.contains("f")) throw ConfigError("params.f is required");
    const ScalarField f = build_function(c.params.at("f"), *M);
    const int order = int(param_size(c.params, "order", 1));
    if (order < 1 || order > 3) throw ConfigError("params.order must be 1, 2 or 3");
    const auto grid = param_doubles(c.params, "t_grid", {1.0, 2.0, 3.0, 4.0});
    DecayOptions d;
    d.configurations = int(param_size(c.params, "configurations", std::size_t(d.configurations)));
    d.large_t_min = param_double(c.params, "large_t_min", d.large_t_min);
    d.small_t_max = param_double(c.params, "small_t_max", d.small_t_max);
    d.sim = sim_options(c, o);
    const Vec x0 = start_point(c.params, *M);
    const DecayFit fit = decay_profile(f, pot, FramedPoint(M, x0, M->tangent_basis(x0)), order, grid, c.n_samples, seed, d);
    run.csv = kCsvHeader;
    for (std::size_t i = 0; i < fit.t_grid.size(); ++i) run.csv += csv_row(fit.t_grid[i], fit.sup_estimates[i], fit.sup_std_errors[i]);
    return to_json(fit);
}

json stein_bound(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed) {
    require_keys(c.params, {"sampler", "n_base", "m_cond", "metric", "K", "marginal_samples"}, "params");
    const ManifoldPtr M = build_manifold(c.manifold);
    const PotentialSpec pot = build_potential(c.potential, *M);
    if (!c.params.contains("sampler")) throw ConfigError("params.sampler is required");
    const PairSampler sampler = build_sampler(c.params.at("sampler"), *M, pot);
    const double lambda = c.params.at("sampler").at("lambda").get<double>();
    MetricKind metric;
    try {
        metric = parse_metric_kind(param_string(c.params, "metric", "wasserstein"));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const std::size_t n_base = param_size(c.params, "n_base", 10000);
    const int m = int(param_size(c.params, "m_cond", 32));
    const double K = param_double(c.params, "K", pot.K);
    ExecPolicy ex;
    ex.workers = o.workers;
    ex.strict = o.strict;
    const SteinConstants k = derive_constants(pot, *M, K);
    const PairBatch batch = collect_pairs(sampler, n_base, m, seed, ex);
    const SteinReport rep = assemble_bound(batch, pot, k, metric, lambda);
    json out{{"sampler", sampler.description},
             {"report", to_json(rep)},
             {"n_total", batch.n_total},
             {"n_used", batch.n_used},
             {"n_discarded", batch.n_discarded},
             {"warnings", batch.warnings}};
    const std::size_t nm = param_size(c.params, "marginal_samples", 0);
    if (nm > 0) {
        const MarginalCheck mc = check_marginals(sampler, nm, seed + 1);
        out["marginal_check"] = {{"statistic", mc.ks.statistic}, {"p_value", mc.ks.p_value}, {"level", mc.level},
                                 {"identical", mc.identical()}};
    }
    return out;
}

json spectral(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, RunOutput& run) {
    const std::string q = param_string(c.params, "quantity", "gap");
    const ManifoldPtr M = build_manifold(c.manifold);
    if (q == "gap") {
        require_keys(c.params, {"quantity", "modes"}, "params");
        const SpectralInfo a = spectral_gap(*M);
        const SpectralInfo b = spectral_gap_rayleigh(*M, int(param_size(c.params, "modes", 16)));
        return {{"quantity", q},
                {"gap", a.gap},
                {"source", gap_source_name(a.source)},
                {"rayleigh_gap", b.gap},
                {"volume", num(a.volume)}};
    }
    if (q == "decay") {
        require_keys(c.params, {"quantity", "f", "t_grid", "start_nodes"}, "params");
        if (!c.params.contains("f")) throw ConfigError("params.f is required");
        const ScalarField f = build_function(c.params.at("f"), *M);
        L2DecayOptions lo;
        lo.start_nodes = int(param_size(c.params, "start_nodes", std::size_t(lo.start_nodes)));
        lo.path.steps_per_unit = c.steps_per_unit_time;
        lo.exec.workers = o.workers;
        lo.exec.strict = o.strict;
        const L2DecayReport r =
            l2_decay_check(f, M, param_doubles(c.params, "t_grid", {0.5, 1.0, 2.0, 4.0}), c.n_samples, seed, lo);
        run.csv = kCsvHeader;
        for (const auto& p : r.points) run.csv += csv_row(p.t, p.norm, p.std_error);
        json out = to_json(r);
        out["quantity"] = q;
        out["poincare"] = {{"variance", poincare_check(f, *M).variance}, {"bound", poincare_check(f, *M).bound}};
        return out;
    }
    if (q == "kernel") {
        require_keys(c.params, {"quantity", "t", "x", "y", "eps"}, "params");
        const double t = param_double(c.params, "t", 1.0);
        const Vec x = start_point(c.params, *M);
        const Vec y = c.params.contains("y") ? start_point(json{{"x", c.params.at("y")}}, *M) : x;
        json out{{"quantity", q}, {"t", t}, {"x", vec_json(x)}, {"y", vec_json(y)}, {"value", heat_kernel(*M, t, x, y)}};
        if (M->kind() == ManifoldKind::Circle) {
            const double eps = param_double(c.params, "eps", 0.1);
            json norms = json::array();
            for (int m = 0; m <= 3; ++m) norms.push_back(circle_kernel_derivative_norm(M->spec().circumference, eps, m));
            out["eps"] = eps;
            out["kernel_derivative_norms"] = norms;
        }
        return out;
    }
    if (q == "bakry-emery") {
        require_keys(c.params, {"quantity", "kappa", "t_grid", "pairs", "max_dist", "tol"}, "params");
        if (M->kind() != ManifoldKind::Hyperbolic) throw ConfigError("bakry-emery check needs hyperbolic3");
        const double kappa = param_double(c.params, "kappa", M->sectional_curvature());
        const std::size_t n = param_size(c.params, "pairs", 1000);
        const double dmax = param_double(c.params, "max_dist", 6.0);
        const double tol = param_double(c.params, "tol", 1e-6);
        json checks = json::array();
        std::size_t violated = 0;
        std::uint64_t k = 0;
        for (double t : param_doubles(c.params, "t_grid", {0.2, 0.5, 0.9})) {
            const auto pairs = sample_hyperbolic_pairs(kappa, n, dmax, seed + k++);
            const HessianBoundCheck h = hyperbolic_hessian_bound_check(kappa, t, pairs, tol);
            violated += h.violated.size();
            checks.push_back({{"t", t}, {"bound", h.bound}, {"min_margin", h.min_margin()}, {"violated", h.violated}});
        }
        return {{"quantity", q}, {"kappa", kappa}, {"pairs", n}, {"checks", checks}, {"violations", violated}};
    }
    throw ConfigError("params.quantity must be one of gap, decay, kernel, bakry-emery");
}

json suite(const ExperimentConfig& c, const RunOptions& o, std::uint64_t seed, RunOutput& run) {
    require_keys(c.params, {"name", "scale", "determinism_scale"}, "params");
    const std::string name = param_string(c.params, "name", "all");
    std::vector<int> ids;
    if (name == "all") {
        for (int i = 1; i <= 10; ++i) ids.push_back(i);
    } else {
        const auto& names = suite_names();
        if (std::find(names.begin(), names.end(), name) == names.end())
            throw ConfigError("unknown suite '" + name + "'");
        ids = suite_criteria(name);
    }
    SuiteOptions so;
    so.scale = param_double(c.params, "scale", 1.0);
    so.workers = o.workers;
    so.seed = seed;
    std::vector<CriterionResult> rs;
    for (int id : ids) rs.push_back(run_criterion(id, so));
    if (name == "all") {
        SuiteOptions ds = so;
        ds.scale = param_double(c.params, "determinism_scale", 0.05);
        rs.push_back(determinism_check(ids, ds));
    }
    json arr = json::array();
    for (const auto& r : rs) {
        arr.push_back(to_json(r));
        run.failed = run.failed || !r.passed;
    }
    run.csv = summary_csv(rs);
    return {{"suite", name}, {"scale", so.scale}, {"criteria", arr}, {"passed", !run.failed}};
}

}  // namespace

const char* library_version() { return STEIN_VERSION; }

RunOutput run_operation(const ExperimentConfig& c, const RunOptions& opt) {
    if (!c.seed) throw ConfigError("a seed is required (config, --seed or STEIN_SEED)");
    const std::uint64_t seed = *c.seed;
    RunOutput run;
    json result;
    const std::string& op = c.operation;
    if (op == "verify-geometry") result = verify_geometry(c, opt, seed);
    else if (op == "simulate") result = simulate(c, opt, seed, run);
    else if (op == "estimate") result = estimate(c, opt, seed, run);
    else if (op == "solve-stein") result = solve(c, opt, seed, run);
    else if (op == "decay-profile") result = decay(c, opt, seed, run);
    else if (op == "stein-bound") result = stein_bound(c, opt, seed);
    else if (op == "spectral") result = spectral(c, opt, seed, run);
    else if (op == "suite") result = suite(c, opt, seed, run);
    else throw ConfigError("unknown operation '" + op + "'");
    run.result = {{"operation", op},
                  {"version", library_version()},
                  {"seed", seed},
                  {"config_hash", config_hash(c)},
                  {"strict", opt.strict},
                  {"config", config_to_json(c)},
                  {"result", result}};
    return run;
}

void write_outputs(const RunOutput& out, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const std::string& name, std::ios::openmode mode) {
        std::ofstream os(fs::path(dir) / name, mode);
        if (!os) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
        return os;
    };
    {
        auto os = open("result.json", std::ios::out);
        os << out.result.dump(2) << "\n";
    }
    if (!out.csv.empty()) {
        auto os = open(out.result.at("operation") == "suite" ? "summary.csv" : "series.csv", std::ios::out);
        os << out.csv;
    }
    if (!out.paths.empty()) {
        auto os = open("paths.bin", std::ios::out | std::ios::binary);
        write_path_dump(os, out.paths);
    }
}

}  // namespace stein::harness
