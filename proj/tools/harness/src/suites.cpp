#include "stein_harness/suites.hpp"

#include "stein/identities.hpp"
#include "stein/parallel.hpp"
#include "stein/rng.hpp"
#include "stein/semigroup.hpp"
#include "stein/spectral.hpp"
#include "stein/stein_bound.hpp"
#include "stein_harness/json_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace stein::harness {

namespace {

std::size_t scaled(std::size_t n, const SuiteOptions& o, std::size_t floor = 2) {
    return std::max(floor, std::size_t(std::llround(double(n) * o.scale)));
}

std::string fmt(const char* f, double a) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

SimOptions sim(const SuiteOptions& o, double steps_per_unit = 1000.0) {
    SimOptions s;
    s.exec.workers = o.workers;
    s.path.steps_per_unit = steps_per_unit;
    return s;
}

Vec unit(Vec v) { return v / v.norm(); }

Vec sphere_start() {
    Vec p(3);
    p << 0.3, -0.5, 0.8;
    return unit(p);
}

Vec random_tangent(const Manifold& M, const Vec& p, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec c(M.dim());
    for (int k = 0; k < M.dim(); ++k) c(k) = nd(rng);
    return M.tangent_basis(p) * unit(c);
}

Vec random_point(const Manifold& M, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    switch (M.kind()) {
    case ManifoldKind::Circle: {
        std::uniform_real_distribution<double> U(0.0, M.spec().circumference);
        return Vec::Constant(1, U(rng));
    }
    case ManifoldKind::Sphere: {
        Vec g(M.ambient_dim());
        for (int k = 0; k < g.size(); ++k) g(k) = nd(rng);
        return M.project_point(g);
    }
    case ManifoldKind::Hyperbolic: {
        Vec o = Vec::Zero(M.ambient_dim());
        o(0) = 1.0 / std::sqrt(-M.sectional_curvature());
        std::uniform_real_distribution<double> U(0.0, 2.0);
        return M.exp(o, U(rng) * random_tangent(M, o, rng));
    }
    default: {
        Vec x(M.dim());
        for (int k = 0; k < M.dim(); ++k) x(k) = 0.5 * nd(rng);
        return x;
    }
    }
}

ManifoldPtr chart(int n, bool identity) {
    SigmaField s = identity ? SigmaField([n](const Vec&) { return Mat(Mat::Identity(n, n)); })
                            : SigmaField([n](const Vec& y) { return Mat(Mat::Identity(n, n) * (1.0 + y.squaredNorm()) / 2.0); });
    return make_manifold(ManifoldSpec::chart_diffusion(n, s, Vec::Constant(n, -5.0), Vec::Constant(n, 5.0)));
}

PotentialSpec polynomial_potential(int ambient, std::uint64_t seed) {
    PotentialSpec p;
    p.name = "random quadratic";
    p.psi = random_polynomial(ambient, 2, seed);
    return p;
}

}  // namespace

json to_json(const CriterionResult& r) {
    return {{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"summary", r.summary}, {"margin", r.margin},
            {"detail", r.detail}};
}

// ---- 1 -------------------------------------------------------------------------------

CriterionResult check_geometry_roundtrip(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 1;
    r.name = "geometry roundtrip";
    const double tol = 1e-9;
    double worst_rt = 0.0, worst_tr = 0.0;
    const std::vector<std::pair<std::string, ManifoldSpec>> specs{{"sphere(2,1)", ManifoldSpec::sphere(2, 1.0)},
                                                                  {"hyperbolic3(-1)", ManifoldSpec::hyperbolic3(-1.0)},
                                                                  {"circle(2pi)", ManifoldSpec::circle(2.0 * M_PI)}};
    const std::size_t n = 1000;
    for (const auto& [name, spec] : specs) {
        const ManifoldPtr M = make_manifold(spec);
        const double inj = M->injectivity_radius();
        // Hyperbolic space has infinite injectivity radius; speeds are capped at 3.
        const double vmax = std::isfinite(inj) ? 0.9 * inj : 3.0;
        auto rng = path_rng(o.seed, 1);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double rt = 0.0, tr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec p = random_point(*M, rng);
            const Vec v = U(rng) * vmax * random_tangent(*M, p, rng);
            const Vec q = M->exp(p, v);
            rt = std::max(rt, M->norm(p, M->log(p, q) - v));
            const Vec a = random_tangent(*M, p, rng), b = random_tangent(*M, p, rng);
            const Vec ta = M->transport_along(p, v, a), tb = M->transport_along(p, v, b);
            tr = std::max(tr, std::abs(M->inner(q, ta, tb) - M->inner(p, a, b)));
            tr = std::max(tr, std::abs(M->inner(q, ta, ta) - M->inner(p, a, a)));
        }
        r.detail[name] = {{"max_roundtrip_error", rt}, {"max_transport_drift", tr}, {"max_speed", vmax}, {"pairs", n}};
        worst_rt = std::max(worst_rt, rt);
        worst_tr = std::max(worst_tr, tr);
    }
    const double worst = std::max(worst_rt, worst_tr);
    r.passed = worst <= tol;
    r.margin = tol - worst;
    r.summary = fmt("max roundtrip %.3g, max transport drift %.3g (tol 1e-9)", worst_rt, worst_tr);
    return r;
}

// ---- 2 -------------------------------------------------------------------------------

CriterionResult check_curvature_oracles(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 2;
    r.name = "curvature oracles";
    auto rng = path_rng(o.seed, 2);
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    double ric_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Vec p = random_point(*S, rng);
        const auto b = curvature_at(*S, p, S->tangent_basis(p), PotentialSpec::zero(), CurvatureLevel::Ricci);
        ric_err = std::max(ric_err, (b.ric - Mat::Identity(2, 2)).cwiseAbs().maxCoeff());
    }
    const ManifoldPtr C = chart(2, true);
    double flat_err = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Vec p = random_point(*C, rng);
        const auto b = curvature_at(*C, p, C->tangent_basis(p), PotentialSpec::zero(), CurvatureLevel::Ricci);
        flat_err = std::max(flat_err, b.R.max_abs());
    }
    r.detail["sphere_ricci_error"] = ric_err;
    r.detail["chart_identity_curvature"] = flat_err;

    const std::size_t nf = std::max<std::size_t>(1, std::min<std::size_t>(10, scaled(10, o, 1)));
    double worst_identity = 0.0;
    auto run_identities = [&](const ManifoldPtr& M) {
        double worst = 0.0;
        std::vector<double> per(nf);
        parallel_for(nf, o.workers, [&](std::size_t k) {
            auto lr = path_rng(o.seed, 200 + k);
            const Vec p = random_point(*M, lr);
            const auto pot = polynomial_potential(M->ambient_dim(), o.seed + 31 * k);
            const auto f = random_polynomial(M->ambient_dim(), 3, o.seed + 17 * k + 1);
            per[k] = verify_tensor_identities(*M, p, pot, f).max();
        });
        for (double v : per) worst = std::max(worst, v);
        return std::make_pair(worst, per);
    };
    const std::vector<std::pair<std::string, ManifoldPtr>> gated{
        {"sphere(2,1)", S},
        {"hyperbolic3(-1)", make_manifold(ManifoldSpec::hyperbolic3(-1.0))},
        {"euclidean(2)", make_manifold(ManifoldSpec::euclidean(2))},
        {"chart sigma=I", C}};
    for (const auto& [name, M] : gated) {
        const auto [w, per] = run_identities(M);
        r.detail["identity_residuals"][name] = per;
        worst_identity = std::max(worst_identity, w);
    }
    // The conformal chart carries finite-difference Christoffel noise; reported, not gated.
    r.detail["identity_residuals_conformal_chart"] = run_identities(chart(2, false)).second;
    r.detail["max_identity_residual"] = worst_identity;
    const double m1 = 1e-6 - std::max(ric_err, flat_err);
    const double m2 = 1e-4 - worst_identity;
    r.passed = m1 >= 0.0 && m2 >= 0.0;
    r.margin = std::min(m1 / 1e-6, m2 / 1e-4);
    r.summary = fmt("curvature oracle error %.3g (tol 1e-6), identity residual %.3g (tol 1e-4)",
                    std::max(ric_err, flat_err), worst_identity);
    return r;
}

// ---- 3 -------------------------------------------------------------------------------

CriterionResult check_martingales(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 3;
    r.name = "martingale constancy";
    const double t = 0.5;
    const int steps = int(std::lround(t / 5e-4));
    const std::size_t n = scaled(10000, o, 20);
    struct Case {
        std::string name;
        ManifoldPtr M;
        Vec x0;
        PotentialSpec pot;
        ScalarField f;
        double rate;
    };
    std::vector<Case> cases;
    {
        const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
        cases.push_back({"sphere(2,1), f = height", S, sphere_start(), PotentialSpec::zero(0.5),
                         ScalarField::coordinate_power(2, 1), 1.0});
        const ManifoldPtr E = make_manifold(ManifoldSpec::euclidean(2));
        Vec x0(2);
        x0 << 0.5, -0.3;
        // Quartic Hermite eigenfunction (rate 4). A cubic would make N'' deterministic.
        const ScalarField h4 = ScalarField::combine(
            1.0, ScalarField::combine(1.0, ScalarField::coordinate_power(0, 4), -3.0, ScalarField::coordinate_power(0, 2)),
            1.0, ScalarField::constant(0.75));
        cases.push_back({"euclidean-gaussian A=I, f = x^4 - 3x^2 + 3/4", E, x0,
                         PotentialSpec::gaussian(Mat::Identity(2, 2), Vec::Zero(2)), h4, 4.0});
    }
    Vec u(2), v(2), w(2);
    u << 1.0, 0.0;
    v = unit(Vec((Vec(2) << 0.6, 0.8).finished()));
    w = unit(Vec((Vec(2) << 0.3, -0.2).finished()));
    bool ok = true;
    double margin = 1e300;
    std::string worst;
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const Case& c = cases[ci];
        const Mat F0 = c.M->tangent_basis(c.x0);
        const auto flow = SemigroupFlow::eigenfunction(c.M, c.f, c.rate, t);
        std::vector<std::array<double, 3>> d(n);
        const std::uint64_t seed = o.seed + 300 + ci;
        parallel_for(n, o.workers, [&](std::size_t i) {
            const auto path = simulate_path(*c.M, c.x0, F0, c.pot, t, steps, seed, i);
            const auto ts = transport_W_doubleprime(*c.M, path, c.pot);
            const std::size_t e = path.points.size() - 1;
            auto at = [&](int ord, std::size_t k) {
                return martingale_value(ord, flow, path.times[k], path.points[k], path.frames[k], ts.W[k], ts.Wp[k],
                                        ts.Wpp[k], u, v, w);
            };
            for (int ord = 1; ord <= 3; ++ord) d[i][ord - 1] = at(ord, e) - at(ord, 0);
        });
        for (int ord = 1; ord <= 3; ++ord) {
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = d[i][ord - 1];
            const McEstimate e = mc_estimate(col, t, seed);
            const double m = 3.0 * e.std_error - std::abs(e.value);
            const bool pass = m >= 0.0;
            ok = ok && pass;
            const std::string key = ord == 1 ? "N" : ord == 2 ? "N'" : "N''";
            r.detail[c.name][key] = {{"mean_increment", e.value}, {"std_error", e.std_error}, {"within_3se", pass}};
            const double rel = e.std_error > 0 ? m / (3.0 * e.std_error) : (pass ? 1.0 : -1.0);
            if (rel < margin) {
                margin = rel;
                worst = c.name + " " + key;
            }
        }
    }
    r.detail["paths"] = n;
    r.detail["steps"] = steps;
    r.passed = ok;
    r.margin = margin;
    r.summary = "6 martingale increments within 3 SE, " + std::to_string(n) + " paths; tightest: " + worst +
                fmt(" (|mean|/3SE = %.3g)", 1.0 - margin);
    return r;
}

// ---- 4 -------------------------------------------------------------------------------

CriterionResult check_gradient_exactness(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 4;
    r.name = "bismut gradient exactness";
    const ManifoldPtr E = make_manifold(ManifoldSpec::euclidean(2));
    Vec x0(2), b(2), u(2);
    x0 << 0.5, -0.3;
    b << 1.0, 2.0;
    u << 0.6, 0.8;
    const double t = 1.0;
    // W is exact here, so the step size does not enter the estimate.
    const std::size_t n = scaled(100000, o, 100);
    const auto pot = PotentialSpec::gaussian(Mat::Identity(2, 2), Vec::Zero(2));
    const FramedPoint x(E, x0, Mat::Identity(2, 2));
    const McEstimate e = bismut_gradient(x, ScalarField::linear(b), pot, t, u, n, o.seed + 400, sim(o, 100.0));
    const double exact = std::exp(-t) * b.dot(u);
    const double err = std::abs(e.value - exact);
    const double rel_se = e.std_error / std::abs(exact);
    r.detail = {{"estimate", to_json(e)}, {"exact", exact}, {"abs_error", err}, {"relative_se", rel_se}};
    const bool within = err <= 3.0 * e.std_error;
    r.passed = within && rel_se <= 0.01;
    r.margin = std::min(3.0 * e.std_error - err, 0.01 - rel_se);
    r.summary = fmt("|error| %.3g vs 3 SE %.3g", err, 3.0 * e.std_error) + fmt(", relative SE %.3g (max %.2g)", rel_se, 0.01);
    return r;
}

// ---- 5 -------------------------------------------------------------------------------

CriterionResult check_cross_derivatives(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 5;
    r.name = "cross-derivative consistency";
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    const Vec p = sphere_start();
    const FramedPoint x(S, p, S->tangent_basis(p));
    const auto f = ScalarField::coordinate_power(2, 1);
    const auto pot = PotentialSpec::zero(0.5);
    Vec u(2), v(2), w(2);
    u << 1.0, 0.0;
    v = unit(Vec((Vec(2) << 0.6, 0.8).finished()));
    w = unit(Vec((Vec(2) << -0.3, 1.0).finished()));
    const std::size_t n = scaled(4000, o, 50);
    // c1 carries small-t weights; its SE needs more paths to be trustworthy.
    const std::size_t n3 = scaled(16000, o, 50);
    bool ok = true;
    double margin = 1e300;
    std::string worst;
    int k = 0;
    for (double t : {0.1, 0.5, 1.0}) {
        const std::uint64_t s = o.seed + 500 + 10 * k++;
        const std::vector<std::pair<std::string, FdComparison>> cmp{
            {"gradient_vs_fd", gradient_vs_fd(x, f, pot, t, u, n, s, 1e-3, sim(o))},
            {"hessian_vs_fd", hessian_vs_fd(x, f, pot, t, u, v, n, s + 1, 1e-3, sim(o))},
            {"third_c1_vs_fd", third_vs_fd(x, f, pot, t, u, v, w, n, s + 2, ThirdVariant::C1, 1e-3, sim(o))},
            {"third_c1_vs_c2", third_variants(x, f, pot, t, u, v, w, n3, s + 3, sim(o))}};
        char key[32];
        std::snprintf(key, sizeof key, "t=%g", t);
        for (const auto& [name, c] : cmp) {
            r.detail[key][name] = to_json(c);
            const bool pass = c.agrees(3.0);
            ok = ok && pass;
            const double se = c.difference.std_error;
            const double rel = se > 0 ? 1.0 - std::abs(c.difference.value) / (3.0 * se) : (pass ? 1.0 : -1.0);
            if (rel < margin) {
                margin = rel;
                worst = std::string(key) + " " + name;
            }
        }
    }
    r.detail["paths"] = n;
    r.detail["paths_c1_vs_c2"] = n3;
    r.passed = ok;
    r.margin = margin;
    r.summary = "12 comparisons within 3 joint SE; tightest: " + worst + fmt(" (|diff|/3SE = %.3g)", 1.0 - margin);
    return r;
}

// ---- 6 -------------------------------------------------------------------------------

CriterionResult check_contraction_rate(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 6;
    r.name = "contraction rate";
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    const Vec p = sphere_start();
    const FramedPoint x(S, p, S->tangent_basis(p));
    const auto f = ScalarField::coordinate_power(2, 1);
    const auto pot = PotentialSpec::zero(0.5);
    DecayOptions dopt;
    dopt.configurations = int(std::max<std::size_t>(2, scaled(8, o, 2)));
    dopt.sim = sim(o, 200.0);
    const std::vector<double> grid{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    const DecayFit fit = decay_profile(f, pot, x, 1, grid, scaled(400, o, 20), o.seed + 600, dopt);
    const double rel = std::abs(fit.fitted_rate - 0.5) / 0.5;
    r.detail["decay"] = to_json(fit);
    r.detail["relative_rate_error"] = rel;

    const std::size_t nc = 20;
    const auto starts = sample_uniform(*S, nc, o.seed + 601);
    const double ts[] = {0.25, 0.5, 1.0, 2.0};
    bool all = true;
    double worst = 1e300;
    json checks = json::array();
    auto rng = path_rng(o.seed, 602);
    for (std::size_t i = 0; i < nc; ++i) {
        std::normal_distribution<double> nd(0.0, 1.0);
        Vec b(3);
        for (int k = 0; k < 3; ++k) b(k) = nd(rng);
        const FramedPoint xi(S, starts[i], S->tangent_basis(starts[i]));
        const ContractionCheck c =
            gradient_contraction(xi, ScalarField::linear(b), pot, 0.5, ts[i % 4], scaled(2000, o, 20), o.seed + 610 + i, sim(o, 200.0));
        checks.push_back({{"t", c.t}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"std_error", c.std_error}, {"holds", c.holds}});
        all = all && c.holds;
        worst = std::min(worst, c.rhs + 3.0 * c.std_error - c.lhs);
    }
    r.detail["contraction_checks"] = checks;
    r.passed = rel <= 0.15 && all;
    r.margin = std::min(0.15 - rel, worst);
    r.summary = fmt("fitted rate %.4f (K = 0.5, rel. error %.3g, max 0.15)", fit.fitted_rate, rel) +
                (all ? ", contraction holds at 20 configurations" : ", contraction violated");
    return r;
}

// ---- 7 -------------------------------------------------------------------------------

CriterionResult check_smallt_exponents(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 7;
    r.name = "small-t singularity exponents";
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    const Vec p = sphere_start();
    const FramedPoint x(S, p, S->tangent_basis(p));
    const auto f = ScalarField::coordinate_power(2, 1);
    const auto pot = PotentialSpec::zero(0.5);
    DecayOptions dopt;
    dopt.configurations = int(std::max<std::size_t>(2, scaled(8, o, 2)));
    dopt.sim = sim(o, 1000.0);
    std::vector<double> grid;
    for (int i = 0; i <= 6; ++i) grid.push_back(std::pow(10.0, -3.0 + 2.0 * i / 6.0));
    const std::size_t n = scaled(400, o, 20);
    const DecayFit f2 = decay_profile(f, pot, x, 2, grid, n, o.seed + 700, dopt);
    const DecayFit f3 = decay_profile(f, pot, x, 3, grid, n, o.seed + 701, dopt);
    r.detail["hessian"] = to_json(f2);
    r.detail["third_c1"] = to_json(f3);
    const double p2 = f2.fitted_smallt_exponent, p3 = f3.fitted_smallt_exponent;
    const bool ok2 = p2 >= 0.35 && p2 <= 0.65, ok3 = p3 >= 0.8 && p3 <= 1.2;
    r.passed = ok2 && ok3;
    r.margin = std::min({p2 - 0.35, 0.65 - p2, p3 - 0.8, 1.2 - p3});
    r.summary = fmt("hessian exponent %.3f in [0.35, 0.65], third exponent %.3f in [0.8, 1.2]", p2, p3);
    return r;
}

// ---- 8 -------------------------------------------------------------------------------

CriterionResult check_hyperbolic_bound(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 8;
    r.name = "hyperbolic Bakry-Emery bound";
    const double kappa = -1.0;
    double min_margin = 1e300;
    std::size_t violated = 0;
    int k = 0;
    for (double t : {0.2, 0.5, 0.9}) {
        const auto pairs = sample_hyperbolic_pairs(kappa, 1000, 6.0, o.seed + 800 + k++);
        const HessianBoundCheck c = hyperbolic_hessian_bound_check(kappa, t, pairs, 1e-6);
        char key[32];
        std::snprintf(key, sizeof key, "t=%g", t);
        r.detail[key] = {{"bound", c.bound}, {"min_margin", c.min_margin()}, {"violated", c.violated}};
        min_margin = std::min(min_margin, c.min_margin());
        violated += c.violated.size();
    }
    r.passed = violated == 0 && min_margin >= -1e-6;
    r.margin = min_margin + 1e-6;
    r.summary = fmt("min margin %.4g over 3000 pairs, %.0f violations", min_margin, double(violated));
    return r;
}

// ---- 9 -------------------------------------------------------------------------------

CriterionResult check_stein_bound(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 9;
    r.name = "end-to-end Stein bound";
    const double L = 2.0 * M_PI;
    const ManifoldPtr C = make_manifold(ManifoldSpec::circle(L));
    const SteinConstants k = derive_constants(PotentialSpec::zero(), *C, 0.0);
    const std::size_t n_base = scaled(10000, o, 100);
    const int m = 32;
    ExecPolicy ex;
    ex.workers = o.workers;
    std::vector<double> thirds;
    bool dominates = true;
    double margin = 1e300;
    for (double lam : {1e-2, 1e-3}) {
        const PairBatch b = collect_pairs(circle_metropolis(L, lam), n_base, m, o.seed + 900, ex);
        const SteinReport rep = assemble_bound(b, PotentialSpec::zero(), k, MetricKind::Wasserstein, lam);
        char key[32];
        std::snprintf(key, sizeof key, "lambda=%g", lam);
        r.detail[key]["report"] = to_json(rep);
        thirds.push_back(rep.third_moment_term);
        if (lam == 1e-2) {
            json w1 = json::array();
            for (std::size_t N : {std::size_t(100), std::size_t(1000), std::size_t(10000)}) {
                if (N > b.bases.size()) continue;
                std::vector<double> ws(N);
                for (std::size_t i = 0; i < N; ++i) ws[i] = b.bases[i].w(0);
                const double d = wasserstein_circle_uniform(ws, L);
                w1.push_back({{"N", N}, {"w1", d}, {"bound", rep.bound}});
                dominates = dominates && rep.bound >= d;
                margin = std::min(margin, rep.bound - d);
            }
            r.detail[key]["exact_w1"] = w1;
        }
    }
    const bool shrinks = thirds[1] < thirds[0];
    r.passed = dominates && shrinks;
    r.margin = std::min(margin, thirds[0] - thirds[1]);
    r.summary = fmt("bound - max W1 = %.4g; third-moment term %.4g", margin, thirds[0]) +
                fmt(" -> %.4g (lambda 1e-2 -> 1e-3)", thirds[1]);
    return r;
}

// ---- 10 ------------------------------------------------------------------------------

CriterionResult check_spectral_decay(const SuiteOptions& o) {
    CriterionResult r;
    r.id = 10;
    r.name = "spectral decay";
    const ManifoldPtr C = make_manifold(ManifoldSpec::circle(2.0 * M_PI));
    ScalarField sinf;
    sinf.value = [](const Vec& x) { return std::sin(x(0)); };
    sinf.differential = [](const Vec& x) { return Vec::Constant(1, std::cos(x(0))).eval(); };
    sinf.ambient_hessian = [](const Vec& x) { return Mat::Constant(1, 1, -std::sin(x(0))).eval(); };
    L2DecayOptions lopt;
    lopt.exec.workers = o.workers;
    lopt.path.steps_per_unit = 200.0;
    const L2DecayReport rep = l2_decay_check(sinf, C, {0.5, 1.0, 2.0, 4.0}, scaled(1000, o, 8), o.seed + 1000, lopt);
    r.detail["l2_decay"] = to_json(rep);
    const double rel = std::abs(rep.fitted_rate - 0.5) / 0.5;

    // Poincare inequality on a set of test functions on the circle and on sphere(2,1).
    json pc = json::array();
    bool poincare = true;
    auto add = [&](const std::string& name, const ScalarField& f, const Manifold& M) {
        const PoincareCheck c = poincare_check(f, M);
        pc.push_back({{"function", name}, {"variance", c.variance}, {"bound", c.bound}, {"holds", c.holds()}});
        poincare = poincare && c.holds();
    };
    ScalarField mix;
    mix.value = [](const Vec& x) { return std::sin(x(0)) + 0.3 * std::cos(3.0 * x(0)) + 0.1 * std::sin(x(0)) * std::sin(x(0)); };
    add("circle sin", sinf, *C);
    add("circle sin + 0.3 cos 3x + 0.1 sin^2", mix, *C);
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    add("sphere height", ScalarField::coordinate_power(2, 1), *S);
    add("sphere x^2", ScalarField::coordinate_power(0, 2), *S);
    add("sphere cubic", random_polynomial(3, 3, o.seed + 1001), *S);
    r.detail["poincare"] = pc;
    r.passed = rel <= 0.10 && rep.all_hold() && poincare;
    r.margin = 0.10 - rel;
    r.summary = fmt("fitted rate %.4f (rel. error %.3g, max 0.10)", rep.fitted_rate, rel) +
                (rep.all_hold() ? ", pointwise bound holds" : ", pointwise bound violated") +
                (poincare ? ", Poincare checks pass" : ", Poincare check failed");
    return r;
}

// ---- drivers -------------------------------------------------------------------------

CriterionResult run_criterion(int id, const SuiteOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    switch (id) {
    case 1: r = check_geometry_roundtrip(o); break;
    case 2: r = check_curvature_oracles(o); break;
    case 3: r = check_martingales(o); break;
    case 4: r = check_gradient_exactness(o); break;
    case 5: r = check_cross_derivatives(o); break;
    case 6: r = check_contraction_rate(o); break;
    case 7: r = check_smallt_exponents(o); break;
    case 8: r = check_hyperbolic_bound(o); break;
    case 9: r = check_stein_bound(o); break;
    case 10: r = check_spectral_decay(o); break;
    default: throw Error(ErrorKind::InvalidArgument, "criterion id must be 1..10");
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"geometry", "martingales", "derivatives", "decay", "compact", "bounds"};
    return names;
}

std::vector<int> suite_criteria(const std::string& name) {
    if (name == "geometry") return {1, 2, 8};
    if (name == "martingales") return {3};
    if (name == "derivatives") return {4, 5};
    if (name == "decay") return {6, 7};
    if (name == "compact") return {10};
    if (name == "bounds") return {9};
    throw Error(ErrorKind::InvalidArgument, "unknown suite '" + name + "'");
}

CriterionResult determinism_check(const std::vector<int>& ids, const SuiteOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    r.id = 11;
    r.name = "determinism";
    SuiteOptions seq = o;
    seq.workers = 1;
    std::size_t same = 0;
    json runs = json::array();
    for (int id : ids) {
        const std::string a = to_json(run_criterion(id, seq)).dump();
        const std::string b = to_json(run_criterion(id, o)).dump();
        const bool eq = a == b;
        same += eq ? 1 : 0;
        runs.push_back({{"id", id}, {"identical", eq}, {"bytes", a.size()}});
    }
    r.detail = {{"scale", o.scale}, {"runs", runs}};
    r.passed = same == ids.size();
    r.margin = double(same) - double(ids.size());
    r.summary = std::to_string(same) + "/" + std::to_string(ids.size()) +
                " criteria byte-identical across 1 and " + std::to_string(resolve_workers(o.workers)) + " workers";
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string summary_csv(const std::vector<CriterionResult>& rs) {
    std::ostringstream os;
    os << "id,name,passed,margin,summary\n";
    for (const auto& r : rs) {
        std::string s = r.summary;
        std::replace(s.begin(), s.end(), '"', '\'');
        os << r.id << "," << r.name << "," << (r.passed ? "pass" : "fail") << "," << r.margin << ",\"" << s << "\"\n";
    }
    return os.str();
}

}  // namespace stein::harness
