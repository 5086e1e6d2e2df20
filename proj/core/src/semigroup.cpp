#include "stein/semigroup.hpp"

#include "stein/rng.hpp"
#include "stein/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stein {

McEstimate mc_estimate(const std::vector<double>& xs, double t, std::uint64_t seed) {
    if (xs.size() < 2) throw Error(ErrorKind::InvalidArgument, "an estimate needs at least 2 samples");
    // Neumaier-compensated sum.
    double s = 0.0, c = 0.0;
    for (double v : xs) {
        const double u = s + v;
        c += std::abs(s) >= std::abs(v) ? (s - u) + v : (v - u) + s;
        s = u;
    }
    const double n = double(xs.size());
    const double m = (s + c) / n;
    double ss = 0.0;
    for (double v : xs) ss += (v - m) * (v - m);
    McEstimate e;
    e.value = m;
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
    e.n_samples = xs.size();
    e.t = t;
    e.seed = seed;
    return e;
}

FramedPoint::FramedPoint(ManifoldPtr M, Vec x_, Mat frame_) : manifold(std::move(M)), x(std::move(x_)), frame(std::move(frame_)) {}

FramedPoint::FramedPoint(const ManifoldPoint& p)
    : manifold(p.manifold), x(p.coords), frame(p.manifold->tangent_basis(p.coords)) {}

FramedPoint shifted(const FramedPoint& p, const Vec& u, double eps) {
    const Manifold& M = *p.manifold;
    const Vec v = eps * (p.frame * u);
    FramedPoint q;
    q.manifold = p.manifold;
    q.x = M.exp(p.x, v);
    q.frame = M.orthonormalize(q.x, M.transport_frame_along(p.x, v, p.frame));
    return q;
}

const char* third_variant_name(ThirdVariant v) { return v == ThirdVariant::C1 ? "c1" : "c2"; }

PathBatch simulate_batch(const FramedPoint& start, const PotentialSpec& pot, double t, std::size_t n_paths,
                         std::uint64_t seed, int order, CmProfile profile, const SimOptions& opt) {
    PathBatch b;
    b.start = start;
    b.t = t;
    b.seed = seed;
    b.order = order;
    b.profile = profile;
    b.paths.resize(n_paths);
    EngineConfig cfg;
    cfg.t = t;
    cfg.steps = step_count(t, opt.path);
    cfg.seed = seed;
    cfg.n_paths = n_paths;
    cfg.order = order;
    cfg.profile = profile;
    cfg.exec = opt.exec;
    run_paths(*start.manifold, start.x, start.frame, pot, cfg, [&](const PathResult& r) { b.paths[r.index] = r; });
    return b;
}

namespace {

// T(u, v, .) for a rank-3 tensor.
Vec contract2(const Tensor& T, const Vec& u, const Vec& v) {
    const int n = T.dim();
    Vec out = Vec::Zero(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double c = u(a) * v(b);
            if (c == 0.0) continue;
            for (int d = 0; d < n; ++d) out(d) += c * T(a, b, d);
        }
    return out;
}

Vec contract3(const Tensor& T, const Vec& u, const Vec& v, const Vec& w) {
    const int n = T.dim();
    Vec out = Vec::Zero(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const double k = u(a) * v(b) * w(c);
                if (k == 0.0) continue;
                for (int d = 0; d < n; ++d) out(d) += k * T(a, b, c, d);
            }
    return out;
}

void require(const PathBatch& b, int order, CmProfile profile) {
    if (b.order < order) throw Error(ErrorKind::InvalidArgument, "path batch lacks transport order");
    if (profile != CmProfile::None && b.profile != profile)
        throw Error(ErrorKind::InvalidArgument, std::string("path batch needs weight profile ") + cm_profile_name(profile));
}

Vec end_differential(const PathBatch& b, const ScalarField& f, const PathResult& r) {
    return differential(*b.start.manifold, f, r.x, r.F);
}

}  // namespace

Vec gradient_weight(const PathResult& r, const Vec& u) { return r.W * u; }

Vec hessian_weight(const PathResult& r, const Vec& u, const Vec& v) {
    const double Jku = r.acc.Jk.dot(u);
    return -Jku * (r.W * v) - r.W * contract2(r.acc.Gk, u, v);
}

Vec third_weight(const PathResult& r, const Vec& u, const Vec& v, const Vec& w) {
    const auto& a = r.acc;
    const double Jku = a.Jk.dot(u);
    const Vec Wv = r.W * v, Ww = r.W * w;
    return -(u.dot(a.Pk * v)) * Ww - (u.dot(a.Pk * w)) * Wv + a.Jl.dot(v) * Jku * Ww +
           r.W * contract3(a.Hk, u, v, w) + Jku * (r.W * contract2(a.Gl, v, w));
}

std::vector<double> ptf_samples(const PathBatch& b, const ScalarField& f) {
    std::vector<double> out(b.paths.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.value(b.paths[i].x);
    return out;
}

std::vector<double> gradient_samples(const PathBatch& b, const ScalarField& f, const Vec& u) {
    require(b, 1, CmProfile::None);
    std::vector<double> out(b.paths.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = end_differential(b, f, b.paths[i]).dot(gradient_weight(b.paths[i], u));
    return out;
}

std::vector<double> hessian_samples(const PathBatch& b, const ScalarField& f, const Vec& u, const Vec& v) {
    require(b, 2, CmProfile::SecondDeriv);
    std::vector<double> out(b.paths.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = end_differential(b, f, b.paths[i]).dot(hessian_weight(b.paths[i], u, v));
    return out;
}

namespace {

void check_third_variant(const Manifold& M, ThirdVariant variant) {
    if (variant == ThirdVariant::C2 && M.kind() == ManifoldKind::ChartDiffusion)
        throw Error(ErrorKind::Unsupported, "variant c2 needs a true martingale; not available for chart diffusions");
}

}  // namespace

std::vector<double> third_samples(const PathBatch& b, const ScalarField& f, const Vec& u, const Vec& v,
                                  const Vec& w, ThirdVariant variant) {
    require(b, 3, CmProfile::ThirdDeriv);
    check_third_variant(*b.start.manifold, variant);
    std::vector<double> out(b.paths.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const PathResult& r = b.paths[i];
        const Vec g = end_differential(b, f, r);
        if (variant == ThirdVariant::C1) {
            out[i] = g.dot(third_weight(r, u, v, w));
            continue;
        }
        const auto& a = r.acc;
        const double Jku = a.Jk.dot(u);
        const Vec Wv = r.W * v, Ww = r.W * w;
        const Mat H = hessian(*b.start.manifold, f, r.x, r.F);
        const Vec V = -(u.dot(a.Pk * v)) * Ww - (u.dot(a.Pk * w)) * Wv + r.W * contract3(a.Hk, u, v, w) -
                      Jku * contract2(r.Wp, v, w);
        out[i] = g.dot(V) - Jku * Wv.dot(H * Ww);
    }
    return out;
}

McEstimate estimate_Ptf(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                        std::size_t n, std::uint64_t seed, const SimOptions& opt) {
    if (t == 0.0) {
        McEstimate e;
        e.value = f.value(x.x);
        e.n_samples = std::max<std::size_t>(n, 2);
        e.seed = seed;
        return e;
    }
    const PathBatch b = simulate_batch(x, pot, t, n, seed, 0, CmProfile::None, opt);
    return mc_estimate(ptf_samples(b, f), t, seed);
}

McEstimate bismut_gradient(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                           const Vec& u, std::size_t n, std::uint64_t seed, const SimOptions& opt) {
    const PathBatch b = simulate_batch(x, pot, t, n, seed, 1, CmProfile::None, opt);
    return mc_estimate(gradient_samples(b, f, u), t, seed);
}

McEstimate bismut_hessian(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                          const Vec& u, const Vec& v, std::size_t n, std::uint64_t seed, const SimOptions& opt) {
    const PathBatch b = simulate_batch(x, pot, t, n, seed, 2, CmProfile::SecondDeriv, opt);
    return mc_estimate(hessian_samples(b, f, u, v), t, seed);
}

McEstimate bismut_third(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                        const Vec& u, const Vec& v, const Vec& w, std::size_t n, std::uint64_t seed,
                        ThirdVariant variant, const SimOptions& opt) {
    check_third_variant(*x.manifold, variant);
    const PathBatch b = simulate_batch(x, pot, t, n, seed, 3, CmProfile::ThirdDeriv, opt);
    return mc_estimate(third_samples(b, f, u, v, w, variant), t, seed);
}

// ---- Finite-difference comparisons ------------------------------------------------

bool FdComparison::agrees(double k) const { return std::abs(difference.value) <= k * difference.std_error; }

namespace {

FdComparison compare(const std::vector<double>& est, const std::vector<double>& plus,
                     const std::vector<double>& minus, double eps, double t, std::uint64_t seed) {
    std::vector<double> fd(est.size()), diff(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        fd[i] = (plus[i] - minus[i]) / (2.0 * eps);
        diff[i] = est[i] - fd[i];
    }
    return {mc_estimate(est, t, seed), mc_estimate(fd, t, seed), mc_estimate(diff, t, seed)};
}

}  // namespace

FdComparison gradient_vs_fd(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                            const Vec& u, std::size_t n, std::uint64_t seed, double eps, const SimOptions& opt) {
    const auto b = simulate_batch(x, pot, t, n, seed, 1, CmProfile::None, opt);
    const auto bp = simulate_batch(shifted(x, u, eps), pot, t, n, seed, 0, CmProfile::None, opt);
    const auto bm = simulate_batch(shifted(x, u, -eps), pot, t, n, seed, 0, CmProfile::None, opt);
    return compare(gradient_samples(b, f, u), ptf_samples(bp, f), ptf_samples(bm, f), eps, t, seed);
}

FdComparison hessian_vs_fd(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                           const Vec& u, const Vec& v, std::size_t n, std::uint64_t seed, double eps,
                           const SimOptions& opt) {
    const auto b = simulate_batch(x, pot, t, n, seed, 2, CmProfile::SecondDeriv, opt);
    const auto bp = simulate_batch(shifted(x, u, eps), pot, t, n, seed, 1, CmProfile::None, opt);
    const auto bm = simulate_batch(shifted(x, u, -eps), pot, t, n, seed, 1, CmProfile::None, opt);
    return compare(hessian_samples(b, f, u, v), gradient_samples(bp, f, v), gradient_samples(bm, f, v), eps, t,
                   seed);
}

FdComparison third_vs_fd(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                         const Vec& u, const Vec& v, const Vec& w, std::size_t n, std::uint64_t seed,
                         ThirdVariant variant, double eps, const SimOptions& opt) {
    check_third_variant(*x.manifold, variant);
    const auto b = simulate_batch(x, pot, t, n, seed, 3, CmProfile::ThirdDeriv, opt);
    const auto bp = simulate_batch(shifted(x, u, eps), pot, t, n, seed, 2, CmProfile::SecondDeriv, opt);
    const auto bm = simulate_batch(shifted(x, u, -eps), pot, t, n, seed, 2, CmProfile::SecondDeriv, opt);
    return compare(third_samples(b, f, u, v, w, variant), hessian_samples(bp, f, v, w), hessian_samples(bm, f, v, w),
                   eps, t, seed);
}

FdComparison third_variants(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                            const Vec& u, const Vec& v, const Vec& w, std::size_t n, std::uint64_t seed,
                            const SimOptions& opt) {
    check_third_variant(*x.manifold, ThirdVariant::C2);
    const auto b = simulate_batch(x, pot, t, n, seed, 3, CmProfile::ThirdDeriv, opt);
    const auto c1 = third_samples(b, f, u, v, w, ThirdVariant::C1);
    const auto c2 = third_samples(b, f, u, v, w, ThirdVariant::C2);
    std::vector<double> diff(c1.size());
    for (std::size_t i = 0; i < c1.size(); ++i) diff[i] = c1[i] - c2[i];
    return {mc_estimate(c1, t, seed), mc_estimate(c2, t, seed), mc_estimate(diff, t, seed)};
}

ContractionCheck gradient_contraction(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot,
                                      double K, double t, std::size_t n, std::uint64_t seed, const SimOptions& opt) {
    const auto b = simulate_batch(x, pot, t, n, seed, 1, CmProfile::None, opt);
    const int dim = int(x.frame.cols());
    std::vector<Vec> grads(n);
    std::vector<double> norms(n);
    Vec mean = Vec::Zero(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec g = end_differential(b, f, b.paths[i]);
        grads[i] = b.paths[i].W.transpose() * g;
        norms[i] = g.norm();
        mean += grads[i];
    }
    mean /= double(n);
    ContractionCheck c;
    c.t = t;
    c.K = K;
    c.lhs = mean.norm();
    const double damp = std::exp(-K * t);
    const Vec dir = c.lhs > 0.0 ? Vec(mean / c.lhs) : Vec::Zero(dim);
    std::vector<double> d(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = damp * norms[i];
        d[i] = dir.dot(grads[i]) - r[i];
    }
    c.rhs = mc_estimate(r).value;
    c.std_error = mc_estimate(d).std_error;
    c.holds = c.lhs <= c.rhs + 3.0 * c.std_error;
    return c;
}

// ---- Invariant law and the Stein equation -------------------------------------------

std::vector<Vec> invariant_samples(const FramedPoint& x, const PotentialSpec& pot, std::size_t n,
                                   std::uint64_t seed, const SimOptions& opt) {
    const Manifold& M = *x.manifold;
    if (pot.gaussian_A.size() > 0 && M.kind() == ManifoldKind::Euclidean) {
        const Mat cov = (2.0 * pot.gaussian_A).inverse();
        const Mat L = Eigen::LLT<Mat>(cov).matrixL();
        auto rng = path_rng(seed, 0);
        std::normal_distribution<double> nd(0.0, 1.0);
        std::vector<Vec> out(n);
        for (auto& y : out) {
            Vec z(M.dim());
            for (int k = 0; k < z.size(); ++k) z(k) = nd(rng);
            y = pot.gaussian_mean + L * z;
        }
        return out;
    }
    if (pot.is_zero && M.compact()) return sample_uniform(M, n, seed);
    if (!(pot.K > 0.0) && !M.compact())
        throw Error(ErrorKind::NotContractive, "no invariant law without curvature-dimension lower bound");
    // One long trajectory: 10% burn-in, then n samples spaced by `spacing`.
    const double spacing = 0.05;
    const double T = n * spacing / 0.9;
    EngineConfig cfg;
    cfg.t = T;
    cfg.steps = step_count(T, opt.path);
    cfg.seed = seed;
    cfg.n_paths = 1;
    cfg.order = 0;
    cfg.exec = opt.exec;
    const double h = T / cfg.steps;
    const int burn = int(std::ceil(0.1 * T / h));
    const int stride = std::max(1, int(std::lround(spacing / h)));
    for (std::size_t k = 0; k < n; ++k) {
        const int s = burn + int(k) * stride;
        if (s > cfg.steps) break;
        cfg.checkpoints.push_back(s);
    }
    std::vector<Vec> out;
    run_paths(M, x.x, x.frame, pot, cfg, [&](const PathResult& r) {
        for (const auto& s : r.snapshots) out.push_back(s.x);
    });
    return out;
}

SteinSolution solve_stein(const FramedPoint& x, const ScalarField& h, const PotentialSpec& pot, double K,
                          double T_max, std::size_t n, std::uint64_t seed, const SolveOptions& opt) {
    const Manifold& M = *x.manifold;
    if (K <= 0.0 && !M.compact()) throw Error(ErrorKind::NotContractive, "solve_stein needs K > 0 or a compact manifold");
    if (!(T_max > opt.t_min) || !(opt.ratio > 1.0)) throw Error(ErrorKind::InvalidArgument, "bad time grid");
    const int dim = int(x.frame.cols());

    const bool closed_form = (pot.gaussian_A.size() > 0 && M.kind() == ManifoldKind::Euclidean) || (pot.is_zero && M.compact());
    const std::size_t n_mu = closed_form ? opt.mu_samples : std::min<std::size_t>(opt.mu_samples, 20000);
    const auto ys = invariant_samples(x, pot, n_mu, seed ^ 0x6d75ULL, opt.sim);
    std::vector<double> hy(ys.size()), dist(ys.size());
    for (std::size_t j = 0; j < ys.size(); ++j) {
        hy[j] = h.value(ys[j]);
        dist[j] = M.distance(x.x, ys[j]);
    }
    const McEstimate mu = mc_estimate(hy);

    EngineConfig cfg;
    cfg.t = T_max;
    cfg.steps = step_count(T_max, opt.sim.path);
    cfg.seed = seed;
    cfg.n_paths = n;
    cfg.order = 1;
    cfg.exec = opt.sim.exec;
    const double dt = T_max / cfg.steps;
    for (double t = opt.t_min;; t *= opt.ratio) {
        const int s = std::min(cfg.steps, std::max(1, int(std::lround(std::min(t, T_max) / dt))));
        if (cfg.checkpoints.empty() || s > cfg.checkpoints.back()) cfg.checkpoints.push_back(s);
        if (t >= T_max) break;
    }
    if (cfg.checkpoints.back() != cfg.steps) cfg.checkpoints.push_back(cfg.steps);

    SteinSolution sol;
    sol.t_max = T_max;
    sol.mu_h = mu.value;
    sol.mu_h_std_error = mu.std_error;
    sol.t_grid.push_back(0.0);
    for (int s : cfg.checkpoints) sol.t_grid.push_back(s == cfg.steps ? T_max : s * dt);
    const std::size_t G = sol.t_grid.size();

    const double h0 = h.value(x.x) - mu.value;
    const Vec g0 = differential(M, h, x.x, x.frame);
    std::vector<double> fi(n);
    std::vector<Vec> dfi(n);
    std::vector<std::vector<double>> integ(n, std::vector<double>(G));
    run_paths(M, x.x, x.frame, pot, cfg, [&](const PathResult& r) {
        double acc = 0.0;
        Vec dacc = Vec::Zero(dim);
        double prev = h0;
        Vec gprev = g0;
        auto& row = integ[r.index];
        row[0] = h0;
        for (std::size_t k = 1; k < G; ++k) {
            const Snapshot& s = r.snapshots[k - 1];
            const double cur = h.value(s.x) - mu.value;
            const Vec gcur = s.W.transpose() * differential(M, h, s.x, s.F);
            const double w = 0.5 * (sol.t_grid[k] - sol.t_grid[k - 1]);
            acc += w * (prev + cur);
            dacc += w * (gprev + gcur);
            prev = cur;
            gprev = gcur;
            row[k] = cur;
        }
        fi[r.index] = -acc;
        dfi[r.index] = -dacc;
    });
    const McEstimate fe = mc_estimate(fi);
    sol.f = fe.value;
    sol.f_std_error = std::hypot(fe.std_error, T_max * mu.std_error);
    sol.df = Vec::Zero(dim);
    sol.df_std_error = Vec::Zero(dim);
    for (int a = 0; a < dim; ++a) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = dfi[i](a);
        const McEstimate e = mc_estimate(col);
        sol.df(a) = e.value;
        sol.df_std_error(a) = e.std_error;
    }
    sol.integrand.assign(G, 0.0);
    sol.integrand_std_error.assign(G, 0.0);
    for (std::size_t k = 0; k < G; ++k) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = integ[i][k];
        const McEstimate e = mc_estimate(col);
        sol.integrand[k] = e.value;
        sol.integrand_std_error[k] = e.std_error;
    }
    {
        double fine = 0.0, coarse = 0.0;
        for (std::size_t k = 1; k < G; ++k)
            fine += 0.5 * (sol.t_grid[k] - sol.t_grid[k - 1]) * (sol.integrand[k] + sol.integrand[k - 1]);
        std::size_t prev = 0;
        for (std::size_t k = 2; k < G + 1; k += 2) {
            const std::size_t kk = std::min(k, G - 1);
            coarse += 0.5 * (sol.t_grid[kk] - sol.t_grid[prev]) * (sol.integrand[kk] + sol.integrand[prev]);
            prev = kk;
            if (kk == G - 1) break;
        }
        sol.quadrature_error = std::abs(fine - coarse) / 3.0;
    }
    if (K > 0.0) {
        // |P_t h - mu(h)|(x) <= Lip(h) W(delta_x P_t, mu) <= Lip(h) e^{-Kt} E_mu d(x, Y)
        sol.tail_bound = opt.lipschitz * mc_estimate(dist).value * std::exp(-K * T_max) / K;
    } else {
        const double gap = spectral_gap(M).gap;
        double osc = 0.0;
        for (double v : hy) osc = std::max(osc, std::abs(v - mu.value));
        sol.tail_bound = osc * std::exp(-gap * T_max) / gap;
    }
    return sol;
}

// ---- Decay profiles ------------------------------------------------------------------

namespace {

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

Vec random_unit(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec v(n);
    do {
        for (int k = 0; k < n; ++k) v(k) = nd(rng);
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

}  // namespace

DecayFit decay_profile(const ScalarField& f, const PotentialSpec& pot, const FramedPoint& x, int order,
                       const std::vector<double>& t_grid, std::size_t n, std::uint64_t seed,
                       const DecayOptions& opt) {
    if (order < 1 || order > 3) throw Error(ErrorKind::InvalidArgument, "decay order must be 1, 2 or 3");
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (!(t_grid[i] > 0.0) || (i > 0 && t_grid[i] <= t_grid[i - 1]))
            throw Error(ErrorKind::InvalidArgument, "t grid must be positive and increasing");
    const Manifold& M = *x.manifold;
    const int dim = int(x.frame.cols());

    struct Config {
        FramedPoint start;
        Vec u, v, w;
    };
    std::vector<Config> cfgs;
    auto rng = path_rng(seed, 0xdeca7);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto uniform = M.compact() ? sample_uniform(M, opt.configurations, seed ^ 0xdeca7) : std::vector<Vec>();
    for (int j = 0; j < opt.configurations; ++j) {
        Config c;
        if (j == 0) {
            c.start = x;
            c.u = c.v = c.w = Vec::Unit(dim, 0);
        } else {
            if (M.compact()) {
                c.start = FramedPoint(x.manifold, uniform[j], M.tangent_basis(uniform[j]));
            } else {
                Vec z(dim);
                for (int k = 0; k < dim; ++k) z(k) = nd(rng);
                c.start = shifted(x, z, opt.start_spread);
            }
            c.u = random_unit(rng, dim);
            c.v = random_unit(rng, dim);
            c.w = random_unit(rng, dim);
        }
        cfgs.push_back(c);
    }

    const CmProfile profile = order == 1 ? CmProfile::None : order == 2 ? CmProfile::SecondDeriv : CmProfile::ThirdDeriv;
    DecayFit fit;
    fit.order = order;
    fit.t_grid = t_grid;
    for (double t : t_grid) {
        double best = -1.0, best_se = 0.0;
        for (std::size_t j = 0; j < cfgs.size(); ++j) {
            const auto& c = cfgs[j];
            const auto b = simulate_batch(c.start, pot, t, n, seed + 7919 * j, order, profile, opt.sim);
            std::vector<double> mags(n);
            for (std::size_t i = 0; i < n; ++i) {
                const PathResult& r = b.paths[i];
                const Vec V = order == 1   ? gradient_weight(r, c.u)
                              : order == 2 ? hessian_weight(r, c.u, c.v)
                                           : third_weight(r, c.u, c.v, c.w);
                mags[i] = V.norm();
            }
            const McEstimate e = mc_estimate(mags, t, seed);
            if (e.value > best) {
                best = e.value;
                best_se = e.std_error;
            }
            if (j == 0) {
                const auto s = order == 1   ? gradient_samples(b, f, c.u)
                               : order == 2 ? hessian_samples(b, f, c.u, c.v)
                                            : third_samples(b, f, c.u, c.v, c.w, ThirdVariant::C1);
                fit.f_derivative.push_back(mc_estimate(s).value);
            }
        }
        fit.sup_estimates.push_back(best);
        fit.sup_std_errors.push_back(best_se);
    }
    std::vector<double> lt, ly, st, sy;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (!(fit.sup_estimates[k] > 0.0)) continue;
        if (t_grid[k] >= opt.large_t_min) {
            lt.push_back(t_grid[k]);
            ly.push_back(std::log(fit.sup_estimates[k]));
        }
        if (t_grid[k] <= opt.small_t_max) {
            st.push_back(std::log(t_grid[k]));
            sy.push_back(std::log(fit.sup_estimates[k]));
        }
    }
    fit.fitted_rate = -slope(lt, ly);
    fit.fitted_smallt_exponent = -slope(st, sy);
    return fit;
}

}  // namespace stein
