#include "stein/stein_bound.hpp"

#include "stein/rng.hpp"
#include "stein/spectral.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stein {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MomentEstimate mean_se(const std::vector<double>& xs) {
    MomentEstimate m;
    if (xs.empty()) return m;
    const double n = double(xs.size());
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() < 2) return m;
    double ss = 0.0;
    for (double v : xs) ss += (v - m.mean) * (v - m.mean);
    m.std_error = std::sqrt(ss / (n - 1.0) / n);
    return m;
}

Vec scalar_vec(double x) {
    Vec v(1);
    v(0) = x;
    return v;
}

Vec uniform_on_sphere(int ambient, double radius, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec g(ambient);
    for (int k = 0; k < ambient; ++k) g(k) = nd(rng);
    return radius * g / g.norm();
}

Vec gaussian_tangent(const Manifold& M, const Vec& w, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    const Mat F = M.tangent_basis(w);
    Vec xi(M.dim());
    for (int k = 0; k < M.dim(); ++k) xi(k) = nd(rng);
    return scale * (F * xi);
}

}  // namespace

// ---- samplers -------------------------------------------------------------------

void PairSampler::validate() const {
    if (!manifold) throw Error(ErrorKind::InvalidArgument, "pair sampler without manifold");
    if (!base || !conditional) throw Error(ErrorKind::InvalidArgument, "pair sampler without draw functions");
    if (!(lambda_scale > 0.0) || !std::isfinite(lambda_scale))
        throw Error(ErrorKind::InvalidArgument, "lambda_scale must be positive");
}

PairSampler circle_metropolis(double circumference, double lambda, int burn_in, double start) {
    if (burn_in < 0) throw Error(ErrorKind::InvalidArgument, "burn_in must be >= 0");
    PairSampler s;
    s.manifold = make_manifold(ManifoldSpec::circle(circumference));
    s.lambda_scale = lambda;
    const double sd = std::sqrt(lambda);
    const ManifoldPtr M = s.manifold;
    // Uniform target: the acceptance ratio is 1, so every proposal moves.
    auto step = [M, sd](const Vec& w, std::mt19937_64& rng) {
        std::normal_distribution<double> nd(0.0, sd);
        return M->project_point(scalar_vec(w(0) + nd(rng)));
    };
    if (burn_in == 0) {
        s.base = [circumference](std::mt19937_64& rng) {
            std::uniform_real_distribution<double> U(0.0, circumference);
            return scalar_vec(U(rng));
        };
    } else {
        s.base = [M, step, burn_in, start](std::mt19937_64& rng) {
            Vec w = M->project_point(scalar_vec(start));
            for (int i = 0; i < burn_in; ++i) w = step(w, rng);
            return w;
        };
    }
    s.conditional = step;
    s.description = "metropolis on circle(" + std::to_string(circumference) + "), uniform target, proposal variance " +
                    std::to_string(lambda) + (burn_in ? ", burn-in " + std::to_string(burn_in) : ", stationary start");
    return s;
}

PairSampler euclidean_gaussian_pairs(const PotentialSpec& pot, const Vec& mean, const Mat& cov, double lambda,
                                     double drift) {
    const int n = int(mean.size());
    if (cov.rows() != n || cov.cols() != n) throw Error(ErrorKind::InvalidArgument, "covariance shape mismatch");
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::InvalidArgument, "covariance is not positive definite");
    PairSampler s;
    s.manifold = make_manifold(ManifoldSpec::euclidean(n));
    s.lambda_scale = lambda;
    const Mat Lc = llt.matrixL();
    s.base = [mean, Lc, n](std::mt19937_64& rng) {
        std::normal_distribution<double> nd(0.0, 1.0);
        Vec g(n);
        for (int k = 0; k < n; ++k) g(k) = nd(rng);
        return Vec(mean + Lc * g);
    };
    const ManifoldPtr M = s.manifold;
    const double sd = std::sqrt(lambda);
    s.conditional = [M, pot, lambda, drift, sd, n](const Vec& w, std::mt19937_64& rng) {
        std::normal_distribution<double> nd(0.0, 1.0);
        Vec out = w;
        if (!pot.is_zero && drift != 0.0) out += drift * lambda * gradient(*M, pot.psi, w);
        for (int k = 0; k < n; ++k) out(k) += sd * nd(rng);
        return out;
    };
    s.description = "gaussian perturbation on R^" + std::to_string(n) + ", potential " + pot.name;
    return s;
}

PairSampler sphere_geodesic_pairs(int n, double kappa, double lambda) {
    PairSampler s;
    s.manifold = make_manifold(ManifoldSpec::sphere(n, kappa));
    s.lambda_scale = lambda;
    const ManifoldPtr M = s.manifold;
    const int ambient = n + 1;
    const double radius = 1.0 / std::sqrt(kappa);
    s.base = [ambient, radius](std::mt19937_64& rng) { return uniform_on_sphere(ambient, radius, rng); };
    const double sd = std::sqrt(lambda);
    s.conditional = [M, sd](const Vec& w, std::mt19937_64& rng) { return M->exp(w, gaussian_tangent(*M, w, sd, rng)); };
    s.description = "geodesic gaussian step on sphere(" + std::to_string(n) + ")";
    return s;
}

PairSampler sphere_antipodal_pairs(int n, double kappa, double lambda, double p) {
    PairSampler s = sphere_geodesic_pairs(n, kappa, lambda);
    const auto step = s.conditional;
    s.conditional = [step, p](const Vec& w, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> U(0.0, 1.0);
        if (U(rng) < p) return Vec(-w);
        return step(w, rng);
    };
    s.description += ", antipodal jumps";
    return s;
}

// ---- pair collection ------------------------------------------------------------

PairBatch collect_pairs(const PairSampler& sampler, std::size_t n_base, int m_cond, std::uint64_t seed,
                        const ExecPolicy& exec) {
    sampler.validate();
    if (n_base < 100) throw Error(ErrorKind::InvalidArgument, "n_base must be >= 100");
    if (m_cond < 1) throw Error(ErrorKind::InvalidArgument, "m_cond must be >= 1");
    const Manifold& M = *sampler.manifold;
    PairBatch b;
    b.manifold = sampler.manifold;
    b.lambda = sampler.lambda_scale;
    b.m_cond = m_cond;
    b.seed = seed;
    b.bases.resize(n_base);
    std::vector<char> unsupported(n_base, 0);
    parallel_for(n_base, exec.workers, [&](std::size_t i) {
        auto rng = path_rng(seed, i);
        BasePairs& bp = b.bases[i];
        bp.w = sampler.base(rng);
        bp.frame = M.tangent_basis(bp.w);
        bp.delta.reserve(std::size_t(m_cond));
        for (int j = 0; j < m_cond; ++j) {
            const Vec w2 = sampler.conditional(bp.w, rng);
            const CutVerdict cv = M.cut_locus(bp.w, w2);
            if (cv.unsupported) unsupported[i] = 1;
            if (cv.in_cut) {
                ++bp.discards;
                continue;
            }
            bp.delta.push_back(M.frame_coords(bp.w, bp.frame, M.log(bp.w, w2)));
        }
    });
    b.n_total = n_base * std::size_t(m_cond);
    for (const auto& bp : b.bases) {
        b.n_discarded += bp.discards;
        b.n_used += bp.delta.size();
    }
    const double frac = b.discard_fraction();
    if (frac > 0.05)
        throw Error(ErrorKind::ExcessiveCutLocus,
                    "cut-locus discard fraction " + std::to_string(frac) + " exceeds 0.05");
    if (frac > 1e-3) b.warnings.push_back("cut-locus discard fraction " + std::to_string(frac) + " exceeds 1e-3");
    if (std::any_of(unsupported.begin(), unsupported.end(), [](char c) { return c != 0; }))
        b.warnings.push_back("no analytic cut locus on this manifold; pairs were not screened");
    return b;
}

// ---- R1, R2 and moments ---------------------------------------------------------

R1Estimate estimate_R1(const PairBatch& batch, const PotentialSpec& pot, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
    const Manifold& M = *batch.manifold;
    R1Estimate out;
    out.per_base.resize(batch.bases.size());
    std::vector<double> norms;
    norms.reserve(batch.bases.size());
    for (std::size_t i = 0; i < batch.bases.size(); ++i) {
        const BasePairs& bp = batch.bases[i];
        if (bp.delta.empty()) continue;
        Vec mean = Vec::Zero(M.dim());
        for (const Vec& d : bp.delta) mean += d;
        mean /= double(bp.delta.size());
        Vec r = mean / lambda;
        if (!pot.is_zero) r -= differential(M, pot.psi, bp.w, bp.frame);
        norms.push_back(r.norm());
        out.per_base[i] = std::move(r);
    }
    out.abs = mean_se(norms);
    return out;
}

R2Estimate estimate_R2(const PairBatch& batch, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
    const int n = batch.manifold->dim();
    R2Estimate out;
    out.per_base.resize(batch.bases.size());
    std::vector<double> norms;
    norms.reserve(batch.bases.size());
    for (std::size_t i = 0; i < batch.bases.size(); ++i) {
        const BasePairs& bp = batch.bases[i];
        if (bp.delta.empty()) continue;
        Mat S = Mat::Zero(n, n);
        for (const Vec& d : bp.delta) S += d * d.transpose();
        S /= double(bp.delta.size()) * lambda;
        Mat r = 0.5 * (S - Mat::Identity(n, n));
        norms.push_back(r.norm());
        out.per_base[i] = std::move(r);
    }
    out.abs = mean_se(norms);
    return out;
}

MomentEstimate pair_moment(const PairBatch& batch, const std::function<double(double)>& g) {
    std::vector<double> per;
    per.reserve(batch.bases.size());
    for (const BasePairs& bp : batch.bases) {
        if (bp.delta.empty()) continue;
        double s = 0.0;
        for (const Vec& d : bp.delta) s += g(d.norm());
        per.push_back(s / double(bp.delta.size()));
    }
    return mean_se(per);
}

// ---- curvature norms ------------------------------------------------------------

CurvatureNorms curvature_norms(const Manifold& M, const PotentialSpec& pot) {
    CurvatureNorms c;
    const int n = M.dim();
    switch (M.kind()) {
    case ManifoldKind::Euclidean:
        if (pot.is_zero || pot.parallel_hessian) {
            c.source = "flat, parallel Hess psi";
            return c;
        }
        break;
    case ManifoldKind::Circle:
        if (pot.is_zero) {
            c.source = "flat circle, psi = 0";
            return c;
        }
        break;
    case ManifoldKind::Sphere:
    case ManifoldKind::Hyperbolic:
        if (pot.is_zero) {
            // R_abcd = kappa (d_bc d_ad - d_ac d_bd): 2 n (n - 1) nonzero entries of size |kappa|.
            c.R = std::abs(M.sectional_curvature()) * std::sqrt(2.0 * n * (n - 1));
            c.source = "constant curvature, psi = 0";
            return c;
        }
        if (M.kind() == ManifoldKind::Hyperbolic)
            throw Error(ErrorKind::UnboundedCurvature,
                        "R(grad psi) grows linearly with distance for potential " + pot.name);
        break;
    case ManifoldKind::ChartDiffusion:
        throw Error(ErrorKind::UnboundedCurvature, "chart diffusion needs user-provided curvature sup norms");
    }
    throw Error(ErrorKind::UnboundedCurvature,
                std::string("no closed-form curvature norms for potential ") + pot.name + " on " +
                    manifold_kind_name(M.kind()));
}

CurvatureNorms sampled_curvature_norms(const Manifold& M, const PotentialSpec& pot, const std::vector<Vec>& points) {
    CurvatureNorms c;
    for (const Vec& p : points) {
        const CurvatureBundle b = curvature_at(M, p, M.tangent_basis(p), pot, CurvatureLevel::Second);
        c.R = std::max(c.R, b.R.frobenius());
        c.nabla_R = std::max(c.nabla_R, b.nabla_R.frobenius());
        c.T = std::max(c.T, b.T.frobenius());
        c.nabla_T = std::max(c.nabla_T, b.nabla_T.frobenius());
    }
    c.source = "sampled maximum over " + std::to_string(points.size()) + " points";
    return c;
}

// ---- derivative bounds ----------------------------------------------------------

namespace {

using boost::math::quadrature::gauss;

// int_0^b e^{-a s} ds
double expint0(double a, double b) {
    const double x = a * b;
    if (std::abs(x) < 1e-8) return b * (1.0 - 0.5 * x);
    return -std::expm1(-x) / a;
}

struct Chain {
    double K;
    double rho, rho1, tau, tau1;

    bool flat() const { return rho == 0.0 && rho1 == 0.0 && tau == 0.0 && tau1 == 0.0; }

    // (E|W'_s|^2)^{1/2}: martingale part by the Ito isometry, drift part by Gronwall.
    double w1(double s) const {
        if (rho == 0.0 && tau == 0.0) return 0.0;
        return std::exp(-K * s) * (rho * std::sqrt(expint0(2 * K, s)) + 0.5 * tau * expint0(K, s));
    }

    double w2(double s) const {
        if (flat() || s <= 0.0) return 0.0;
        auto m2 = [&](double r) { return rho1 * std::exp(-3 * K * r) + 3 * rho * std::exp(-K * r) * w1(r); };
        auto d2 = [&](double r) {
            return 0.5 * tau1 * std::exp(-3 * K * r) + 1.5 * tau * std::exp(-K * r) * w1(r) +
                   rho * rho * std::exp(-3 * K * r);
        };
        const double mart =
            gauss<double, 20>::integrate([&](double r) { return std::exp(-2 * K * (s - r)) * m2(r) * m2(r); }, 0.0, s);
        const double drift = gauss<double, 20>::integrate([&](double r) { return std::exp(-K * (s - r)) * d2(r); }, 0.0, s);
        return std::sqrt(std::max(0.0, mart)) + drift;
    }

    // E|W_t Hk|-type term over [0, t1].
    double hk_term(double t, double t1) const {
        if (flat()) return 0.0;
        return gauss<double, 20>::integrate(
                   [&](double s) { return std::exp(-K * (t - s)) * (rho * std::exp(-3 * K * s) + w2(s)); }, 0.0, t1) /
               t1;
    }

    double pk_term(double t, double t1) const {
        if (rho == 0.0 && tau == 0.0) return 0.0;
        const double I = gauss<double, 20>::integrate([&](double s) { return w1(s) * w1(s); }, 0.0, t1);
        return 2.0 * std::exp(-K * t) * std::sqrt(I) / t1;
    }
};

}  // namespace

double derivative_bound(int order, double t, double K, const CurvatureNorms& nm) {
    if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "derivative_bound needs t > 0");
    const Chain c{K, nm.R, nm.nabla_R, nm.T, nm.nabla_T};
    const double te = std::min(1.0, t);
    switch (order) {
    case 1:
        return std::exp(-K * t);
    case 2: {
        const double t1 = te;
        const double a = std::exp(-K * t) * std::sqrt(expint0(2 * K, t1)) / t1;
        double b = 0.0;
        if (!(nm.R == 0.0 && nm.T == 0.0))
            b = gauss<double, 20>::integrate([&](double s) { return std::exp(-K * (t - s)) * c.w1(s); }, 0.0, t1) / t1;
        return a + b;
    }
    case 3: {
        const double t1 = 0.5 * te;
        const double jk = std::sqrt(expint0(2 * K, t1)) / t1;
        const double jl = std::sqrt(std::exp(-2 * K * t1) * expint0(2 * K, te - t1)) / (te - t1);
        double gl = 0.0;
        if (!(nm.R == 0.0 && nm.T == 0.0))
            gl = gauss<double, 20>::integrate([&](double s) { return std::exp(-K * (t - s)) * c.w1(s); }, t1, te) /
                 (te - t1);
        return c.pk_term(t, t1) + std::exp(-K * t) * jk * jl + c.hk_term(t, t1) + jk * gl;
    }
    case 4: {
        const double t1 = 0.5 * te;
        const double jk = std::sqrt(expint0(2 * K, t1)) / t1;
        return c.pk_term(t, t1) + c.hk_term(t, t1) + jk * (std::exp(-2 * K * t) + c.w1(t));
    }
    default:
        throw Error(ErrorKind::InvalidArgument, "derivative_bound order must be 1..4");
    }
}

// ---- constants ------------------------------------------------------------------

namespace {

std::vector<double> sup_grid(double t_max) {
    std::vector<double> g;
    for (int i = 0; i <= 240; ++i) g.push_back(std::pow(10.0, -6.0 + 6.0 * i / 240.0));
    for (double t = 1.25; t <= t_max; t += 0.25) g.push_back(t);
    return g;
}

// sup_t B(t) (1 ^ t)^p e^{rate t} over t in (0, t_max].
double sup_constant(int order, double p, double K, const CurvatureNorms& nm, double t_max) {
    double best = 0.0;
    for (double t : sup_grid(t_max)) {
        if (t > t_max) break;
        best = std::max(best, derivative_bound(order, t, K, nm) * std::pow(std::min(1.0, t), p) * std::exp(K * t));
    }
    return best;
}

// int_0^inf (1 ^ t)^{-1/2} e^{-r t} dt
double half_singular_integral(double r) {
    using boost::math::quadrature::gauss_kronrod;
    const double head = 2.0 * gauss_kronrod<double, 31>::integrate([r](double u) { return std::exp(-r * u * u); }, 0.0, 1.0);
    return head + std::exp(-r) / r;
}

// sup_a int_{a^2}^inf (1 ^ t)^{-1} e^{-r t} dt / ((|log a| v 1) e^{-r (a v 1)^2}).
double log_tail_ratio(double r) {
    double best = std::max(1.0 / r, 2.0 * std::exp(r));  // a >= 1 branch and the a -> 0 limit
    const double e1r = boost::math::expint(1, r);
    for (int k = 1; k <= 480; ++k) {
        const double a = std::pow(10.0, -k / 40.0);
        const double num = boost::math::expint(1, r * a * a) - e1r + std::exp(-r) / r;
        const double den = std::max(std::abs(std::log(a)), 1.0) * std::exp(-r);
        best = std::max(best, num / den);
    }
    return best;
}

void finish_constants(SteinConstants& c) {
    const double r = c.rate;
    const double J = half_singular_integral(r);
    const double c3r = log_tail_ratio(r);
    c.c1 = c.C1 * J;
    c.c2 = c.C1 * std::max(2.0, J);
    c.c3 = c.C2 * c3r;
    c.c4 = c.C3 * J;
    c.C = std::max({c.grad, c.c1, c.c2, c.c3 / 6.0});
    c.C_c2 = std::max({c.grad, c.c1, c.c4 / 6.0});
    c.log.emplace_back("int (1^t)^-1/2 e^-rt dt", J);
    c.log.emplace_back("log-tail ratio", c3r);
    c.log.emplace_back("grad", c.grad);
    c.log.emplace_back("c1", c.c1);
    c.log.emplace_back("c2", c.c2);
    c.log.emplace_back("c3", c.c3);
    c.log.emplace_back("c4", c.c4);
    c.log.emplace_back("C", c.C);
    c.log.emplace_back("C_c2", c.C_c2);
    c.valid = std::isfinite(c.C) && c.C > 0.0 && std::isfinite(c.C_c2);
}

}  // namespace

SteinConstants derive_constants(const PotentialSpec& pot, const Manifold& M, double K) {
    if (K <= 0.0) {
        if (M.compact()) return derive_compact_constants(M);
        throw Error(ErrorKind::NotContractive, "explicit constants need K > 0 on a non-compact manifold");
    }
    return derive_constants(pot, M, K, curvature_norms(M, pot));
}

SteinConstants derive_constants(const PotentialSpec&, const Manifold&, double K, const CurvatureNorms& norms) {
    if (!(K > 0.0)) throw Error(ErrorKind::NotContractive, "explicit constants need K > 0");
    SteinConstants c;
    c.K = K;
    c.rate = K;
    c.norms = norms;
    c.log.emplace_back("K", K);
    c.log.emplace_back("|R|", norms.R);
    c.log.emplace_back("|nabla R|", norms.nabla_R);
    c.log.emplace_back("|T|", norms.T);
    c.log.emplace_back("|nabla T|", norms.nabla_T);
    const double t_max = 60.0;
    c.C0 = 1.0;
    c.C1 = sup_constant(2, 0.5, K, norms, t_max);
    c.C2 = sup_constant(3, 1.0, K, norms, t_max);
    c.C3 = sup_constant(4, 0.5, K, norms, t_max);
    c.grad = 1.0 / K;
    c.log.emplace_back("C1", c.C1);
    c.log.emplace_back("C2", c.C2);
    c.log.emplace_back("C3", c.C3);
    finish_constants(c);
    return c;
}

SteinConstants derive_compact_constants(const Manifold& M, double eps) {
    if (M.kind() != ManifoldKind::Circle)
        throw Error(ErrorKind::Unsupported, "spectral constants need kernel derivatives; only the circle has them");
    if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
    const double L = M.spec().circumference;
    const SpectralInfo info = spectral_gap(M);
    const double lam = info.gap;
    SteinConstants c;
    c.compact = true;
    c.K = 0.0;
    c.gap = lam;
    c.rate = lam;
    c.eps = eps;
    c.norms.source = "flat circle, psi = 0";
    c.log.emplace_back("K", 0.0);
    c.log.emplace_back("gap", lam);
    c.log.emplace_back("eps", eps);
    // t <= eps: the local bounds with e^{-Kt} traded for e^{lam eps} e^{-lam t}.
    const double shift = std::exp(std::max(lam - c.K, 0.0) * eps);
    const double loc1 = sup_constant(2, 0.5, 0.0, c.norms, eps);
    const double loc2 = sup_constant(3, 1.0, 0.0, c.norms, eps);
    const double loc3 = sup_constant(4, 0.5, 0.0, c.norms, eps);
    // t > eps: kernel derivative against the L2-contracted remainder.
    auto far = [&](int m) {
        const double nrm = circle_kernel_derivative_norm(L, eps, m);
        c.log.emplace_back("|d^" + std::to_string(m) + " p_eps|_2", nrm);
        return L * nrm * std::exp(lam * eps) / std::sqrt(2.0 * lam);
    };
    const double f1 = far(1), f2 = far(2), f3 = far(3);
    c.C0 = std::max(shift, f1);
    c.C1 = std::max(loc1 * shift, f2);
    c.C2 = std::max(loc2 * shift, f3);
    c.C3 = std::max(loc3 * shift, f3);
    c.grad = c.C0 / lam;
    c.log.emplace_back("C0'", c.C0);
    c.log.emplace_back("C1'", c.C1);
    c.log.emplace_back("C2'", c.C2);
    c.log.emplace_back("C3'", c.C3);
    finish_constants(c);
    return c;
}

// ---- assembly -------------------------------------------------------------------

const char* metric_kind_name(MetricKind kind) { return kind == MetricKind::Wasserstein ? "wasserstein" : "c2_class"; }

MetricKind parse_metric_kind(const std::string& s) {
    if (s == "wasserstein") return MetricKind::Wasserstein;
    if (s == "c2_class") return MetricKind::C2Class;
    throw Error(ErrorKind::InvalidArgument, "unknown metric kind: " + s);
}

namespace {

bool same_constants(const SteinConstants& a, const SteinConstants& b) {
    return a.valid == b.valid && a.compact == b.compact && a.K == b.K && a.norms.R == b.norms.R &&
           a.norms.nabla_R == b.norms.nabla_R && a.norms.T == b.norms.T && a.norms.nabla_T == b.norms.nabla_T &&
           a.norms.source == b.norms.source && a.C0 == b.C0 && a.C1 == b.C1 && a.C2 == b.C2 && a.C3 == b.C3 &&
           a.rate == b.rate && a.gap == b.gap && a.eps == b.eps && a.grad == b.grad && a.c1 == b.c1 && a.c2 == b.c2 &&
           a.c3 == b.c3 && a.c4 == b.c4 && a.C == b.C && a.C_c2 == b.C_c2 && a.log == b.log;
}

double log_weight(double d) { return d > 0.0 ? std::max(std::abs(std::log(d)), 1.0) : 1.0; }

}  // namespace

bool SteinReport::operator==(const SteinReport& o) const {
    return e_abs_r1 == o.e_abs_r1 && e_abs_r1_se == o.e_abs_r1_se && e_abs_r2 == o.e_abs_r2 &&
           e_abs_r2_se == o.e_abs_r2_se && third_moment_term == o.third_moment_term &&
           third_moment_term_se == o.third_moment_term_se && four_term_bound == o.four_term_bound &&
           bound == o.bound && metric_kind == o.metric_kind && lambda == o.lambda && n_base == o.n_base &&
           m_cond == o.m_cond && discard_fraction == o.discard_fraction && seed == o.seed &&
           same_constants(constants, o.constants) && notes == o.notes;
}

SteinReport assemble_bound(const PairBatch& batch, const PotentialSpec& pot, const SteinConstants& k,
                           MetricKind metric, double lambda) {
    const bool usable = k.valid && std::isfinite(k.C) && k.C > 0.0 && std::isfinite(k.C_c2) && k.C_c2 > 0.0;
    if (!usable) throw Error(ErrorKind::MissingConstants, "assemble_bound needs constants from derive_constants");
    SteinReport r;
    r.metric_kind = metric;
    r.lambda = lambda;
    r.n_base = batch.bases.size();
    r.m_cond = batch.m_cond;
    r.discard_fraction = batch.discard_fraction();
    r.seed = batch.seed;
    r.constants = k;
    const R1Estimate r1 = estimate_R1(batch, pot, lambda);
    const R2Estimate r2 = estimate_R2(batch, lambda);
    r.e_abs_r1 = r1.abs.mean;
    r.e_abs_r1_se = r1.abs.std_error;
    r.e_abs_r2 = r2.abs.mean;
    r.e_abs_r2_se = r2.abs.std_error;
    if (metric == MetricKind::Wasserstein) {
        const MomentEstimate third = pair_moment(batch, [](double d) { return d * d * d * log_weight(d); });
        const MomentEstimate quad = pair_moment(batch, [](double d) { return d * d * std::min(d, 1.0); });
        const double rate = k.rate;
        const MomentEstimate tail = pair_moment(batch, [rate](double d) {
            const double m = std::max(d, 1.0);
            return d * d * d * log_weight(d) * std::exp(-rate * m * m);
        });
        r.third_moment_term = third.mean / lambda;
        r.third_moment_term_se = third.std_error / lambda;
        r.four_term_bound = k.grad * r.e_abs_r1 + k.c1 * r.e_abs_r2 + k.c2 * quad.mean / lambda +
                            k.c3 / (6.0 * lambda) * tail.mean;
        r.bound = k.C * (r.third_moment_term + r.e_abs_r1 + r.e_abs_r2);
    } else {
        const MomentEstimate cube = pair_moment(batch, [](double d) { return d * d * d; });
        r.third_moment_term = cube.mean / lambda;
        r.third_moment_term_se = cube.std_error / lambda;
        r.four_term_bound = k.grad * r.e_abs_r1 + k.c1 * r.e_abs_r2 + k.c4 / 6.0 * r.third_moment_term;
        r.bound = k.C_c2 * (r.third_moment_term + r.e_abs_r1 + r.e_abs_r2);
    }
    r.notes = batch.warnings;
    r.notes.push_back("E|R1| and E|R2| use within-base averages of m_cond replicas and carry an O(m^-1/2) upward bias");
    return r;
}

// ---- exact 1-D transport --------------------------------------------------------

double wasserstein_line(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidArgument, "empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
        return s / double(a.size());
    }
    // int |F_a - F_b| over the merged breakpoints.
    const double na = double(a.size()), nb = double(b.size());
    std::size_t i = 0, j = 0;
    double prev = std::min(a[0], b[0]);
    double s = 0.0;
    while (i < a.size() || j < b.size()) {
        const double x = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        s += std::abs(double(i) / na - double(j) / nb) * (x - prev);
        prev = x;
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
    }
    return s;
}

namespace {

std::vector<double> wrapped_sorted(std::vector<double> a, double L) {
    for (double& x : a) {
        x = std::fmod(x, L);
        if (x < 0) x += L;
    }
    std::sort(a.begin(), a.end());
    return a;
}

// min over alpha of sum w_i |v_i - alpha| (weighted median).
double weighted_l1_min(std::vector<std::pair<double, double>> vw) {
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (auto& p : vw) total += p.second;
    double acc = 0.0;
    double alpha = vw.back().first;
    for (auto& p : vw) {
        acc += p.second;
        if (acc >= 0.5 * total) {
            alpha = p.first;
            break;
        }
    }
    double s = 0.0;
    for (auto& p : vw) s += p.second * std::abs(p.first - alpha);
    return s;
}

}  // namespace

double wasserstein_circle(std::vector<double> a, std::vector<double> b, double L) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidArgument, "empty sample set");
    a = wrapped_sorted(std::move(a), L);
    b = wrapped_sorted(std::move(b), L);
    // W1 = min_alpha int_0^L |F_a - F_b - alpha|; the difference is constant between breakpoints.
    const double na = double(a.size()), nb = double(b.size());
    std::vector<std::pair<double, double>> segs;
    std::size_t i = 0, j = 0;
    double prev = 0.0;
    while (i < a.size() || j < b.size()) {
        const double x = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        if (x > prev) segs.emplace_back(double(i) / na - double(j) / nb, x - prev);
        prev = x;
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
    }
    if (L > prev) segs.emplace_back(0.0, L - prev);
    return weighted_l1_min(std::move(segs));
}

double wasserstein_circle_uniform(std::vector<double> a, double L) {
    if (a.empty()) throw Error(ErrorKind::InvalidArgument, "empty sample set");
    a = wrapped_sorted(std::move(a), L);
    const double n = double(a.size());
    // Segment k = [x_k, x_{k+1}) carries D(x) = k/n - x/L.
    std::vector<double> lo{0.0}, hi, level{0.0};
    for (std::size_t k = 0; k < a.size(); ++k) {
        hi.push_back(a[k]);
        lo.push_back(a[k]);
        level.push_back(double(k + 1) / n);
    }
    hi.push_back(L);
    auto measure_below = [&](double alpha) {
        double m = 0.0;
        for (std::size_t k = 0; k < lo.size(); ++k) {
            const double root = L * (level[k] - alpha);  // D <= alpha for x >= root
            m += std::max(0.0, hi[k] - std::clamp(root, lo[k], hi[k]));
        }
        return m;
    };
    auto cost = [&](double alpha) {
        double s = 0.0;
        for (std::size_t k = 0; k < lo.size(); ++k) {
            const double f0 = level[k] - lo[k] / L - alpha;
            const double f1 = level[k] - hi[k] / L - alpha;
            const double len = hi[k] - lo[k];
            if (len <= 0.0) continue;
            if (f0 * f1 >= 0.0) {
                s += 0.5 * std::abs(f0 + f1) * len;
            } else {
                const double x = len * f0 / (f0 - f1);
                s += 0.5 * std::abs(f0) * x + 0.5 * std::abs(f1) * (len - x);
            }
        }
        return s;
    };
    double lo_a = -1.0, hi_a = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo_a + hi_a);
        if (measure_below(mid) < 0.5 * L) lo_a = mid;
        else hi_a = mid;
    }
    return cost(0.5 * (lo_a + hi_a));
}

double assignment_distance(const Manifold& M, const std::vector<Vec>& a, const std::vector<Vec>& b) {
    const std::size_t n = a.size();
    if (n == 0 || b.size() != n) throw Error(ErrorKind::InvalidArgument, "assignment needs equal nonempty sets");
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i][j] = M.distance(a[i], b[j]);
    // Shortest augmenting path with potentials, 1-based rows/cols.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
    return total / double(n);
}

WassersteinResult exact_wasserstein_1d(const Manifold& M, const std::vector<Vec>& a, const std::vector<Vec>& b) {
    auto first = [](const std::vector<Vec>& xs) {
        std::vector<double> out;
        out.reserve(xs.size());
        for (const Vec& x : xs) out.push_back(x(0));
        return out;
    };
    if (M.kind() == ManifoldKind::Circle) return {wasserstein_circle(first(a), first(b), M.spec().circumference), false};
    if (M.kind() == ManifoldKind::Euclidean && M.dim() == 1) return {wasserstein_line(first(a), first(b)), false};
    if (a.size() == b.size() && a.size() <= 512) return {assignment_distance(M, a, b), true};
    throw Error(ErrorKind::DimensionUnsupported,
                "exact transport needs a 1-D manifold; the assignment fallback takes at most 512 points per side");
}

// ---- two-sample test ------------------------------------------------------------

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidArgument, "empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    KsResult r;
    r.statistic = d;
    const double en = std::sqrt(na * nb / (na + nb));
    const double lam = (en + 0.12 + 0.11 / en) * d;
    // Kolmogorov tail Q(lam) = 2 sum (-1)^{k-1} e^{-2 k^2 lam^2}.
    if (lam < 0.2) {
        r.p_value = 1.0;
        return r;
    }
    double q = 0.0, sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        q += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    r.p_value = std::clamp(2.0 * q, 0.0, 1.0);
    return r;
}

MarginalCheck check_marginals(const PairSampler& sampler, std::size_t n, std::uint64_t seed, double level) {
    sampler.validate();
    std::vector<double> w(n), w2(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Independent draws for the two marginals.
        auto rng = path_rng(seed, i);
        w[i] = sampler.base(rng)(0);
        auto rng2 = path_rng(seed, n + i);
        const Vec x = sampler.base(rng2);
        w2[i] = sampler.conditional(x, rng2)(0);
    }
    MarginalCheck c;
    c.level = level;
    c.ks = ks_two_sample(std::move(w), std::move(w2));
    return c;
}

}  // namespace stein
