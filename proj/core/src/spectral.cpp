#include "stein/spectral.hpp"

#include "stein/curvature.hpp"
#include "stein/rng.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace stein {

namespace {

constexpr double kPi = std::numbers::pi;

void require_compact(const Manifold& M) {
    if (!M.compact()) throw Error(ErrorKind::NonCompact, "operation needs a compact manifold");
}

const Quadric& as_sphere(const Manifold& M) {
    if (M.kind() != ManifoldKind::Sphere) throw Error(ErrorKind::Unsupported, "expected a sphere");
    return static_cast<const Quadric&>(M);
}

double grad_norm2(const Manifold& M, const ScalarField& f, const Vec& x) {
    return differential(M, f, x, M.tangent_basis(x)).squaredNorm();
}

}  // namespace

const char* gap_source_name(GapSource s) {
    return s == GapSource::ClosedForm ? "closed_form" : "rayleigh_estimate";
}

SpectralInfo spectral_gap(const Manifold& M) {
    require_compact(M);
    SpectralInfo info;
    info.volume = M.volume();
    if (M.kind() == ManifoldKind::Circle) {
        const double w = 2.0 * kPi / M.spec().circumference;
        info.gap = 0.5 * w * w;
    } else if (M.kind() == ManifoldKind::Sphere) {
        info.gap = 0.5 * M.dim() * M.spec().kappa;
    } else {
        throw Error(ErrorKind::Unsupported, "closed-form gap only for circle and sphere");
    }
    return info;
}

// ---- Quadrature -------------------------------------------------------------------

std::vector<Vec> sample_uniform(const Manifold& M, std::size_t n, std::uint64_t seed) {
    require_compact(M);
    auto rng = path_rng(seed, 0);
    std::vector<Vec> out;
    out.reserve(n);
    if (M.kind() == ManifoldKind::Circle) {
        std::uniform_real_distribution<double> U(0.0, M.spec().circumference);
        for (std::size_t i = 0; i < n; ++i) {
            Vec x(1);
            x(0) = U(rng);
            out.push_back(x);
        }
        return out;
    }
    const Quadric& S = as_sphere(M);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        Vec g(S.ambient_dim());
        for (int k = 0; k < g.size(); ++k) g(k) = nd(rng);
        out.push_back(S.radius() * g / g.norm());
    }
    return out;
}

Quadrature volume_quadrature(const Manifold& M, const QuadratureOptions& opt) {
    require_compact(M);
    Quadrature q;
    if (M.kind() == ManifoldKind::Circle) {
        const double L = M.spec().circumference;
        const int N = opt.circle_nodes;
        for (int i = 0; i < N; ++i) {
            Vec x(1);
            x(0) = L * i / N;
            q.nodes.push_back(x);
            q.weights.push_back(1.0 / N);
        }
        q.description = "trapezoid " + std::to_string(N);
        return q;
    }
    const Quadric& S = as_sphere(M);
    if (S.dim() == 2) {
        // Gauss-Legendre in cos(theta); the Boost rule is fixed at 64 nodes.
        using GL = boost::math::quadrature::gauss<double, 64>;
        const auto& ab = GL::abscissa();
        const auto& wt = GL::weights();
        std::vector<std::pair<double, double>> rule;
        for (std::size_t i = 0; i < ab.size(); ++i) {
            rule.emplace_back(ab[i], wt[i]);
            if (ab[i] != 0.0) rule.emplace_back(-ab[i], wt[i]);
        }
        const int NL = opt.sphere_longitudes;
        const double rho = S.radius();
        for (const auto& [c, w] : rule) {
            const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
            for (int j = 0; j < NL; ++j) {
                const double phi = 2.0 * kPi * j / NL;
                Vec x(3);
                x << rho * s * std::cos(phi), rho * s * std::sin(phi), rho * c;
                q.nodes.push_back(x);
                q.weights.push_back(0.5 * w / NL);
            }
        }
        q.description = "gauss-legendre 64 x uniform " + std::to_string(NL);
        return q;
    }
    q.nodes = sample_uniform(M, opt.mc_samples, opt.seed);
    q.weights.assign(q.nodes.size(), 1.0 / double(q.nodes.size()));
    q.description = "monte carlo " + std::to_string(q.nodes.size());
    return q;
}

double harmonic_projection(const ScalarField& f, const Manifold& M, const QuadratureOptions& opt) {
    const Quadrature q = volume_quadrature(M, opt);
    double s = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * f.value(q.nodes[i]);
    return s;
}

PoincareCheck poincare_check(const ScalarField& f, const Manifold& M, const QuadratureOptions& opt) {
    const Quadrature q = volume_quadrature(M, opt);
    double mean = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) mean += q.weights[i] * f.value(q.nodes[i]);
    PoincareCheck c;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double d = f.value(q.nodes[i]) - mean;
        c.variance += q.weights[i] * d * d;
        c.dirichlet += q.weights[i] * grad_norm2(M, f, q.nodes[i]);
    }
    c.bound = c.dirichlet / (2.0 * spectral_gap(M).gap);
    return c;
}

// ---- Rayleigh quotient ------------------------------------------------------------------

SpectralInfo spectral_gap_rayleigh(const Manifold& M, int modes) {
    require_compact(M);
    std::vector<ScalarField> basis;
    if (M.kind() == ManifoldKind::Circle) {
        const double w = 2.0 * kPi / M.spec().circumference;
        for (int k = 1; int(basis.size()) < modes; ++k) {
            for (int phase = 0; phase < 2 && int(basis.size()) < modes; ++phase) {
                ScalarField f;
                const double kw = k * w;
                if (phase == 0) {
                    f.value = [kw](const Vec& x) { return std::sin(kw * x(0)); };
                    f.differential = [kw](const Vec& x) { return Vec::Constant(1, kw * std::cos(kw * x(0))); };
                } else {
                    f.value = [kw](const Vec& x) { return std::cos(kw * x(0)); };
                    f.differential = [kw](const Vec& x) { return Vec::Constant(1, -kw * std::sin(kw * x(0))); };
                }
                basis.push_back(f);
            }
        }
    } else {
        const int N = as_sphere(M).ambient_dim();
        for (int i = 0; i < N; ++i) {
            Vec b = Vec::Zero(N);
            b(i) = 1.0;
            basis.push_back(ScalarField::linear(b));
        }
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                Mat Q = Mat::Zero(N, N);
                Q(i, j) += 0.5;
                Q(j, i) += 0.5;
                basis.push_back(ScalarField::quadratic(Q, Vec::Zero(N)));
            }
    }
    const Quadrature q = volume_quadrature(M);
    const int m = int(basis.size());
    Eigen::MatrixXd vals(q.nodes.size(), m);
    std::vector<Eigen::MatrixXd> grads;
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(m, m), stiff = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < q.nodes.size(); ++i)
        for (int a = 0; a < m; ++a) {
            vals(i, a) = basis[a].value(q.nodes[i]);
            mean(a) += q.weights[i] * vals(i, a);
        }
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const Mat F = M.tangent_basis(q.nodes[i]);
        Eigen::MatrixXd D(M.dim(), m);
        for (int a = 0; a < m; ++a) D.col(a) = differential(M, basis[a], q.nodes[i], F);
        stiff += 0.5 * q.weights[i] * D.transpose() * D;
        const Eigen::VectorXd c = vals.row(i).transpose() - mean;
        mass += q.weights[i] * c * c.transpose();
    }
    // Restrict to the range of the mass matrix (drops combinations constant on M).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ms(mass);
    const double cut = 1e-10 * ms.eigenvalues().maxCoeff();
    std::vector<int> keep;
    for (int a = 0; a < m; ++a)
        if (ms.eigenvalues()(a) > cut) keep.push_back(a);
    Eigen::MatrixXd P(m, keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j)
        P.col(j) = ms.eigenvectors().col(keep[j]) / std::sqrt(ms.eigenvalues()(keep[j]));
    const Eigen::MatrixXd reduced = P.transpose() * stiff * P;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rs(0.5 * (reduced + reduced.transpose()));
    SpectralInfo info;
    info.gap = rs.eigenvalues().minCoeff();
    info.source = GapSource::RayleighEstimate;
    info.volume = M.volume();
    return info;
}

// ---- L2 decay -------------------------------------------------------------------------

bool L2DecayReport::all_hold() const {
    return std::all_of(points.begin(), points.end(), [](const L2DecayPoint& p) { return p.holds; });
}

L2DecayReport l2_decay_check(const ScalarField& f, const ManifoldPtr& Mp, const std::vector<double>& t_grid,
                             std::size_t n_samples, std::uint64_t seed, const L2DecayOptions& opt) {
    const Manifold& M = *Mp;
    require_compact(M);
    if (t_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty t grid");
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (!(t_grid[i] > 0.0) || (i > 0 && t_grid[i] <= t_grid[i - 1]))
            throw Error(ErrorKind::InvalidArgument, "t grid must be positive and increasing");
    if (n_samples < 4) throw Error(ErrorKind::InvalidArgument, "need at least 4 paths per node");

    L2DecayReport rep;
    rep.gap = spectral_gap(M).gap;
    const Quadrature fine = volume_quadrature(M, opt.quad);
    double H = 0.0;
    for (std::size_t i = 0; i < fine.nodes.size(); ++i) H += fine.weights[i] * f.value(fine.nodes[i]);
    for (std::size_t i = 0; i < fine.nodes.size(); ++i) {
        const double d = f.value(fine.nodes[i]) - H;
        rep.variance += fine.weights[i] * d * d;
    }

    // Start points: a coarse rule of the same kind.
    QuadratureOptions coarse = opt.quad;
    coarse.circle_nodes = opt.start_nodes;
    // sphere(2): h Gauss-Legendre heights times 2h longitudes, about start_nodes nodes in total.
    coarse.sphere_heights = std::max(2, int(std::lround(std::sqrt(0.5 * opt.start_nodes))));
    coarse.sphere_longitudes = 2 * coarse.sphere_heights;
    coarse.mc_samples = std::size_t(opt.start_nodes);
    const Quadrature starts = volume_quadrature(M, coarse);
    rep.start_nodes = int(starts.nodes.size());
    rep.paths_per_node = n_samples;

    const double t_max = t_grid.back();
    const int steps = step_count(t_max, opt.path);
    const double h = t_max / steps;
    std::vector<int> cps;
    for (double t : t_grid) cps.push_back(std::clamp(int(std::lround(t / h)), 1, steps));
    for (std::size_t i = 1; i < cps.size(); ++i)
        if (cps[i] <= cps[i - 1]) throw Error(ErrorKind::InvalidArgument, "t grid finer than the time step");

    const std::size_t T = t_grid.size();
    const std::size_t half = n_samples / 2;
    // node -> per t: (mean of half A, mean of half B, var of half A mean, var of half B mean)
    std::vector<std::vector<std::array<double, 4>>> stats(starts.nodes.size(), std::vector<std::array<double, 4>>(T));
    for (std::size_t j = 0; j < starts.nodes.size(); ++j) {
        EngineConfig cfg;
        cfg.t = t_max;
        cfg.steps = steps;
        cfg.seed = seed + 0x9e3779b97f4a7c15ULL * (j + 1);
        cfg.n_paths = 2 * half;
        cfg.order = 0;
        cfg.exec = opt.exec;
        cfg.checkpoints = cps;
        std::vector<std::vector<double>> vals(cfg.n_paths, std::vector<double>(T));
        const Vec x0 = starts.nodes[j];
        run_paths(M, x0, M.tangent_basis(x0), PotentialSpec::zero(), cfg, [&](const PathResult& r) {
            for (std::size_t k = 0; k < T; ++k) vals[r.index][k] = f.value(r.snapshots[k].x);
        });
        for (std::size_t k = 0; k < T; ++k) {
            for (int part = 0; part < 2; ++part) {
                double s = 0.0, s2 = 0.0;
                for (std::size_t i = part * half; i < (part + 1) * half; ++i) {
                    s += vals[i][k];
                    s2 += vals[i][k] * vals[i][k];
                }
                const double m = s / half;
                const double var = std::max(0.0, (s2 - half * m * m) / (half - 1));
                stats[j][k][part] = m;
                stats[j][k][2 + part] = var / half;
            }
        }
    }
    std::vector<double> lt, ly;
    for (std::size_t k = 0; k < T; ++k) {
        double Q = 0.0, VQ = 0.0;
        for (std::size_t j = 0; j < starts.nodes.size(); ++j) {
            const auto& s = stats[j][k];
            const double a = s[0] - H, b = s[1] - H;
            const double w = starts.weights[j];
            Q += w * a * b;
            VQ += w * w * (b * b * s[2] + a * a * s[3] + s[2] * s[3]);
        }
        L2DecayPoint p;
        p.t = t_grid[k];
        p.norm = std::sqrt(std::max(0.0, Q));
        // Delta method, floored by the half-width of the squared estimate near zero.
        p.std_error = p.norm > 0.0 ? std::sqrt(VQ) / (2.0 * p.norm) : std::pow(VQ, 0.25);
        p.std_error = std::max(p.std_error, std::sqrt(std::sqrt(VQ) + std::max(0.0, Q)) - p.norm);
        p.bound = std::exp(-rep.gap * p.t) * std::sqrt(rep.variance);
        p.holds = p.norm <= p.bound + 3.0 * p.std_error;
        rep.points.push_back(p);
        if (p.norm > 0.0) {
            lt.push_back(p.t);
            ly.push_back(std::log(p.norm));
        }
    }
    if (lt.size() >= 2) {
        double mt = 0.0, my = 0.0;
        for (std::size_t i = 0; i < lt.size(); ++i) {
            mt += lt[i];
            my += ly[i];
        }
        mt /= lt.size();
        my /= lt.size();
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lt.size(); ++i) {
            sxy += (lt[i] - mt) * (ly[i] - my);
            sxx += (lt[i] - mt) * (lt[i] - mt);
        }
        rep.fitted_rate = -sxy / sxx;
    }
    return rep;
}

// ---- Heat kernels -------------------------------------------------------------------

namespace {

double circle_signed(double L, double d) {
    d = std::fmod(d, L);
    if (d < -0.5 * L) d += L;
    if (d >= 0.5 * L) d -= L;
    return d;
}

// Probabilists' Hermite polynomial He_m.
double hermite_e(int m, double x) {
    double a = 1.0, b = x;
    if (m == 0) return a;
    for (int k = 1; k < m; ++k) {
        const double c = x * b - k * a;
        a = b;
        b = c;
    }
    return b;
}

}  // namespace

double circle_kernel_derivative(double L, double t, double d, int m) {
    if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "heat kernel needs t > 0");
    d = circle_signed(L, d);
    const double st = std::sqrt(t);
    const double norm = 1.0 / std::sqrt(2.0 * kPi * t);
    double sum = 0.0;
    for (int k = 0;; ++k) {
        double layer = 0.0;
        for (int sgn : {1, -1}) {
            if (k == 0 && sgn < 0) continue;
            const double y = d + sgn * k * L;
            const double z = y / st;
            // d^m/dy^m exp(-y^2/2t) = (-1/sqrt t)^m He_m(y/sqrt t) exp(-y^2/2t)
            const double term = norm * std::pow(-1.0 / st, m) * hermite_e(m, z) * std::exp(-0.5 * z * z);
            layer += term;
        }
        sum += layer;
        if (k > 0 && std::abs(layer) < 1e-16 * std::max(1.0, std::abs(sum))) break;
        if (k > 100000) break;
    }
    return sum;
}

double circle_kernel_derivative_norm(double L, double eps, int m, int nodes) {
    double s = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double v = circle_kernel_derivative(L, eps, L * i / nodes, m);
        s += v * v;
    }
    return std::sqrt(s / nodes);
}

double heat_kernel(const Manifold& M, double t, const Vec& x, const Vec& y) {
    if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "heat kernel needs t > 0");
    switch (M.kind()) {
        case ManifoldKind::Euclidean: {
            const double d2 = (x - y).squaredNorm();
            return std::pow(2.0 * kPi * t, -0.5 * M.dim()) * std::exp(-d2 / (2.0 * t));
        }
        case ManifoldKind::Circle:
            return circle_kernel_derivative(M.spec().circumference, t, y(0) - x(0), 0);
        case ManifoldKind::Hyperbolic: {
            const double kappa = M.spec().kappa;
            const double a = std::sqrt(-kappa);
            const double r = M.distance(x, y);
            const double ar = a * r;
            const double ratio = ar < 1e-6 ? 1.0 - ar * ar / 6.0 : ar / std::sinh(ar);
            return std::pow(2.0 * kPi * t, -1.5) * std::exp(-r * r / (2.0 * t)) * ratio * std::exp(0.5 * kappa * t);
        }
        default:
            throw Error(ErrorKind::Unsupported, "heat kernel available for euclidean, circle and hyperbolic3");
    }
}

// ---- Hyperbolic Bakry-Emery check ----------------------------------------------------

double HessianBoundCheck::min_margin() const {
    return margins.empty() ? 0.0 : *std::min_element(margins.begin(), margins.end());
}

HessianBoundCheck hyperbolic_hessian_bound_check(double kappa, double t,
                                                 const std::vector<std::pair<Vec, Vec>>& pairs, double tol) {
    if (!(kappa < 0.0) || !(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "needs kappa < 0 and t > 0");
    const ManifoldPtr M = make_manifold(ManifoldSpec::hyperbolic3(kappa));
    HessianBoundCheck c;
    c.kappa = kappa;
    c.t = t;
    c.bound = 2.0 * (kappa + 1.0 / t);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [x, y] = pairs[i];
        const PotentialSpec pot = PotentialSpec::log_heat_kernel(kappa, t, y);
        const Mat be = bakry_emery_at(*M, x, M->tangent_basis(x), pot);
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (be + be.transpose()));
        const double margin = es.eigenvalues().minCoeff() - c.bound;
        c.margins.push_back(margin);
        if (margin < -tol) c.violated.push_back(i);
    }
    return c;
}

std::vector<std::pair<Vec, Vec>> sample_hyperbolic_pairs(double kappa, std::size_t n, double max_dist,
                                                         std::uint64_t seed) {
    const ManifoldPtr M = make_manifold(ManifoldSpec::hyperbolic3(kappa));
    const double rho = 1.0 / std::sqrt(-kappa);
    auto rng = path_rng(seed, 0);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<std::pair<Vec, Vec>> out;
    Vec o = Vec::Zero(4);
    o(0) = rho;
    for (std::size_t i = 0; i < n; ++i) {
        Vec dir(3);
        for (int k = 0; k < 3; ++k) dir(k) = nd(rng);
        dir.normalize();
        Vec v = Vec::Zero(4);
        v.tail(3) = max_dist * U(rng) * dir;
        const Vec x = M->exp(o, v);
        const Mat F = M->tangent_basis(x);
        Vec w(3);
        for (int k = 0; k < 3; ++k) w(k) = nd(rng);
        w *= max_dist * U(rng) / w.norm();
        out.emplace_back(x, M->exp(x, F * w));
    }
    return out;
}

}  // namespace stein
