#include "stein/fields.hpp"

#include <cmath>
#include <random>

namespace stein {

// ---- ScalarField constructors --------------------------------------------------

ScalarField ScalarField::constant(double c) {
    ScalarField f;
    f.value = [c](const Vec&) { return c; };
    f.differential = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
    f.ambient_hessian = [](const Vec& x) { return Mat(Mat::Zero(x.size(), x.size())); };
    return f;
}

ScalarField ScalarField::linear(const Vec& b, double c) {
    ScalarField f;
    f.value = [b, c](const Vec& x) { return b.dot(x) + c; };
    f.differential = [b](const Vec&) { return b; };
    f.ambient_hessian = [](const Vec& x) { return Mat(Mat::Zero(x.size(), x.size())); };
    return f;
}

ScalarField ScalarField::quadratic(const Mat& Q, const Vec& b, double c) {
    const Mat S = 0.5 * (Q + Q.transpose());
    ScalarField f;
    f.value = [S, b, c](const Vec& x) { return x.dot(S * x) + b.dot(x) + c; };
    f.differential = [S, b](const Vec& x) { return Vec(2.0 * S * x + b); };
    f.ambient_hessian = [S](const Vec&) { return Mat(2.0 * S); };
    return f;
}

ScalarField ScalarField::coordinate_power(int i, int k) {
    ScalarField f;
    f.value = [i, k](const Vec& x) { return std::pow(x(i), k); };
    f.differential = [i, k](const Vec& x) {
        Vec d = Vec::Zero(x.size());
        d(i) = k == 0 ? 0.0 : k * std::pow(x(i), k - 1);
        return d;
    };
    f.ambient_hessian = [i, k](const Vec& x) {
        Mat h = Mat::Zero(x.size(), x.size());
        h(i, i) = k < 2 ? 0.0 : k * (k - 1) * std::pow(x(i), k - 2);
        return h;
    };
    return f;
}

ScalarField ScalarField::combine(double a, const ScalarField& f, double b, const ScalarField& g) {
    ScalarField h;
    h.value = [=](const Vec& x) { return a * f.value(x) + b * g.value(x); };
    if (f.differential && g.differential)
        h.differential = [=](const Vec& x) { return Vec(a * f.differential(x) + b * g.differential(x)); };
    if (f.ambient_hessian && g.ambient_hessian && !f.frame_hessian && !g.frame_hessian)
        h.ambient_hessian = [=](const Vec& x) { return Mat(a * f.ambient_hessian(x) + b * g.ambient_hessian(x)); };
    if (f.frame_hessian && g.frame_hessian)
        h.frame_hessian = [=](const Manifold& M, const Vec& p, const Mat& F) {
            return Mat(a * f.frame_hessian(M, p, F) + b * g.frame_hessian(M, p, F));
        };
    return h;
}

ScalarField random_polynomial(int dim, int degree, unsigned long long seed) {
    struct Term {
        double coef;
        std::vector<int> pow;
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<Term> terms;
    // Enumerate all monomials of total degree <= degree.
    std::vector<int> e(dim, 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == dim) {
            terms.push_back({U(rng), e});
            return;
        }
        for (int k = 0; k <= left; ++k) {
            e[i] = k;
            rec(i + 1, left - k);
        }
        e[i] = 0;
    };
    rec(0, degree);
    auto ipow = [](double x, int k) {
        double r = 1.0;
        for (int i = 0; i < k; ++i) r *= x;
        return r;
    };
    ScalarField f;
    f.value = [terms, ipow](const Vec& x) {
        double s = 0.0;
        for (const auto& t : terms) {
            double m = t.coef;
            for (int i = 0; i < x.size(); ++i) m *= ipow(x(i), t.pow[i]);
            s += m;
        }
        return s;
    };
    f.differential = [terms, ipow](const Vec& x) {
        const int n = int(x.size());
        Vec g = Vec::Zero(n);
        for (const auto& t : terms)
            for (int j = 0; j < n; ++j) {
                if (t.pow[j] == 0) continue;
                double m = t.coef * t.pow[j];
                for (int i = 0; i < n; ++i) m *= ipow(x(i), i == j ? t.pow[i] - 1 : t.pow[i]);
                g(j) += m;
            }
        return g;
    };
    f.ambient_hessian = [terms, ipow](const Vec& x) {
        const int n = int(x.size());
        Mat H = Mat::Zero(n, n);
        for (const auto& t : terms)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    std::vector<int> p = t.pow;
                    double m = t.coef * p[j];
                    if (p[j] == 0) continue;
                    p[j] -= 1;
                    m *= p[k];
                    if (p[k] == 0) continue;
                    p[k] -= 1;
                    for (int i = 0; i < n; ++i) m *= ipow(x(i), p[i]);
                    H(j, k) += m;
                }
        return H;
    };
    return f;
}

// ---- Potentials ------------------------------------------------------------------

PotentialSpec PotentialSpec::zero(double K) {
    PotentialSpec p;
    p.name = "zero";
    p.psi = ScalarField::constant(0.0);
    p.is_zero = true;
    p.parallel_hessian = true;
    p.K = K;
    return p;
}

PotentialSpec PotentialSpec::gaussian(const Mat& A, const Vec& y) {
    const Mat S = 0.5 * (A + A.transpose());
    PotentialSpec p;
    p.name = "gaussian";
    p.psi.value = [S, y](const Vec& x) { return -0.5 * (x - y).dot(S * (x - y)); };
    p.psi.differential = [S, y](const Vec& x) { return Vec(-S * (x - y)); };
    p.psi.ambient_hessian = [S](const Vec&) { return Mat(-S); };
    p.parallel_hessian = true;
    p.gaussian_A = S;
    p.gaussian_mean = y;
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    p.K = es.eigenvalues()(0);
    return p;
}

namespace {

struct HeatKernelGeometry {
    double a;    // sqrt(-kappa)
    double rho;  // 1 / a
};

// Radial coefficients of Hess log p_t = -(1/t) P - (1/t) C Q - A P + B Q, P = dr (x) dr, Q = I - P.
void radial_coefficients(double a, double r, double& A, double& B, double& C) {
    const double a2 = a * a;
    if (r < 1e-3) {
        const double r2 = r * r;
        A = a2 / 3.0 - a2 * a2 * r2 / 15.0;
        B = -a2 / 3.0 - 4.0 * a2 * a2 * r2 / 45.0;
        C = 1.0 + a2 * r2 / 3.0;
        return;
    }
    const double sh = std::sinh(a * r);
    const double coth = std::cosh(a * r) / sh;
    A = 1.0 / (r * r) - a2 / (sh * sh);
    B = (1.0 / r - a * coth) * a * coth;
    C = a * r * coth;
}

}  // namespace

PotentialSpec PotentialSpec::log_heat_kernel(double kappa, double t, const Vec& y_in) {
    if (!(kappa < 0.0) || !(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "log_heat_kernel needs kappa < 0, t > 0");
    const double a = std::sqrt(-kappa);
    const double rho = 1.0 / a;
    // Normalize y onto the hyperboloid.
    Vec y = y_in;
    {
        double q = y(0) * y(0) - y.tail(y.size() - 1).squaredNorm();
        y *= rho / std::sqrt(q);
    }
    auto dist = [rho, y](const Vec& x) {
        double c = (x(0) * y(0) - x.tail(x.size() - 1).dot(y.tail(y.size() - 1))) / (rho * rho);
        Vec w = y - c * x;
        double nw2 = -w(0) * w(0) + w.tail(w.size() - 1).squaredNorm();
        return rho * std::asinh(std::sqrt(std::max(0.0, nw2)) / rho);
    };
    PotentialSpec p;
    p.name = "log_heat_kernel";
    p.psi.value = [=](const Vec& x) {
        const double r = dist(x);
        const double n = 3.0;
        double v = -0.5 * n * std::log(2.0 * M_PI * t) - r * r / (2.0 * t) + 0.5 * kappa * t;
        if (a * r > 1e-8) v += std::log(a * r / std::sinh(a * r));
        return v;
    };
    p.psi.differential = [=](const Vec& x) {
        const double r = dist(x);
        Vec d = Vec::Zero(x.size());
        if (r < 1e-12) return d;
        const double coth = 1.0 / std::tanh(a * r);
        const double dphi = -r / t + 1.0 / r - a * coth;
        // dr/dx of r = rho acosh(-<x,y>_L / rho^2): (y0, -y_1, ...) / (rho sinh(r/rho)).
        Vec dr(x.size());
        dr(0) = y(0);
        dr.tail(x.size() - 1) = -y.tail(x.size() - 1);
        dr /= rho * std::sinh(r / rho);
        return Vec(dphi * dr);
    };
    p.psi.frame_hessian = [=](const Manifold& M, const Vec& x, const Mat& F) {
        const int n = int(F.cols());
        const double r = dist(x);
        double A, B, C;
        radial_coefficients(a, r, A, B, C);
        Mat H = Mat::Identity(n, n) * (-(1.0 / t) * C + B);
        if (r > 0.0) {
            Vec l = M.log(x, y);
            Vec e = -M.frame_coords(x, F, l) / r;  // grad r in frame coordinates
            const double cP = -(1.0 / t) - A;
            const double cQ = -(1.0 / t) * C + B;
            H = cQ * Mat::Identity(n, n) + (cP - cQ) * e * e.transpose();
        }
        return H;
    };
    p.K = kappa + 1.0 / t;
    return p;
}

// ---- Covariant derivatives ------------------------------------------------------

double FdSteps::at_depth(int depth) const {
    if (depth <= 1) return inner;
    return outer * std::pow(growth, depth - 2);
}

FdSteps identity_steps() { return FdSteps{5e-3, 2e-3, true, 3.0}; }


std::vector<double> covariant_derivative(const Manifold& M, const Vec& p, const Mat& frame,
                                         const FrameField& field, double eps, bool richardson) {
    const int n = int(frame.cols());
    std::vector<double> out;
    for (int x = 0; x < n; ++x) {
        const Vec dir = frame.col(x);
        auto eval = [&](double s) {
            const Vec v = s * dir;
            return field(M.exp(p, v), M.transport_frame_along(p, v, frame));
        };
        auto central = [&](double e) {
            std::vector<double> fp = eval(e), fm = eval(-e);
            for (std::size_t k = 0; k < fp.size(); ++k) fp[k] = (fp[k] - fm[k]) / (2.0 * e);
            return fp;
        };
        std::vector<double> d = central(eps);
        if (richardson) {
            std::vector<double> dh = central(0.5 * eps);
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = (4.0 * dh[k] - d[k]) / 3.0;
        }
        if (x == 0) out.reserve(d.size() * n);
        out.insert(out.end(), d.begin(), d.end());
    }
    return out;
}

Vec differential(const Manifold& M, const ScalarField& f, const Vec& p, const Mat& frame) {
    if (f.differential) return frame.transpose() * f.differential(p);
    const int n = int(frame.cols());
    Vec d(n);
    const FdSteps st;
    for (int a = 0; a < n; ++a) {
        auto phi = [&](double s) { return f.value(M.exp(p, s * frame.col(a))); };
        auto central = [&](double e) { return (phi(e) - phi(-e)) / (2.0 * e); };
        d(a) = (4.0 * central(0.5 * st.inner) - central(st.inner)) / 3.0;
    }
    return d;
}

Vec gradient(const Manifold& M, const ScalarField& f, const Vec& p) {
    if (f.differential) return M.gradient(p, f.differential(p));
    const Mat F = M.tangent_basis(p);
    return F * differential(M, f, p, F);
}

FrameField differential_field(const Manifold& M, const ScalarField& f) {
    return [&M, f](const Vec& q, const Mat& F) {
        Vec d = differential(M, f, q, F);
        return std::vector<double>(d.data(), d.data() + d.size());
    };
}

static bool analytic_hessian(const ScalarField& f) {
    return bool(f.frame_hessian) || (f.ambient_hessian && f.differential);
}

Mat hessian(const Manifold& M, const ScalarField& f, const Vec& p, const Mat& frame, const FdSteps& steps) {
    const int n = int(frame.cols());
    if (f.frame_hessian) return f.frame_hessian(M, p, frame);
    if (f.ambient_hessian && f.differential) {
        const Mat D2 = f.ambient_hessian(p);
        const Vec dF = f.differential(p);
        Mat H(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                const Vec u = frame.col(a), v = frame.col(b);
                double h = u.dot(D2 * v) + dF.dot(M.connection_correction(p, u, v));
                H(a, b) = H(b, a) = h;
            }
        return H;
    }
    std::vector<double> d = covariant_derivative(M, p, frame, differential_field(M, f), steps.inner, steps.richardson);
    Mat H(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) H(a, b) = d[a * n + b];
    return 0.5 * (H + H.transpose());
}

FrameField hessian_field(const Manifold& M, const ScalarField& f, const FdSteps& steps) {
    return [&M, f, steps](const Vec& q, const Mat& F) {
        Mat H = hessian(M, f, q, F, steps);
        std::vector<double> out(H.size());
        const int n = int(H.rows());
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) out[a * n + b] = H(a, b);
        return out;
    };
}

Tensor third_derivative(const Manifold& M, const ScalarField& f, const Vec& p, const Mat& frame,
                        const FdSteps& steps) {
    const int n = int(frame.cols());
    const double eps = analytic_hessian(f) ? steps.inner : steps.outer;
    std::vector<double> d = covariant_derivative(M, p, frame, hessian_field(M, f, steps), eps, steps.richardson);
    Tensor T(n, 3);
    T.values() = std::move(d);
    return T;
}

PotentialCheck self_test(const Manifold& M, const PotentialSpec& pot, const std::vector<Vec>& points, double tol) {
    PotentialCheck out;
    ScalarField value_only;
    value_only.value = pot.psi.value;
    const FdSteps steps;
    for (const Vec& p : points) {
        const Mat F = M.tangent_basis(p);
        const Vec dA = differential(M, pot.psi, p, F);
        const Vec dN = differential(M, value_only, p, F);
        const double scale = std::max(1.0, dA.cwiseAbs().maxCoeff());
        out.max_gradient_error = std::max(out.max_gradient_error, (dA - dN).cwiseAbs().maxCoeff() / scale);
        const Mat HA = hessian(M, pot.psi, p, F);
        ScalarField grad_only;
        grad_only.value = pot.psi.value;
        grad_only.differential = pot.psi.differential;
        Mat HN;
        if (grad_only.differential) {
            HN = hessian(M, grad_only, p, F, steps);
        } else {
            HN = hessian(M, value_only, p, F, FdSteps{1e-3, 1e-3, true});
        }
        const double hs = std::max(1.0, HA.cwiseAbs().maxCoeff());
        out.max_hessian_error = std::max(out.max_hessian_error, (HA - HN).cwiseAbs().maxCoeff() / hs);
    }
    out.passed = out.max_gradient_error <= tol && out.max_hessian_error <= tol;
    return out;
}

}  // namespace stein
