#include "stein/manifold.hpp"

#include <cmath>
#include <sstream>

namespace stein {

namespace {

// sin(x)/x and sinh(x)/x, accurate near 0.
double sinc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

double sinhc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 + x * x / 6.0;
    return std::sinh(x) / x;
}

// x / sin(x) and x / sinh(x), accurate near 0.
double inv_sinc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 + x * x / 6.0;
    return x / std::sin(x);
}

double inv_sinhc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
    return x / std::sinh(x);
}

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace

const char* manifold_kind_name(ManifoldKind kind) {
    switch (kind) {
        case ManifoldKind::Euclidean: return "euclidean";
        case ManifoldKind::Sphere: return "sphere";
        case ManifoldKind::Hyperbolic: return "hyperbolic3";
        case ManifoldKind::Circle: return "circle";
        case ManifoldKind::ChartDiffusion: return "chart_diffusion";
    }
    return "unknown";
}

ManifoldSpec ManifoldSpec::euclidean(int n) {
    ManifoldSpec s;
    s.kind = ManifoldKind::Euclidean;
    s.dim = n;
    return s;
}

ManifoldSpec ManifoldSpec::sphere(int n, double kappa) {
    ManifoldSpec s;
    s.kind = ManifoldKind::Sphere;
    s.dim = n;
    s.kappa = kappa;
    return s;
}

ManifoldSpec ManifoldSpec::hyperbolic3(double kappa) {
    ManifoldSpec s;
    s.kind = ManifoldKind::Hyperbolic;
    s.dim = 3;
    s.kappa = kappa;
    return s;
}

ManifoldSpec ManifoldSpec::circle(double circumference) {
    ManifoldSpec s;
    s.kind = ManifoldKind::Circle;
    s.dim = 1;
    s.circumference = circumference;
    return s;
}

ManifoldSpec ManifoldSpec::chart_diffusion(int n, SigmaField sigma, Vec lo, Vec hi) {
    ManifoldSpec s;
    s.kind = ManifoldKind::ChartDiffusion;
    s.dim = n;
    s.sigma = std::move(sigma);
    s.domain_lo = std::move(lo);
    s.domain_hi = std::move(hi);
    return s;
}

void ManifoldSpec::validate() const {
    auto bad = [](const std::string& m) { fail(ErrorKind::InvalidArgument, m); };
    if (dim < 1) bad("manifold dimension must be >= 1");
    switch (kind) {
        case ManifoldKind::Euclidean:
            if (dim > kMaxAmbient) bad("euclidean dimension exceeds supported maximum");
            break;
        case ManifoldKind::Sphere:
            if (!(kappa > 0.0)) bad("sphere requires kappa > 0");
            if (dim + 1 > kMaxAmbient) bad("sphere dimension exceeds supported maximum");
            break;
        case ManifoldKind::Hyperbolic:
            if (!(kappa < 0.0)) bad("hyperbolic3 requires kappa < 0");
            if (dim != 3) bad("hyperbolic3 requires dim = 3");
            break;
        case ManifoldKind::Circle:
            if (dim != 1) bad("circle has dim 1");
            if (!(circumference > 0.0)) bad("circle circumference must be positive");
            break;
        case ManifoldKind::ChartDiffusion:
            if (!sigma) bad("chart_diffusion requires a sigma callback");
            if (dim > kMaxAmbient) bad("chart dimension exceeds supported maximum");
            if (domain_lo.size() != 0 && (domain_lo.size() != dim || domain_hi.size() != dim))
                bad("chart domain box has wrong dimension");
            break;
    }
}

ManifoldPtr make_manifold(const ManifoldSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case ManifoldKind::Euclidean: return std::make_shared<Euclidean>(spec);
        case ManifoldKind::Sphere: return std::make_shared<Sphere>(spec);
        case ManifoldKind::Hyperbolic: return std::make_shared<Hyperbolic>(spec);
        case ManifoldKind::Circle: return std::make_shared<Circle>(spec);
        case ManifoldKind::ChartDiffusion: return std::make_shared<ChartDiffusion>(spec);
    }
    fail(ErrorKind::InvalidArgument, "unknown manifold kind");
}

// ---- Manifold defaults -------------------------------------------------------

double Manifold::inner(const Vec&, const Vec& u, const Vec& v) const { return u.dot(v); }

Vec Manifold::project_tangent(const Vec&, const Vec& v) const { return v; }

Mat Manifold::tangent_basis(const Vec&) const { return Mat::Identity(dim(), dim()); }

Mat Manifold::orthonormalize(const Vec& p, const Mat& frame) const {
    Mat out = frame;
    for (int a = 0; a < out.cols(); ++a) {
        Vec c = project_tangent(p, out.col(a));
        for (int b = 0; b < a; ++b) c -= inner(p, out.col(b), c) * out.col(b);
        for (int b = 0; b < a; ++b) c -= inner(p, out.col(b), c) * out.col(b);
        double nrm = norm(p, c);
        if (!(nrm > 1e-300)) fail(ErrorKind::NoConvergence, "degenerate frame in Gram-Schmidt");
        out.col(a) = c / nrm;
    }
    return out;
}

Vec Manifold::frame_coords(const Vec& p, const Mat& frame, const Vec& v) const {
    Vec c(frame.cols());
    for (int a = 0; a < frame.cols(); ++a) c(a) = inner(p, frame.col(a), v);
    return c;
}

double Manifold::distance(const Vec& p, const Vec& q) const { return norm(p, log(p, q)); }

Mat Manifold::transport_frame_along(const Vec& p, const Vec& v, const Mat& frame) const {
    Mat out(frame.rows(), frame.cols());
    for (int a = 0; a < frame.cols(); ++a) out.col(a) = transport_along(p, v, frame.col(a));
    return out;
}

Vec Manifold::transport(const Vec& p, const Vec& q, const Vec& w) const {
    return transport_along(p, log(p, q), w);
}

Mat Manifold::metric_at(const Vec&) const { return Mat::Identity(dim(), dim()); }

Vec Manifold::gradient(const Vec&, const Vec& dF) const { return dF; }

Vec Manifold::connection_correction(const Vec&, const Vec& u, const Vec&) const {
    return Vec::Zero(u.size());
}

Tensor Manifold::riemann(const Vec&, const Mat& frame) const { return Tensor(int(frame.cols()), 4); }

// ---- Circle ------------------------------------------------------------------

double Circle::wrap(double d) const {
    const double L = circumference();
    double w = std::fmod(d, L);
    if (w > 0.5 * L) w -= L;
    if (w <= -0.5 * L) w += L;
    return w;
}

Vec Circle::project_point(const Vec& x) const {
    const double L = circumference();
    double t = std::fmod(x(0), L);
    if (t < 0) t += L;
    if (t >= L) t -= L;
    Vec out(1);
    out(0) = t;
    return out;
}

Vec Circle::exp(const Vec& p, const Vec& v) const {
    Vec x(1);
    x(0) = p(0) + v(0);
    return project_point(x);
}

Vec Circle::log(const Vec& p, const Vec& q) const {
    if (cut_locus(p, q).in_cut) fail(ErrorKind::CutLocus, "circle points are antipodal");
    Vec v(1);
    v(0) = wrap(q(0) - p(0));
    return v;
}

CutVerdict Circle::cut_locus(const Vec& p, const Vec& q) const {
    const double d = std::abs(wrap(q(0) - p(0)));
    return {std::abs(d - 0.5 * circumference()) <= 1e-8, false};
}

// ---- Quadric (sphere / hyperboloid) -------------------------------------------

Quadric::Quadric(ManifoldSpec s) : Manifold(std::move(s)) {
    rho_ = 1.0 / std::sqrt(std::abs(kappa()));
    sphere_ = kappa() > 0.0;
}

double Quadric::ambient_inner(const Vec& a, const Vec& b) const {
    double s = a.dot(b);
    if (!sphere_) s -= 2.0 * a(0) * b(0);
    return s;
}

Vec Quadric::project_point(const Vec& x) const {
    if (sphere_) return x * (rho_ / x.norm());
    Vec y = x;
    if (y(0) < 0) y = -y;
    const double q = -ambient_inner(y, y);
    if (!(q > 0)) fail(ErrorKind::InvalidArgument, "point is not timelike in Minkowski space");
    return y * (rho_ / std::sqrt(q));
}

Vec Quadric::project_tangent(const Vec& p, const Vec& v) const {
    return v - (ambient_inner(v, p) / ambient_inner(p, p)) * p;
}

double Quadric::constraint_residual(const Vec& p) const {
    return std::abs(ambient_inner(p, p) - 1.0 / kappa()) / std::max(1.0, p.squaredNorm());
}

double Quadric::tangent_residual(const Vec& p, const Vec& v) const {
    const double scale = std::max(1e-300, v.norm() * p.norm());
    return std::abs(ambient_inner(p, v)) / scale;
}

Mat Quadric::tangent_basis(const Vec& p) const {
    const int n = dim();
    Mat cand(n + 1, n);
    int skip = 0;
    if (sphere_) {
        p.cwiseAbs().maxCoeff(&skip);
    }
    int c = 0;
    for (int i = 0; i <= n; ++i) {
        if (i == skip) continue;
        Vec e = Vec::Zero(n + 1);
        e(i) = 1.0;
        cand.col(c++) = e;
    }
    return orthonormalize(p, cand);
}

Vec Quadric::exp(const Vec& p, const Vec& v) const {
    const double nv = std::sqrt(std::max(0.0, ambient_inner(v, v)));
    const double phi = nv / rho_;
    Vec q = sphere_ ? Vec(std::cos(phi) * p + sinc(phi) * v) : Vec(std::cosh(phi) * p + sinhc(phi) * v);
    return project_point(q);
}

Vec Quadric::log(const Vec& p, const Vec& q) const {
    const double c = ambient_inner(p, q) / ambient_inner(p, p);  // cos(phi) or cosh(phi)
    Vec w = q - c * p;
    const double nw = std::sqrt(std::max(0.0, ambient_inner(w, w)));
    if (sphere_) {
        if (cut_locus(p, q).in_cut) fail(ErrorKind::CutLocus, "sphere points are antipodal");
        const double phi = std::atan2(nw / rho_, c);
        return project_tangent(p, w * inv_sinc(phi));
    }
    const double phi = std::asinh(nw / rho_);
    return project_tangent(p, w * inv_sinhc(phi));
}

double Quadric::distance(const Vec& p, const Vec& q) const {
    const double c = ambient_inner(p, q) / ambient_inner(p, p);
    Vec w = q - c * p;
    const double nw = std::sqrt(std::max(0.0, ambient_inner(w, w)));
    if (sphere_) return rho_ * std::atan2(nw / rho_, c);
    return rho_ * std::asinh(nw / rho_);
}

Vec Quadric::transport_along(const Vec& p, const Vec& v, const Vec& w) const {
    const double nv = std::sqrt(std::max(0.0, ambient_inner(v, v)));
    if (nv == 0.0) return w;
    const Vec vh = v / nv;
    const double phi = nv / rho_;
    const double a = ambient_inner(w, vh);
    Vec out;
    if (sphere_)
        out = w + a * ((std::cos(phi) - 1.0) * vh - std::sin(phi) / rho_ * p);
    else
        out = w + a * ((std::cosh(phi) - 1.0) * vh + std::sinh(phi) / rho_ * p);
    return project_tangent(exp(p, v), out);
}

Mat Quadric::transport_frame_along(const Vec& p, const Vec& v, const Mat& frame) const {
    const double nv = std::sqrt(std::max(0.0, ambient_inner(v, v)));
    if (nv == 0.0) return frame;
    const Vec vh = v / nv;
    const double phi = nv / rho_;
    Vec dir = sphere_ ? Vec((std::cos(phi) - 1.0) * vh - std::sin(phi) / rho_ * p)
                      : Vec((std::cosh(phi) - 1.0) * vh + std::sinh(phi) / rho_ * p);
    const Vec q = exp(p, v);
    Mat out(frame.rows(), frame.cols());
    for (int a = 0; a < frame.cols(); ++a) {
        Vec col = frame.col(a) + ambient_inner(frame.col(a), vh) * dir;
        out.col(a) = project_tangent(q, col);
    }
    return out;
}

Vec Quadric::to_chart(const Vec& p) const {
    const int n = dim();
    const double s = std::sqrt(std::abs(kappa()));
    if (sphere_) {
        const double h = p(n);
        const double denom = h >= 0 ? 1.0 + s * h : 1.0 - s * h;
        return p.head(n) / denom;
    }
    return p.tail(n) / (1.0 + s * p(0));
}

Vec Quadric::from_chart(const Vec& y) const {
    const int n = dim();
    const double s = std::sqrt(std::abs(kappa()));
    const double r2 = y.squaredNorm();
    Vec x(n + 1);
    if (sphere_) {
        const double d = 1.0 + kappa() * r2;
        x.head(n) = 2.0 * y / d;
        x(n) = (1.0 - kappa() * r2) / (s * d);
    } else {
        const double d = 1.0 + kappa() * r2;  // 1 - |kappa| r^2
        if (!(d > 0)) fail(ErrorKind::OutOfDomain, "point outside the Poincare ball");
        x(0) = (1.0 - kappa() * r2) / (s * d);
        x.tail(n) = 2.0 * y / d;
    }
    return x;
}

Mat Quadric::metric_at(const Vec& p) const {
    const Vec y = to_chart(p);
    const double d = 1.0 + kappa() * y.squaredNorm();
    return Mat::Identity(dim(), dim()) * (4.0 / (d * d));
}

Vec Quadric::gradient(const Vec& p, const Vec& dF) const {
    Vec g = dF;
    if (!sphere_) g(0) = -g(0);
    return project_tangent(p, g);
}

Vec Quadric::connection_correction(const Vec& p, const Vec& u, const Vec& v) const {
    return -kappa() * ambient_inner(u, v) * p;
}

Tensor Quadric::riemann(const Vec&, const Mat& frame) const {
    const int n = int(frame.cols());
    Mat G(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) G(a, b) = ambient_inner(frame.col(a), frame.col(b));
    Tensor R(n, 4);
    const double k = kappa();
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) R(a, b, c, d) = k * (G(b, c) * G(a, d) - G(a, c) * G(b, d));
    return R;
}

CutVerdict Sphere::cut_locus(const Vec& p, const Vec& q) const {
    return {(p + q).norm() <= 1e-8, false};
}

double Sphere::injectivity_radius() const { return M_PI * radius(); }

double Sphere::volume() const {
    const int n = dim();
    // |S^n| = 2 pi^{(n+1)/2} / Gamma((n+1)/2), scaled by rho^n.
    return 2.0 * std::pow(M_PI, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1)) * std::pow(radius(), n);
}

// ---- ChartDiffusion -------------------------------------------------------------

void ChartDiffusion::check_domain(const Vec& x) const {
    const auto& s = spec();
    if (s.domain_lo.size() == 0) return;
    for (int i = 0; i < dim(); ++i) {
        if (!(x(i) >= s.domain_lo(i) && x(i) <= s.domain_hi(i))) {
            std::ostringstream os;
            os << "chart point leaves the domain box in coordinate " << i;
            fail(ErrorKind::OutOfDomain, os.str());
        }
    }
}

Mat ChartDiffusion::sigma_at(const Vec& x) const {
    Mat s = spec().sigma(x);
    const int n = dim();
    if (s.rows() != n || s.cols() != n) fail(ErrorKind::InvalidArgument, "sigma callback returned wrong shape");
    if (!s.allFinite()) fail(ErrorKind::SingularCoefficient, "sigma is not finite");
    Eigen::JacobiSVD<Mat> svd(s);
    const auto& sv = svd.singularValues();
    if (!(sv(n - 1) > 1e-12 * std::max(1.0, sv(0))))
        fail(ErrorKind::SingularCoefficient, "sigma(x) is singular");
    return s;
}

Mat ChartDiffusion::metric_at(const Vec& x) const {
    const Mat s = sigma_at(x);
    const Mat si = s.inverse();
    return si.transpose() * si;
}

double ChartDiffusion::inner(const Vec& p, const Vec& u, const Vec& v) const {
    return u.dot(metric_at(p) * v);
}

double ChartDiffusion::fd_step(const Vec& x) const { return 1e-4 * (1.0 + x.norm()); }

Tensor ChartDiffusion::christoffel(const Vec& x) const {
    const int n = dim();
    // Metric derivatives by Richardson-extrapolated central differences.
    const double h = 10.0 * fd_step(x);
    std::vector<Mat> dg(n);
    auto central = [&](int k, double e) {
        Vec xp = x, xm = x;
        xp(k) += e;
        xm(k) -= e;
        return Mat((metric_at(xp) - metric_at(xm)) / (2.0 * e));
    };
    for (int k = 0; k < n; ++k) dg[k] = (4.0 * central(k, 0.5 * h) - central(k, h)) / 3.0;
    const Mat s = sigma_at(x);
    const Mat ginv = s * s.transpose();
    Tensor G(n, 3);
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < n; ++k) acc += ginv(m, k) * (dg[j](k, i) + dg[i](k, j) - dg[k](i, j));
                G(m, i, j) = 0.5 * acc;
            }
    return G;
}

Tensor ChartDiffusion::riemann_coords(const Vec& x) const {
    const int n = dim();
    const double h = fd_step(x);
    std::vector<Tensor> dG(n);
    for (int l = 0; l < n; ++l) {
        Vec xp = x, xm = x;
        xp(l) += h;
        xm(l) -= h;
        Tensor gp = christoffel(xp), gm = christoffel(xm);
        dG[l] = Tensor(n, 3);
        for (std::size_t q = 0; q < gp.size(); ++q) dG[l][q] = (gp[q] - gm[q]) / (2.0 * h);
    }
    const Tensor G = christoffel(x);
    Tensor Rm(n, 4);
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double v = dG[i](l, j, k) - dG[j](l, i, k);
                    for (int m = 0; m < n; ++m) v += G(m, j, k) * G(l, i, m) - G(m, i, k) * G(l, j, m);
                    Rm(l, i, j, k) = v;
                }
    return Rm;
}

Tensor ChartDiffusion::riemann(const Vec& p, const Mat& frame) const {
    const int n = dim();
    const Tensor Rm = riemann_coords(p);
    const Mat g = metric_at(p);
    // Lower the last index: R_ijkw = g_wl Rm^l_ijk.
    Tensor low(n, 4);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int w = 0; w < n; ++w) {
                    double v = 0.0;
                    for (int l = 0; l < n; ++l) v += g(w, l) * Rm(l, i, j, k);
                    low(i, j, k, w) = v;
                }
    // Change basis one slot at a time.
    Tensor cur = low;
    for (int slot = 0; slot < 4; ++slot) {
        Tensor next(n, 4);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d) {
                        int idx[4] = {a, b, c, d};
                        double v = 0.0;
                        for (int r = 0; r < n; ++r) {
                            int src[4] = {a, b, c, d};
                            src[slot] = r;
                            v += frame(r, idx[slot]) * cur(src[0], src[1], src[2], src[3]);
                        }
                        next(a, b, c, d) = v;
                    }
        cur = std::move(next);
    }
    return cur;
}

void ChartDiffusion::integrate(const Vec& p, const Vec& v, Vec& x_out, Mat* carry) const {
    const int n = dim();
    const double speed = std::sqrt(std::max(0.0, inner(p, v, v)));
    const int steps = std::max(4, int(std::ceil(speed / 0.01)));
    const double dt = 1.0 / steps;
    const int nc = carry ? int(carry->cols()) : 0;

    auto accel = [&](const Vec& x, const Vec& xd, const Mat& C, Vec& xdd, Mat& Cd) {
        const Tensor G = christoffel(x);
        xdd = Vec::Zero(n);
        for (int m = 0; m < n; ++m)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) xdd(m) -= G(m, i, j) * xd(i) * xd(j);
        if (nc) {
            Cd = Mat::Zero(n, nc);
            for (int c = 0; c < nc; ++c)
                for (int m = 0; m < n; ++m)
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) Cd(m, c) -= G(m, i, j) * xd(i) * C(j, c);
        }
    };

    Vec x = p, xd = v;
    Mat C = carry ? *carry : Mat(n, 0);
    for (int s = 0; s < steps; ++s) {
        Vec a1, a2, a3, a4;
        Mat c1, c2, c3, c4;
        accel(x, xd, C, a1, c1);
        Vec x2 = x + 0.5 * dt * xd, xd2 = xd + 0.5 * dt * a1;
        Mat C2 = nc ? Mat(C + 0.5 * dt * c1) : C;
        accel(x2, xd2, C2, a2, c2);
        Vec x3 = x + 0.5 * dt * xd2, xd3 = xd + 0.5 * dt * a2;
        Mat C3 = nc ? Mat(C + 0.5 * dt * c2) : C;
        accel(x3, xd3, C3, a3, c3);
        Vec x4 = x + dt * xd3, xd4 = xd + dt * a3;
        Mat C4 = nc ? Mat(C + dt * c3) : C;
        accel(x4, xd4, C4, a4, c4);
        x += dt / 6.0 * (xd + 2.0 * xd2 + 2.0 * xd3 + xd4);
        xd += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        if (nc) C += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    }
    check_domain(x);
    x_out = x;
    if (carry) *carry = C;
}

Vec ChartDiffusion::exp(const Vec& p, const Vec& v) const {
    if (v.norm() == 0.0) return p;
    Vec x;
    integrate(p, v, x, nullptr);
    return x;
}

Vec ChartDiffusion::log(const Vec& p, const Vec& q) const {
    const int n = dim();
    Vec v = q - p;
    const double tol = 1e-12 * (1.0 + q.norm());
    double res_norm = 0.0;
    for (int it = 0; it < 60; ++it) {
        Vec r = exp(p, v) - q;
        res_norm = r.norm();
        if (res_norm <= tol) return v;
        Mat J(n, n);
        const double h = 1e-6 * (1.0 + v.norm());
        for (int k = 0; k < n; ++k) {
            Vec vp = v, vm = v;
            vp(k) += h;
            vm(k) -= h;
            J.col(k) = (exp(p, vp) - exp(p, vm)) / (2.0 * h);
        }
        Vec step = J.fullPivLu().solve(r);
        double damp = 1.0;
        for (int ls = 0; ls < 20; ++ls) {
            Vec cand = v - damp * step;
            if ((exp(p, cand) - q).norm() < res_norm) {
                v = cand;
                break;
            }
            damp *= 0.5;
            if (ls == 19) v = cand;
        }
    }
    if (res_norm <= 1e3 * tol) return v;
    fail(ErrorKind::NoConvergence, "geodesic shooting did not converge");
}

Vec ChartDiffusion::transport_along(const Vec& p, const Vec& v, const Vec& w) const {
    if (v.norm() == 0.0) return w;
    Mat C(dim(), 1);
    C.col(0) = w;
    Vec x;
    integrate(p, v, x, &C);
    return C.col(0);
}

Mat ChartDiffusion::transport_frame_along(const Vec& p, const Vec& v, const Mat& frame) const {
    if (v.norm() == 0.0) return frame;
    Mat C = frame;
    Vec x;
    integrate(p, v, x, &C);
    return C;
}

Vec ChartDiffusion::gradient(const Vec& p, const Vec& dF) const {
    const Mat s = sigma_at(p);
    return s * (s.transpose() * dF);
}

Vec ChartDiffusion::connection_correction(const Vec& p, const Vec& u, const Vec& v) const {
    const int n = dim();
    const Tensor G = christoffel(p);
    Vec c = Vec::Zero(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) c(k) -= G(k, i, j) * u(i) * v(j);
    return c;
}

// ---- Public value-type API -------------------------------------------------------

ManifoldPoint make_point(ManifoldPtr m, const Vec& coords) {
    if (coords.size() != m->ambient_dim()) fail(ErrorKind::InvalidArgument, "point has wrong coordinate count");
    ManifoldPoint p{std::move(m), coords};
    p.coords = p.manifold->project_point(p.coords);
    if (p.manifold->kind() == ManifoldKind::ChartDiffusion)
        static_cast<const ChartDiffusion&>(*p.manifold).check_domain(p.coords);
    return p;
}

TangentVector make_tangent(const ManifoldPoint& base, const Vec& components) {
    if (components.size() != base.manifold->ambient_dim())
        fail(ErrorKind::InvalidArgument, "tangent vector has wrong component count");
    if (base.manifold->tangent_residual(base.coords, components) > 1e-8)
        fail(ErrorKind::InvalidArgument, "vector is not tangent at its base point");
    return TangentVector{base, base.manifold->project_tangent(base.coords, components)};
}

static void same_manifold(const ManifoldPoint& p, const ManifoldPoint& q) {
    if (p.manifold.get() != q.manifold.get())
        fail(ErrorKind::InvalidArgument, "points live on different manifolds");
}

Mat metric_at(const ManifoldPoint& p) { return p.manifold->metric_at(p.coords); }

ManifoldPoint exp_map(const TangentVector& v) {
    const auto& M = *v.base.manifold;
    return ManifoldPoint{v.base.manifold, M.exp(v.base.coords, v.components)};
}

TangentVector log_map(const ManifoldPoint& p, const ManifoldPoint& q) {
    same_manifold(p, q);
    return TangentVector{p, p.manifold->log(p.coords, q.coords)};
}

TangentVector parallel_transport(const ManifoldPoint& p, const ManifoldPoint& q, const TangentVector& v) {
    same_manifold(p, q);
    const auto& M = *p.manifold;
    if (M.cut_locus(p.coords, q.coords).in_cut) fail(ErrorKind::CutLocus, "transport endpoints in cut locus");
    return TangentVector{q, M.transport(p.coords, q.coords, v.components)};
}

double distance(const ManifoldPoint& p, const ManifoldPoint& q) {
    same_manifold(p, q);
    return p.manifold->distance(p.coords, q.coords);
}

bool cut_locus_indicator(const ManifoldPoint& p, const ManifoldPoint& q, bool* unsupported) {
    same_manifold(p, q);
    const CutVerdict v = p.manifold->cut_locus(p.coords, q.coords);
    if (unsupported) *unsupported = v.unsupported;
    return v.in_cut;
}

}  // namespace stein
