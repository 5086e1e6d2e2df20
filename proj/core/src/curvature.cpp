#include "stein/curvature.hpp"

namespace stein {

Vec CurvatureBundle::curv(const Vec& X, const Vec& Y, const Vec& V) const {
    Vec out = Vec::Zero(n);
    for (int a = 0; a < n; ++a) {
        if (X(a) == 0.0) continue;
        for (int b = 0; b < n; ++b) {
            const double xy = X(a) * Y(b);
            if (xy == 0.0) continue;
            for (int c = 0; c < n; ++c) {
                const double xyv = xy * V(c);
                for (int d = 0; d < n; ++d) out(d) += xyv * R(a, b, c, d);
            }
        }
    }
    return out;
}

Vec CurvatureBundle::apply_T(const Vec& X, const Vec& Y) const {
    Vec out = Vec::Zero(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double xy = X(a) * Y(b);
            if (xy == 0.0) continue;
            for (int c = 0; c < n; ++c) out(c) += xy * T(a, b, c);
        }
    return out;
}

namespace {

Tensor to_tensor(int n, int rank, std::vector<double> v) {
    Tensor t(n, rank);
    t.values() = std::move(v);
    return t;
}

bool analytic_hessian(const ScalarField& f) { return bool(f.frame_hessian) || (f.ambient_hessian && f.differential); }

bool hessian_parallel(const PotentialSpec& pot) { return pot.is_zero || pot.parallel_hessian; }

Tensor nabla_hessian(const Manifold& M, const Vec& p, const Mat& frame, const PotentialSpec& pot,
                     const FdSteps& steps) {
    const int n = int(frame.cols());
    if (hessian_parallel(pot)) return Tensor(n, 3);
    if (pot.nabla_hessian) return pot.nabla_hessian(M, p, frame);
    const double eps = analytic_hessian(pot.psi) ? steps.inner : steps.outer;
    return to_tensor(n, 3, covariant_derivative(M, p, frame, hessian_field(M, pot.psi, steps), eps, steps.richardson));
}

}  // namespace

bool frame_invariant(const Manifold& M, const PotentialSpec& pot) {
    if (!M.constant_curvature()) return false;
    if (pot.is_zero) return true;
    const bool flat = M.kind() == ManifoldKind::Euclidean || M.kind() == ManifoldKind::Circle;
    return flat && pot.parallel_hessian;
}

void CurvatureBundle::update_flags() {
    auto zero = [](const Tensor& t) { return t.size() == 0 || t.is_zero(); };
    R_zero = zero(R);
    T_zero = zero(T);
    nabla_R_zero = zero(nabla_R);
    nabla_T_zero = zero(nabla_T);
}

namespace {

CurvatureBundle curvature_unflagged(const Manifold& M, const Vec& p, const Mat& frame, const PotentialSpec& pot,
                                    CurvatureLevel level, const FdSteps& steps);

}  // namespace

CurvatureBundle curvature_at(const Manifold& M, const Vec& p, const Mat& frame, const PotentialSpec& pot,
                             CurvatureLevel level, const FdSteps& steps) {
    CurvatureBundle b = curvature_unflagged(M, p, frame, pot, level, steps);
    b.update_flags();
    return b;
}

namespace {

CurvatureBundle curvature_unflagged(const Manifold& M, const Vec& p, const Mat& frame, const PotentialSpec& pot,
                                    CurvatureLevel level, const FdSteps& steps) {
    const int n = int(frame.cols());
    CurvatureBundle b;
    b.n = n;
    b.level = level;
    b.frame = frame;
    b.R = M.riemann(p, frame);
    b.ric = Mat::Zero(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int i = 0; i < n; ++i) b.ric(x, y) += b.R(x, i, i, y);
    b.ric = 0.5 * (b.ric + b.ric.transpose());
    if (pot.is_zero) {
        b.z = Vec::Zero(n);
        b.hess_psi = Mat::Zero(n, n);
    } else {
        b.z = differential(M, pot.psi, p, frame);
        b.hess_psi = hessian(M, pot.psi, p, frame, steps);
    }
    b.ric_Z = b.ric - 2.0 * b.hess_psi;
    if (level == CurvatureLevel::Ricci) return b;

    const bool cc = M.constant_curvature();
    if (cc) {
        b.nabla_R = Tensor(n, 5);
        b.nabla_ric = Tensor(n, 3);
        b.dstar_R = Tensor(n, 3);
    } else {
        FrameField rfield = [&M](const Vec& q, const Mat& F) { return M.riemann(q, F).values(); };
        b.nabla_R = to_tensor(n, 5, covariant_derivative(M, p, frame, rfield, steps.outer, steps.richardson));
        b.nabla_ric = Tensor(n, 3);
        b.dstar_R = Tensor(n, 3);
        for (int x = 0; x < n; ++x)
            for (int a = 0; a < n; ++a)
                for (int c = 0; c < n; ++c) {
                    double s = 0.0, d = 0.0;
                    for (int i = 0; i < n; ++i) {
                        s += b.nabla_R(x, a, i, i, c);
                        d += b.nabla_R(i, i, x, a, c);
                    }
                    b.nabla_ric(x, a, c) = s;
                    b.dstar_R(x, a, c) = -d;
                }
    }
    b.nabla_hess_psi = nabla_hessian(M, p, frame, pot, steps);
    b.T = Tensor(n, 3);
    for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d) {
                double rz = 0.0;
                for (int z = 0; z < n; ++z) rz += b.z(z) * b.R(z, a, c, d);
                b.T(a, c, d) = b.nabla_ric(a, c, d) - 2.0 * b.nabla_hess_psi(a, c, d) + b.dstar_R(a, c, d) - 2.0 * rz;
            }
    if (level == CurvatureLevel::First) return b;

    b.nabla_T = Tensor(n, 4);
    if (cc) {
        // R is parallel and nabla_x Z = Hess psi(e_x), so only the psi terms survive.
        if (!hessian_parallel(pot)) {
            FrameField nh = [&M, &pot, steps](const Vec& q, const Mat& F) {
                return nabla_hessian(M, q, F, pot, steps).values();
            };
            const Tensor nnh = to_tensor(n, 4, covariant_derivative(M, p, frame, nh, steps.outer, steps.richardson));
            for (std::size_t i = 0; i < nnh.size(); ++i) b.nabla_T[i] = -2.0 * nnh[i];
        }
        for (int x = 0; x < n; ++x)
            for (int a = 0; a < n; ++a)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d) {
                        double s = 0.0;
                        for (int z = 0; z < n; ++z) s += b.hess_psi(x, z) * b.R(z, a, c, d);
                        b.nabla_T(x, a, c, d) -= 2.0 * s;
                    }
    } else {
        FrameField tfield = [&M, &pot, steps](const Vec& q, const Mat& F) {
            return curvature_at(M, q, F, pot, CurvatureLevel::First, steps).T.values();
        };
        b.nabla_T = to_tensor(n, 4, covariant_derivative(M, p, frame, tfield, steps.outer, steps.richardson));
    }
    return b;
}

}  // namespace

CurvatureBundle curvature_at(const ManifoldPoint& p, const PotentialSpec& pot, CurvatureLevel level) {
    const Manifold& M = *p.manifold;
    return curvature_at(M, p.coords, M.tangent_basis(p.coords), pot, level);
}

Mat bakry_emery_at(const Manifold& M, const Vec& p, const Mat& frame, const PotentialSpec& pot) {
    return curvature_at(M, p, frame, pot, CurvatureLevel::Ricci).ric_Z;
}

Mat bakry_emery_at(const ManifoldPoint& p, const PotentialSpec& pot) {
    const Manifold& M = *p.manifold;
    return bakry_emery_at(M, p.coords, M.tangent_basis(p.coords), pot);
}

}  // namespace stein
