#include "stein/identities.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>

namespace stein {

double IdentityReport::max() const {
    const auto v = values();
    return *std::max_element(v.begin(), v.end());
}

const std::array<const char*, 6>& IdentityReport::names() {
    static const std::array<const char*, 6> n = {"commutator1", "commutator2", "commutator3",
                                                  "weitzenbock1", "weitzenbock2", "weitzenbock3"};
    return n;
}

std::array<double, 6> IdentityReport::values() const {
    return {commutator1, commutator2, commutator3, weitzenbock1, weitzenbock2, weitzenbock3};
}

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<double> flat(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Derivative tower of f at a point: the first `depth` of df, Hess, nabla^2 df, nabla^3 df, nabla^4 df.
// Index convention: N3[x][a][b] = (nabla_x Hess f)(a,b), N4[y][x][a][b] = (nabla_y N3)(x,a,b), ...
struct Tower {
    const Manifold& M;
    ScalarField f;
    FdSteps steps;
    bool analytic;

    // Step for the level-th difference on top of the Hessian.
    double eps(int level) const { return steps.at_depth(analytic ? level : level + 1); }
    FrameField field(int order) const {
        // order 1: df, 2: Hess, 3: N3, 4: N4, 5: N5
        if (order == 1) return differential_field(M, f);
        if (order == 2) return hessian_field(M, f, steps);
        FrameField lower = field(order - 1);
        const double e = eps(order - 2);
        const Manifold& MM = M;
        const bool rich = steps.richardson;
        return [&MM, lower, e, rich](const Vec& q, const Mat& F) { return covariant_derivative(MM, q, F, lower, e, rich); };
    }
};

}  // namespace

IdentityReport verify_tensor_identities(const Manifold& M, const Vec& p, const PotentialSpec& pot,
                                        const ScalarField& f, const FdSteps& steps) {
    const Mat F = M.tangent_basis(p);
    const int n = int(F.cols());
    const bool analytic = bool(f.frame_hessian) || (f.ambient_hessian && f.differential);
    Tower tw{M, f, steps, analytic};
    const CurvatureBundle cb = curvature_at(M, p, F, pot, CurvatureLevel::First, steps);

    const Vec df = differential(M, f, p, F);
    const Mat Hf = hessian(M, f, p, F, steps);
    const std::vector<double> N3 = tw.field(3)(p, F);
    const std::vector<double> N4 = tw.field(4)(p, F);
    const std::vector<double> N5 = tw.field(5)(p, F);
    auto n3 = [&](int x, int a, int b) { return N3[(x * n + a) * n + b]; };
    auto n4 = [&](int y, int x, int a, int b) { return N4[((y * n + x) * n + a) * n + b]; };
    auto n5 = [&](int z, int y, int x, int a, int b) { return N5[(((z * n + y) * n + x) * n + a) * n + b]; };
    const Vec& z = cb.z;
    const Mat& Hpsi = cb.hess_psi;
    const Tensor& R = cb.R;

    // Fields whose covariant derivatives form the left-hand sides.
    const PotentialSpec* pp = &pot;
    const Manifold* mp = &M;
    auto zfield = [mp, pp](const Vec& q, const Mat& G) {
        return pp->is_zero ? Vec(Vec::Zero(G.cols())) : differential(*mp, pp->psi, q, G);
    };
    const double e1 = tw.eps(1);
    const double e2 = tw.eps(2);
    const double e3 = tw.eps(3);
    const bool rich = steps.richardson;
    IdentityReport rep;

    // d(Zf)(X)
    {
        FrameField s = [mp, zfield, f](const Vec& q, const Mat& G) {
            return std::vector<double>{zfield(q, G).dot(differential(*mp, f, q, G))};
        };
        const std::vector<double> lhs = covariant_derivative(M, p, F, s, e1, rich);
        std::vector<double> rhs(n, 0.0);
        for (int x = 0; x < n; ++x)
            for (int a = 0; a < n; ++a) rhs[x] += z(a) * Hf(a, x) + Hpsi(x, a) * df(a);
        rep.commutator1 = max_abs_diff(lhs, rhs);
    }
    // (nabla_X nabla_Z df)(Y) = (nabla_Z nabla df)(X,Y) + df(R(Z,X)Y) + Hess f(nabla_X Z, Y)
    {
        const FdSteps st = steps;
        FrameField w = [mp, zfield, f, st](const Vec& q, const Mat& G) {
            const Vec zq = zfield(q, G);
            const Mat H = hessian(*mp, f, q, G, st);
            return flat(Vec(H.transpose() * zq));
        };
        const std::vector<double> lhs = covariant_derivative(M, p, F, w, e1, rich);
        std::vector<double> rhs(n * n, 0.0);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y) {
                double s = 0.0;
                for (int c = 0; c < n; ++c) {
                    s += z(c) * n3(c, x, y) + Hpsi(x, c) * Hf(c, y);
                    for (int d = 0; d < n; ++d) s += z(c) * R(c, x, y, d) * df(d);
                }
                rhs[x * n + y] = s;
            }
        rep.commutator2 = max_abs_diff(lhs, rhs);
    }
    // (nabla_X nabla_Z nabla df)(Y,V)
    {
        FrameField n3f = tw.field(3);
        FrameField w = [zfield, n3f, n](const Vec& q, const Mat& G) {
            const Vec zq = zfield(q, G);
            const std::vector<double> t = n3f(q, G);
            std::vector<double> out(n * n, 0.0);
            for (int c = 0; c < n; ++c)
                for (int k = 0; k < n * n; ++k) out[k] += zq(c) * t[c * n * n + k];
            return out;
        };
        const std::vector<double> lhs = covariant_derivative(M, p, F, w, e2, rich);
        std::vector<double> rhs(n * n * n, 0.0);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int v = 0; v < n; ++v) {
                    double s = 0.0;
                    for (int c = 0; c < n; ++c) {
                        s += z(c) * n4(c, x, y, v) + Hpsi(x, c) * n3(c, y, v);
                        for (int d = 0; d < n; ++d)
                            s += z(c) * (R(c, x, y, d) * Hf(d, v) + R(c, x, v, d) * Hf(y, d));
                    }
                    rhs[(x * n + y) * n + v] = s;
                }
        rep.commutator3 = max_abs_diff(lhs, rhs);
    }
    // d Delta f = tr nabla^2 df - df(Ric#)
    {
        const FdSteps st = steps;
        FrameField lap = [mp, f, st](const Vec& q, const Mat& G) {
            return std::vector<double>{hessian(*mp, f, q, G, st).trace()};
        };
        const std::vector<double> lhs = covariant_derivative(M, p, F, lap, e1, rich);
        std::vector<double> rhs(n, 0.0);
        for (int x = 0; x < n; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += n3(i, i, x) - cb.ric(x, i) * df(i);
            rhs[x] = s;
        }
        rep.weitzenbock1 = max_abs_diff(lhs, rhs);
    }
    // (nabla_X box df)(Y) = (box nabla df)(X,Y) - Hess f(Ric# X, Y) - df(d*R(X,Y)) + 2 tr (nabla_. df)(R(.,X)Y)
    {
        FrameField n3f = tw.field(3);
        FrameField box = [n3f, n](const Vec& q, const Mat& G) {
            const std::vector<double> t = n3f(q, G);
            std::vector<double> out(n, 0.0);
            for (int y = 0; y < n; ++y)
                for (int i = 0; i < n; ++i) out[y] += t[(i * n + i) * n + y];
            return out;
        };
        const std::vector<double> lhs = covariant_derivative(M, p, F, box, e2, rich);
        std::vector<double> rhs(n * n, 0.0);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) {
                    s += n4(i, i, x, y) - cb.ric(x, i) * Hf(i, y) - cb.dstar_R(x, y, i) * df(i);
                    for (int w = 0; w < n; ++w) s += 2.0 * R(i, x, y, w) * Hf(i, w);
                }
                rhs[x * n + y] = s;
            }
        rep.weitzenbock2 = max_abs_diff(lhs, rhs);
    }
    // (nabla_X box nabla df)(V,W)
    {
        FrameField n4f = tw.field(4);
        FrameField box = [n4f, n](const Vec& q, const Mat& G) {
            const std::vector<double> t = n4f(q, G);
            std::vector<double> out(n * n, 0.0);
            for (int v = 0; v < n; ++v)
                for (int w = 0; w < n; ++w)
                    for (int i = 0; i < n; ++i) out[v * n + w] += t[((i * n + i) * n + v) * n + w];
            return out;
        };
        const std::vector<double> lhs = covariant_derivative(M, p, F, box, e3, rich);
        std::vector<double> rhs(n * n * n, 0.0);
        for (int x = 0; x < n; ++x)
            for (int v = 0; v < n; ++v)
                for (int w = 0; w < n; ++w) {
                    double s = 0.0;
                    for (int i = 0; i < n; ++i) {
                        s += n5(i, i, x, v, w) - cb.ric(x, i) * n3(i, v, w);
                        s -= cb.dstar_R(x, v, i) * Hf(i, w) + cb.dstar_R(x, w, i) * Hf(v, i);
                        for (int c = 0; c < n; ++c)
                            s -= 2.0 * (R(x, i, v, c) * n3(i, c, w) + R(x, i, w, c) * n3(i, v, c));
                    }
                    rhs[(x * n + v) * n + w] = s;
                }
        rep.weitzenbock3 = max_abs_diff(lhs, rhs);
    }
    return rep;
}

IdentityReport verify_tensor_identities(const ManifoldPoint& p, const PotentialSpec& pot, const ScalarField& f) {
    return verify_tensor_identities(*p.manifold, p.coords, pot, f);
}

double TaylorResult::bound() const { return sup_third * delta_norm * delta_norm * delta_norm / 6.0; }

TaylorResult geodesic_taylor(const Manifold& M, const ScalarField& f, const Vec& w, const Vec& w2, int order,
                             const FdSteps& steps) {
    if (order != 2 && order != 3) throw Error(ErrorKind::InvalidArgument, "geodesic_taylor order must be 2 or 3");
    const CutVerdict cv = M.cut_locus(w, w2);
    if (cv.in_cut) throw Error(ErrorKind::CutLocus, "geodesic_taylor: endpoints in the cut locus");
    const Vec delta = M.log(w, w2);
    const Mat F = M.tangent_basis(w);
    const Vec d = M.frame_coords(w, F, delta);
    TaylorResult r;
    r.delta_norm = d.norm();
    r.first = differential(M, f, w, F).dot(d);
    const Mat H0 = hessian(M, f, w, F, steps);
    r.second = 0.5 * d.dot(H0 * d);
    const double diff = f.value(w2) - f.value(w);
    r.remainder = diff - r.first - (order == 3 ? r.second : 0.0);

    // Integral form of the remainder by Gauss-Legendre along the geodesic.
    using Quad = boost::math::quadrature::gauss<double, 20>;
    auto along = [&](double s, bool third) {
        const Vec q = M.exp(w, s * delta);
        const Mat G = M.transport_frame_along(w, s * delta, F);
        if (!third) return d.dot(hessian(M, f, q, G, steps) * d);
        const Tensor T3 = third_derivative(M, f, q, G, steps);
        double v = 0.0;
        const int n = int(d.size());
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) v += T3(a, b, c) * d(a) * d(b) * d(c);
        return v;
    };
    if (order == 2) {
        r.integral_remainder = Quad::integrate([&](double s) { return (1.0 - s) * along(s, false); }, 0.0, 1.0);
    } else {
        r.integral_remainder = Quad::integrate([&](double s) { return 0.5 * (1.0 - s) * (1.0 - s) * along(s, true); }, 0.0, 1.0);
    }
    if (r.delta_norm > 0.0) {
        const double n3 = r.delta_norm * r.delta_norm * r.delta_norm;
        for (int i = 0; i <= 16; ++i) r.sup_third = std::max(r.sup_third, std::abs(along(i / 16.0, true)) / n3);
    }
    return r;
}

}  // namespace stein
