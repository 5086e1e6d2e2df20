#include "stein/paths.hpp"

#include "stein/rng.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace stein {

// ---- Cameron-Martin weights -------------------------------------------------------

const char* cm_profile_name(CmProfile p) {
    switch (p) {
        case CmProfile::None: return "none";
        case CmProfile::SecondDeriv: return "second_deriv";
        case CmProfile::ThirdDeriv: return "third_deriv";
    }
    return "?";
}

CameronMartinWeights cameron_martin(double t, CmProfile profile) {
    if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "cameron_martin needs t > 0");
    CameronMartinWeights w;
    w.profile = profile;
    w.t = t;
    w.t_end = std::min(1.0, t);
    w.t1 = profile == CmProfile::ThirdDeriv ? 0.5 * w.t_end : w.t_end;
    return w;
}

double CameronMartinWeights::k(double s) const {
    if (profile == CmProfile::None) return 1.0;
    if (s <= 0.0) return 1.0;
    if (s >= t1) return 0.0;
    return (t1 - s) / t1;
}

double CameronMartinWeights::kdot(double s) const {
    if (profile == CmProfile::None) return 0.0;
    return (s >= 0.0 && s < t1) ? -1.0 / t1 : 0.0;
}

double CameronMartinWeights::l(double s) const {
    if (profile != CmProfile::ThirdDeriv) return 1.0;
    if (s <= t1) return 1.0;
    if (s >= t_end) return 0.0;
    return (t_end - s) / (t_end - t1);
}

double CameronMartinWeights::ldot(double s) const {
    if (profile != CmProfile::ThirdDeriv) return 0.0;
    return (s >= t1 && s < t_end) ? -1.0 / (t_end - t1) : 0.0;
}

double CameronMartinWeights::k_energy() const { return profile == CmProfile::None ? 0.0 : 1.0 / t1; }

double CameronMartinWeights::l_energy() const {
    return profile == CmProfile::ThirdDeriv ? 1.0 / (t_end - t1) : 0.0;
}

// ---- Paths --------------------------------------------------------------------------

int step_count(double t, const PathOptions& opt) {
    if (!(t > 0.0)) return 0;
    return std::max(opt.min_steps, int(std::ceil(opt.steps_per_unit * t - 1e-9)));
}

void euler_step(const Manifold& M, const Vec& x, const Mat& F, const Vec& z, const Vec& dB, double h, Vec& x_out,
                Mat& F_out) {
    Vec frame_inc = dB;
    if (z.size() > 0) frame_inc += h * z;
    const Vec v = F * frame_inc;
    const double inj = M.injectivity_radius();
    if (std::isfinite(inj) && frame_inc.norm() > 0.5 * inj)
        throw Error(ErrorKind::StepTooLarge, "increment exceeds half the injectivity radius");
    x_out = M.exp(x, v);
    if (M.kind() == ManifoldKind::Euclidean || M.kind() == ManifoldKind::Circle) {
        F_out = F;
        return;
    }
    F_out = M.orthonormalize(x_out, M.transport_frame_along(x, v, F));
}

namespace {

Vec potential_z(const Manifold& M, const PotentialSpec& pot, const Vec& x, const Mat& F) {
    if (pot.is_zero) return Vec::Zero(F.cols());
    return differential(M, pot.psi, x, F);
}

void fill_dB(std::mt19937_64& rng, std::normal_distribution<double>& nd, double sqrt_h, Vec& dB) {
    for (int a = 0; a < dB.size(); ++a) dB(a) = sqrt_h * nd(rng);
}

void ensure_zero(Tensor& T, int n, int rank) {
    if (T.dim() != n || T.rank() != rank) T = Tensor(n, rank);
    else T.set_zero();
}

// out(a_1..a_s, rest) = sum A(x_1..x_s, rest) W(x_1,a_1)...W(x_s,a_s) over the first `slots` indices.
void pull_back_into(const Tensor& A, const Mat& W, int slots, Tensor& out, Tensor& tmp) {
    const int n = A.dim();
    const int rank = A.rank();
    if (slots == 0) {
        out = A;
        return;
    }
    const Tensor* cur = &A;
    for (int slot = 0; slot < slots; ++slot) {
        Tensor& next = ((slots - slot) % 2 == 1) ? out : tmp;
        ensure_zero(next, n, rank);
        const std::size_t inner = Tensor::size_for(n, rank - slot - 1);
        const std::size_t outer = Tensor::size_for(n, slot);
        for (std::size_t o = 0; o < outer; ++o)
            for (int x = 0; x < n; ++x) {
                const double* src = cur->data() + (o * n + x) * inner;
                for (int a = 0; a < n; ++a) {
                    const double w = W(x, a);
                    if (w == 0.0) continue;
                    double* dst = next.data() + (o * n + a) * inner;
                    for (std::size_t r = 0; r < inner; ++r) dst[r] += w * src[r];
                }
            }
        cur = &next;
    }
}

// Rdb(y, z, d) = sum_x dB_x R(x, y, z, d).
void contract_first(const Tensor& R, const Vec& dB, Tensor& out) {
    const int n = R.dim();
    ensure_zero(out, n, R.rank() - 1);
    const std::size_t inner = out.size();
    for (int x = 0; x < n; ++x) {
        const double b = dB(x);
        if (b == 0.0) continue;
        const double* src = R.data() + x * inner;
        for (std::size_t r = 0; r < inner; ++r) out[r] += b * src[r];
    }
}

// S(x, y, z, d) = sum_i <R(e_i, e_x) R(e_i, e_y) e_z, e_d>.
Tensor double_curvature(const Tensor& R) {
    const int n = R.dim();
    Tensor S(n, 4);
    for (int i = 0; i < n; ++i)
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z)
                    for (int e = 0; e < n; ++e) {
                        const double inner = R(i, y, z, e);
                        if (inner == 0.0) continue;
                        for (int d = 0; d < n; ++d) S(x, y, z, d) += R(i, x, e, d) * inner;
                    }
    return S;
}

// out(.., d) = sum_c E(d, c) in(.., c) applied to every fibre of the last index.
void apply_last(const Mat& E, Tensor& T) {
    const int n = T.dim();
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<RowMat> fibres(T.data(), Eigen::Index(T.size() / n), n);
    fibres = (fibres * E.transpose()).eval();
}

}  // namespace

DiffusionPath simulate_path(const Manifold& M, const Vec& x0, const Mat& frame0, const PotentialSpec& pot, double t,
                            int steps, std::uint64_t seed, std::uint64_t index) {
    if (steps < 1 || !(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "simulate_path needs steps >= 1 and t > 0");
    const int n = int(frame0.cols());
    DiffusionPath p;
    p.t = t;
    p.h = t / steps;
    p.seed = seed;
    p.index = index;
    p.times.resize(steps + 1);
    p.points.reserve(steps + 1);
    p.frames.reserve(steps + 1);
    p.dB.reserve(steps);
    auto rng = path_rng(seed, index);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double sh = std::sqrt(p.h);
    Vec x = x0;
    Mat F = frame0;
    p.points.push_back(x);
    p.frames.push_back(F);
    Vec dB(n), xn;
    Mat Fn;
    for (int i = 0; i < steps; ++i) {
        p.times[i] = i * p.h;
        fill_dB(rng, nd, sh, dB);
        euler_step(M, x, F, potential_z(M, pot, x, F), dB, p.h, xn, Fn);
        x = xn;
        F = Fn;
        p.points.push_back(x);
        p.frames.push_back(F);
        p.dB.push_back(dB);
    }
    p.times[steps] = t;
    return p;
}

DiffusionPath simulate_path(const ManifoldPoint& x0, const PotentialSpec& pot, double t, int steps,
                            std::uint64_t seed) {
    const Manifold& M = *x0.manifold;
    return simulate_path(M, x0.coords, M.tangent_basis(x0.coords), pot, t, steps, seed, 0);
}

// ---- TransportIntegrator ------------------------------------------------------------

TransportIntegrator::TransportIntegrator(int n, int order) : n_(n), order_(order) {
    W = Mat::Identity(n, n);
    Winv = Mat::Identity(n, n);
    if (order >= 2) Wp = Tensor(n, 3);
    if (order >= 3) Wpp = Tensor(n, 4);
}

void TransportIntegrator::step(const CurvatureBundle& left, const Mat& ric_Z_right, const Vec& dB, double h) {
    const int n = n_;
    if (h != last_h_ || last_ric_l_.size() == 0 || left.ric_Z != last_ric_l_ || ric_Z_right != last_ric_r_) {
        Mat A = -0.25 * h * (left.ric_Z + ric_Z_right);
        A = 0.5 * (A + A.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(A);
        const Vec ev = es.eigenvalues();
        const Mat V = es.eigenvectors();
        E_ = V * ev.array().exp().matrix().asDiagonal() * V.transpose();
        Einv_ = V * (-ev.array()).exp().matrix().asDiagonal() * V.transpose();
        last_h_ = h;
        last_ric_l_ = left.ric_Z;
        last_ric_r_ = ric_Z_right;
    }
    if (order_ >= 2) {
        const bool flatR = left.R_zero;
        const bool zeroT = left.T_zero;
        if (!flatR) contract_first(left.R, dB, rdb_);
        if (order_ >= 3) {
            const bool with_wp = !wp_zero_ && (!flatR || !zeroT);
            if (!flatR || !left.nabla_R_zero || !left.nabla_T_zero || with_wp) {
                ensure_zero(src3_, n, 4);
                if (!left.nabla_R_zero) {
                    // (nabla_{W e_a} R)(dB, W e_b) W e_c
                    ensure_zero(buf4_, n, 4);  // (x, z, w, d) = sum_y nabla_R(x, y, z, w, d) dB_y
                    for (int x = 0; x < n; ++x)
                        for (int y = 0; y < n; ++y) {
                            const double b = dB(y);
                            for (int z = 0; z < n; ++z)
                                for (int w = 0; w < n; ++w)
                                    for (int d = 0; d < n; ++d) buf4_(x, z, w, d) += left.nabla_R(x, y, z, w, d) * b;
                        }
                    Tensor pulled;
                    pull_back_into(buf4_, W, 3, pulled, tmp_);
                    for (std::size_t i = 0; i < src3_.size(); ++i) src3_[i] += pulled[i];
                }
                if (with_wp) {
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b)
                            for (int c = 0; c < n; ++c)
                                for (int y = 0; y < n; ++y)
                                    for (int z = 0; z < n; ++z) {
                                        // R(dB, W'(a,b)) W e_c + R(dB, W e_b) W'(a,c) + R(dB, W e_a) W'(b,c), and the
                                        // same pattern for -h/2 T
                                        const double c1 =
                                            Wp(a, b, y) * W(z, c) + W(y, b) * Wp(a, c, z) + W(y, a) * Wp(b, c, z);
                                        if (c1 == 0.0) continue;
                                        for (int d = 0; d < n; ++d) {
                                            double s = 0.0;
                                            if (!flatR) s += rdb_(y, z, d);
                                            if (!zeroT) s -= 0.5 * h * left.T(y, z, d);
                                            src3_(a, b, c, d) += c1 * s;
                                        }
                                    }
                }
                if (!flatR) {
                    if (S_.size() == 0 || left.R.values() != last_R_.values()) {
                        S_ = double_curvature(left.R);
                        last_R_ = left.R;
                    }
                    pull_back_into(S_, W, 3, buf4_, tmp_);
                    for (std::size_t i = 0; i < src3_.size(); ++i) src3_[i] += h * buf4_[i];
                }
                if (!left.nabla_T_zero) {
                    pull_back_into(left.nabla_T, W, 3, buf4_, tmp_);
                    for (std::size_t i = 0; i < src3_.size(); ++i) src3_[i] -= 0.5 * h * buf4_[i];
                }
                for (std::size_t i = 0; i < Wpp.size(); ++i) Wpp[i] += src3_[i];
                wpp_zero_ = false;
            }
            if (!wpp_zero_) apply_last(E_, Wpp);
        }
        if (!flatR || !zeroT) {
            ensure_zero(src2_, n, 3);
            if (!flatR) pull_back_into(rdb_, W, 2, src2_, tmp_);
            if (!zeroT) {
                pull_back_into(left.T, W, 2, buf3_, tmp_);
                for (std::size_t i = 0; i < src2_.size(); ++i) src2_[i] -= 0.5 * h * buf3_[i];
            }
            for (std::size_t i = 0; i < Wp.size(); ++i) Wp[i] += src2_[i];
            wp_zero_ = false;
        }
        if (!wp_zero_) apply_last(E_, Wp);
    }
    if (constant_ric_) {
        if (ric0_.size() == 0) {
            ric0_ = left.ric_Z;
            Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (ric0_ + ric0_.transpose())));
            ev0_ = es.eigenvalues();
            V0_ = es.eigenvectors();
        }
        if (steps0_ == 0) h0_ = h;
        constant_ric_ = left.ric_Z == ric0_ && ric_Z_right == ric0_ && h == h0_;
    }
    if (constant_ric_) {
        ++steps0_;
        const Vec d = (-0.5 * (double(steps0_) * h0_) * ev0_).array().exp().matrix();
        W = V0_ * d.asDiagonal() * V0_.transpose();
        Winv = V0_ * d.cwiseInverse().asDiagonal() * V0_.transpose();
    } else {
        W = E_ * W;
        Winv = Winv * Einv_;
    }
}

namespace {

CurvatureLevel level_for(int order) {
    if (order >= 3) return CurvatureLevel::Second;
    if (order == 2) return CurvatureLevel::First;
    return CurvatureLevel::Ricci;
}

// Supplies curvature bundles along a path, reusing one bundle when the setup allows.
class BundleSource {
public:
    BundleSource(const Manifold& M, const PotentialSpec& pot, const Vec& x0, const Mat& F0, int order)
        : M_(M), pot_(pot), level_(level_for(order)), invariant_(frame_invariant(M, pot)) {
        if (invariant_) cache_ = curvature_at(M, x0, F0, pot, level_);
    }
    // Fills `out`; in the invariant case only the frame and z change after the first call.
    void at(const Vec& x, const Mat& F, CurvatureBundle& out) const {
        if (!invariant_) {
            out = curvature_at(M_, x, F, pot_, level_);
            return;
        }
        if (out.n == 0) out = cache_;
        out.frame = F;
        if (!pot_.is_zero) out.z = differential(M_, pot_.psi, x, F);
    }

private:
    const Manifold& M_;
    const PotentialSpec& pot_;
    CurvatureLevel level_;
    bool invariant_;
    CurvatureBundle cache_;
};

TransportState integrate_stored(const Manifold& M, const DiffusionPath& path, const PotentialSpec& pot, int order) {
    const int n = int(path.frames.front().cols());
    BundleSource src(M, pot, path.points.front(), path.frames.front(), order);
    TransportIntegrator ti(n, order);
    TransportState ts;
    ts.n = n;
    ts.order = order;
    auto record = [&] {
        ts.W.push_back(ti.W);
        if (order >= 2) ts.Wp.push_back(ti.Wp);
        if (order >= 3) ts.Wpp.push_back(ti.Wpp);
    };
    record();
    CurvatureBundle left, right;
    src.at(path.points[0], path.frames[0], left);
    for (int i = 0; i < path.steps(); ++i) {
        src.at(path.points[i + 1], path.frames[i + 1], right);
        ti.step(left, right.ric_Z, path.dB[i], path.h);
        record();
        std::swap(left, right);
    }
    return ts;
}

}  // namespace

TransportState transport_W(const Manifold& M, const DiffusionPath& path, const PotentialSpec& pot) {
    return integrate_stored(M, path, pot, 1);
}

TransportState transport_W_prime(const Manifold& M, const DiffusionPath& path, const PotentialSpec& pot) {
    return integrate_stored(M, path, pot, 2);
}

TransportState transport_W_doubleprime(const Manifold& M, const DiffusionPath& path, const PotentialSpec& pot) {
    return integrate_stored(M, path, pot, 3);
}

// ---- Streaming engine ----------------------------------------------------------------

void run_paths(const Manifold& M, const Vec& x0, const Mat& frame0, const PotentialSpec& pot, const EngineConfig& cfg,
               const std::function<void(const PathResult&)>& sink) {
    if (!(cfg.t > 0.0) || cfg.steps < 1) throw Error(ErrorKind::InvalidArgument, "run_paths needs t > 0, steps >= 1");
    const int n = int(frame0.cols());
    const int order = cfg.order;
    CmProfile profile = cfg.profile;
    if (profile == CmProfile::SecondDeriv && order < 2)
        throw Error(ErrorKind::InvalidArgument, "second-derivative weights need W'");
    if (profile == CmProfile::ThirdDeriv && order < 3)
        throw Error(ErrorKind::InvalidArgument, "third-derivative weights need W''");
    const CameronMartinWeights cm = cameron_martin(cfg.t, profile);
    const double h = cfg.t / cfg.steps;
    const double sh = std::sqrt(h);
    const BundleSource src(M, pot, x0, frame0, order);
    // Per-step increments of k and l: exact integrals of kdot, ldot over the step.
    std::vector<double> kd(cfg.steps, 0.0), ld(cfg.steps, 0.0);
    for (int i = 0; i < cfg.steps; ++i) {
        const double s0 = i * h, s1 = (i + 1 == cfg.steps) ? cfg.t : (i + 1) * h;
        kd[i] = (cm.k(s1) - cm.k(s0)) / h;
        ld[i] = (cm.l(s1) - cm.l(s0)) / h;
    }
    const bool need_R_W = profile == CmProfile::ThirdDeriv;
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i)
        if (cfg.checkpoints[i] < 0 || cfg.checkpoints[i] > cfg.steps ||
            (i > 0 && cfg.checkpoints[i] <= cfg.checkpoints[i - 1]))
            throw Error(ErrorKind::InvalidArgument, "checkpoints must be increasing step counts within the path");

    parallel_for(cfg.n_paths, cfg.exec.workers, [&](std::size_t idx) {
        auto rng = path_rng(cfg.seed, idx);
        std::normal_distribution<double> nd(0.0, 1.0);
        PathResult res;
        res.index = idx;
        Vec x = x0, xn;
        Mat F = frame0, Fn;
        Vec dB(n);
        BismutIntegrals& acc = res.acc;
        if (profile != CmProfile::None) {
            acc.Jk = Vec::Zero(n);
            acc.Gk = Tensor(n, 3);
        }
        if (profile == CmProfile::ThirdDeriv) {
            acc.Jl = Vec::Zero(n);
            acc.Gl = Tensor(n, 3);
            acc.Pk = Mat::Zero(n, n);
            acc.Hk = Tensor(n, 4);
        }
        std::size_t next_cp = 0;
        auto snap = [&](int step, const Mat* W) {
            while (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] == step) {
                res.snapshots.push_back({step, x, F, W ? *W : Mat()});
                ++next_cp;
            }
        };
        if (order == 0) {
            snap(0, nullptr);
            for (int i = 0; i < cfg.steps; ++i) {
                fill_dB(rng, nd, sh, dB);
                euler_step(M, x, F, potential_z(M, pot, x, F), dB, h, xn, Fn);
                x = xn;
                F = Fn;
                snap(i + 1, nullptr);
            }
            res.x = x;
            res.F = F;
            sink(res);
            return;
        }
        TransportIntegrator ti(n, order);
        CurvatureBundle left, right;
        src.at(x, F, left);
        Tensor D, tmp;
        // acc(a, b, c) += c * Winv W'(a, b)
        auto add_gamma = [&](Tensor& acc_t, double c) {
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    for (int cc = 0; cc < n; ++cc) {
                        double g = 0.0;
                        for (int e = 0; e < n; ++e) g += ti.Winv(cc, e) * ti.Wp(a, b, e);
                        acc_t(a, b, cc) += c * g;
                    }
        };
        snap(0, &ti.W);
        for (int i = 0; i < cfg.steps; ++i) {
            fill_dB(rng, nd, sh, dB);
            euler_step(M, x, F, left.z, dB, h, xn, Fn);
            if (profile != CmProfile::None && kd[i] != 0.0) {
                const double k = kd[i];
                acc.Jk += k * (ti.W.transpose() * dB);  // (W e_a) . dB
                if (!ti.wp_zero()) add_gamma(acc.Gk, k * h);
                if (profile == CmProfile::ThirdDeriv) {
                    if (!ti.wp_zero())
                        for (int a = 0; a < n; ++a)
                            for (int b = 0; b < n; ++b) {
                                double s = 0.0;
                                for (int c = 0; c < n; ++c) s += ti.Wp(a, b, c) * dB(c);
                                acc.Pk(a, b) += k * s;
                            }
                    const bool has_R = need_R_W && !left.R_zero;
                    if (has_R || !ti.wpp_zero()) {
                        if (has_R) pull_back_into(left.R, ti.W, 3, D, tmp);
                        else ensure_zero(D, n, 4);
                        if (!ti.wpp_zero())
                            for (std::size_t q = 0; q < D.size(); ++q) D[q] -= ti.Wpp[q];
                        apply_last(ti.Winv, D);
                        for (std::size_t q = 0; q < D.size(); ++q) acc.Hk[q] += k * h * D[q];
                    }
                }
            }
            if (profile == CmProfile::ThirdDeriv && ld[i] != 0.0) {
                const double l = ld[i];
                acc.Jl += l * (ti.W.transpose() * dB);
                if (!ti.wp_zero()) add_gamma(acc.Gl, l * h);
            }
            src.at(xn, Fn, right);
            ti.step(left, right.ric_Z, dB, h);
            std::swap(left, right);
            x = xn;
            F = Fn;
            snap(i + 1, &ti.W);
        }
        res.x = x;
        res.F = F;
        res.W = ti.W;
        if (order >= 2) res.Wp = ti.Wp;
        if (order >= 3) res.Wpp = ti.Wpp;
        sink(res);
    });
}

// ---- Martingales -------------------------------------------------------------------

SemigroupFlow SemigroupFlow::eigenfunction(ManifoldPtr M, const ScalarField& f, double rate, double t) {
    SemigroupFlow fl;
    fl.t = t;
    fl.df = [M, f, rate, t](double s, const Vec& x, const Mat& F) {
        return Vec(std::exp(-rate * (t - s)) * differential(*M, f, x, F));
    };
    fl.hess = [M, f, rate, t](double s, const Vec& x, const Mat& F) {
        return Mat(std::exp(-rate * (t - s)) * hessian(*M, f, x, F));
    };
    fl.third = [M, f, rate, t](double s, const Vec& x, const Mat& F) {
        Tensor T = third_derivative(*M, f, x, F);
        const double c = std::exp(-rate * (t - s));
        for (std::size_t i = 0; i < T.size(); ++i) T[i] *= c;
        return T;
    };
    return fl;
}

namespace {

Vec wprime(const Tensor& Wp, const Vec& u, const Vec& v) {
    const int n = Wp.dim();
    Vec out = Vec::Zero(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double c = u(a) * v(b);
            if (c == 0.0) continue;
            for (int d = 0; d < n; ++d) out(d) += c * Wp(a, b, d);
        }
    return out;
}

}  // namespace

double martingale_value(int order, const SemigroupFlow& flow, double s, const Vec& x, const Mat& F, const Mat& W,
                        const Tensor& Wp, const Tensor& Wpp, const Vec& u, const Vec& v, const Vec& w) {
    const Vec g = flow.df(s, x, F);
    const Vec Wu = W * u;
    if (order == 1) return g.dot(Wu);
    const Mat H = flow.hess(s, x, F);
    const Vec Wv = W * v;
    if (order == 2) return Wu.dot(H * Wv) + g.dot(wprime(Wp, u, v));
    const int n = int(u.size());
    const Vec Ww = W * w;
    const Tensor T3 = flow.third(s, x, F);
    double val = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) val += T3(a, b, c) * Wu(a) * Wv(b) * Ww(c);
    val += Wv.dot(H * wprime(Wp, u, w)) + wprime(Wp, u, v).dot(H * Ww) + Wu.dot(H * wprime(Wp, v, w));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const double k = u(a) * v(b) * w(c);
                if (k == 0.0) continue;
                for (int d = 0; d < n; ++d) val += k * g(d) * Wpp(a, b, c, d);
            }
    return val;
}

std::vector<double> martingale_samples(const DiffusionPath& path, const TransportState& ts, const SemigroupFlow& flow,
                                       int order, const Vec& u, const Vec& v, const Vec& w) {
    if (ts.order < order) throw Error(ErrorKind::InvalidArgument, "transport state lacks the needed order");
    std::vector<double> out;
    out.reserve(path.points.size());
    const Tensor none;
    for (std::size_t i = 0; i < path.points.size(); ++i) {
        out.push_back(martingale_value(order, flow, path.times[i], path.points[i], path.frames[i], ts.W[i],
                                       order >= 2 ? ts.Wp[i] : none, order >= 3 ? ts.Wpp[i] : none, u, v, w));
    }
    return out;
}

// ---- Binary dump ---------------------------------------------------------------------

namespace {

template <class T>
void put(std::ostream& os, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error(ErrorKind::InvalidArgument, "truncated path dump");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

constexpr char kMagic[8] = {'S', 'T', 'E', 'I', 'N', 'P', 'T', 'H'};

}  // namespace

void write_path_dump(std::ostream& os, const std::vector<DiffusionPath>& paths) {
    const std::uint32_t n = paths.empty() ? 0 : std::uint32_t(paths.front().points.front().size());
    const std::uint64_t N = paths.empty() ? 0 : std::uint64_t(paths.front().steps());
    for (const auto& p : paths)
        if (std::uint64_t(p.steps()) != N) throw Error(ErrorKind::InvalidArgument, "paths must share the step count");
    os.write(kMagic, 8);
    put<std::uint32_t>(os, 1);
    put<std::uint32_t>(os, n);
    put<std::uint64_t>(os, N);
    put<std::uint64_t>(os, paths.size());
    for (const auto& p : paths)
        for (std::size_t i = 0; i < p.points.size(); ++i) {
            put<double>(os, p.times[i]);
            for (std::uint32_t k = 0; k < n; ++k) put<double>(os, p.points[i](k));
        }
}

std::vector<DiffusionPath> read_path_dump(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw Error(ErrorKind::InvalidArgument, "not a path dump");
    const auto version = get<std::uint32_t>(is);
    if (version != 1) throw Error(ErrorKind::InvalidArgument, "unsupported path dump version");
    const auto n = get<std::uint32_t>(is);
    const auto N = get<std::uint64_t>(is);
    const auto count = get<std::uint64_t>(is);
    std::vector<DiffusionPath> out(count);
    for (auto& p : out) {
        p.times.resize(N + 1);
        p.points.resize(N + 1);
        for (std::uint64_t i = 0; i <= N; ++i) {
            p.times[i] = get<double>(is);
            p.points[i] = Vec(int(n));
            for (std::uint32_t k = 0; k < n; ++k) p.points[i](k) = get<double>(is);
        }
        p.t = p.times.back();
        p.h = N > 0 ? p.t / double(N) : 0.0;
    }
    return out;
}

}  // namespace stein
