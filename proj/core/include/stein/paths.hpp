#pragma once

#include "stein/curvature.hpp"
#include "stein/parallel.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace stein {

// ---- Cameron-Martin weights -------------------------------------------------------

enum class CmProfile { None, SecondDeriv, ThirdDeriv };

const char* cm_profile_name(CmProfile p);

// Deterministic scalar weights k, l on [0, t].
//   SecondDeriv: k(s) = ((1^t) - s)/(1^t) v 0.
//   ThirdDeriv:  t1 = (1^t)/2, k linear 1 -> 0 on [0, t1]; l = 1 on [0, t1], linear to 0 at 1^t.
struct CameronMartinWeights {
    CmProfile profile = CmProfile::None;
    double t = 0.0;
    double t1 = 0.0;
    double t_end = 0.0;

    double k(double s) const;
    double l(double s) const;
    double kdot(double s) const;
    double ldot(double s) const;
    double k_energy() const;  // int kdot^2
    double l_energy() const;  // int ldot^2
};

CameronMartinWeights cameron_martin(double t, CmProfile profile);

// ---- Paths --------------------------------------------------------------------------

struct PathOptions {
    double steps_per_unit = 1000.0;
    int min_steps = 64;
};

int step_count(double t, const PathOptions& opt = {});

struct DiffusionPath {
    double t = 0.0;
    double h = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    std::vector<double> times;
    std::vector<Vec> points;
    std::vector<Mat> frames;  // orthonormal, realizing stochastic parallel transport
    std::vector<Vec> dB;      // frame-coordinate increments, one per step

    int steps() const { return int(dB.size()); }
};

// One geodesic Euler step x' = exp_x(F dB + grad psi h); the frame is transported along the
// step and re-orthonormalized. `z` is grad psi in frame coordinates.
void euler_step(const Manifold& M, const Vec& x, const Mat& F, const Vec& z, const Vec& dB, double h, Vec& x_out,
                Mat& F_out);

DiffusionPath simulate_path(const Manifold& M, const Vec& x0, const Mat& frame0, const PotentialSpec& pot, double t,
                            int steps, std::uint64_t seed, std::uint64_t index = 0);
DiffusionPath simulate_path(const ManifoldPoint& x0, const PotentialSpec& pot, double t, int steps,
                            std::uint64_t seed);

// ---- Damped transports -----------------------------------------------------------

// Frame coordinates relative to the initial frame at x and the transported frame at X_s:
//   W(b, a)          = component b of W_s(e_a)
//   Wp(a, b, c)      = component c of W'_s(e_a, e_b)
//   Wpp(a, b, c, d)  = component d of W''_s(e_a, e_b, e_c)
class TransportIntegrator {
public:
    TransportIntegrator(int n, int order);

    // Advances over one step: Ito left point for the stochastic and drift sources, and the
    // midpoint exponential exp(-h/4 (ric_Z(left) + ric_Z(right))) for the damping.
    void step(const CurvatureBundle& left, const Mat& ric_Z_right, const Vec& dB, double h);

    int n() const { return n_; }
    int order() const { return order_; }
    bool wp_zero() const { return wp_zero_; }
    bool wpp_zero() const { return wpp_zero_; }
    Mat W, Winv;
    Tensor Wp, Wpp;

private:
    int n_;
    int order_;
    bool wp_zero_ = true;
    bool wpp_zero_ = true;
    Mat last_ric_l_, last_ric_r_, E_, Einv_;
    double last_h_ = -1.0;
    // While Ric_Z has been the same matrix at every step, W = exp(-elapsed/2 Ric_Z) is formed directly
    // instead of as a product of step factors.
    bool constant_ric_ = true;
    Mat ric0_, V0_;
    Vec ev0_;
    double h0_ = 0.0;
    long steps0_ = 0;
    Tensor S_, last_R_;                              // sum_i R(e_i, .) R(e_i, .) and the R it came from
    Tensor rdb_, src2_, src3_, buf3_, buf4_, tmp_;  // scratch
};

struct TransportState {
    int n = 0;
    int order = 0;
    std::vector<Mat> W;
    std::vector<Tensor> Wp;
    std::vector<Tensor> Wpp;
};

TransportState transport_W(const Manifold& M, const DiffusionPath& path, const PotentialSpec& pot);
TransportState transport_W_prime(const Manifold& M, const DiffusionPath& path, const PotentialSpec& pot);
TransportState transport_W_doubleprime(const Manifold& M, const DiffusionPath& path, const PotentialSpec& pot);

// ---- Streaming path engine --------------------------------------------------------

// Per-path Cameron-Martin integrals, all relative to the initial frame (see TransportIntegrator):
//   Jk(a)         = int <W_s(kdot_s e_a), dB_s>             (Jl with ldot)
//   Gk(a, b, c)   = int kdot_s (W_s^{-1} W'_s(e_a, e_b))_c ds (Gl with ldot)
//   Pk(a, b)      = int kdot_s <W'_s(e_a, e_b), dB_s>
//   Hk(a,b,c,d)   = int kdot_s (W_s^{-1}(R(W e_a, W e_b) W e_c - W''_s(e_a, e_b, e_c)))_d ds
struct BismutIntegrals {
    Vec Jk, Jl;
    Tensor Gk, Gl;
    Mat Pk;
    Tensor Hk;
};

struct Snapshot {
    int step = 0;
    Vec x;
    Mat F;
    Mat W;  // empty when order == 0
};

struct PathResult {
    std::uint64_t index = 0;
    std::vector<Snapshot> snapshots;  // one per EngineConfig::checkpoints entry
    Vec x;   // X_t
    Mat F;   // frame at X_t
    Mat W;
    Tensor Wp, Wpp;
    BismutIntegrals acc;
};

struct EngineConfig {
    double t = 1.0;
    int steps = 1000;
    std::uint64_t seed = 0;
    std::size_t n_paths = 1000;
    int order = 0;  // 0 endpoint, 1 W, 2 + W', 3 + W''
    CmProfile profile = CmProfile::None;
    ExecPolicy exec;
    std::vector<int> checkpoints;  // increasing step counts in [0, steps] at which to record a Snapshot
};

// Simulates cfg.n_paths independent paths from (x0, frame0). sink(result) is called once per path,
// possibly concurrently; it should write into storage indexed by result.index.
void run_paths(const Manifold& M, const Vec& x0, const Mat& frame0, const PotentialSpec& pot, const EngineConfig& cfg,
               const std::function<void(const PathResult&)>& sink);

// ---- Local martingales N, N', N'' ------------------------------------------------

// Derivatives of f_s = P_{t-s} f in a frame, supplied in closed form.
struct SemigroupFlow {
    double t = 0.0;
    std::function<Vec(double s, const Vec& x, const Mat& F)> df;
    std::function<Mat(double s, const Vec& x, const Mat& F)> hess;
    std::function<Tensor(double s, const Vec& x, const Mat& F)> third;

    // f with -A f = rate f, so f_s = exp(-rate (t - s)) f.
    static SemigroupFlow eigenfunction(ManifoldPtr M, const ScalarField& f, double rate, double t);
};

// N_s(u), N'_s(u,v) or N''_s(u,v,w) (order 1, 2, 3); u, v, w in initial-frame coordinates.
double martingale_value(int order, const SemigroupFlow& flow, double s, const Vec& x, const Mat& F, const Mat& W,
                        const Tensor& Wp, const Tensor& Wpp, const Vec& u, const Vec& v, const Vec& w);

// Time series N_{s_i} along a stored path.
std::vector<double> martingale_samples(const DiffusionPath& path, const TransportState& ts, const SemigroupFlow& flow,
                                       int order, const Vec& u, const Vec& v, const Vec& w);

// ---- Binary path dump -------------------------------------------------------------

// Little-endian file: 32-byte header {char magic[8] = "STEINPTH", u32 version = 1, u32 n (coordinate
// count), u64 N (steps), u64 count (paths)} then, per path, N+1 records {f64 t, f64 coords[n]}.
void write_path_dump(std::ostream& os, const std::vector<DiffusionPath>& paths);
std::vector<DiffusionPath> read_path_dump(std::istream& is);

}  // namespace stein
