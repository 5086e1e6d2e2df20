#pragma once

#include "stein/fields.hpp"
#include "stein/parallel.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace stein {

// Draws pairs (W, W') on a manifold. Points are in ambient/chart coordinates.
struct PairSampler {
    ManifoldPtr manifold;
    std::function<Vec(std::mt19937_64&)> base;
    std::function<Vec(const Vec& w, std::mt19937_64&)> conditional;
    double lambda_scale = 0.0;
    std::string description;

    void validate() const;
};

// Metropolis chain on circle(L) targeting the uniform law, Gaussian proposals of variance lambda.
// With burn_in = 0 the base point is drawn from the stationary law; otherwise the chain is started
// at `start` and run for burn_in steps.
PairSampler circle_metropolis(double circumference, double lambda, int burn_in = 0, double start = 0.0);
// W ~ N(mean, cov) on R^n, W' = W + drift * lambda grad psi(W) + sqrt(lambda) xi.
PairSampler euclidean_gaussian_pairs(const PotentialSpec& pot, const Vec& mean, const Mat& cov, double lambda,
                                     double drift = 1.0);
// W uniform on sphere(n, kappa), W' = exp_W(sqrt(lambda) xi).
PairSampler sphere_geodesic_pairs(int n, double kappa, double lambda);
// W uniform on sphere(n, kappa), W' = the antipode of W with probability p, a geodesic step otherwise.
PairSampler sphere_antipodal_pairs(int n, double kappa, double lambda, double p = 0.2);

struct BasePairs {
    Vec w;
    Mat frame;
    std::vector<Vec> delta;  // log_W(W'_j) in frame coordinates, retained replicas only
    std::size_t discards = 0;
};

struct PairBatch {
    ManifoldPtr manifold;
    std::vector<BasePairs> bases;
    double lambda = 0.0;
    int m_cond = 0;
    std::uint64_t seed = 0;
    std::size_t n_total = 0;
    std::size_t n_used = 0;
    std::size_t n_discarded = 0;
    std::vector<std::string> warnings;

    double discard_fraction() const { return n_total ? double(n_discarded) / double(n_total) : 0.0; }
};

PairBatch collect_pairs(const PairSampler& sampler, std::size_t n_base, int m_cond, std::uint64_t seed,
                        const ExecPolicy& exec = {});

struct MomentEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

struct R1Estimate {
    std::vector<Vec> per_base;  // empty vector for bases without retained replicas
    MomentEstimate abs;
};

struct R2Estimate {
    std::vector<Mat> per_base;
    MomentEstimate abs;  // Frobenius norm
};

R1Estimate estimate_R1(const PairBatch& batch, const PotentialSpec& pot, double lambda);
R2Estimate estimate_R2(const PairBatch& batch, double lambda);

// Per-pair moment averaged within each base, then across bases.
MomentEstimate pair_moment(const PairBatch& batch, const std::function<double(double)>& g);

// Sup norms (Frobenius) of the curvature data entering the transport equations.
struct CurvatureNorms {
    double R = 0.0;        // ||R||
    double nabla_R = 0.0;  // ||nabla R||
    double T = 0.0;        // ||T||
    double nabla_T = 0.0;  // ||nabla T||
    std::string source;
};

// Closed forms on model spaces; UnboundedCurvature when a norm is infinite or unknown.
CurvatureNorms curvature_norms(const Manifold& M, const PotentialSpec& pot);
// Maximum of the bundle norms over the given points (finite-difference cross-check).
CurvatureNorms sampled_curvature_norms(const Manifold& M, const PotentialSpec& pot, const std::vector<Vec>& points);

// Bound functions B_m(t) >= sup |nabla^m P_t f| for the unit-normalized class, m = 1, 2, 3.
// Order 3 uses the Cameron-Martin pair (k, l); order 4 is the variant needing Hess f (|Hess f| <= 1).
double derivative_bound(int order, double t, double K, const CurvatureNorms& norms);

struct SteinConstants {
    bool valid = false;
    bool compact = false;
    double K = 0.0;
    CurvatureNorms norms;
    // Pointwise derivative constants: |nabla^m P_t h| <= C_m e^{-rate t} / (1 ^ t)^{p_m}.
    double C0 = 1.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double C3 = 0.0;
    double rate = 0.0;  // K, or the spectral gap in the compact case
    double gap = 0.0;
    double eps = 0.0;
    // Stein-solution constants.
    double grad = 0.0;  // ||df||: 1/K or C0'/gap
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double c4 = 0.0;    // ||nabla nabla df|| for the c2-class
    double C = 0.0;     // max(grad, c1, c2, c3/6)
    double C_c2 = 0.0;  // max(grad, c1, c4/3)
    std::vector<std::pair<std::string, double>> log;
};

// K > 0: the contractive chain. Compact manifolds with K <= 0 (circle): the spectral chain.
SteinConstants derive_constants(const PotentialSpec& pot, const Manifold& M, double K);
SteinConstants derive_constants(const PotentialSpec& pot, const Manifold& M, double K, const CurvatureNorms& norms);
// Spectral chain with kernel-derivative norms, circle with psi = 0 only.
SteinConstants derive_compact_constants(const Manifold& M, double eps = 0.1);

enum class MetricKind { Wasserstein, C2Class };
const char* metric_kind_name(MetricKind kind);
MetricKind parse_metric_kind(const std::string& s);

struct SteinReport {
    double e_abs_r1 = 0.0;
    double e_abs_r1_se = 0.0;
    double e_abs_r2 = 0.0;
    double e_abs_r2_se = 0.0;
    double third_moment_term = 0.0;
    double third_moment_term_se = 0.0;
    double four_term_bound = 0.0;
    double bound = 0.0;
    MetricKind metric_kind = MetricKind::Wasserstein;
    double lambda = 0.0;
    std::size_t n_base = 0;
    int m_cond = 0;
    double discard_fraction = 0.0;
    std::uint64_t seed = 0;
    SteinConstants constants;
    std::vector<std::string> notes;

    bool operator==(const SteinReport& o) const;
};

SteinReport assemble_bound(const PairBatch& batch, const PotentialSpec& pot, const SteinConstants& constants,
                           MetricKind metric, double lambda);

// Exact L1 quantile distance between two empirical measures on the line.
double wasserstein_line(std::vector<double> a, std::vector<double> b);
// Exact W1 on circle(L) between two empirical measures.
double wasserstein_circle(std::vector<double> a, std::vector<double> b, double circumference);
// Exact W1 on circle(L) between an empirical measure and the uniform law.
double wasserstein_circle_uniform(std::vector<double> a, double circumference);

// Optimal assignment cost (mean distance) between equal-size point sets, Hungarian algorithm.
double assignment_distance(const Manifold& M, const std::vector<Vec>& a, const std::vector<Vec>& b);

struct WassersteinResult {
    double value = 0.0;
    bool approximate = false;
};

// Line (euclidean 1) and circle use the exact 1-D formulas; n >= 2 falls back to the assignment
// problem for at most 512 points per side (flagged approximate), else DimensionUnsupported.
WassersteinResult exact_wasserstein_1d(const Manifold& M, const std::vector<Vec>& a, const std::vector<Vec>& b);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct MarginalCheck {
    KsResult ks;
    double level = 1e-3;
    bool identical() const { return ks.p_value >= level; }
};

// Two-sample test on the first ambient coordinate of W versus W'.
MarginalCheck check_marginals(const PairSampler& sampler, std::size_t n, std::uint64_t seed, double level = 1e-3);

}  // namespace stein
