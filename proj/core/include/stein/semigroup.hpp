#pragma once

#include "stein/fields.hpp"
#include "stein/manifold.hpp"
#include "stein/parallel.hpp"
#include "stein/paths.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace stein {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    double t = 0.0;
    std::uint64_t seed = 0;
};

// Mean and sample-std / sqrt(n), summed in index order.
McEstimate mc_estimate(const std::vector<double>& samples, double t = 0.0, std::uint64_t seed = 0);

// Start point with the orthonormal frame in which directions u, v, w are given.
struct FramedPoint {
    ManifoldPtr manifold;
    Vec x;
    Mat frame;

    FramedPoint() = default;
    FramedPoint(ManifoldPtr M, Vec x, Mat frame);
    FramedPoint(const ManifoldPoint& p);  // frame = tangent_basis
};

// exp_x(eps * frame u) with the frame transported along the geodesic.
FramedPoint shifted(const FramedPoint& p, const Vec& u, double eps);

struct SimOptions {
    PathOptions path;
    ExecPolicy exec;
};

// Paths sharing start, horizon and seed, with the transport/Bismut data the estimators need.
struct PathBatch {
    FramedPoint start;
    double t = 0.0;
    std::uint64_t seed = 0;
    int order = 0;
    CmProfile profile = CmProfile::None;
    std::vector<PathResult> paths;  // ordered by path index
};

PathBatch simulate_batch(const FramedPoint& start, const PotentialSpec& pot, double t, std::size_t n_paths,
                         std::uint64_t seed, int order, CmProfile profile, const SimOptions& opt = {});

enum class ThirdVariant { C1, C2 };
const char* third_variant_name(ThirdVariant v);

// Per-path samples; their means are the estimators below.
std::vector<double> ptf_samples(const PathBatch& b, const ScalarField& f);
std::vector<double> gradient_samples(const PathBatch& b, const ScalarField& f, const Vec& u);
std::vector<double> hessian_samples(const PathBatch& b, const ScalarField& f, const Vec& u, const Vec& v);
std::vector<double> third_samples(const PathBatch& b, const ScalarField& f, const Vec& u, const Vec& v,
                                  const Vec& w, ThirdVariant variant);

// Frame vectors V at X_t with sample = df(V): gradient W u, Hessian and the c1 third-derivative weight.
Vec gradient_weight(const PathResult& r, const Vec& u);
Vec hessian_weight(const PathResult& r, const Vec& u, const Vec& v);
Vec third_weight(const PathResult& r, const Vec& u, const Vec& v, const Vec& w);

McEstimate estimate_Ptf(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                        std::size_t n_samples, std::uint64_t seed, const SimOptions& opt = {});
McEstimate bismut_gradient(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                           const Vec& u, std::size_t n_samples, std::uint64_t seed, const SimOptions& opt = {});
// (nabla d P_t f)(u, v): u is the direction of the integration by parts.
McEstimate bismut_hessian(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                          const Vec& u, const Vec& v, std::size_t n_samples, std::uint64_t seed,
                          const SimOptions& opt = {});
McEstimate bismut_third(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                        const Vec& u, const Vec& v, const Vec& w, std::size_t n_samples, std::uint64_t seed,
                        ThirdVariant variant, const SimOptions& opt = {});

// Estimator against central differences of the next-lower estimator along exp_x(+-eps u), all on common
// random numbers; `difference` is the per-path estimator minus difference quotient.
struct FdComparison {
    McEstimate estimator;
    McEstimate finite_difference;
    McEstimate difference;
    bool agrees(double k = 3.0) const;
};

FdComparison gradient_vs_fd(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                            const Vec& u, std::size_t n, std::uint64_t seed, double eps = 1e-3,
                            const SimOptions& opt = {});
FdComparison hessian_vs_fd(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                           const Vec& u, const Vec& v, std::size_t n, std::uint64_t seed, double eps = 1e-3,
                           const SimOptions& opt = {});
FdComparison third_vs_fd(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                         const Vec& u, const Vec& v, const Vec& w, std::size_t n, std::uint64_t seed,
                         ThirdVariant variant, double eps = 1e-3, const SimOptions& opt = {});
// c1 against c2 on shared paths (estimator = c1, finite_difference slot = c2).
FdComparison third_variants(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot, double t,
                            const Vec& u, const Vec& v, const Vec& w, std::size_t n, std::uint64_t seed,
                            const SimOptions& opt = {});

// |grad P_t f|(x) <= e^{-Kt} P_t|grad f|(x), compared on shared paths.
struct ContractionCheck {
    double t = 0.0;
    double K = 0.0;
    double lhs = 0.0;  // |E[df(W_t)]|
    double rhs = 0.0;  // e^{-Kt} E|grad f|(X_t)
    double std_error = 0.0;
    bool holds = false;  // lhs <= rhs + 3 SE
};

ContractionCheck gradient_contraction(const FramedPoint& x, const ScalarField& f, const PotentialSpec& pot,
                                      double K, double t, std::size_t n, std::uint64_t seed,
                                      const SimOptions& opt = {});

// Samples from the invariant law mu_psi: closed form for gaussian potentials and for the uniform law
// of compact manifolds with psi = 0; otherwise a single trajectory with 10% burn-in.
std::vector<Vec> invariant_samples(const FramedPoint& x, const PotentialSpec& pot, std::size_t n,
                                   std::uint64_t seed, const SimOptions& opt = {});

struct SteinSolution {
    double f = 0.0;
    double f_std_error = 0.0;
    Vec df;  // frame coordinates at x
    Vec df_std_error;
    double tail_bound = 0.0;
    double quadrature_error = 0.0;  // |trapezoid - trapezoid on every other node| / 3
    double mu_h = 0.0;
    double mu_h_std_error = 0.0;
    double t_max = 0.0;
    std::vector<double> t_grid;
    std::vector<double> integrand;  // P_t h(x) - mu(h) on the grid
    std::vector<double> integrand_std_error;
};

struct SolveOptions {
    double t_min = 1e-3;
    double ratio = 1.3;
    double lipschitz = 1.0;  // Lipschitz constant of h, used in the tail bound
    std::size_t mu_samples = 200000;  // trajectory fallback is capped at 20000
    SimOptions sim;
};

// f(x) = -int_0^T (P_t h(x) - mu(h)) dt on a geometric grid (trapezoid), df by the Bismut gradient.
SteinSolution solve_stein(const FramedPoint& x, const ScalarField& h, const PotentialSpec& pot, double K,
                          double T_max, std::size_t n_samples, std::uint64_t seed, const SolveOptions& opt = {});

struct DecayFit {
    int order = 1;
    std::vector<double> t_grid;
    std::vector<double> sup_estimates;  // max over configurations of E|V_t|
    std::vector<double> sup_std_errors;
    std::vector<double> f_derivative;   // derivative of the supplied f at the first configuration
    double fitted_rate = std::numeric_limits<double>::quiet_NaN();
    double fitted_smallt_exponent = std::numeric_limits<double>::quiet_NaN();
};

struct DecayOptions {
    int configurations = 32;
    double large_t_min = 1.0;   // fit e^{-rate t} on t >= this
    double small_t_max = 0.1;   // fit t^{-p} on t <= this
    double start_spread = 0.5;  // start points exp_x(spread * gaussian) on non-compact spaces
    SimOptions sim;
};

DecayFit decay_profile(const ScalarField& f, const PotentialSpec& pot, const FramedPoint& x, int order,
                       const std::vector<double>& t_grid, std::size_t n_samples, std::uint64_t seed,
                       const DecayOptions& opt = {});

}  // namespace stein
