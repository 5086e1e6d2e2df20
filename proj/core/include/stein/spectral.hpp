#pragma once

#include "stein/fields.hpp"
#include "stein/manifold.hpp"
#include "stein/parallel.hpp"
#include "stein/paths.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stein {

enum class GapSource { ClosedForm, RayleighEstimate };
const char* gap_source_name(GapSource s);

// First positive eigenvalue of -1/2 Laplacian and the total volume.
struct SpectralInfo {
    double gap = 0.0;
    GapSource source = GapSource::ClosedForm;
    double volume = 0.0;
};

// circle(L): 1/2 (2 pi / L)^2; sphere(n, kappa): n kappa / 2.
SpectralInfo spectral_gap(const Manifold& M);

// Minimum Rayleigh quotient 1/2 |grad f|^2 / Var f over a truncated basis (Fourier modes on the circle,
// ambient polynomials of degree <= 2 on the sphere). `modes` is the basis size on the circle.
SpectralInfo spectral_gap_rayleigh(const Manifold& M, int modes = 16);

// Nodes and weights of a quadrature rule for the normalized volume measure (weights sum to 1).
struct Quadrature {
    std::vector<Vec> nodes;
    std::vector<double> weights;
    std::string description;
};

// circle: trapezoid with `circle_nodes` points; sphere(2): Gauss-Legendre in the height times uniform
// longitude. Other compact cases fall back to `mc_samples` uniform samples.
struct QuadratureOptions {
    int circle_nodes = 2048;
    int sphere_heights = 64;
    int sphere_longitudes = 128;
    std::size_t mc_samples = 100000;
    std::uint64_t seed = 1;
};

Quadrature volume_quadrature(const Manifold& M, const QuadratureOptions& opt = {});

// Uniform samples from the normalized volume of a compact manifold.
std::vector<Vec> sample_uniform(const Manifold& M, std::size_t n, std::uint64_t seed);

// Hf = integral of f against the normalized volume.
double harmonic_projection(const ScalarField& f, const Manifold& M, const QuadratureOptions& opt = {});

struct PoincareCheck {
    double variance = 0.0;        // ||f - Hf||_2^2
    double dirichlet = 0.0;       // ||grad f||_2^2
    double bound = 0.0;           // dirichlet / (2 gap)
    bool holds(double tol = 1e-8) const { return variance <= bound + tol; }
};

PoincareCheck poincare_check(const ScalarField& f, const Manifold& M, const QuadratureOptions& opt = {});

struct L2DecayPoint {
    double t = 0.0;
    double norm = 0.0;       // ||(P_t - H) f||_2 estimate
    double std_error = 0.0;
    double bound = 0.0;      // e^{-gap t} sqrt(Var f(U))
    bool holds = false;      // norm <= bound + 3 SE
};

struct L2DecayReport {
    double gap = 0.0;
    double variance = 0.0;
    double fitted_rate = 0.0;
    std::vector<L2DecayPoint> points;
    int start_nodes = 0;
    std::size_t paths_per_node = 0;
    bool all_hold() const;
};

struct L2DecayOptions {
    int start_nodes = 64;  // circle: equispaced starts; sphere(2): Gauss-Legendre product grid of about this size
    PathOptions path;
    ExecPolicy exec;
    QuadratureOptions quad;
};

// ||(P_t - H) f||_2 by quadrature over start points and Monte Carlo over paths from each start.
// Each node's squared deviation is estimated without bias from two independent halves of its paths.
L2DecayReport l2_decay_check(const ScalarField& f, const ManifoldPtr& M, const std::vector<double>& t_grid,
                             std::size_t n_samples, std::uint64_t seed, const L2DecayOptions& opt = {});

// Brownian transition density with respect to the Riemannian volume.
double heat_kernel(const Manifold& M, double t, const Vec& x, const Vec& y);

// m-th derivative in the second argument of the circle heat kernel at signed displacement d.
double circle_kernel_derivative(double circumference, double t, double d, int m);

// L2(normalized volume) norm of y -> d^m/dy^m p_eps(x, y) on the circle, by trapezoid quadrature.
double circle_kernel_derivative_norm(double circumference, double eps, int m, int nodes = 2048);

struct HessianBoundCheck {
    double kappa = 0.0;
    double t = 0.0;
    double bound = 0.0;                 // 2 (kappa + 1/t)
    std::vector<double> margins;        // min eig(Ric - 2 Hess log p_t) - bound, one per pair
    std::vector<std::size_t> violated;  // pairs with margin < -tol
    double min_margin() const;
};

// Ric - 2 Hess_x log p_t(x, y) on hyperbolic3(kappa) at the given pairs (hyperboloid coordinates).
HessianBoundCheck hyperbolic_hessian_bound_check(double kappa, double t,
                                                 const std::vector<std::pair<Vec, Vec>>& pairs, double tol = 1e-6);

// Random pairs on hyperbolic3(kappa) with geodesic distance roughly up to max_dist.
std::vector<std::pair<Vec, Vec>> sample_hyperbolic_pairs(double kappa, std::size_t n, double max_dist,
                                                         std::uint64_t seed);

}  // namespace stein
