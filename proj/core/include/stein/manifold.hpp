#pragma once

#include "stein/types.hpp"

#include <functional>
#include <limits>
#include <memory>

namespace stein {

enum class ManifoldKind { Euclidean, Sphere, Hyperbolic, Circle, ChartDiffusion };

const char* manifold_kind_name(ManifoldKind kind);

// Diffusion coefficient sigma(x) of a chart diffusion; must be safe to call concurrently.
using SigmaField = std::function<Mat(const Vec&)>;

struct ManifoldSpec {
    ManifoldKind kind = ManifoldKind::Euclidean;
    int dim = 1;
    double kappa = 0.0;          // sphere (> 0) and hyperbolic (< 0)
    double circumference = 0.0;  // circle
    SigmaField sigma;            // chart_diffusion
    Vec domain_lo;
    Vec domain_hi;

    static ManifoldSpec euclidean(int n);
    static ManifoldSpec sphere(int n, double kappa);
    static ManifoldSpec hyperbolic3(double kappa);
    static ManifoldSpec circle(double circumference);
    static ManifoldSpec chart_diffusion(int n, SigmaField sigma, Vec lo, Vec hi);

    void validate() const;
};

struct CutVerdict {
    bool in_cut = false;
    bool unsupported = false;  // set when the manifold has no analytic cut locus
};

class Manifold {
public:
    explicit Manifold(ManifoldSpec spec) : spec_(std::move(spec)) {}
    virtual ~Manifold() = default;

    const ManifoldSpec& spec() const { return spec_; }
    ManifoldKind kind() const { return spec_.kind; }
    int dim() const { return spec_.dim; }
    virtual int ambient_dim() const { return spec_.dim; }

    // Riemannian inner product of tangent vectors written in ambient/chart coordinates.
    virtual double inner(const Vec& p, const Vec& u, const Vec& v) const;
    double norm(const Vec& p, const Vec& v) const { return std::sqrt(std::max(0.0, inner(p, v, v))); }

    virtual Vec project_point(const Vec& x) const { return x; }
    virtual Vec project_tangent(const Vec& p, const Vec& v) const;
    virtual double constraint_residual(const Vec&) const { return 0.0; }
    virtual double tangent_residual(const Vec&, const Vec&) const { return 0.0; }

    // Orthonormal frame at p, columns in ambient coordinates.
    virtual Mat tangent_basis(const Vec& p) const;
    // Gram-Schmidt of the columns of frame with respect to the metric at p.
    Mat orthonormalize(const Vec& p, const Mat& frame) const;
    // Components <frame e_a, v>.
    Vec frame_coords(const Vec& p, const Mat& frame, const Vec& v) const;

    virtual Vec exp(const Vec& p, const Vec& v) const = 0;
    virtual Vec log(const Vec& p, const Vec& q) const = 0;
    virtual double distance(const Vec& p, const Vec& q) const;
    // Parallel transport of w along s -> exp_p(s v), s in [0, 1].
    virtual Vec transport_along(const Vec& p, const Vec& v, const Vec& w) const = 0;
    virtual Mat transport_frame_along(const Vec& p, const Vec& v, const Mat& frame) const;
    Vec transport(const Vec& p, const Vec& q, const Vec& w) const;

    virtual CutVerdict cut_locus(const Vec& p, const Vec& q) const = 0;
    virtual double injectivity_radius() const { return std::numeric_limits<double>::infinity(); }

    // Metric matrix in the manifold's standard chart at the chart image of p.
    virtual Mat metric_at(const Vec& p) const;

    // Riemannian gradient (ambient coordinates) from ambient partial derivatives dF of an extension.
    virtual Vec gradient(const Vec& p, const Vec& dF) const;
    // C(p,u,v) such that Hess f(u,v) = D^2F(u,v) + dF . C(p,u,v).
    virtual Vec connection_correction(const Vec& p, const Vec& u, const Vec& v) const;

    virtual bool constant_curvature() const { return true; }
    virtual double sectional_curvature() const { return 0.0; }
    // Riemann tensor R(e_a, e_b, e_c, e_d) = <R(e_a,e_b)e_c, e_d> in the given orthonormal frame.
    virtual Tensor riemann(const Vec& p, const Mat& frame) const;

    virtual bool compact() const { return false; }
    virtual double volume() const { return std::numeric_limits<double>::infinity(); }

private:
    ManifoldSpec spec_;
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

ManifoldPtr make_manifold(const ManifoldSpec& spec);

class Euclidean final : public Manifold {
public:
    explicit Euclidean(ManifoldSpec spec) : Manifold(std::move(spec)) {}
    Vec exp(const Vec& p, const Vec& v) const override { return p + v; }
    Vec log(const Vec& p, const Vec& q) const override { return q - p; }
    Vec transport_along(const Vec&, const Vec&, const Vec& w) const override { return w; }
    CutVerdict cut_locus(const Vec&, const Vec&) const override { return {}; }
};

class Circle final : public Manifold {
public:
    explicit Circle(ManifoldSpec spec) : Manifold(std::move(spec)) {}
    double circumference() const { return spec().circumference; }
    Vec project_point(const Vec& x) const override;
    Vec exp(const Vec& p, const Vec& v) const override;
    Vec log(const Vec& p, const Vec& q) const override;
    Vec transport_along(const Vec&, const Vec&, const Vec& w) const override { return w; }
    CutVerdict cut_locus(const Vec& p, const Vec& q) const override;
    double injectivity_radius() const override { return 0.5 * circumference(); }
    bool compact() const override { return true; }
    double volume() const override { return circumference(); }
    // Signed shortest displacement from a to b in (-L/2, L/2].
    double wrap(double d) const;
};

// Constant-curvature quadric {<x,x>_s = 1/kappa}: the round sphere in R^{n+1} for kappa > 0,
// the upper sheet of the hyperboloid in Minkowski R^{1,n} for kappa < 0.
class Quadric : public Manifold {
public:
    explicit Quadric(ManifoldSpec spec);
    int ambient_dim() const override { return dim() + 1; }
    double kappa() const { return spec().kappa; }
    double radius() const { return rho_; }

    double ambient_inner(const Vec& a, const Vec& b) const;
    double inner(const Vec&, const Vec& u, const Vec& v) const override { return ambient_inner(u, v); }
    Vec project_point(const Vec& x) const override;
    Vec project_tangent(const Vec& p, const Vec& v) const override;
    double constraint_residual(const Vec& p) const override;
    double tangent_residual(const Vec& p, const Vec& v) const override;
    Mat tangent_basis(const Vec& p) const override;

    Vec exp(const Vec& p, const Vec& v) const override;
    Vec log(const Vec& p, const Vec& q) const override;
    double distance(const Vec& p, const Vec& q) const override;
    Vec transport_along(const Vec& p, const Vec& v, const Vec& w) const override;
    Mat transport_frame_along(const Vec& p, const Vec& v, const Mat& frame) const override;

    Mat metric_at(const Vec& p) const override;
    Vec gradient(const Vec& p, const Vec& dF) const override;
    Vec connection_correction(const Vec& p, const Vec& u, const Vec& v) const override;
    double sectional_curvature() const override { return kappa(); }
    Tensor riemann(const Vec& p, const Mat& frame) const override;

    // Standard chart: stereographic (sphere) or Poincare ball (hyperbolic).
    Vec to_chart(const Vec& p) const;
    Vec from_chart(const Vec& y) const;

private:
    double rho_;
    bool sphere_;
};

class Sphere final : public Quadric {
public:
    explicit Sphere(ManifoldSpec spec) : Quadric(std::move(spec)) {}
    CutVerdict cut_locus(const Vec& p, const Vec& q) const override;
    double injectivity_radius() const override;
    bool compact() const override { return true; }
    double volume() const override;
};

class Hyperbolic final : public Quadric {
public:
    explicit Hyperbolic(ManifoldSpec spec) : Quadric(std::move(spec)) {}
    CutVerdict cut_locus(const Vec&, const Vec&) const override { return {}; }
};

// Chart R^n with metric g = (sigma sigma^T)^{-1}.
class ChartDiffusion final : public Manifold {
public:
    explicit ChartDiffusion(ManifoldSpec spec) : Manifold(std::move(spec)) {}

    Mat sigma_at(const Vec& x) const;
    Mat metric_at(const Vec& x) const override;
    double inner(const Vec& p, const Vec& u, const Vec& v) const override;
    Mat tangent_basis(const Vec& p) const override { return sigma_at(p); }

    // Gamma(m, i, j) = Gamma^m_{ij}.
    Tensor christoffel(const Vec& x) const;
    // Rm(l, i, j, k): R(d_i, d_j) d_k = Rm(l,i,j,k) d_l.
    Tensor riemann_coords(const Vec& x) const;
    double fd_step(const Vec& x) const;

    Vec exp(const Vec& p, const Vec& v) const override;
    Vec log(const Vec& p, const Vec& q) const override;
    Vec transport_along(const Vec& p, const Vec& v, const Vec& w) const override;
    Mat transport_frame_along(const Vec& p, const Vec& v, const Mat& frame) const override;
    CutVerdict cut_locus(const Vec&, const Vec&) const override { return {false, true}; }

    Vec gradient(const Vec& p, const Vec& dF) const override;
    Vec connection_correction(const Vec& p, const Vec& u, const Vec& v) const override;
    bool constant_curvature() const override { return false; }
    Tensor riemann(const Vec& p, const Mat& frame) const override;

    void check_domain(const Vec& x) const;

private:
    // Integrates the geodesic from (p, v) over unit time, carrying the columns of `carry` by parallel transport.
    void integrate(const Vec& p, const Vec& v, Vec& x_out, Mat* carry) const;
};

// Value types for the public geometry API.
struct ManifoldPoint {
    ManifoldPtr manifold;
    Vec coords;
};

struct TangentVector {
    ManifoldPoint base;
    Vec components;
};

ManifoldPoint make_point(ManifoldPtr m, const Vec& coords);
TangentVector make_tangent(const ManifoldPoint& base, const Vec& components);

Mat metric_at(const ManifoldPoint& p);
ManifoldPoint exp_map(const TangentVector& v);
TangentVector log_map(const ManifoldPoint& p, const ManifoldPoint& q);
TangentVector parallel_transport(const ManifoldPoint& p, const ManifoldPoint& q, const TangentVector& v);
double distance(const ManifoldPoint& p, const ManifoldPoint& q);
bool cut_locus_indicator(const ManifoldPoint& p, const ManifoldPoint& q, bool* unsupported = nullptr);

}  // namespace stein
