#pragma once

#include "stein/manifold.hpp"

#include <functional>
#include <string>

namespace stein {

// Scalar function on a manifold, given through an extension F to ambient/chart coordinates.
// Only `value` is mandatory; missing derivatives fall back to finite differences along geodesics.
// All callbacks must be safe to call concurrently.
struct ScalarField {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> differential;     // ambient partial derivatives dF
    std::function<Mat(const Vec&)> ambient_hessian;  // ambient second derivatives D^2F
    // Intrinsic Hessian in a frame; overrides ambient_hessian when present.
    std::function<Mat(const Manifold&, const Vec&, const Mat&)> frame_hessian;

    static ScalarField constant(double c);
    // F(x) = <b, x> + c.
    static ScalarField linear(const Vec& b, double c = 0.0);
    // F(x) = x^T Q x + <b, x> + c with Q symmetric.
    static ScalarField quadratic(const Mat& Q, const Vec& b, double c = 0.0);
    // F(x) = x_i^k.
    static ScalarField coordinate_power(int i, int k);
    // Linear combination a f + b g (derivatives combine when both sides provide them).
    static ScalarField combine(double a, const ScalarField& f, double b, const ScalarField& g);
};

// Random cubic polynomial in `dim` variables with coefficients uniform in [-1, 1].
ScalarField random_polynomial(int dim, int degree, unsigned long long seed);

struct PotentialSpec {
    std::string name = "zero";
    ScalarField psi;
    // Optional (nabla Hess psi)(e_x; e_a, e_b) in the given frame, rank-3 tensor [x][a][b].
    std::function<Tensor(const Manifold&, const Vec&, const Mat&)> nabla_hessian;
    double K = 0.0;                 // claimed lower bound: Ric_psi >= 2K
    bool is_zero = false;
    bool parallel_hessian = false;  // nabla Hess psi == 0
    Mat gaussian_A;                  // set by gaussian(): invariant law N(y, (2A)^-1)
    Vec gaussian_mean;

    static PotentialSpec zero(double K = 0.0);
    // psi(x) = -1/2 <x - y, A (x - y)> on euclidean space; Ric_psi = 2A.
    static PotentialSpec gaussian(const Mat& A, const Vec& y);
    // psi(x) = log p_t(x, y) for the heat kernel of hyperbolic3(kappa); Ric_psi >= 2(kappa + 1/t).
    static PotentialSpec log_heat_kernel(double kappa, double t, const Vec& y);
};

// Central-difference steps for covariant derivatives along geodesics.
// `inner` is used for the first difference of analytic data, `outer` for the next nesting level;
// each further level multiplies the step by `growth`.
struct FdSteps {
    double outer = 1e-3;
    double inner = 1e-4;
    bool richardson = true;
    double growth = 1.0;

    // Step for the given nesting depth (1 = differences of analytic data).
    double at_depth(int depth) const;
};

// Steps used by the identity checks, which nest up to three difference levels.
FdSteps identity_steps();

// A tensor field evaluated in a frame: (point, orthonormal frame) -> flattened components.
using FrameField = std::function<std::vector<double>(const Vec&, const Mat&)>;

// Covariant derivative of a frame field: result[x * m + k] = (nabla_{e_x} T)_k, m = field size.
// Differentiates components along geodesics with parallel-transported frames.
std::vector<double> covariant_derivative(const Manifold& M, const Vec& p, const Mat& frame,
                                         const FrameField& field, double eps, bool richardson = true);

// df in frame coordinates.
Vec differential(const Manifold& M, const ScalarField& f, const Vec& p, const Mat& frame);
// Riemannian gradient of f as a tangent vector in ambient coordinates.
Vec gradient(const Manifold& M, const ScalarField& f, const Vec& p);
// Hess f (= nabla df) in frame coordinates.
Mat hessian(const Manifold& M, const ScalarField& f, const Vec& p, const Mat& frame,
            const FdSteps& steps = {});
// nabla nabla df in frame coordinates, [x][a][b] = (nabla_x Hess f)(a, b).
Tensor third_derivative(const Manifold& M, const ScalarField& f, const Vec& p, const Mat& frame,
                        const FdSteps& steps = {});

// Frame fields for the derivatives of f.
FrameField differential_field(const Manifold& M, const ScalarField& f);
FrameField hessian_field(const Manifold& M, const ScalarField& f, const FdSteps& steps = {});

struct PotentialCheck {
    double max_gradient_error = 0.0;
    double max_hessian_error = 0.0;
    bool passed = false;
};

// Compares grad/hess callbacks against central differences of psi along geodesics.
PotentialCheck self_test(const Manifold& M, const PotentialSpec& pot, const std::vector<Vec>& points,
                         double tol = 1e-4);

}  // namespace stein
