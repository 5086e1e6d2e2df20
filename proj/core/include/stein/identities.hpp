#pragma once

#include "stein/curvature.hpp"

#include <array>
#include <string>

namespace stein {

// Max-abs residuals (LHS - RHS over all frame components) of the commutation and Weitzenboeck
// identities for f and Z = grad psi, both sides evaluated independently by finite differences.
struct IdentityReport {
    double commutator1 = 0.0;   // d(Zf)(X) = (nabla_Z df)(X) + df(nabla_X Z)
    double commutator2 = 0.0;   // (nabla_X nabla_Z df)(Y)
    double commutator3 = 0.0;   // (nabla_X nabla_Z nabla df)(Y, V)
    double weitzenbock1 = 0.0;  // d Delta f = tr nabla^2 df - df(Ric#)
    double weitzenbock2 = 0.0;  // nabla_X box df
    double weitzenbock3 = 0.0;  // nabla_X box nabla df
    double max() const;
    static const std::array<const char*, 6>& names();
    std::array<double, 6> values() const;
};

IdentityReport verify_tensor_identities(const Manifold& M, const Vec& p, const PotentialSpec& pot,
                                        const ScalarField& f, const FdSteps& steps = identity_steps());
IdentityReport verify_tensor_identities(const ManifoldPoint& p, const PotentialSpec& pot, const ScalarField& f);

// Expansion of f along the geodesic from w to w' with delta = log_w(w').
//   order 2: remainder = f(w') - f(w) - df(delta)
//   order 3: remainder = f(w') - f(w) - df(delta) - 1/2 Hess f(delta, delta)
struct TaylorResult {
    double first = 0.0;            // df(delta)
    double second = 0.0;           // 1/2 Hess f(delta, delta)
    double remainder = 0.0;        // exact residual
    double integral_remainder = 0.0;  // the same residual from the integral form of the remainder
    double sup_third = 0.0;        // sup along the geodesic of |nabla nabla df(e, e, e)|, e the unit velocity
    double delta_norm = 0.0;
    double bound() const;          // sup_third |delta|^3 / 6 (order 3)
};

TaylorResult geodesic_taylor(const Manifold& M, const ScalarField& f, const Vec& w, const Vec& w2, int order,
                             const FdSteps& steps = {});

}  // namespace stein
