#include "stein/semigroup.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stein;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

ManifoldPtr sphere2() { return make_manifold(ManifoldSpec::sphere(2, 1.0)); }
ManifoldPtr flat(int n) { return make_manifold(ManifoldSpec::euclidean(n)); }
ManifoldPtr unit_circle() { return make_manifold(ManifoldSpec::circle(2 * M_PI)); }

PotentialSpec ou(int n) {
    PotentialSpec p = PotentialSpec::gaussian(Mat::Identity(n, n), Vec::Zero(n));
    p.K = 1.0;
    return p;
}

FramedPoint at(const ManifoldPtr& M, const Vec& x) { return FramedPoint(M, x, M->tangent_basis(x)); }
FramedPoint sphere_point() { return at(sphere2(), v3(0.3, -0.5, 0.8).normalized()); }
FramedPoint ou_point() { return at(flat(2), v2(0.5, -0.3)); }

ScalarField height() { return ScalarField::coordinate_power(2, 1); }

ScalarField sin_theta() {
    ScalarField f;
    f.value = [](const Vec& x) { return std::sin(x(0)); };
    f.differential = [](const Vec& x) { return Vec::Constant(1, std::cos(x(0))); };
    f.ambient_hessian = [](const Vec& x) { return Mat::Constant(1, 1, -std::sin(x(0))); };
    return f;
}

SimOptions coarse(double steps_per_unit) {
    SimOptions o;
    o.path.steps_per_unit = steps_per_unit;
    return o;
}

void expect_within(const McEstimate& e, double exact, double k = 3.0) {
    EXPECT_LE(std::abs(e.value - exact), k * e.std_error) << "estimate " << e.value << " exact " << exact
                                                         << " SE " << e.std_error;
}

}  // namespace

// ---- P_t f -------------------------------------------------------------------------------

TEST(EstimatePtf, TimeZeroReturnsFWithoutSimulation) {
    const auto x = sphere_point();
    const auto e = estimate_Ptf(x, height(), PotentialSpec::zero(), 0.0, 100, 1);
    EXPECT_EQ(e.value, x.x(2));
    EXPECT_EQ(e.std_error, 0.0);
}

TEST(EstimatePtf, HeatSemigroupOnSquaredNorm) {
    const auto x = ou_point();
    const auto f = ScalarField::quadratic(Mat::Identity(2, 2), Vec::Zero(2));
    const double t = 0.5;
    expect_within(estimate_Ptf(x, f, PotentialSpec::zero(), t, 4000, 2, coarse(200)), x.x.squaredNorm() + 2 * t);
}

TEST(EstimatePtf, CircleMixesToTheUniformMean) {
    ScalarField f;
    f.value = [](const Vec& x) { return 1.0 + std::cos(x(0)) + 0.5 * std::sin(2 * x(0)); };
    expect_within(estimate_Ptf(at(unit_circle(), Vec::Constant(1, 0.4)), f, PotentialSpec::zero(), 50.0, 2000, 3,
                               coarse(20)),
                  1.0);
}

// ---- gradient -------------------------------------------------------------------------------

TEST(BismutGradient, ConstantFunctionGivesExactZero) {
    const auto e = bismut_gradient(sphere_point(), ScalarField::constant(2.0), PotentialSpec::zero(), 0.5, v2(1, 0),
                                   200, 4, coarse(200));
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.std_error, 0.0);
}

TEST(BismutGradient, OrnsteinUhlenbeckLinearIsExactOnEveryPath) {
    // W_t = e^{-t} I and df = b, so every path carries the same sample.
    const Vec b = v2(1, 2), u = v2(0.6, 0.8);
    const double t = 1.0;
    const auto batch = simulate_batch(ou_point(), ou(2), t, 200, 5, 1, CmProfile::None);
    for (double s : gradient_samples(batch, ScalarField::linear(b), u)) EXPECT_NEAR(s, std::exp(-t) * b.dot(u), 1e-14);
}

TEST(BismutGradient, SphereHeightAgreesWithFiniteDifference) {
    const auto c = gradient_vs_fd(sphere_point(), height(), PotentialSpec::zero(), 0.5, v2(0.6, 0.8), 2000, 6,
                                  1e-3, coarse(200));
    EXPECT_TRUE(c.agrees()) << c.difference.value << " +- " << c.difference.std_error;
}

// ---- Hessian -------------------------------------------------------------------------------

TEST(BismutHessian, FlatLinearIsZero) {
    const auto e = bismut_hessian(ou_point(), ScalarField::linear(v2(1, -2)), PotentialSpec::zero(), 0.5, v2(1, 0),
                                  v2(0, 1), 2000, 7, coarse(200));
    EXPECT_LE(std::abs(e.value), 3 * e.std_error + 1e-15);
}

TEST(BismutHessian, OrnsteinUhlenbeckSquareMatchesClosedForm) {
    // P_t x1^2 = e^{-2t} x1^2 + (1 - e^{-2t}) / 2.
    const double t = 0.5;
    const auto e = bismut_hessian(ou_point(), ScalarField::coordinate_power(0, 2), ou(2), t, v2(1, 0), v2(1, 0), 4000,
                                  8, coarse(200));
    expect_within(e, 2 * std::exp(-2 * t));
    EXPECT_LT(e.std_error, 0.05);
}

TEST(BismutHessian, SphereHeightAgreesWithFiniteDifference) {
    const auto c = hessian_vs_fd(sphere_point(), height(), PotentialSpec::zero(), 0.5, v2(1, 0), v2(0.6, 0.8), 2000,
                                 9, 1e-3, coarse(200));
    EXPECT_TRUE(c.agrees()) << c.difference.value << " +- " << c.difference.std_error;
}

TEST(BismutHessian, SymmetricInItsArguments) {
    const auto batch = simulate_batch(sphere_point(), PotentialSpec::zero(), 0.5, 3000, 10, 2, CmProfile::SecondDeriv,
                                      coarse(200));
    const auto f = ScalarField::coordinate_power(0, 2);
    const Vec u = v2(1, 0), v = v2(0.6, 0.8);
    const auto a = hessian_samples(batch, f, u, v), b = hessian_samples(batch, f, v, u);
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
    const auto e = mc_estimate(d);
    EXPECT_LE(std::abs(e.value), 3 * e.std_error);
}

TEST(Estimators, SamplesAreLinearInF) {
    const auto batch = simulate_batch(sphere_point(), PotentialSpec::zero(), 0.5, 50, 11, 3, CmProfile::ThirdDeriv,
                                      coarse(200));
    const auto f = height(), g = ScalarField::coordinate_power(0, 2);
    const auto fg = ScalarField::combine(1.0, f, 2.0, g);
    const Vec u = v2(1, 0), v = v2(0.6, 0.8), w = v2(0, 1);
    auto check = [](const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c) {
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(c[i], a[i] + 2 * b[i], 1e-10 * (1 + std::abs(c[i])));
    };
    check(ptf_samples(batch, f), ptf_samples(batch, g), ptf_samples(batch, fg));
    check(gradient_samples(batch, f, u), gradient_samples(batch, g, u), gradient_samples(batch, fg, u));
    const auto batch2 = simulate_batch(sphere_point(), PotentialSpec::zero(), 0.5, 50, 11, 2, CmProfile::SecondDeriv,
                                       coarse(200));
    check(hessian_samples(batch2, f, u, v), hessian_samples(batch2, g, u, v), hessian_samples(batch2, fg, u, v));
    check(third_samples(batch, f, u, v, w, ThirdVariant::C1), third_samples(batch, g, u, v, w, ThirdVariant::C1),
          third_samples(batch, fg, u, v, w, ThirdVariant::C1));
}

// ---- third derivative ----------------------------------------------------------------------

TEST(BismutThird, ConstantFunctionGivesExactZero) {
    for (auto variant : {ThirdVariant::C1, ThirdVariant::C2}) {
        const auto e = bismut_third(sphere_point(), ScalarField::constant(1.5), PotentialSpec::zero(), 0.5, v2(1, 0),
                                    v2(0, 1), v2(1, 0), 100, 12, variant, coarse(200));
        EXPECT_EQ(e.value, 0.0) << third_variant_name(variant);
    }
}

TEST(BismutThird, OrnsteinUhlenbeckCubicMatchesClosedForm) {
    // P_t x1^3 = e^{-3t} x1^3 + (3/2) e^{-t}(1 - e^{-2t}) x1, third derivative 6 e^{-3t}.
    const double t = 0.5;
    const Vec e1 = v2(1, 0);
    for (auto variant : {ThirdVariant::C1, ThirdVariant::C2}) {
        const auto e = bismut_third(ou_point(), ScalarField::coordinate_power(0, 3), ou(2), t, e1, e1, e1, 4000, 13,
                                    variant, coarse(200));
        expect_within(e, 6 * std::exp(-3 * t));
    }
}

TEST(BismutThird, VariantsAgreeOnTheSphere) {
    const auto c = third_variants(sphere_point(), height(), PotentialSpec::zero(), 0.5, v2(1, 0), v2(0.6, 0.8),
                                  v2(0, 1), 1500, 14, coarse(200));
    EXPECT_TRUE(c.agrees()) << c.difference.value << " +- " << c.difference.std_error;
}

TEST(BismutThird, ChartDiffusionRefusesVariantC2) {
    const SigmaField id = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
    const auto C = make_manifold(ManifoldSpec::chart_diffusion(2, id, Vec::Constant(2, -5), Vec::Constant(2, 5)));
    try {
        bismut_third(at(C, v2(0.1, 0.2)), ScalarField::coordinate_power(0, 3), PotentialSpec::zero(), 0.2, v2(1, 0),
                     v2(1, 0), v2(1, 0), 10, 15, ThirdVariant::C2, coarse(200));
        FAIL() << "expected Unsupported";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
    }
}

// ---- contraction and decay -------------------------------------------------------------------

TEST(Contraction, HoldsOnTheSphere) {
    for (double t : {0.25, 1.0}) {
        const auto c = gradient_contraction(sphere_point(), ScalarField::linear(v3(1, -0.5, 0.3)),
                                            PotentialSpec::zero(0.5), 0.5, t, 2000, 16, coarse(200));
        EXPECT_TRUE(c.holds) << "t " << t << " lhs " << c.lhs << " rhs " << c.rhs;
        EXPECT_LE(c.lhs, c.rhs + 3 * c.std_error);
    }
}

TEST(DecayProfile, OrnsteinUhlenbeckGradientDecaysAtRateOne) {
    // The profile tracks |W_t u| for unit u, which is e^{-t} on every path.
    DecayOptions opt;
    opt.configurations = 3;
    opt.large_t_min = 1.0;
    opt.sim = coarse(100);
    const auto fit = decay_profile(ScalarField::linear(v2(1, 2)), ou(2), ou_point(), 1, {1.0, 1.5, 2.0, 3.0}, 20, 17,
                                   opt);
    EXPECT_NEAR(fit.fitted_rate, 1.0, 1e-9);
    for (std::size_t i = 0; i < fit.t_grid.size(); ++i)
        EXPECT_NEAR(fit.sup_estimates[i], std::exp(-fit.t_grid[i]), 1e-12);
}

TEST(InvariantSamples, GaussianLawHasTheRightMoments) {
    const auto ys = invariant_samples(ou_point(), ou(2), 20000, 18);
    std::vector<double> m(ys.size()), q(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
        m[i] = ys[i](0);
        q[i] = ys[i](1) * ys[i](1);
    }
    expect_within(mc_estimate(m), 0.0);
    expect_within(mc_estimate(q), 0.5);
}

// ---- Stein equation -------------------------------------------------------------------------

TEST(SolveStein, ConstantHGivesZero) {
    const auto s = solve_stein(ou_point(), ScalarField::constant(3.0), ou(2), 1.0, 5.0, 50, 19);
    EXPECT_EQ(s.f, 0.0);
    EXPECT_EQ(s.df.norm(), 0.0);
}

TEST(SolveStein, OrnsteinUhlenbeckLinearH) {
    // A f = h with A = 1/2 Lap - x . grad and h = x1 is solved by f = -x1.
    const auto x = ou_point();
    SolveOptions opt;
    opt.sim = coarse(200);
    const auto s = solve_stein(x, ScalarField::linear(v2(1, 0)), ou(2), 1.0, 10.0, 4000, 20, opt);
    const double tol = 3 * s.f_std_error + s.quadrature_error + s.tail_bound;
    EXPECT_NEAR(s.f, -x.x(0), tol);
    // The gradient integrand is e^{-t} b: same shape as P_t h, so the same relative quadrature error applies.
    const double dtol = 3 * s.df_std_error.norm() + s.quadrature_error / std::abs(x.x(0)) + std::exp(-10.0);
    EXPECT_NEAR(s.df(0), -1.0, dtol);
    EXPECT_NEAR(s.df(1), 0.0, dtol);
    // Generator residual A f - (h - mu h) on the closed form: 1/2 * 0 - x . (-e1) - x1 = 0.
    EXPECT_LT(tol, 0.2) << "SE " << s.f_std_error << " quadrature " << s.quadrature_error << " tail " << s.tail_bound;
}

TEST(SolveStein, CircleSineIsMinusTwoSine) {
    const double theta = 0.7;
    SolveOptions opt;
    opt.sim = coarse(50);
    const auto s = solve_stein(at(unit_circle(), Vec::Constant(1, theta)), sin_theta(), PotentialSpec::zero(), 0.0, 20.0,
                               8000, 21, opt);
    const double tol = 3 * s.f_std_error + s.quadrature_error + s.tail_bound;
    EXPECT_NEAR(s.f, -2 * std::sin(theta), tol);
    // The gradient integrand is the f integrand scaled by cot(theta).
    EXPECT_NEAR(s.df(0), -2 * std::cos(theta),
                3 * s.df_std_error(0) + s.quadrature_error / std::tan(theta) + 2 * std::exp(-10.0));
    EXPECT_LT(tol, 0.3) << "SE " << s.f_std_error << " quadrature " << s.quadrature_error << " tail " << s.tail_bound;
}

TEST(SolveStein, NonCompactWithoutContractionIsRefused) {
    try {
        solve_stein(ou_point(), ScalarField::linear(v2(1, 0)), PotentialSpec::zero(), 0.0, 5.0, 10, 22);
        FAIL() << "expected NotContractive";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotContractive);
    }
}
