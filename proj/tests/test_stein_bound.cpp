#include "stein/stein_bound.hpp"
#include "stein/spectral.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace stein;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

PotentialSpec ou(int n) {
    PotentialSpec p = PotentialSpec::gaussian(Mat::Identity(n, n), Vec::Zero(n));
    p.K = 1.0;
    return p;
}

// Invariant law of the unit OU generator: N(0, I/2).
PairSampler ou_pairs(double lambda) {
    return euclidean_gaussian_pairs(ou(2), Vec::Zero(2), 0.5 * Mat::Identity(2, 2), lambda);
}

Vec scalar(double x) { return Vec::Constant(1, x); }

// sqrt(2/s) Gamma((n+1)/2) / Gamma(n/2) = E|N(0, I_n / s)|.
double chi_mean(int n, double s) {
    return std::sqrt(2.0 / s) * boost::math::tgamma(0.5 * (n + 1)) / boost::math::tgamma(0.5 * n);
}

}  // namespace

// ---- pair collection -------------------------------------------------------------------

TEST(CollectPairs, EuclideanDeltaIsTheScaledNoise) {
    // No drift: W' = W + sqrt(lambda) xi, so delta = sqrt(lambda) xi.
    const double lambda = 0.04;
    const auto s = euclidean_gaussian_pairs(ou(2), Vec::Zero(2), 0.5 * Mat::Identity(2, 2), lambda, 0.0);
    std::mt19937_64 rng(7);
    const Vec w = s.base(rng), w2 = s.conditional(w, rng);
    EXPECT_EQ(s.manifold->log(w, w2), Vec(w2 - w));

    const auto batch = collect_pairs(s, 2000, 4, 1);
    EXPECT_EQ(batch.n_used + batch.n_discarded, batch.n_total);
    EXPECT_EQ(batch.n_discarded, 0u);
    std::vector<double> x, x2;
    for (const auto& b : batch.bases) {
        ASSERT_EQ(b.delta.size(), 4u);
        for (const Vec& d : b.delta) {
            x.push_back(d(0) / std::sqrt(lambda));
            x2.push_back(d(1) * d(1) / lambda);
        }
    }
    auto check = [](const std::vector<double>& v, double exact) {
        double m = 0.0, q = 0.0;
        for (double a : v) m += a;
        m /= double(v.size());
        for (double a : v) q += (a - m) * (a - m);
        const double se = std::sqrt(q / double(v.size() - 1) / double(v.size()));
        EXPECT_NEAR(m, exact, 3 * se);
    };
    check(x, 0.0);
    check(x2, 1.0);
}

TEST(CollectPairs, CircleDiscardsOnlyHalfCircumferenceSteps) {
    const double L = 2 * M_PI;
    PairSampler s = circle_metropolis(L, 0.01);
    // 3% of steps land exactly antipodal, the rest are just shorter than half the circumference.
    s.conditional = [L](const Vec& w, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const double step = U(rng) < 0.03 ? 0.5 * L : 0.49 * L * (U(rng) < 0.5 ? 1 : -1);
        return Vec(scalar(std::fmod(w(0) + step + L, L)));
    };
    const auto batch = collect_pairs(s, 1000, 32, 2);
    EXPECT_EQ(batch.n_used + batch.n_discarded, batch.n_total);
    const double p = 0.03, n = double(batch.n_total);
    EXPECT_NEAR(batch.discard_fraction(), p, 3 * std::sqrt(p * (1 - p) / n));
    EXPECT_FALSE(batch.warnings.empty());
    for (const auto& b : batch.bases)
        for (const Vec& d : b.delta) EXPECT_NEAR(std::abs(d(0)), 0.49 * L, 1e-9);
}

TEST(CollectPairs, AntipodalProneSphereSamplerRaises) {
    try {
        collect_pairs(sphere_antipodal_pairs(2, 1.0, 0.01, 0.2), 200, 8, 3);
        FAIL() << "expected ExcessiveCutLocus";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ExcessiveCutLocus);
    }
}

TEST(CollectPairs, RejectsTooFewBases) {
    EXPECT_THROW(collect_pairs(ou_pairs(0.01), 50, 8, 4), Error);
}

// ---- R1 / R2 --------------------------------------------------------------------------

TEST(R1, DriftCancelsAndResidualMatchesChiMean) {
    // With E[delta | W] = lambda grad psi(W), R1 is the replica mean of the noise over sqrt(lambda).
    const double lambda = 0.01;
    for (int m : {8, 32}) {
        const auto batch = collect_pairs(ou_pairs(lambda), 4000, m, 5);
        const auto r1 = estimate_R1(batch, ou(2), lambda);
        EXPECT_NEAR(r1.abs.mean, chi_mean(2, m * lambda), 3 * r1.abs.std_error) << "m " << m;
    }
}

TEST(R1, ReconstructsTheConditionalMeanOfDelta) {
    const double lambda = 0.02;
    const auto pot = ou(2);
    const auto batch = collect_pairs(ou_pairs(lambda), 200, 6, 6);
    const auto r1 = estimate_R1(batch, pot, lambda);
    for (std::size_t i = 0; i < batch.bases.size(); ++i) {
        const auto& b = batch.bases[i];
        Vec mean = Vec::Zero(2);
        for (const Vec& d : b.delta) mean += d;
        mean /= double(b.delta.size());
        // grad psi(W) = -W for the unit Gaussian potential.
        const Vec rebuilt = lambda * (r1.per_base[i] - b.w);
        EXPECT_LT((rebuilt - mean).norm(), 1e-15 + 1e-12 * mean.norm());
    }
}

TEST(R1, DoublingLambdaIsAnAffineMap) {
    const double lambda = 0.02;
    const auto pot = ou(2);
    const auto batch = collect_pairs(ou_pairs(lambda), 200, 6, 7);
    const auto a = estimate_R1(batch, pot, lambda), b = estimate_R1(batch, pot, 2 * lambda);
    for (std::size_t i = 0; i < batch.bases.size(); ++i) {
        const Vec grad = -batch.bases[i].w;
        const Vec expect = 0.5 * (a.per_base[i] + grad) - grad;
        EXPECT_LT((b.per_base[i] - expect).norm(), 1e-12 * (1 + expect.norm()));
    }
}

TEST(R1, ZeroPotentialIsTheMeanStepOverLambda) {
    const double lambda = 0.01;
    const auto batch = collect_pairs(circle_metropolis(2 * M_PI, lambda), 4000, 16, 8);
    const auto r1 = estimate_R1(batch, PotentialSpec::zero(), lambda);
    std::vector<double> comp;
    for (std::size_t i = 0; i < batch.bases.size(); ++i) {
        double m = 0.0;
        for (const Vec& d : batch.bases[i].delta) m += d(0);
        m /= double(batch.bases[i].delta.size());
        EXPECT_NEAR(r1.per_base[i](0), m / lambda, 1e-12);
        comp.push_back(r1.per_base[i](0));
    }
    double mean = 0.0, sq = 0.0;
    for (double c : comp) mean += c;
    mean /= double(comp.size());
    for (double c : comp) sq += (c - mean) * (c - mean);
    const double se = std::sqrt(sq / double(comp.size() - 1) / double(comp.size()));
    EXPECT_LE(std::abs(mean), 3 * se);
}

TEST(R2, ScaledNoiseGivesHalfIdentity) {
    const double lambda = 0.01;
    PairSampler s = ou_pairs(lambda);
    s.conditional = [lambda](const Vec& w, std::mt19937_64& rng) {
        std::normal_distribution<double> nd;
        return Vec(w + std::sqrt(2 * lambda) * v2(nd(rng), nd(rng)));
    };
    const auto batch = collect_pairs(s, 100, 4000, 9);
    const auto r2 = estimate_R2(batch, lambda);
    Mat mean = Mat::Zero(2, 2);
    for (const Mat& r : r2.per_base) mean += r;
    mean /= double(r2.per_base.size());
    // Each entry of the replica average has SD about 1/sqrt(4000 * 100).
    EXPECT_LT((mean - 0.5 * Mat::Identity(2, 2)).norm(), 0.01);
}

TEST(R2, CircleMetropolisMatchesChiSquareOracle) {
    // Uniform target: every proposal is accepted, delta ~ N(0, lambda), so
    // |R2| = |S/m - 1| / 2 with S ~ chi^2_m (wrapping is negligible at this lambda).
    const double lambda = 0.01;
    for (int m : {8, 32}) {
        const auto batch = collect_pairs(circle_metropolis(2 * M_PI, lambda), 4000, m, 10);
        const auto r2 = estimate_R2(batch, lambda);
        const boost::math::chi_squared chi(m);
        boost::math::quadrature::tanh_sinh<double> q;
        const double oracle =
            0.5 * q.integrate([&](double s) { return std::abs(s / m - 1.0) * boost::math::pdf(chi, s); }, 0.0,
                              double(m)) +
            0.5 * q.integrate([&](double s) { return std::abs(s / m - 1.0) * boost::math::pdf(chi, s); }, double(m),
                              std::numeric_limits<double>::infinity());
        EXPECT_NEAR(r2.abs.mean, oracle, 3 * r2.abs.std_error) << "m " << m;
    }
}

// ---- assembly ---------------------------------------------------------------------------

TEST(AssembleBound, ZeroDeltaLeavesOnlyTheDriftResidual) {
    PairSampler s = ou_pairs(0.01);
    s.conditional = [](const Vec& w, std::mt19937_64&) { return w; };
    const auto batch = collect_pairs(s, 2000, 4, 11);
    const auto k = derive_constants(ou(2), *batch.manifold, 1.0);
    const auto r = assemble_bound(batch, ou(2), k, MetricKind::Wasserstein, 0.01);
    EXPECT_EQ(r.third_moment_term, 0.0);
    // R1 = -grad psi(W) = W and R2 = -I/2.
    double e = 0.0;
    for (const auto& b : batch.bases) e += b.w.norm();
    EXPECT_NEAR(r.e_abs_r1, e / double(batch.bases.size()), 1e-12);
    EXPECT_NEAR(r.e_abs_r2, std::sqrt(0.5), 1e-12);
    EXPECT_DOUBLE_EQ(r.bound, k.C * (r.e_abs_r1 + r.e_abs_r2));
}

TEST(AssembleBound, LinearInTheHeadlineConstant) {
    const auto batch = collect_pairs(ou_pairs(0.01), 500, 8, 12);
    auto k = derive_constants(ou(2), *batch.manifold, 1.0);
    for (auto metric : {MetricKind::Wasserstein, MetricKind::C2Class}) {
        const auto a = assemble_bound(batch, ou(2), k, metric, 0.01);
        auto k2 = k;
        k2.C *= 2;
        k2.C_c2 *= 2;
        const auto b = assemble_bound(batch, ou(2), k2, metric, 0.01);
        EXPECT_DOUBLE_EQ(b.bound, 2 * a.bound);
        EXPECT_EQ(a.e_abs_r1, b.e_abs_r1);
        EXPECT_EQ(a.e_abs_r2, b.e_abs_r2);
        EXPECT_EQ(a.third_moment_term, b.third_moment_term);
        EXPECT_EQ(a.four_term_bound, b.four_term_bound);
        // Monotone in each moment component with constants held fixed.
        EXPECT_DOUBLE_EQ(a.bound, (metric == MetricKind::Wasserstein ? k.C : k.C_c2) *
                                      (a.third_moment_term + a.e_abs_r1 + a.e_abs_r2));
    }
}

TEST(AssembleBound, NeedsValidConstants) {
    const auto batch = collect_pairs(ou_pairs(0.01), 100, 2, 13);
    try {
        assemble_bound(batch, ou(2), SteinConstants{}, MetricKind::Wasserstein, 0.01);
        FAIL() << "expected MissingConstants";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingConstants);
    }
}

TEST(AssembleBound, CircleBoundDominatesExactWasserstein) {
    const double L = 2 * M_PI, lambda = 0.01;
    const auto batch = collect_pairs(circle_metropolis(L, lambda), 2000, 16, 14);
    const auto k = derive_constants(PotentialSpec::zero(), *batch.manifold, 0.0);
    const auto r = assemble_bound(batch, PotentialSpec::zero(), k, MetricKind::Wasserstein, lambda);
    std::vector<double> w;
    for (const auto& b : batch.bases) w.push_back(b.w(0));
    const double exact = wasserstein_circle_uniform(w, L);
    EXPECT_GT(exact, 0.0);
    EXPECT_GE(r.bound, exact);
    EXPECT_TRUE(k.compact);
}

// ---- constants ----------------------------------------------------------------------------

TEST(DeriveConstants, FlatGaussianC1IsTheSingularIntegral) {
    const auto E = make_manifold(ManifoldSpec::euclidean(2));
    const auto k = derive_constants(ou(2), *E, 1.0);
    boost::math::quadrature::tanh_sinh<double> q;
    const double J = q.integrate([](double t) { return std::exp(-t) / std::sqrt(t); }, 0.0, 1.0) +
                     q.integrate([](double t) { return std::exp(-t); }, 1.0, std::numeric_limits<double>::infinity());
    EXPECT_NEAR(k.c1, J, 1e-6 * J);
    EXPECT_DOUBLE_EQ(k.grad, 1.0);
    EXPECT_TRUE(k.valid);
    EXPECT_DOUBLE_EQ(k.C, std::max({k.grad, k.c1, k.c2, k.c3 / 6}));
}

TEST(DeriveConstants, FlatMonotonicityInK) {
    const auto E = make_manifold(ManifoldSpec::euclidean(2));
    const auto a = derive_constants(ou(2), *E, 1.0), b = derive_constants(ou(2), *E, 2.0);
    EXPECT_LT(b.c1, a.c1);
    EXPECT_LE(b.c2, a.c2);
    EXPECT_LT(b.c3 * std::exp(-2.0), a.c3 * std::exp(-1.0));
    // c3 itself grows with K under the log-weighted normalization (recorded, not asserted away).
    EXPECT_GT(b.c3, a.c3);
}

TEST(DeriveConstants, SphereIsFiniteAndMatchesSampledNorms) {
    const auto S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    const auto pot = PotentialSpec::zero(0.5);
    const auto k = derive_constants(pot, *S, 0.5);
    for (double c : {k.C1, k.C2, k.C3, k.c1, k.c2, k.c3, k.c4, k.C})
        EXPECT_TRUE(std::isfinite(c) && c > 0.0);
    EXPECT_FALSE(k.log.empty());
    const auto pts = sample_uniform(*S, 10, 15);
    const auto fd = sampled_curvature_norms(*S, pot, pts);
    EXPECT_NEAR(fd.R, k.norms.R, 1e-4);
    EXPECT_NEAR(fd.T, k.norms.T, 1e-4);
    EXPECT_LT(fd.nabla_R, 1e-3);
}

TEST(DeriveConstants, NonCompactNeedsPositiveK) {
    const auto E = make_manifold(ManifoldSpec::euclidean(1));
    EXPECT_THROW(derive_constants(PotentialSpec::zero(), *E, 0.0), Error);
}

TEST(DerivativeBound, FirstOrderIsTheContraction) {
    const CurvatureNorms flat;
    for (double t : {0.1, 1.0, 3.0}) EXPECT_DOUBLE_EQ(derivative_bound(1, t, 0.7, flat), std::exp(-0.7 * t));
    // Flat second order: e^{-Kt} sqrt((1 - e^{-2K t1}) / 2K) / t1 with t1 = 1 ^ t.
    const double K = 1.0, t = 0.5;
    EXPECT_NEAR(derivative_bound(2, t, K, flat), std::exp(-K * t) * std::sqrt((1 - std::exp(-2 * K * t)) / (2 * K)) / t,
                1e-12);
}

// ---- exact Wasserstein -----------------------------------------------------------------------

TEST(Wasserstein, IdenticalSetsAreAtZero) {
    const std::vector<double> a{0.1, 2.0, -1.5, 3.3};
    EXPECT_EQ(wasserstein_line(a, a), 0.0);
    EXPECT_NEAR(wasserstein_circle(a, a, 2 * M_PI), 0.0, 1e-15);
}

TEST(Wasserstein, PointMassesOnTheLine) {
    EXPECT_DOUBLE_EQ(wasserstein_line({1.0}, {3.5}), 2.5);
    EXPECT_DOUBLE_EQ(wasserstein_line({0.0, 0.0}, {1.0}), 1.0);
    // Unequal sizes: F_a - F_b integrated by hand.
    EXPECT_DOUBLE_EQ(wasserstein_line({0.0, 2.0}, {1.0}), 1.0);
}

TEST(Wasserstein, CircleAgainstCyclicMatchingOracle) {
    // Equal-size sets on the circle: an optimal matching is a cyclic shift of the sorted orders.
    const double L = 2 * M_PI;
    const int N = 256;
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> U(0.0, L);
    for (double s : {0.3, 1.7, 3.0}) {
        std::vector<double> a(N), b(N);
        for (int i = 0; i < N; ++i) {
            a[i] = U(rng);
            b[i] = std::fmod(L * i / N + s, L);
        }
        auto sa = a, sb = b;
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        double best = 1e300;
        for (int k = 0; k < N; ++k) {
            double c = 0.0;
            for (int i = 0; i < N; ++i) {
                const double d = std::abs(sa[i] - sb[(i + k) % N]);
                c += std::min(d, L - d);
            }
            best = std::min(best, c / N);
        }
        EXPECT_NEAR(wasserstein_circle(a, b, L), best, 1e-12) << "s " << s;
    }
}

TEST(Wasserstein, ShiftedGridOnTheCircle) {
    // A grid of spacing D shifted by s is matched point to point at cost min(r, D - r), r = s mod D.
    const double L = 2 * M_PI;
    const int N = 256;
    const double D = L / N;
    for (double s : {0.005, 0.02, 1.0}) {
        std::vector<double> a(N), b(N);
        for (int i = 0; i < N; ++i) {
            a[i] = D * i;
            b[i] = std::fmod(D * i + s, L);
        }
        const double r = std::fmod(s, D);
        EXPECT_NEAR(wasserstein_circle(a, b, L), std::min(r, D - r), 1e-12);
    }
}

TEST(Wasserstein, UniformOracleAndAssignmentCrossCheck) {
    const double L = 2 * M_PI;
    // The midpoints of N equal arcs are the closest N-point set to the uniform law: W1 = L / (4N).
    const int N = 100;
    std::vector<double> mid(N);
    for (int i = 0; i < N; ++i) mid[i] = L * (i + 0.5) / N;
    EXPECT_NEAR(wasserstein_circle_uniform(mid, L), L / (4.0 * N), 1e-12);

    const auto C = make_manifold(ManifoldSpec::circle(L));
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(0.0, L);
    std::vector<Vec> a, b;
    std::vector<double> ad, bd;
    for (int i = 0; i < 40; ++i) {
        ad.push_back(U(rng));
        bd.push_back(U(rng));
        a.push_back(scalar(ad.back()));
        b.push_back(scalar(bd.back()));
    }
    EXPECT_NEAR(assignment_distance(*C, a, b), wasserstein_circle(ad, bd, L), 1e-12);
    const auto w = exact_wasserstein_1d(*C, a, b);
    EXPECT_FALSE(w.approximate);
    EXPECT_NEAR(w.value, wasserstein_circle(ad, bd, L), 1e-15);
}

TEST(Wasserstein, EmpiricalUniformShrinksLikeRootN) {
    const double L = 2 * M_PI;
    std::mt19937_64 rng(18);
    std::uniform_real_distribution<double> U(0.0, L);
    auto avg = [&](int n) {
        double s = 0.0;
        for (int r = 0; r < 20; ++r) {
            std::vector<double> x(n);
            for (double& v : x) v = U(rng);
            s += wasserstein_circle_uniform(x, L);
        }
        return s / 20;
    };
    const double ratio = avg(100) / avg(10000);
    EXPECT_GT(ratio, 6.0);
    EXPECT_LT(ratio, 16.0);
}

// ---- marginals ------------------------------------------------------------------------------

TEST(Marginals, StationaryCircleSamplerPassesTheKsTest) {
    EXPECT_TRUE(check_marginals(circle_metropolis(2 * M_PI, 0.01), 5000, 19).identical());
}

TEST(Marginals, BiasedSamplerIsDetected) {
    PairSampler s = circle_metropolis(2 * M_PI, 0.01);
    s.conditional = [](const Vec& w, std::mt19937_64&) { return Vec(scalar(std::fmod(w(0) * 0.5, 2 * M_PI))); };
    EXPECT_FALSE(check_marginals(s, 5000, 20).identical());
}

TEST(Marginals, KsStatisticOfIdenticalSetsIsZero) {
    const std::vector<double> a{0.3, 0.1, 0.7, 0.5};
    const auto r = ks_two_sample(a, a);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}
