#include "stein/paths.hpp"
#include "stein/semigroup.hpp"
#include "stein/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace stein;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

ManifoldPtr sphere2() { return make_manifold(ManifoldSpec::sphere(2, 1.0)); }
ManifoldPtr flat(int n) { return make_manifold(ManifoldSpec::euclidean(n)); }

PotentialSpec ou(int n) { return PotentialSpec::gaussian(Mat::Identity(n, n), Vec::Zero(n)); }

Vec sphere_start() { return v3(0.3, -0.5, 0.8).normalized(); }

// Mean and standard error.
std::pair<double, double> stats(const std::vector<double>& x) {
    const auto e = mc_estimate(x);
    return {e.value, e.std_error};
}

}  // namespace

// ---- Cameron-Martin weights ------------------------------------------------------------

TEST(CameronMartin, SecondDerivUnitHorizon) {
    const auto cm = cameron_martin(1.0, CmProfile::SecondDeriv);
    for (double s : {0.0, 0.25, 0.5, 0.9}) {
        EXPECT_DOUBLE_EQ(cm.k(s), 1.0 - s);
        EXPECT_DOUBLE_EQ(cm.kdot(s), -1.0);
    }
    EXPECT_DOUBLE_EQ(cm.k_energy(), 1.0);
}

TEST(CameronMartin, SecondDerivLongHorizonIsCappedAtOne) {
    const auto cm = cameron_martin(4.0, CmProfile::SecondDeriv);
    EXPECT_DOUBLE_EQ(cm.kdot(0.5), -1.0);
    EXPECT_DOUBLE_EQ(cm.k(1.0), 0.0);
    EXPECT_DOUBLE_EQ(cm.k(3.0), 0.0);
    EXPECT_DOUBLE_EQ(cm.kdot(2.0), 0.0);
}

TEST(CameronMartin, ThirdDerivProfile) {
    const auto cm = cameron_martin(1.0, CmProfile::ThirdDeriv);
    EXPECT_DOUBLE_EQ(cm.t1, 0.5);
    EXPECT_DOUBLE_EQ(cm.k(0.0), 1.0);
    EXPECT_DOUBLE_EQ(cm.k(0.5), 0.0);
    EXPECT_DOUBLE_EQ(cm.k(0.7), 0.0);
    EXPECT_DOUBLE_EQ(cm.l(0.25), 1.0);
    EXPECT_DOUBLE_EQ(cm.l(0.75), 0.5);
    EXPECT_DOUBLE_EQ(cm.l(1.0), 0.0);
    // k falls 1 -> 0 over 1/2 and l likewise: both energies are 1 / (1/2) = 2.
    EXPECT_DOUBLE_EQ(cm.k_energy(), 2.0);
    EXPECT_DOUBLE_EQ(cm.l_energy(), 2.0);
}

// ---- simulate_path -----------------------------------------------------------------------

TEST(SimulatePath, FlatBrownianIncrementsAreTheNoise) {
    const auto E = flat(2);
    const Vec x0 = v2(1.0, -1.0);
    const auto p = simulate_path(*E, x0, Mat::Identity(2, 2), PotentialSpec::zero(), 1.0, 100, 3, 0);
    ASSERT_EQ(p.steps(), 100);
    for (int i = 0; i < p.steps(); ++i) EXPECT_NEAR((p.points[i + 1] - p.points[i] - p.dB[i]).norm(), 0.0, 1e-15);
    std::vector<double> d;
    for (std::uint64_t i = 0; i < 4000; ++i)
        d.push_back(simulate_path(*E, x0, Mat::Identity(2, 2), PotentialSpec::zero(), 1.0, 16, 3, i).points.back()(0) - x0(0));
    const auto [m, se] = stats(d);
    EXPECT_LE(std::abs(m), 3 * se);
    // Increments are N(0, h): the sample variance of X_1 - x0 is 1.
    double v = 0;
    for (double x : d) v += (x - m) * (x - m);
    EXPECT_NEAR(v / (d.size() - 1), 1.0, 0.08);
}

TEST(SimulatePath, OrnsteinUhlenbeckMean) {
    const auto E = flat(1);
    const double t = 1.0, x0 = 1.5;
    std::vector<double> xs;
    for (std::uint64_t i = 0; i < 8000; ++i)
        xs.push_back(simulate_path(*E, Vec::Constant(1, x0), Mat::Identity(1, 1), ou(1), t, 200, 9, i).points.back()(0));
    const auto [m, se] = stats(xs);
    // Discretization bias x0 (e^{-t} - (1 - h)^N) is ~4e-3 here, below the 3 SE band.
    EXPECT_LE(std::abs(m - x0 * std::exp(-t)), 3 * se + std::abs(x0 * (std::exp(-t) - std::pow(1 - t / 200, 200))));
}

TEST(SimulatePath, SphereHeightEigenfunction) {
    const auto S = sphere2();
    const Vec x0 = sphere_start();
    const double t = 0.7;
    std::vector<double> ip;
    for (std::uint64_t i = 0; i < 4000; ++i)
        ip.push_back(simulate_path(*S, x0, S->tangent_basis(x0), PotentialSpec::zero(), t, 140, 12, i).points.back().dot(x0));
    const auto [m, se] = stats(ip);
    EXPECT_LE(std::abs(m - std::exp(-t)), 3 * se);
}

TEST(SimulatePath, FramesStayOrthonormalAndPointsOnSphere) {
    const auto S = sphere2();
    const auto p = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), 2.0, 2000, 1, 0);
    for (std::size_t i = 0; i < p.points.size(); ++i) {
        EXPECT_LE(S->constraint_residual(p.points[i]), 1e-12);
        const Mat G = p.frames[i].transpose() * p.frames[i];
        EXPECT_LE((G - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((p.points[i].transpose() * p.frames[i]).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SimulatePath, SeedReproducibility) {
    const auto S = sphere2();
    const auto a = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), 1.0, 300, 77, 5);
    const auto b = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), 1.0, 300, 77, 5);
    const auto c = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), 1.0, 300, 77, 6);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_EQ(a.points[i], b.points[i]);
        EXPECT_EQ(a.frames[i], b.frames[i]);
    }
    const auto ta = transport_W_doubleprime(*S, a, PotentialSpec::zero());
    const auto tb = transport_W_doubleprime(*S, b, PotentialSpec::zero());
    EXPECT_EQ(ta.Wpp.back().values(), tb.Wpp.back().values());
    EXPECT_NE(a.points.back(), c.points.back());
}

TEST(SimulatePath, StepTooLargeOnSmallCircle) {
    const auto C = make_manifold(ManifoldSpec::circle(0.5));
    try {
        simulate_path(*C, Vec::Constant(1, 0.1), Mat::Identity(1, 1), PotentialSpec::zero(), 10.0, 2, 1, 0);
        FAIL() << "expected StepTooLarge";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::StepTooLarge);
    }
}

TEST(SimulatePath, WeakOrderOneOnOrnsteinUhlenbeck) {
    // The discrete mean is x0 (1 - h)^N; halving h moves it by about x0 t e^{-t} h / 2.
    const auto E = flat(1);
    const double t = 1.0, x0 = 2.0;
    auto mean = [&](int steps) {
        std::vector<double> xs;
        for (std::uint64_t i = 0; i < 20000; ++i)
            xs.push_back(simulate_path(*E, Vec::Constant(1, x0), Mat::Identity(1, 1), ou(1), t, steps, 31, i).points.back()(0));
        return stats(xs);
    };
    const auto [m1, s1] = mean(10);
    const auto [m2, s2] = mean(20);
    const double h = 0.1;
    EXPECT_LE(std::abs(m1 - m2), x0 * t * h + 3 * std::hypot(s1, s2));
    EXPECT_LE(std::abs(m2 - x0 * std::exp(-t)), std::abs(m1 - x0 * std::exp(-t)) + 3 * std::hypot(s1, s2));
}

// ---- damped transports -------------------------------------------------------------------

TEST(Transport, FlatBrownianMotionHasIdentityW) {
    const auto E = flat(3);
    const auto p = simulate_path(*E, Vec::Zero(3), Mat::Identity(3, 3), PotentialSpec::zero(), 1.0, 100, 2, 0);
    const auto ts = transport_W(*E, p, PotentialSpec::zero());
    EXPECT_EQ(ts.W.back(), Mat(Mat::Identity(3, 3)));
}

TEST(Transport, GaussianPotentialGivesMatrixExponential) {
    const auto E = flat(2);
    Mat A(2, 2);
    A << 1.0, 0.4, 0.4, 0.5;
    const auto pot = PotentialSpec::gaussian(A, Vec::Zero(2));
    const auto p = simulate_path(*E, v2(0.5, 0.5), Mat::Identity(2, 2), pot, 1.5, 300, 2, 0);
    const auto ts = transport_W_doubleprime(*E, p, pot);
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    const Mat expA = es.eigenvectors() * (-1.5 * es.eigenvalues().array()).exp().matrix().asDiagonal() *
                     es.eigenvectors().transpose();
    EXPECT_LE((ts.W.back() - expA).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(ts.Wp.back().max_abs(), 0.0);
    EXPECT_EQ(ts.Wpp.back().max_abs(), 0.0);
}

TEST(Transport, SphereWIsScalarDamping) {
    for (auto [n, k] : {std::pair{2, 1.0}, std::pair{3, 0.7}}) {
        const auto S = make_manifold(ManifoldSpec::sphere(n, k));
        const Vec x0 = sample_uniform(*S, 1, 4)[0];
        const auto p = simulate_path(*S, x0, S->tangent_basis(x0), PotentialSpec::zero(), 1.2, 240, 8, 0);
        const auto ts = transport_W(*S, p, PotentialSpec::zero());
        const Mat expect = std::exp(-(n - 1) * k * 1.2 / 2) * Mat::Identity(n, n);
        EXPECT_LE((ts.W.back() - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Transport, OperatorNormGronwallBound) {
    const auto S = sphere2();
    const double K = 0.5, h = 0.005;
    const auto p = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), 2.0, 400, 4, 0);
    const auto ts = transport_W(*S, p, PotentialSpec::zero());
    for (std::size_t i = 0; i < ts.W.size(); ++i) {
        Eigen::JacobiSVD<Mat> svd(ts.W[i]);
        EXPECT_LE(svd.singularValues()(0), std::exp(-K * p.times[i]) + 10 * h);
    }
}

TEST(Transport, SphereWPrimeMeanZeroAndItoIsometry) {
    // dW'(u,v) = R(dB, W u) W v - 1/2 Ric W' ds with W_s = e^{-s/2}: the sum over i of
    // |R(e_i, u) v|^2 is 1 for unit u, v on the unit 2-sphere, so E|W'_t|^2 = e^{-t} (1 - e^{-t}).
    const auto S = sphere2();
    const double t = 1.0;
    const std::size_t n = 3000;
    std::vector<double> comp(n), sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), t, 200, 21, i);
        const auto ts = transport_W_prime(*S, p, PotentialSpec::zero());
        const Tensor& Wp = ts.Wp.back();
        comp[i] = Wp(0, 1, 0);
        sq[i] = Wp(0, 1, 0) * Wp(0, 1, 0) + Wp(0, 1, 1) * Wp(0, 1, 1);
    }
    const auto [m, se] = stats(comp);
    EXPECT_LE(std::abs(m), 3 * se);
    const auto [q, qse] = stats(sq);
    EXPECT_LE(std::abs(q - std::exp(-t) * (1 - std::exp(-t))), 3 * qse);
}

TEST(Transport, SphereWDoublePrimeMeanMatchesDriftOracle) {
    // Only the trace term tr R(., W u) R(., W v) W w has nonzero mean. On the unit 2-sphere it equals
    // -<u, v> w, so E W''_t(e0, e0, e1) = -e^{-t/2} (1 - e^{-t}) e1 and E W''_t(e1, e0, e0) = 0.
    const auto S = sphere2();
    const double t = 1.0;
    const std::size_t n = 3000;
    std::vector<double> a(n), b(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), t, 200, 22, i);
        const Tensor& Wpp = transport_W_doubleprime(*S, p, PotentialSpec::zero()).Wpp.back();
        a[i] = Wpp(0, 0, 1, 1);
        b[i] = Wpp(0, 0, 1, 0);
        c[i] = Wpp(1, 0, 0, 0);
    }
    const double expect = -std::exp(-t / 2) * (1 - std::exp(-t));
    const auto [ma, sa] = stats(a);
    const auto [mb, sb] = stats(b);
    const auto [mc, sc] = stats(c);
    EXPECT_LE(std::abs(ma - expect), 3 * sa + 0.01);  // 0.01: O(h) Euler bias allowance, h = 5e-3
    EXPECT_LE(std::abs(mb), 3 * sb);
    EXPECT_LE(std::abs(mc), 3 * sc + 0.01);
}

TEST(Transport, WDoublePrimeIsLinearInFirstSlot) {
    const auto S = sphere2();
    const auto p = simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), 0.5, 100, 3, 0);
    const auto ts = transport_W_doubleprime(*S, p, PotentialSpec::zero());
    auto flow = SemigroupFlow::eigenfunction(S, ScalarField::coordinate_power(2, 1), 1.0, 0.5);
    const Vec zero = Vec::Zero(2);
    const Vec e0 = v2(1, 0), e1 = v2(0, 1);
    for (double v : martingale_samples(p, ts, flow, 3, zero, e0, e1)) EXPECT_EQ(v, 0.0);
}

// ---- local martingales ---------------------------------------------------------------

TEST(Martingale, FlatLinearIsConstantAlongEachPath) {
    const auto E = flat(2);
    const auto f = ScalarField::linear(v2(1.0, -2.0));
    const auto flow = SemigroupFlow::eigenfunction(E, f, 0.0, 1.0);
    for (std::uint64_t i = 0; i < 5; ++i) {
        const auto p = simulate_path(*E, v2(0.1, 0.2), Mat::Identity(2, 2), PotentialSpec::zero(), 1.0, 100, 3, i);
        const auto ts = transport_W(*E, p, PotentialSpec::zero());
        const auto ms = martingale_samples(p, ts, flow, 1, v2(0.6, 0.8), v2(0, 0), v2(0, 0));
        for (double m : ms) EXPECT_NEAR(m, ms.front(), 1e-14);
    }
}

namespace {

std::vector<double> increments(const ManifoldPtr& M, const Vec& x0, const PotentialSpec& pot, const ScalarField& f,
                               double rate, int order, std::size_t n, std::uint64_t seed) {
    const double t = 0.5;
    const auto flow = SemigroupFlow::eigenfunction(M, f, rate, t);
    std::vector<double> d(n);
    const Vec u = v2(1, 0), v = v2(0.6, 0.8), w = v2(0.8, -0.6);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = simulate_path(*M, x0, M->tangent_basis(x0), pot, t, 100, seed, i);
        const auto ts = order == 1 ? transport_W(*M, p, pot) : order == 2 ? transport_W_prime(*M, p, pot)
                                                                          : transport_W_doubleprime(*M, p, pot);
        const auto ms = martingale_samples(p, ts, flow, order, u, v, w);
        d[i] = ms.back() - ms.front();
    }
    return d;
}

double mean_increment_ratio(const ManifoldPtr& M, const Vec& x0, const PotentialSpec& pot, const ScalarField& f,
                            double rate, int order, std::size_t n, std::uint64_t seed) {
    const auto [m, se] = stats(increments(M, x0, pot, f, rate, order, n, seed));
    return std::abs(m) / (3 * se);
}

}  // namespace

TEST(Martingale, SphereHeightOrderOne) {
    EXPECT_LE(mean_increment_ratio(sphere2(), sphere_start(), PotentialSpec::zero(), ScalarField::coordinate_power(2, 1), 1.0,
                                   1, 2000, 40),
              1.0);
}

TEST(Martingale, GaussianQuadraticOrderTwo) {
    // x^2 - 1/2 is an eigenfunction of the unit OU generator with rate 2.
    const auto f = ScalarField::combine(1.0, ScalarField::coordinate_power(0, 2), -0.5, ScalarField::constant(1.0));
    // Hess f_s = 2 e^{-2(t-s)} and W_s = e^{-s}, so N'_s is the same number on every path.
    for (double d : increments(flat(2), v2(0.5, -0.3), ou(2), f, 2.0, 2, 200, 41)) EXPECT_NEAR(d, 0.0, 1e-13);
}

TEST(Martingale, GaussianQuarticOrderTwo) {
    // x^4 - 3x^2 + 3/4 has rate 4; N'_s is proportional to (3X_s^2 - 3/2) e^{2s}.
    const auto f = ScalarField::combine(
        1.0, ScalarField::combine(1.0, ScalarField::coordinate_power(0, 4), -3.0, ScalarField::coordinate_power(0, 2)),
        0.75, ScalarField::constant(1.0));
    EXPECT_LE(mean_increment_ratio(flat(2), v2(0.5, -0.3), ou(2), f, 4.0, 2, 4000, 43), 1.0);
}

TEST(Martingale, SphereOrderThree) {
    EXPECT_LE(mean_increment_ratio(sphere2(), sphere_start(), PotentialSpec::zero(), ScalarField::coordinate_power(0, 1), 1.0,
                                   3, 2000, 42),
              1.0);
}

// ---- engine and dump -------------------------------------------------------------------

TEST(Engine, WorkerCountDoesNotChangeResults) {
    const auto S = sphere2();
    EngineConfig cfg;
    cfg.t = 0.5;
    cfg.steps = 100;
    cfg.seed = 99;
    cfg.n_paths = 64;
    cfg.order = 3;
    cfg.profile = CmProfile::ThirdDeriv;
    auto run = [&](int workers) {
        cfg.exec.workers = workers;
        std::vector<PathResult> out(cfg.n_paths);
        run_paths(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), cfg,
                  [&](const PathResult& r) { out[r.index] = r; });
        return out;
    };
    const auto a = run(1), b = run(4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].x, b[i].x);
        EXPECT_EQ(a[i].acc.Hk.values(), b[i].acc.Hk.values());
        EXPECT_EQ(a[i].acc.Jl, b[i].acc.Jl);
    }
}

TEST(PathDump, RoundtripAndHeader) {
    const auto S = sphere2();
    std::vector<DiffusionPath> paths;
    for (std::uint64_t i = 0; i < 3; ++i)
        paths.push_back(simulate_path(*S, sphere_start(), S->tangent_basis(sphere_start()), PotentialSpec::zero(), 0.1, 10, 5, i));
    std::stringstream ss;
    write_path_dump(ss, paths);
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 32u + 3u * 11u * 4u * 8u);
    EXPECT_EQ(bytes.substr(0, 8), "STEINPTH");
    const auto back = read_path_dump(ss);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < paths[i].points.size(); ++k) {
            EXPECT_EQ(back[i].points[k], paths[i].points[k]);
            EXPECT_EQ(back[i].times[k], paths[i].times[k]);
        }
}
