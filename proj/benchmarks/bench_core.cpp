#include "stein/paths.hpp"
#include "stein/spectral.hpp"
#include "stein/stein_bound.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace stein;

namespace {

Vec sphere_point() {
    Vec p(3);
    p << 0.3, -0.5, 0.8;
    return p / p.norm();
}

void BM_SphereExpLog(benchmark::State& st) {
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    const Vec p = sphere_point();
    const Vec v = S->tangent_basis(p) * (Vec(2) << 0.4, -0.7).finished();
    for (auto _ : st) {
        const Vec q = S->exp(p, v);
        benchmark::DoNotOptimize(S->log(p, q));
    }
}
BENCHMARK(BM_SphereExpLog);

void BM_HyperbolicExpLog(benchmark::State& st) {
    const ManifoldPtr H = make_manifold(ManifoldSpec::hyperbolic3(-1.0));
    const Vec p = Vec::Unit(4, 0);
    const Vec v = H->tangent_basis(p) * (Vec(3) << 0.4, -0.7, 0.2).finished();
    for (auto _ : st) {
        const Vec q = H->exp(p, v);
        benchmark::DoNotOptimize(H->log(p, q));
    }
}
BENCHMARK(BM_HyperbolicExpLog);

void BM_SimulateSpherePath(benchmark::State& st) {
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    const Vec p = sphere_point();
    const Mat F = S->tangent_basis(p);
    const auto pot = PotentialSpec::zero(0.5);
    const int steps = int(st.range(0));
    std::uint64_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(simulate_path(*S, p, F, pot, 1.0, steps, 1, i++));
    st.SetItemsProcessed(st.iterations() * steps);
}
BENCHMARK(BM_SimulateSpherePath)->Arg(100)->Arg(1000);

void BM_TransportDoublePrime(benchmark::State& st) {
    const ManifoldPtr S = make_manifold(ManifoldSpec::sphere(2, 1.0));
    const Vec p = sphere_point();
    const auto pot = PotentialSpec::zero(0.5);
    const auto path = simulate_path(*S, p, S->tangent_basis(p), pot, 1.0, 1000, 2, 0);
    for (auto _ : st) benchmark::DoNotOptimize(transport_W_doubleprime(*S, path, pot));
}
BENCHMARK(BM_TransportDoublePrime);

void BM_CollectCirclePairs(benchmark::State& st) {
    const auto sampler = circle_metropolis(2 * M_PI, 0.01);
    for (auto _ : st) benchmark::DoNotOptimize(collect_pairs(sampler, std::size_t(st.range(0)), 32, 3));
}
BENCHMARK(BM_CollectCirclePairs)->Arg(1000);

void BM_WassersteinCircle(benchmark::State& st) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2 * M_PI);
    std::vector<double> a(std::size_t(st.range(0))), b(a.size());
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    for (auto _ : st) benchmark::DoNotOptimize(wasserstein_circle(a, b, 2 * M_PI));
}
BENCHMARK(BM_WassersteinCircle)->Arg(1 << 10)->Arg(1 << 14);

void BM_HyperbolicHeatKernel(benchmark::State& st) {
    const ManifoldPtr H = make_manifold(ManifoldSpec::hyperbolic3(-1.0));
    const Vec p = Vec::Unit(4, 0);
    const Vec q = H->exp(p, H->tangent_basis(p) * (Vec(3) << 0.5, 0.1, -0.3).finished());
    for (auto _ : st) benchmark::DoNotOptimize(heat_kernel(*H, 0.5, p, q));
}
BENCHMARK(BM_HyperbolicHeatKernel);

}  // namespace

BENCHMARK_MAIN();
