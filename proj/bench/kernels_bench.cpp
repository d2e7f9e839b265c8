// Serial reference vs OpenMP path for the hot kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "eskin/kernels.hpp"
#include "eskin/nn/tsne.hpp"
#include "eskin/skin_model.hpp"

using namespace eskin;

namespace {

Exec mode(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

std::vector<double> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n * dim);
  for (auto& v : x) v = d(g);
  return x;
}

void BM_SensorField(benchmark::State& st) {
  const auto geom = skin::SkinGeometry::standard();
  const auto film = skin::deform(skin::MagneticFilm::uniform(geom, static_cast<std::size_t>(st.range(1)),
                                                             static_cast<std::size_t>(st.range(1)) * 13 / 10),
                                 skin::Press{{20.0, 30.0}, 1.5, 5.0});
  for (auto _ : st) benchmark::DoNotOptimize(skin::sensor_field(film, geom, mode(st)));
}
BENCHMARK(BM_SensorField)->ArgsProduct({{0, 1}, {20, 80}});

void BM_SuperposeDipoles(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(1));
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  std::vector<Vec3> src(n), mom(n, Vec3{0, 0, 1e-6}), probes(256), out(256);
  for (auto& s : src) s = {u(g), u(g), u(g) + 0.2};
  for (auto& p : probes) p = {u(g), u(g), u(g) - 0.2};
  for (auto _ : st) {
    kernels::superpose_dipoles(src, mom, probes, out, mode(st));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SuperposeDipoles)->ArgsProduct({{0, 1}, {1024, 8192}});

void BM_PairwiseDistances(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(1));
  auto x = random_points(n, 64, 5);
  std::vector<double> d(n * n);
  for (auto _ : st) {
    kernels::pairwise_sq_distances(x, n, 64, d, mode(st));
    benchmark::DoNotOptimize(d.data());
  }
}
BENCHMARK(BM_PairwiseDistances)->ArgsProduct({{0, 1}, {450, 1500}});

void BM_TsneGradient(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(1));
  auto y = random_points(n, 2, 6);
  std::vector<double> p(n * n, 1.0 / static_cast<double>(n * (n - 1)));
  for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 0.0;
  std::vector<double> grad(2 * n), num(n * n);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::tsne_gradient(p, y, n, grad, num, mode(st)));
}
BENCHMARK(BM_TsneGradient)->ArgsProduct({{0, 1}, {450, 1500}});

}  // namespace
BENCHMARK_MAIN();
