#include <gtest/gtest.h>

#include <random>

#include "eskin/kernels.hpp"
#include "eskin/nn/tsne.hpp"

using namespace eskin;
using namespace eskin::nn;

namespace {

struct Clusters {
  std::vector<double> x;
  std::vector<std::size_t> labels;
  std::size_t n = 0;
  std::size_t dim = 0;
};

Clusters three_clusters(std::size_t n, std::size_t dim, double sigma, std::uint64_t seed) {
  Clusters c;
  c.n = n;
  c.dim = dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = i % 3;
    for (std::size_t d = 0; d < dim; ++d) c.x.push_back((d == k ? 10.0 : 0.0) + g(rng));
    c.labels.push_back(k);
  }
  return c;
}

TsneConfig fast() {
  TsneConfig t;
  t.iterations = 500;
  return t;
}

}  // namespace

TEST(Silhouette, HandComputedTwoClusters) {
  // Points 0, 1 | 4, 5 on a line.
  std::vector<double> p{0, 1, 4, 5};
  std::vector<std::size_t> l{0, 0, 1, 1};
  // a = 1 for all; b = (4+5)/2, (3+4)/2, (4+3)/2, (5+4)/2
  double expect = ((4.5 - 1) / 4.5 + (3.5 - 1) / 3.5 + (3.5 - 1) / 3.5 + (4.5 - 1) / 4.5) / 4.0;
  EXPECT_NEAR(silhouette_score(p, 4, 1, l), expect, 1e-12);
}

TEST(Silhouette, SingleClusterThrows) {
  std::vector<double> p{0, 1, 2};
  std::vector<std::size_t> l{0, 0, 0};
  EXPECT_THROW(silhouette_score(p, 3, 1, l), std::invalid_argument);
}

TEST(Tsne, PerplexityMatchedPerPoint) {
  auto c = three_clusters(90, 5, 1.0, 3);
  std::vector<double> d2(c.n * c.n);
  kernels::pairwise_sq_distances(c.x, c.n, c.dim, d2);
  std::vector<double> achieved;
  conditional_affinities(d2, c.n, 20.0, 1e-5, achieved, Exec::parallel);
  ASSERT_EQ(achieved.size(), c.n);
  for (double p : achieved) EXPECT_NEAR(p, 20.0, 1e-3);
}

TEST(Tsne, ThreeTightClustersSeparate) {
  auto c = three_clusters(150, 3, 0.01, 5);
  auto e = tsne_embed(c.x, c.n, c.dim, fast());
  EXPECT_GE(silhouette_score(e.y, c.n, 2, c.labels), 0.8);
}

TEST(Tsne, TwoPointsStayDistinct) {
  std::vector<double> x{0.0, 0.0, 1.0, 2.0};
  TsneConfig t = fast();
  t.perplexity = 1.0;
  auto e = tsne_embed(x, 2, 2, t);
  EXPECT_TRUE(e.y[0] != e.y[2] || e.y[1] != e.y[3]);
}

TEST(Tsne, DeterministicAndSerialMatchesParallel) {
  auto c = three_clusters(60, 4, 0.5, 8);
  auto t = fast();
  t.perplexity = 10.0;
  t.iterations = 200;
  auto a = tsne_embed(c.x, c.n, c.dim, t);
  auto b = tsne_embed(c.x, c.n, c.dim, t);
  EXPECT_EQ(a.y, b.y);
  t.exec = Exec::serial;
  EXPECT_EQ(tsne_embed(c.x, c.n, c.dim, t).y, a.y);
}

TEST(Tsne, RejectsDegenerateInputs) {
  std::vector<double> same(10 * 3, 1.5);
  TsneConfig t = fast();
  t.perplexity = 2.0;
  EXPECT_THROW(tsne_embed(same, 10, 3, t), std::invalid_argument);
  std::vector<double> one{1.0, 2.0};
  EXPECT_THROW(tsne_embed(one, 1, 2, t), std::invalid_argument);
  auto c = three_clusters(12, 3, 1.0, 1);
  t.perplexity = 30.0;
  EXPECT_THROW(tsne_embed(c.x, c.n, c.dim, t), std::invalid_argument);
}

TEST(Kernels, PairwiseDistancesSerialParallelBitwise) {
  auto c = three_clusters(50, 7, 1.0, 2);
  std::vector<double> a(c.n * c.n), b(c.n * c.n);
  kernels::pairwise_sq_distances(c.x, c.n, c.dim, a, Exec::serial);
  kernels::pairwise_sq_distances(c.x, c.n, c.dim, b, Exec::parallel);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a[0 * c.n + 1], [&] {
    double s = 0;
    for (std::size_t d = 0; d < c.dim; ++d) s += (c.x[d] - c.x[c.dim + d]) * (c.x[d] - c.x[c.dim + d]);
    return s;
  }(), 1e-12);
}
