#include "catgeo/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace catgeo;

namespace {

// sup_t |ECDF_a(t) - ECDF_b(t)| evaluated at every sample point.
double ks_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> ts = a;
  ts.insert(ts.end(), b.begin(), b.end());
  double d = 0.0;
  for (double t : ts) {
    const double fa = double(std::count_if(a.begin(), a.end(), [&](double v) { return v <= t; })) / double(a.size());
    const double fb = double(std::count_if(b.begin(), b.end(), [&](double v) { return v <= t; })) / double(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

Network single_unit(double w, Activation act = Activation::Identity) {
  Network net = Network::build({LayerSpec::dense(1, act)}, Shape::vec(1), 0);
  net.layer(0).weights(0, 0) = w;
  return net;
}

Network sigmoid_toy(std::uint64_t seed) {
  Network net = Network::build({LayerSpec::dense(16, Activation::Sigmoid, Noise::gaussian(0.5)),
                                LayerSpec::dense(2, Activation::Softmax)},
                               Shape::vec(1), seed);
  Rng rng = make_rng(seed, 5);
  std::normal_distribution<double> n01;
  for (Index i = 0; i < net.layer(0).bias.size(); ++i) net.layer(0).bias(i) = n01(rng);
  net.layer(0).weights *= 4.0;
  return net;
}

DistanceProfile bump_profile(int length, int peak_pair, double crossing) {
  DistanceProfile p;
  p.distances.assign(std::size_t(length - 1), 0.1);
  p.valid.assign(std::size_t(length - 1), true);
  p.distances[std::size_t(peak_pair)] = 1.0;
  p.crossing = crossing;
  return p;
}

}  // namespace

TEST_CASE("cosine distance: closed forms and errors") {
  Vector a(2), b(2);
  a << 1, 0;
  b << 1, 1;
  CHECK(cosine_distance(a, a) == 0.0);
  CHECK(cosine_distance(a, b) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-14));
  Vector o(2);
  o << 0, 3;
  CHECK(cosine_distance(a, o) == doctest::Approx(1.0));
  CHECK(cosine_distance(a, Vector(-2.0 * a)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(cosine_distance(a, Vector::Zero(2)), EvaluationError);
}

TEST_CASE("cosine distance: range, symmetry and scale invariance on random pairs") {
  Rng rng = make_rng(11);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  double worst = 0.0;
  bool in_range = true;
  for (int t = 0; t < 10000; ++t) {
    Vector a(7), b(7);
    for (Index i = 0; i < 7; ++i) {
      a(i) = n01(rng);
      b(i) = n01(rng);
    }
    const double d = cosine_distance(a, b);
    in_range = in_range && d >= 0.0 && d <= 2.0 && d == cosine_distance(b, a);
    worst = std::max(worst, std::abs(d - cosine_distance(Vector(scale(rng) * a), Vector(scale(rng) * b))));
  }
  CHECK(in_range);
  CHECK(worst < 1e-13);
}

TEST_CASE("ks statistic: closed forms") {
  CHECK(ks_statistic({1, 2, 3}, {2, 3, 4}) == doctest::Approx(1.0 / 3.0));
  CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_statistic({1, 2}, {5, 6, 7}) == 1.0);
  CHECK_THROWS_AS(ks_statistic({}, {1.0}), EvaluationError);
}

TEST_CASE("ks statistic: brute-force ECDF oracle, symmetry and monotone invariance") {
  Rng rng = make_rng(12);
  std::uniform_int_distribution<int> len(1, 12), val(0, 9);
  int exact = 0;
  bool symmetric = true, invariant = true;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(std::size_t(len(rng))), b(std::size_t(len(rng)));
    for (auto& v : a) v = val(rng);
    for (auto& v : b) v = val(rng);
    const double ks = ks_statistic(a, b);
    exact += ks == ks_brute_force(a, b);
    symmetric = symmetric && ks == ks_statistic(b, a);
    std::vector<double> ea = a, eb = b;
    for (auto& v : ea) v = std::exp(v);
    for (auto& v : eb) v = std::exp(v);
    invariant = invariant && ks == ks_statistic(ea, eb);
  }
  CHECK(exact == 200);
  CHECK(symmetric);
  CHECK(invariant);
}

TEST_CASE("bootstrap: degenerate and simple cases") {
  const auto m = [](const std::vector<double>& v) { return mean(v); };
  const Interval c = bootstrap_ci(std::vector<double>(50, 3.0), m, 1000, 0.95, 1);
  CHECK(c.lo == 3.0);
  CHECK(c.hi == 3.0);
  std::vector<double> coin(2000);
  for (std::size_t i = 0; i < coin.size(); ++i) coin[i] = double(i % 2);
  const Interval h = bootstrap_ci(coin, m, 1000, 0.95, 2);
  CHECK(h.lo < 0.5);
  CHECK(h.hi > 0.5);
  CHECK(bootstrap_ci(coin, m, 1000, 0.95, 2).lo == h.lo);
}

TEST_CASE("spearman and quantiles") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {1, 1, 2}) == doctest::Approx(std::sqrt(0.75)));
  CHECK(sorted_quantile({0, 1, 2, 3, 4}, 0.5) == 2.0);
  CHECK(sorted_quantile({0, 10}, 0.25) == 2.5);
  CHECK(median({5, 1, 3}) == 3.0);
}

TEST_CASE("distance profile: identical inputs, dead units and crossing") {
  Matrix act = Matrix::Ones(3, 5);
  Matrix post(2, 5);
  post << 0.9, 0.8, 0.6, 0.4, 0.1,
          0.1, 0.2, 0.4, 0.6, 0.9;
  const DistanceProfile p = distance_profile(act, post, 0, 1);
  REQUIRE(p.distances.size() == 4);
  for (double d : p.distances) CHECK(d == doctest::Approx(0.0).scale(1));
  REQUIRE(p.crossing);
  CHECK(*p.crossing == doctest::Approx(2.5));

  act.col(2).setZero();
  const DistanceProfile q = distance_profile(act, post, 0, 1);
  CHECK(q.valid == std::vector<bool>{true, false, false, true});
  CHECK(std::isnan(q.distances[1]));
}

TEST_CASE("distance profile through a network") {
  Network net = sigmoid_toy(3);
  Continuum c = linear_continuum(Vector::Constant(1, 0.3), Vector::Constant(1, 0.3), 6);
  c.source_label = 0;
  c.target_label = 1;
  const DistanceProfile p = distance_profile(net, 0, c);
  CHECK(p.distances.size() == 5);
  for (double d : p.distances) CHECK(d == doctest::Approx(0.0).scale(1));
}

TEST_CASE("align profiles: identical profiles give the profile with zero-width CI") {
  std::vector<DistanceProfile> ps(40, bump_profile(10, 4, 4.5));
  const AlignedCurve c = align_profiles(ps, 30, 200, 0.95, 7);
  REQUIRE(c.offsets.size() == 9);
  CHECK(c.offsets.front() == -4);
  CHECK(c.peak_offset() == 0);
  CHECK(c.peak() == 1.0);
  for (std::size_t i = 0; i < c.mean.size(); ++i) {
    CHECK(c.lo[i] == c.mean[i]);
    CHECK(c.hi[i] == c.mean[i]);
  }
  CHECK_THROWS_AS(align_profiles({ps[0]}), EvaluationError);
  DistanceProfile none = ps[0];
  none.crossing.reset();
  CHECK_THROWS_AS(align_profiles({ps[0], none}), EvaluationError);
}

TEST_CASE("align profiles: min count, true vs shuffled alignment") {
  Rng rng = make_rng(21);
  std::uniform_int_distribution<int> where(5, 14);
  std::vector<DistanceProfile> ps;
  std::vector<int> random_shift;
  for (int i = 0; i < 60; ++i) {
    const int k = where(rng);
    ps.push_back(bump_profile(20, k, k + 0.3));
    random_shift.push_back(where(rng));
  }
  const AlignedCurve aligned = align_profiles(ps, 30, 200, 0.95, 1);
  for (int n : aligned.count) CHECK(n >= 30);
  CHECK(aligned.peak_offset() == 0);
  const AlignedCurve shuffled = align_with_shifts(ps, random_shift, 30, 200, 0.95, 1);
  CHECK(shuffled.peak() < aligned.peak());
}

TEST_CASE("categoricality: constant per category gives index 1") {
  Matrix act(3, 30);
  std::vector<int> labels(30);
  for (Index i = 0; i < 30; ++i) {
    labels[std::size_t(i)] = int(i % 3);
    act.col(i) = Vector::Unit(3, i % 3) + Vector::Constant(3, 0.1);
  }
  const CategoricalityResult r = categoricality_from_activity(act, labels, 500, 3, 200);
  CHECK(r.ks == 1.0);
  CHECK(r.n_within == 500);
  CHECK(r.n_between == 500);
  CHECK(r.ci.lo <= r.ks);
  CHECK(r.ci.hi >= r.ks);

  labels[0] = 7;
  CHECK_THROWS_AS(categoricality_from_activity(act, labels, 10, 3, 10), EvaluationError);
}

TEST_CASE("categoricality: CI contains the statistic and is reproducible") {
  Rng rng = make_rng(4);
  std::normal_distribution<double> n01;
  Matrix act(5, 200);
  std::vector<int> labels(200);
  for (Index i = 0; i < 200; ++i) {
    labels[std::size_t(i)] = int(i % 4);
    for (Index k = 0; k < 5; ++k) act(k, i) = n01(rng) + (k == i % 4 ? 1.5 : 0.0);
  }
  const auto a = categoricality_from_activity(act, labels, 1000, 9);
  const auto b = categoricality_from_activity(act, labels, 1000, 9);
  CHECK(a.ks == b.ks);
  CHECK(a.ci.lo == b.ci.lo);
  CHECK(0.0 <= a.ci.lo);
  CHECK(a.ci.lo <= a.ks);
  CHECK(a.ks <= a.ci.hi);
  CHECK(a.ci.hi <= 1.0);
  CHECK(a.ks > 0.2);
}

TEST_CASE("fisher code: single linear unit and sigma limit") {
  const Network net = single_unit(1.0);
  CHECK(fisher_code_gaussian_layer(net, 0, 1.0, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
  // f = 2x: (f'/f)^2 = 1/x^2
  const Network two = single_unit(2.0);
  CHECK(fisher_code_gaussian_layer(two, 0, 0.5, 0.5) == doctest::Approx(4.0 * 6.0).epsilon(1e-14));
  CHECK(fisher_code_gaussian_layer(two, 0, 0.5, 1e8) == doctest::Approx(2.0 * 4.0).epsilon(1e-12));
  CHECK_THROWS_AS(fisher_code_gaussian_layer(net, 0, 0.0, 1.0), EvaluationError);
  Matrix xs(1, 3);
  xs << 0.0, 1.0, 2.0;
  std::vector<int> excl;
  const auto batch = fisher_code_batch(net, 0, xs, 1.0, &excl);
  CHECK(std::isnan(batch[0]));
  CHECK(excl[0] == 1);
  CHECK(batch[1] == doctest::Approx(3.0));
  CHECK(batch[2] == doctest::Approx(0.75));
}

TEST_CASE("fisher code: batch matches pointwise, 2D matrix is rank-summed outer products") {
  const Network net = sigmoid_toy(8);
  Matrix xs(1, 11);
  for (Index i = 0; i < 11; ++i) xs(0, i) = -1.0 + 0.2 * double(i);
  const auto batch = fisher_code_batch(net, 0, xs, 1.0);
  for (Index i = 0; i < 11; ++i)
    CHECK(batch[std::size_t(i)] == doctest::Approx(fisher_code_gaussian_layer(net, 0, xs(0, i), 1.0)).epsilon(1e-12));

  const Network net2 = Network::build({LayerSpec::dense(5, Activation::Sigmoid, Noise::gaussian(0.5))}, Shape::vec(2), 3);
  Vector x(2);
  x << 0.3, -0.2;
  const FisherCode F = fisher_code_gaussian_layer(net2, 0, x, 1.0);
  CHECK((F.value - F.value.transpose()).norm() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(F.value).eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("skl: zero, symmetry and second-order agreement with fisher code") {
  const Network net = sigmoid_toy(5);
  const double sigma = layer_gaussian_sigma(net, 0);
  CHECK(sigma == doctest::Approx(1.0));
  CHECK_THROWS_AS(layer_gaussian_sigma(net, 1), ConfigError);
  const Vector a = Vector::Constant(1, 0.2), b = Vector::Constant(1, -0.4);
  CHECK(skl_gaussian_layer(net, 0, a, a, sigma) == 0.0);
  CHECK(skl_gaussian_layer(net, 0, a, b, sigma) == skl_gaussian_layer(net, 0, b, a, sigma));
  Rng rng = make_rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double x = u(rng), d = 1e-3;
    const double skl = skl_gaussian_layer(net, 0, Vector::Constant(1, x), Vector::Constant(1, x + d), sigma);
    const double F = fisher_code_gaussian_layer(net, 0, x, sigma);
    worst = std::max(worst, std::abs(skl / (d * d) - F) / F);
  }
  CHECK(worst < 0.05);
}

TEST_CASE("coding cost: scaling, exclusion and standard error") {
  const std::vector<double> fcat{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> fcode{2.0, 2.0, 4.0, 8.0};
  const CodingCost c = coding_cost_from(fcat, fcode);
  std::vector<double> scaled = fcode;
  for (auto& v : scaled) v *= 3.0;
  CHECK(coding_cost_from(fcat, scaled).value == doctest::Approx(c.value / 3.0).epsilon(1e-15));
  CHECK(c.value == doctest::Approx(0.5 * (0.5 + 1.0 + 0.75 + 0.5) / 4.0));
  const CodingCost e = coding_cost_from(fcat, {2.0, 0.0, std::nan(""), 8.0});
  CHECK(e.excluded == 2);
  CHECK(e.used == 2);

  const auto model = GaussianCategoryModel::toy1d();
  const Network net = sigmoid_toy(2);
  const CodingCost small = coding_cost(model, net, 0, 1.0, 4000, 1);
  const CodingCost large = coding_cost(model, net, 0, 1.0, 16000, 1);
  CHECK(small.value > 0.0);
  const double ratio = (large.std_error * large.std_error) / (small.std_error * small.std_error);
  CHECK(ratio == doctest::Approx(0.25).epsilon(0.2));
  CHECK(coding_cost(model, net, 0, 1.0, 4000, 1).value == small.value);
}
