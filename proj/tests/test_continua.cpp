#include "catgeo/continua.hpp"

#include <doctest.h>

#include <cmath>

using namespace catgeo;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

// Two-class posteriors along n items: P(target) rises linearly from p0 to p1,
// `third` of mass given to a third class at item `dip`.
ContinuumPosteriors ramp(Index n, double p0, double p1, Index dip = -1, double third = 0.0) {
  ContinuumPosteriors c{Matrix::Zero(3, n), 0, 1};
  for (Index i = 0; i < n; ++i) {
    const double t = p0 + (p1 - p0) * double(i) / double(n - 1);
    const double rest = i == dip ? 1.0 - third : 1.0;
    c.posteriors(1, i) = rest * t;
    c.posteriors(0, i) = rest * (1.0 - t);
    c.posteriors(2, i) = 1.0 - rest;
  }
  return c;
}

}  // namespace

TEST_CASE("linear continuum: endpoints, spacing, midpoint") {
  const Continuum two = linear_continuum(v1(-1), v1(1), 2);
  CHECK(two.length() == 2);
  CHECK(two.items(0, 0) == -1.0);
  CHECK(two.items(0, 1) == 1.0);

  const Continuum c = linear_continuum(v1(-1), v1(1), 41);
  CHECK(c.items(0, 20) == 0.0);
  for (Index i = 0; i + 1 < 41; ++i) CHECK(c.items(0, i + 1) - c.items(0, i) == doctest::Approx(0.05).epsilon(1e-12));

  Vector a(3), b(3);
  a << 0, 1, 2;
  b << 4, -1, 2;
  const Continuum d = linear_continuum(a, b, 7);
  const double step = (d.items.col(1) - d.items.col(0)).norm();
  for (Index i = 1; i + 1 < 7; ++i) CHECK((d.items.col(i + 1) - d.items.col(i)).norm() == doctest::Approx(step));
  CHECK_THROWS_AS(linear_continuum(a, b, 1), ConfigError);
  CHECK_THROWS_AS(linear_continuum(a, v1(0), 3), ConfigError);
}

TEST_CASE("crossing position") {
  Matrix p(2, 4);
  p << 0.9, 0.7, 0.3, 0.1,
       0.1, 0.3, 0.7, 0.9;
  REQUIRE(crossing_position(p, 0, 1));
  CHECK(*crossing_position(p, 0, 1) == doctest::Approx(1.5));
  CHECK_FALSE(crossing_position(p, 1, 0));
  Matrix q(2, 3);
  q << 0.6, 0.5, 0.2,
       0.4, 0.5, 0.8;
  CHECK(*crossing_position(q, 0, 1) == doctest::Approx(1.0));
}

TEST_CASE("pair selection: rules and reasons") {
  const ContinuumPosteriors good = ramp(50, 0.01, 0.99);
  const PairVerdict v = judge_pair(good, 0.95, 5);
  CHECK(v.kept);
  CHECK(*v.crossing == doctest::Approx(24.5));

  const PairVerdict dip = judge_pair(ramp(50, 0.01, 0.99, 30, 0.4), 0.95, 5);
  CHECK_FALSE(dip.kept);
  CHECK(dip.reason == RejectReason::PosteriorSumBelowThreshold);
  CHECK(to_string(dip.reason) == "posterior_sum_below_threshold");

  // crossing near item 1
  const PairVerdict edge = judge_pair(ramp(50, 0.45, 0.99), 0.95, 5);
  REQUIRE(edge.crossing);
  CHECK(*edge.crossing < 5.0);
  CHECK(edge.reason == RejectReason::BoundaryNearExtremity);
  CHECK(to_string(edge.reason) == "boundary_near_extremity");

  const PairVerdict never = judge_pair(ramp(50, 0.01, 0.4), 0.95, 5);
  CHECK(never.reason == RejectReason::BoundaryNearExtremity);

  const PairSelection sel = select_valid_pairs({good, ramp(50, 0.45, 0.99), good}, 0.95, 5);
  CHECK(sel.verdicts.size() == 3);
  CHECK(sel.kept == std::vector<std::size_t>{0, 2});
}

TEST_CASE("candidate pairs: k-th sample of each class pair") {
  std::vector<int> labels;
  for (int rep = 0; rep < 30; ++rep)
    for (int c = 0; c < 10; ++c) labels.push_back(c);
  const auto pairs = candidate_pairs(labels, 10, 25);
  CHECK(pairs.size() == 45 * 25);
  CHECK(pairs[0].source_label == 0);
  CHECK(pairs[0].target_label == 1);
  CHECK(pairs[0].source_index == 0);
  CHECK(pairs[0].target_index == 1);
  CHECK(pairs[1].source_index == 10);
  for (const auto& p : pairs) {
    CHECK(labels[std::size_t(p.source_index)] == p.source_label);
    CHECK(labels[std::size_t(p.target_index)] == p.target_label);
  }
  CHECK(candidate_pairs(labels, 10, 100).size() == 45 * 30);
}

TEST_CASE("autoencoder: layer stack and latent shape") {
  int latent = -1;
  const auto specs = autoencoder_layers(Shape::image(28, 28, 1), AutoencoderConfig{}, &latent);
  const Network net = Network::build(specs, Shape::image(28, 28, 1), 1);
  CHECK(latent == 5);
  CHECK(net.layer(latent).out == Shape::image(4, 4, 8));
  CHECK(net.output_shape() == Shape::image(28, 28, 1));
  const Network net32 = Network::build(autoencoder_layers(Shape::image(32, 32, 3), AutoencoderConfig{}),
                                       Shape::image(32, 32, 3), 1);
  CHECK(net32.layer(5).out == Shape::image(4, 4, 8));
  CHECK(net32.output_shape() == Shape::image(32, 32, 3));
  CHECK_THROWS_AS(autoencoder_layers(Shape::image(27, 27, 1), AutoencoderConfig{}), ConfigError);
  CHECK_THROWS_AS(autoencoder_layers(Shape::vec(10), AutoencoderConfig{}), ConfigError);
}

TEST_CASE("autoencoder: training reduces error and latent continuum endpoints") {
  const Shape img = Shape::image(8, 8, 1);
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix images(64, 40);
  for (Index j = 0; j < 40; ++j) {
    const double cx = 2.0 + 4.0 * u(rng), cy = 2.0 + 4.0 * u(rng);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        images(y * 8 + x, j) = std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / 4.0);
  }
  AutoencoderConfig cfg;
  cfg.encoder_filters = {4, 4, 4};
  cfg.train.epochs = 20;
  cfg.train.learning_rate = 3e-3;
  cfg.train.batch_size = 8;
  const auto trained = train_autoencoder(images, img, cfg, 5);
  REQUIRE(trained.history.size() == 20);
  CHECK(trained.history.back().loss < trained.history.front().loss);
  const Autoencoder& ae = trained.model;
  CHECK(ae.latent_shape() == Shape::image(1, 1, 4));

  const Vector a = images.col(0), b = images.col(1);
  const Continuum c = latent_continuum(ae, a, b, 16);
  CHECK(c.length() == 16);
  Matrix ends(64, 2);
  ends.col(0) = a;
  ends.col(1) = b;
  const Matrix rec = ae.decode(ae.encode(ends));
  CHECK(c.items.col(0) == rec.col(0));
  CHECK(c.items.col(15) == rec.col(1));

  const Continuum same = latent_continuum(ae, a, a, 5);
  for (Index i = 1; i < 5; ++i) CHECK(same.items.col(i) == same.items.col(0));

  Matrix bad = images;
  bad(0, 0) = 1.5;
  CHECK_THROWS_AS(train_autoencoder(bad, img, cfg, 5), ConfigError);
}
