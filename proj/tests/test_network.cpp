#include "catgeo/checkpoint.hpp"
#include "catgeo/network.hpp"
#include "support/gradient_cases.hpp"

#include <doctest.h>

#include <sstream>

using namespace catgeo;
using namespace catgeo::testing;

TEST_CASE("build: dense on scalar input has 1x128 weights") {
  Network net = Network::build({LayerSpec::dense(128, Activation::Sigmoid)}, Shape::vec(1), 3);
  CHECK(net.layer(0).weights.rows() == 128);
  CHECK(net.layer(0).weights.cols() == 1);
  CHECK(net.layer(0).bias.size() == 128);
  CHECK(net.layer(0).bias.isZero());
  // Glorot-uniform bound sqrt(6 / (1 + 128))
  CHECK(net.layer(0).weights.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 129.0));
}

TEST_CASE("build: identical seeds give bit-identical parameters") {
  const std::vector<LayerSpec> specs{LayerSpec::dense(16, Activation::Relu),
                                     LayerSpec::dense(4, Activation::Softmax)};
  Network a = Network::build(specs, Shape::vec(8), 42);
  Network b = Network::build(specs, Shape::vec(8), 42);
  Network c = Network::build(specs, Shape::vec(8), 43);
  CHECK(a.layer(0).weights == b.layer(0).weights);
  CHECK(a.layer(1).weights == b.layer(1).weights);
  CHECK(a.layer(0).weights != c.layer(0).weights);
}

TEST_CASE("build: configuration errors") {
  using A = Activation;
  CHECK_THROWS_AS(Network::build({LayerSpec::dense(8, A::Relu), LayerSpec::conv2d(32, 3, A::Relu)},
                                 Shape::vec(4), 0),
                  ConfigError);
  CHECK_THROWS_AS(Network::build({LayerSpec::dense(8, A::Relu)}, Shape::image(4, 4, 1), 0),
                  ConfigError);
  CHECK_THROWS_AS(Network::build({LayerSpec::dense(3, A::Softmax), LayerSpec::dense(3, A::Relu)},
                                 Shape::vec(4), 0),
                  ConfigError);
  CHECK_THROWS_AS(Network::build({LayerSpec::dense(3, A::Relu, Noise::bernoulli(1.0))}, Shape::vec(4), 0),
                  ConfigError);
  CHECK_THROWS_AS(Network::build({LayerSpec::conv2d(2, 5, A::Relu, Padding::Valid)},
                                 Shape::image(3, 3, 1), 0),
                  ConfigError);
}

TEST_CASE("build: spatial shape arithmetic") {
  using A = Activation;
  Network net = Network::build({LayerSpec::conv2d(16, 3, A::Relu), LayerSpec::max_pool(2),
                                LayerSpec::conv2d(8, 3, A::Relu), LayerSpec::max_pool(2),
                                LayerSpec::conv2d(8, 3, A::Relu), LayerSpec::max_pool(2),
                                LayerSpec::conv2d(8, 3, A::Relu), LayerSpec::up_sample(2),
                                LayerSpec::conv2d(16, 3, A::Relu, Padding::Valid)},
                               Shape::image(28, 28, 1), 0);
  CHECK(net.layer(1).out == Shape::image(14, 14, 16));
  CHECK(net.layer(5).out == Shape::image(4, 4, 8));
  CHECK(net.layer(7).out == Shape::image(8, 8, 8));
  CHECK(net.layer(8).out == Shape::image(6, 6, 16));
  CHECK(net.layer(0).weights.cols() == 9);
}

TEST_CASE("noise: gaussian dropout rate 0.5 has sigma 1") {
  CHECK(Noise::gaussian(0.5).gaussian_sigma() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(Noise::gaussian(0.2).gaussian_sigma() == doctest::Approx(0.5));
}

TEST_CASE("forward: rate 0 noise is identity in both modes") {
  using A = Activation;
  Network net = Network::build({LayerSpec::dense(6, A::Relu, Noise::gaussian(0.0)),
                                LayerSpec::dense(4, A::Sigmoid, Noise::bernoulli(0.0)),
                                LayerSpec::dense(3, A::Softmax)},
                               Shape::vec(5), 1);
  Rng rng = make_rng(3);
  const Matrix x = random_matrix(5, 7, rng);
  const ForwardTrace train = forward(net, x, Mode::Train, &rng);
  const ForwardTrace eval = forward(net, x, Mode::Eval);
  for (std::size_t l = 0; l < train.out.size(); ++l) CHECK(train.out[l] == eval.out[l]);
}

TEST_CASE("forward: eval mode is deterministic and softmax is normalized") {
  using A = Activation;
  Network net = Network::build({LayerSpec::dense(32, A::Relu, Noise::gaussian(0.5)),
                                LayerSpec::dense(10, A::Softmax)},
                               Shape::vec(20), 5);
  Rng rng = make_rng(9);
  const Matrix x = random_matrix(20, 50, rng, -5, 5);
  const Matrix a = predict(net, x);
  const Matrix b = predict(net, x);
  CHECK(a == b);
  for (Index j = 0; j < a.cols(); ++j) {
    CHECK(std::abs(a.col(j).sum() - 1.0) < 1e-12);
    CHECK(a.col(j).minCoeff() > 0.0);
    CHECK(a.col(j).maxCoeff() < 1.0);
  }
}

TEST_CASE("forward: non-finite activation reports the layer") {
  Network net = Network::build({LayerSpec::dense(2, Activation::Identity),
                                LayerSpec::dense(2, Activation::Identity)},
                               Shape::vec(1), 0);
  net.layer(1).weights.setConstant(std::numeric_limits<double>::infinity());
  Matrix x(1, 1);
  x << 1.0;
  try {
    (void)predict(net, x);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

namespace {

// Per-unit mean and standard error of train-mode activity over many draws.
void check_noise_mean(Noise noise) {
  Network net = Network::build({LayerSpec::dense(4, Activation::Sigmoid, noise)}, Shape::vec(2), 8);
  Matrix x(2, 1);
  x << 0.3, -0.7;
  const Vector clean = predict(net, x).col(0);
  constexpr Index draws = 100000;
  const Matrix xs = x.replicate(1, draws);
  Rng rng = make_rng(77);
  const Matrix noisy = forward(net, xs, Mode::Train, &rng).output();
  const Vector mean = noisy.rowwise().mean();
  for (Index i = 0; i < mean.size(); ++i) {
    const double var = (noisy.row(i).array() - mean[i]).square().sum() / double(draws - 1);
    const double se = std::sqrt(var / double(draws));
    CHECK(std::abs(mean[i] - clean[i]) < 3.0 * se);
  }
}

}  // namespace

TEST_CASE("noise: gaussian dropout preserves the mean") { check_noise_mean(Noise::gaussian(0.5)); }

TEST_CASE("noise: bernoulli dropout uses inverted scaling") {
  check_noise_mean(Noise::bernoulli(0.2));
  Network net = Network::build({LayerSpec::dense(200, Activation::Sigmoid, Noise::bernoulli(0.25))},
                               Shape::vec(1), 8);
  Matrix x(1, 1);
  x << 0.5;
  Rng rng = make_rng(1);
  const ForwardTrace t = forward(net, x, Mode::Train, &rng);
  for (Index i = 0; i < t.mask[0].size(); ++i) {
    const double m = t.mask[0](i);
    CHECK((m == 0.0 || m == doctest::Approx(1.0 / 0.75)));
  }
}

TEST_CASE("gradients: parameters match central finite differences") {
  for (const auto& c : gradient_cases()) {
    CAPTURE(c.name);
    const GradCheck r = check_parameter_gradients(c.net, c.x, c.y, c.loss);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("input_gradient: matches finite differences on every case") {
  for (const auto& c : gradient_cases()) {
    CAPTURE(c.name);
    Rng rng = make_rng(5);
    for (int layer = 0; layer < c.net.depth(); ++layer) {
      const Index n = c.net.layer(layer).out.size();
      const Matrix target = random_matrix(n, c.x.cols(), rng);
      const Matrix analytic = input_gradient(c.net, c.x, layer, target);
      const Matrix numeric = numeric_input_gradient(c.net, c.x, layer, target);
      CHECK(relative_error(analytic, numeric) < 1e-4);
    }
  }
}

TEST_CASE("input_gradient: zero at the eval activity of x itself") {
  Network net = Network::build({LayerSpec::dense(8, Activation::Sigmoid),
                                LayerSpec::dense(3, Activation::Relu)},
                               Shape::vec(2), 4);
  Rng rng = make_rng(2);
  const Matrix x = random_matrix(2, 3, rng);
  for (int layer = 0; layer < 2; ++layer) {
    const Matrix target = activations(net, x, layer);
    CHECK(input_gradient(net, x, layer, target).isZero(0.0));
  }
}

TEST_CASE("input_gradient: single linear unit closed form 2w(wx - t)") {
  Network net = Network::build({LayerSpec::dense(1, Activation::Identity)}, Shape::vec(1), 0);
  const double w = 1.7;
  net.layer(0).weights(0, 0) = w;
  Matrix x(1, 1), t(1, 1);
  x << 0.4;
  t << -0.3;
  const Matrix g = input_gradient(net, x, 0, t);
  CHECK(g(0, 0) == doctest::Approx(2 * w * (w * 0.4 + 0.3)).epsilon(1e-14));
  CHECK_THROWS_AS(input_gradient(net, x, 1, t), ConfigError);
}

TEST_CASE("jacobian: forward-mode tangents agree with reverse mode") {
  Network net = Network::build({LayerSpec::identity(Noise::bernoulli(0.1)),
                                LayerSpec::dense(7, Activation::Sigmoid),
                                LayerSpec::dense(5, Activation::Relu),
                                LayerSpec::dense(3, Activation::Softmax)},
                               Shape::vec(2), 12);
  Rng rng = make_rng(4);
  randomize_biases(net, rng);
  Vector x(2);
  x << 0.2, -0.4;
  for (int layer = 1; layer < net.depth(); ++layer) {
    const Matrix J = jacobian(net, x, layer);
    const Vector f = activations(net, x, layer).col(0);
    for (Index i = 0; i < J.rows(); ++i) {
      // d f_i / dx from reverse mode: gradient of (f_i - (f_i - 1/2))^2 = 2 * 1/2 * df_i
      Matrix target = f;
      target(i, 0) -= 0.5;
      const Matrix g = input_gradient(net, x, layer, target);
      CHECK((g.col(0).transpose() - J.row(i)).norm() < 1e-12);
    }
  }
}

TEST_CASE("checkpoint: save/load round trip is bit exact") {
  using A = Activation;
  Network net = Network::build({LayerSpec::conv2d(3, 3, A::Relu), LayerSpec::max_pool(2),
                                LayerSpec::flatten(Noise::gaussian(0.3)),
                                LayerSpec::dense(4, A::Softmax)},
                               Shape::image(6, 6, 1), 21);
  Rng rng = make_rng(0);
  randomize_biases(net, rng);
  std::stringstream ss;
  save_checkpoint(net, ss);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "CGL1");
  Network back = load_checkpoint(ss);
  for (int l = 0; l < net.depth(); ++l) {
    CHECK(back.layer(l).weights == net.layer(l).weights);
    CHECK(back.layer(l).bias == net.layer(l).bias);
    CHECK(back.layer(l).spec.noise.rate == net.layer(l).spec.noise.rate);
  }
  std::stringstream again;
  save_checkpoint(back, again);
  CHECK(again.str() == bytes);

  std::stringstream bad(std::string("CGL2") + bytes.substr(4));
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(truncated), FormatError);
}
