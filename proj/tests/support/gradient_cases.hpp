#pragma once

// Small random instances covering every layer kind, activation and noise type.

#include "gradient_check.hpp"

#include <string>
#include <vector>

namespace catgeo::testing {

struct GradCase {
  std::string name;
  Network net;
  Matrix x;
  Matrix y;
  Loss loss;
};

inline std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  Rng rng = make_rng(2024);
  auto add = [&](std::string name, std::vector<LayerSpec> specs, Shape in, Loss loss, Index batch) {
    Network net = Network::build(specs, in, 17 + cases.size());
    randomize_biases(net, rng);
    Matrix x = random_matrix(in.size(), batch, rng);
    Matrix y;
    const Index out = net.output_shape().size();
    if (loss == Loss::CrossEntropy) {
      std::vector<int> labels;
      std::uniform_int_distribution<int> pick(0, int(out) - 1);
      for (Index j = 0; j < batch; ++j) labels.push_back(pick(rng));
      y = one_hot(labels, int(out));
    } else {
      y = random_matrix(out, batch, rng, 0.0, 1.0);
    }
    cases.push_back({std::move(name), std::move(net), std::move(x), std::move(y), loss});
  };

  using A = Activation;
  add("dense sigmoid -> softmax (cross-entropy)",
      {LayerSpec::dense(5, A::Sigmoid), LayerSpec::dense(3, A::Softmax)}, Shape::vec(4),
      Loss::CrossEntropy, 3);
  add("dense relu/identity with gaussian noise (mse)",
      {LayerSpec::dense(5, A::Relu, Noise::gaussian(0.5)), LayerSpec::dense(5, A::Identity),
       LayerSpec::dense(2, A::Sigmoid)},
      Shape::vec(3), Loss::MeanSquaredError, 4);
  add("input bernoulli noise + dense relu (cross-entropy)",
      {LayerSpec::identity(Noise::bernoulli(0.3)), LayerSpec::dense(5, A::Relu, Noise::bernoulli(0.2)),
       LayerSpec::dense(4, A::Softmax)},
      Shape::vec(5), Loss::CrossEntropy, 4);
  add("softmax output under mse", {LayerSpec::dense(5, A::Sigmoid), LayerSpec::dense(3, A::Softmax)},
      Shape::vec(2), Loss::MeanSquaredError, 3);
  add("conv same + maxpool + flatten + dense",
      {LayerSpec::conv2d(3, 3, A::Relu), LayerSpec::max_pool(2), LayerSpec::flatten(),
       LayerSpec::dense(5, A::Sigmoid), LayerSpec::dense(3, A::Softmax)},
      Shape::image(5, 5, 2), Loss::CrossEntropy, 2);
  add("conv valid + upsample + conv sigmoid (autoencoder-like, mse)",
      {LayerSpec::conv2d(2, 3, A::Relu, Padding::Valid, Noise::gaussian(0.2)),
       LayerSpec::up_sample(2), LayerSpec::conv2d(1, 3, A::Sigmoid)},
      Shape::image(5, 4, 1), Loss::MeanSquaredError, 2);
  add("conv + global average pool + dense identity (mse)",
      {LayerSpec::conv2d(4, 2, A::Identity, Padding::Same), LayerSpec::max_pool(2, Noise::bernoulli(0.25)),
       LayerSpec::global_avg_pool(Noise::gaussian(0.3)), LayerSpec::dense(2, A::Identity)},
      Shape::image(4, 5, 3), Loss::MeanSquaredError, 3);
  return cases;
}

}  // namespace catgeo::testing
