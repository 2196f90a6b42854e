#pragma once

#include "catgeo/network.hpp"

#include <functional>
#include <vector>

namespace catgeo {

enum class Loss { CrossEntropy, MeanSquaredError };

std::string to_string(Loss loss);
Loss parse_loss(const std::string& s);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  Loss loss = Loss::CrossEntropy;
  AdamParams adam;
  std::uint64_t seed = 0;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;  // argmax agreement; NaN for regression targets
};

using History = std::vector<EpochStats>;

/// Called after every epoch with the 1-based epoch number.
using EpochCallback = std::function<void(int epoch, const EpochStats&, const Network&)>;

/// Adam over shuffled mini-batches; `inputs` and `targets` hold one sample
/// per column. Cross-entropy expects one-hot targets and a softmax output.
History train(Network& net, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

/// Mean loss of the eval-mode network (no parameter update).
double evaluate_loss(const Network& net, const Matrix& inputs, const Matrix& targets, Loss loss);

/// Loss value and parameter gradients for one batch under a fixed noise draw.
struct LossAndGradients {
  double loss;
  Gradients grads;
  Matrix output;
};
LossAndGradients loss_and_gradients(const Network& net, const Matrix& inputs,
                                    const Matrix& targets, Loss loss, Mode mode, Rng* rng);

/// Fraction of columns whose argmax matches the label.
double accuracy(const Matrix& probabilities, const std::vector<int>& labels);
std::vector<int> argmax_columns(const Matrix& m);

Matrix one_hot(const std::vector<int>& labels, int classes);

class Adam {
 public:
  Adam(const Network& net, double learning_rate, AdamParams params);
  void step(Network& net, const Gradients& grads);
  long steps() const { return t_; }

 private:
  double lr_;
  AdamParams p_;
  long t_ = 0;
  std::vector<Matrix> mw_, vw_;
  std::vector<Vector> mb_, vb_;
};

}  // namespace catgeo
