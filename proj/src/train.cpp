#include "catgeo/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace catgeo {

std::string to_string(Loss loss) {
  return loss == Loss::CrossEntropy ? "cross_entropy" : "mse";
}

Loss parse_loss(const std::string& s) {
  if (s == "cross_entropy") return Loss::CrossEntropy;
  if (s == "mse") return Loss::MeanSquaredError;
  throw ConfigError("unknown loss '" + s + "'");
}

Matrix one_hot(const std::vector<int>& labels, int classes) {
  Matrix m = Matrix::Zero(classes, static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw ConfigError("label out of range");
    m(labels[i], static_cast<Index>(i)) = 1.0;
  }
  return m;
}

std::vector<int> argmax_columns(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.cols()));
  for (Index j = 0; j < m.cols(); ++j) {
    Index r = 0;
    m.col(j).maxCoeff(&r);
    out[static_cast<std::size_t>(j)] = static_cast<int>(r);
  }
  return out;
}

double accuracy(const Matrix& probabilities, const std::vector<int>& labels) {
  const auto pred = argmax_columns(probabilities);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return pred.empty() ? 0.0 : double(hits) / double(pred.size());
}

namespace {

double batch_loss(const Matrix& out, const Matrix& targets, Loss loss) {
  const double n = static_cast<double>(out.cols());
  if (loss == Loss::CrossEntropy) {
    constexpr double tiny = 1e-300;
    return -(targets.array() * out.array().max(tiny).log()).sum() / n;
  }
  return (out - targets).squaredNorm() / (n * static_cast<double>(out.rows()));
}

}  // namespace

LossAndGradients loss_and_gradients(const Network& net, const Matrix& inputs,
                                    const Matrix& targets, Loss loss, Mode mode, Rng* rng) {
  ForwardTrace t = forward(net, inputs, mode, rng);
  const Matrix& out = t.output();
  if (out.rows() != targets.rows() || out.cols() != targets.cols())
    throw ConfigError("targets do not match the network output shape");
  const double n = static_cast<double>(out.cols());
  LossAndGradients r{batch_loss(out, targets, loss), {}, out};
  const Layer& last = net.layer(net.depth() - 1);
  if (loss == Loss::CrossEntropy && last.spec.activation == Activation::Softmax) {
    r.grads = backward(net, inputs, t, (out - targets) / n, GradientAt::PreActivation, false);
  } else if (loss == Loss::CrossEntropy) {
    const Matrix g = -(targets.array() / out.array().max(1e-300)).matrix() / n;
    r.grads = backward(net, inputs, t, g, GradientAt::Output, false);
  } else {
    const Matrix g = 2.0 * (out - targets) / (n * static_cast<double>(out.rows()));
    r.grads = backward(net, inputs, t, g, GradientAt::Output, false);
  }
  return r;
}

double evaluate_loss(const Network& net, const Matrix& inputs, const Matrix& targets, Loss loss) {
  return batch_loss(predict(net, inputs), targets, loss);
}

Adam::Adam(const Network& net, double learning_rate, AdamParams params)
    : lr_(learning_rate), p_(params) {
  for (const auto& L : net.layers()) {
    mw_.push_back(Matrix::Zero(L.weights.rows(), L.weights.cols()));
    vw_.push_back(Matrix::Zero(L.weights.rows(), L.weights.cols()));
    mb_.push_back(Vector::Zero(L.bias.size()));
    vb_.push_back(Vector::Zero(L.bias.size()));
  }
}

void Adam::step(Network& net, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(p_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(p_.beta2, double(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps_hat = p_.epsilon * std::sqrt(c2);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = p_.beta1 * m + (1.0 - p_.beta1) * g;
    v = p_.beta2 * v + (1.0 - p_.beta2) * g.cwiseAbs2();
    param.array() -= step * m.array() / (v.array().sqrt() + eps_hat);
  };
  for (int l = 0; l < net.depth(); ++l) {
    Layer& L = net.layer(l);
    if (!L.has_params()) continue;
    const auto u = static_cast<std::size_t>(l);
    update(L.weights, grads.weights[u], mw_[u], vw_[u]);
    update(L.bias, grads.bias[u], mb_[u], vb_[u]);
  }
}

History train(Network& net, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (inputs.cols() != targets.cols()) throw ConfigError("inputs and targets differ in length");
  if (inputs.rows() != net.input_shape().size())
    throw ConfigError("inputs do not match the network input shape");
  if (targets.rows() != net.output_shape().size())
    throw ConfigError("targets do not match the network output shape");

  History history;
  if (cfg.epochs == 0 || inputs.cols() == 0) return history;

  Rng shuffle_rng = make_rng(cfg.seed, 1);
  Rng noise_rng = make_rng(cfg.seed, 2);
  Adam opt(net, cfg.learning_rate, cfg.adam);
  const bool classify = cfg.loss == Loss::CrossEntropy;

  std::vector<Index> order(static_cast<std::size_t>(inputs.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  Matrix xb, yb;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    double hits = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      xb.resize(inputs.rows(), static_cast<Index>(n));
      yb.resize(targets.rows(), static_cast<Index>(n));
      for (std::size_t j = 0; j < n; ++j) {
        xb.col(static_cast<Index>(j)) = inputs.col(order[start + j]);
        yb.col(static_cast<Index>(j)) = targets.col(order[start + j]);
      }
      LossAndGradients lg = [&] {
        try {
          return loss_and_gradients(net, xb, yb, cfg.loss, Mode::Train, &noise_rng);
        } catch (const NumericalError& e) {
          throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch_index));
        }
      }();
      if (!std::isfinite(lg.loss))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      opt.step(net, lg.grads);
      loss_sum += lg.loss * double(n);
      if (classify) {
        // Train-mode predictions of this batch, before the update.
        const auto pred = argmax_columns(lg.output);
        const auto truth = argmax_columns(yb);
        for (std::size_t j = 0; j < n; ++j) hits += pred[j] == truth[j];
      }
      ++batch_index;
    }
    EpochStats s;
    s.loss = loss_sum / double(order.size());
    s.accuracy = classify ? hits / double(order.size()) : std::numeric_limits<double>::quiet_NaN();
    history.push_back(s);
    if (on_epoch) on_epoch(epoch, s, net);
  }
  return history;
}

}  // namespace catgeo
