#pragma once

// Central finite-difference oracle for the reverse-mode pass. Independent of
// backward(): it only ever calls the forward pass through loss evaluation.

#include "catgeo/network.hpp"
#include "catgeo/train.hpp"

#include <algorithm>
#include <cmath>

namespace catgeo::testing {

inline double relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double denom = std::max({analytic.norm(), numeric.norm(), 1e-12});
  return (analytic - numeric).norm() / denom;
}

// Loss under a noise draw that is identical for every evaluation.
inline double fixed_noise_loss(const Network& net, const Matrix& x, const Matrix& y, Loss loss,
                               std::uint64_t noise_seed) {
  Rng rng = make_rng(noise_seed);
  const Matrix out = forward(net, x, Mode::Train, &rng).output();
  const double n = double(out.cols());
  if (loss == Loss::CrossEntropy) return -(y.array() * out.array().log()).sum() / n;
  return (out - y).squaredNorm() / (n * double(out.rows()));
}

struct GradCheck {
  double worst = 0.0;  // worst per-tensor relative error
  int worst_layer = -1;
};

inline GradCheck check_parameter_gradients(const Network& net, const Matrix& x, const Matrix& y,
                                           Loss loss, std::uint64_t noise_seed = 99,
                                           double h = 1e-5) {
  Rng rng = make_rng(noise_seed);
  const LossAndGradients lg = loss_and_gradients(net, x, y, loss, Mode::Train, &rng);
  GradCheck report;
  Network probe = net;
  for (int l = 0; l < net.depth(); ++l) {
    if (!net.layer(l).has_params()) continue;
    auto numeric_for = [&](auto& param) {
      using T = std::decay_t<decltype(param)>;
      T num(param.rows(), param.cols());
      for (Index i = 0; i < param.size(); ++i) {
        const double keep = param.data()[i];
        param.data()[i] = keep + h;
        const double up = fixed_noise_loss(probe, x, y, loss, noise_seed);
        param.data()[i] = keep - h;
        const double down = fixed_noise_loss(probe, x, y, loss, noise_seed);
        param.data()[i] = keep;
        num.data()[i] = (up - down) / (2 * h);
      }
      return num;
    };
    const Matrix nw = numeric_for(probe.layer(l).weights);
    const Vector nb = numeric_for(probe.layer(l).bias);
    const auto u = static_cast<std::size_t>(l);
    for (double e : {relative_error(lg.grads.weights[u], nw), relative_error(lg.grads.bias[u], nb)}) {
      if (e > report.worst) {
        report.worst = e;
        report.worst_layer = l;
      }
    }
  }
  return report;
}

// Finite-difference gradient of sum ||f_layer(x) - target||^2 w.r.t. x.
inline Matrix numeric_input_gradient(const Network& net, const Matrix& x, int layer,
                                     const Matrix& target, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  auto objective = [&](const Matrix& in) {
    return (forward(net, in, Mode::Eval, nullptr, layer).output() - target).squaredNorm();
  };
  for (Index i = 0; i < x.size(); ++i) {
    const double keep = probe.data()[i];
    probe.data()[i] = keep + h;
    const double up = objective(probe);
    probe.data()[i] = keep - h;
    const double down = objective(probe);
    probe.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Nonzero biases so that relu kinks and symmetric init do not hide bugs.
inline void randomize_biases(Network& net, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int l = 0; l < net.depth(); ++l)
    for (Index i = 0; i < net.layer(l).bias.size(); ++i) net.layer(l).bias[i] = u(rng);
}

}  // namespace catgeo::testing
