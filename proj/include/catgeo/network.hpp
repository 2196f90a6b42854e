#pragma once

#include "catgeo/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace catgeo {

enum class LayerKind { Dense, Conv2D, MaxPool2D, UpSample2D, GlobalAvgPool, Flatten, Identity };
enum class Activation { Identity, Sigmoid, Relu, Softmax };
enum class NoiseKind { None, Bernoulli, Gaussian };
enum class Padding { Same, Valid };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
std::string to_string(NoiseKind kind);
LayerKind parse_layer_kind(const std::string& s);
Activation parse_activation(const std::string& s);
NoiseKind parse_noise_kind(const std::string& s);

/// Multiplicative noise applied to a layer's activity in train mode.
struct Noise {
  NoiseKind kind = NoiseKind::None;
  double rate = 0.0;

  static Noise none() { return {}; }
  static Noise bernoulli(double rate) { return {NoiseKind::Bernoulli, rate}; }
  static Noise gaussian(double rate) { return {NoiseKind::Gaussian, rate}; }

  bool active() const { return kind != NoiseKind::None && rate > 0.0; }
  /// Standard deviation of the multiplicative Gaussian factor: sqrt(rate / (1 - rate)).
  double gaussian_sigma() const;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int units = 0;  // Dense units or Conv2D filters
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  Padding padding = Padding::Same;
  int pool = 2;  // MaxPool2D / UpSample2D factor
  Activation activation = Activation::Identity;
  Noise noise;

  static LayerSpec dense(int units, Activation act, Noise noise = {});
  static LayerSpec conv2d(int filters, int kernel, Activation act, Padding pad = Padding::Same,
                          Noise noise = {});
  static LayerSpec max_pool(int k, Noise noise = {});
  static LayerSpec up_sample(int k);
  static LayerSpec global_avg_pool(Noise noise = {});
  static LayerSpec flatten(Noise noise = {});
  /// Pass-through layer; exists to carry noise on the network input.
  static LayerSpec identity(Noise noise);
};

/// Activity shape. Rank-1 shapes have spatial == false and size c.
/// Spatial tensors are stored channels-last: index = (y * w + x) * c + ch.
struct Shape {
  int h = 1;
  int w = 1;
  int c = 1;
  bool spatial = false;

  static Shape vec(int n) { return {1, 1, n, false}; }
  static Shape image(int h, int w, int c) { return {h, w, c, true}; }
  Index size() const { return Index(h) * w * c; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

struct Layer {
  LayerSpec spec;
  Shape in;
  Shape out;
  Matrix weights;  // Dense: units x in; Conv2D: filters x (kh * kw * c_in)
  Vector bias;

  bool has_params() const { return weights.size() > 0; }
};

/// Feed-forward stack of layers with their parameters.
class Network {
 public:
  Network() = default;

  /// Validates the layer chain and initializes weights (Glorot-uniform) and
  /// zero biases. Throws ConfigError on shape mismatch.
  static Network build(const std::vector<LayerSpec>& specs, Shape input, std::uint64_t seed);

  int depth() const { return static_cast<int>(layers_.size()); }
  const Layer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
  Layer& layer(int i) { return layers_.at(static_cast<std::size_t>(i)); }
  const std::vector<Layer>& layers() const { return layers_; }
  Shape input_shape() const { return input_; }
  Shape output_shape() const { return layers_.empty() ? input_ : layers_.back().out; }
  std::uint64_t seed() const { return seed_; }
  std::vector<LayerSpec> specs() const;

  /// Copy of layers [begin, end) as a standalone network (input shape of layer begin).
  Network slice(int begin, int end) const;

  /// Replaces the noise configuration of one layer (parameters untouched).
  void set_noise(int layer, Noise noise);

  Index parameter_count() const;

 private:
  std::vector<Layer> layers_;
  Shape input_;
  std::uint64_t seed_ = 0;
};

enum class Mode { Train, Eval };

/// Everything the backward pass needs from a forward pass.
struct ForwardTrace {
  std::vector<Matrix> pre;     // pre-activation per layer
  std::vector<Matrix> act;     // post-activation, before noise
  std::vector<Matrix> out;     // post-noise layer output
  std::vector<Matrix> mask;    // multiplicative noise factors (empty if none)
  std::vector<std::vector<Index>> route;  // MaxPool2D argmax indices
  std::vector<Matrix> patches;  // Conv2D im2col, kept in train mode only

  const Matrix& output() const { return out.back(); }
};

/// Runs layers [0, last] on a batch (one sample per column). Train mode draws
/// noise from `rng`; eval mode ignores noise. `last` < 0 means the full net.
ForwardTrace forward(const Network& net, const Matrix& x, Mode mode, Rng* rng = nullptr,
                     int last = -1);

/// Eval-mode activity of `layer` for a batch, evaluated in chunks.
Matrix activations(const Network& net, const Matrix& x, int layer);
/// Eval-mode activity of every layer.
std::vector<Matrix> all_activations(const Network& net, const Matrix& x);
Matrix predict(const Network& net, const Matrix& x);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  Matrix input;
};

enum class GradientAt { Output, PreActivation };

/// Reverse-mode pass from layer `from` (the last layer of `trace`). `grad` is
/// dL/d(output of `from`), or dL/d(pre-activation of `from`) when `at` is
/// PreActivation (used for fused softmax cross-entropy).
Gradients backward(const Network& net, const Matrix& x, const ForwardTrace& trace,
                   const Matrix& grad, GradientAt at = GradientAt::Output, bool want_input = true,
                   bool want_params = true);

/// Gradient w.r.t. x of sum over columns of ||f_layer(x) - target||^2 (eval mode).
Matrix input_gradient(const Network& net, const Matrix& x, int layer, const Matrix& target);

/// Jacobian d f_layer / d x at a single input (eval mode), N x K, via
/// forward-mode tangents. Supported for Dense/Identity/Flatten stacks.
Matrix jacobian(const Network& net, const Vector& x, int layer);

/// Forward-mode tangents for a batch: returns f_layer(x) and, for each input
/// direction k, the directional derivative batch (N x B).
struct TangentResult {
  Matrix value;
  std::vector<Matrix> tangent;
};
TangentResult forward_tangents(const Network& net, const Matrix& x, int layer);

}  // namespace catgeo
