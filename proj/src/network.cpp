#include "catgeo/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace catgeo {

namespace {

struct ConvGeometry {
  int in_h, in_w, in_c;
  int k_h, k_w, stride;
  int pad_top, pad_left;
  int out_h, out_w;
  Index rows() const { return Index(k_h) * k_w * in_c; }
  Index positions() const { return Index(out_h) * out_w; }
};

ConvGeometry conv_geometry(const LayerSpec& s, const Shape& in) {
  ConvGeometry g{in.h, in.w, in.c, s.kernel_h, s.kernel_w, s.stride, 0, 0, 0, 0};
  if (s.padding == Padding::Same) {
    g.out_h = (in.h + s.stride - 1) / s.stride;
    g.out_w = (in.w + s.stride - 1) / s.stride;
    g.pad_top = std::max((g.out_h - 1) * s.stride + s.kernel_h - in.h, 0) / 2;
    g.pad_left = std::max((g.out_w - 1) * s.stride + s.kernel_w - in.w, 0) / 2;
  } else {
    g.out_h = in.h >= s.kernel_h ? (in.h - s.kernel_h) / s.stride + 1 : 0;
    g.out_w = in.w >= s.kernel_w ? (in.w - s.kernel_w) / s.stride + 1 : 0;
  }
  return g;
}

// Patches for the whole batch: column b * positions + (oy * out_w + ox),
// row (ky * k_w + kx) * in_c + ch.
Matrix im2col(const Matrix& x, const ConvGeometry& g) {
  const Index batch = x.cols();
  const int C = g.in_c;
  Matrix col(g.rows(), g.positions() * batch);
  for (Index b = 0; b < batch; ++b) {
    const double* src = x.col(b).data();
    double* dst = col.col(b * g.positions()).data();
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        for (int ky = 0; ky < g.k_h; ++ky) {
          const int iy = oy * g.stride + ky - g.pad_top;
          const bool row_in = iy >= 0 && iy < g.in_h;
          for (int kx = 0; kx < g.k_w; ++kx) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (row_in && ix >= 0 && ix < g.in_w) {
              const double* s = src + (Index(iy) * g.in_w + ix) * C;
              for (int ch = 0; ch < C; ++ch) dst[ch] = s[ch];
            } else {
              for (int ch = 0; ch < C; ++ch) dst[ch] = 0.0;
            }
            dst += C;
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const Matrix& col, const ConvGeometry& g, Matrix& dx) {
  const Index batch = dx.cols();
  const int C = g.in_c;
  for (Index b = 0; b < batch; ++b) {
    double* dst = dx.col(b).data();
    const double* src = col.col(b * g.positions()).data();
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        for (int ky = 0; ky < g.k_h; ++ky) {
          const int iy = oy * g.stride + ky - g.pad_top;
          const bool row_in = iy >= 0 && iy < g.in_h;
          for (int kx = 0; kx < g.k_w; ++kx) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (row_in && ix >= 0 && ix < g.in_w) {
              double* d = dst + (Index(iy) * g.in_w + ix) * C;
              for (int ch = 0; ch < C; ++ch) d[ch] += src[ch];
            }
            src += C;
          }
        }
      }
    }
  }
}

Matrix apply_activation(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::Identity:
      return z;
    case Activation::Sigmoid:
      return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    case Activation::Relu:
      return z.cwiseMax(0.0);
    case Activation::Softmax: {
      Matrix a(z.rows(), z.cols());
      for (Index j = 0; j < z.cols(); ++j) {
        const double m = z.col(j).maxCoeff();
        a.col(j) = (z.col(j).array() - m).exp().matrix();
        a.col(j) /= a.col(j).sum();
      }
      return a;
    }
  }
  return z;
}

// d(act)/dz applied to an upstream gradient (or a tangent; the Jacobians are symmetric).
Matrix activation_backward(Activation act, const Matrix& g, const Matrix& z, const Matrix& a) {
  switch (act) {
    case Activation::Identity:
      return g;
    case Activation::Sigmoid:
      return g.cwiseProduct(a.cwiseProduct((1.0 - a.array()).matrix()));
    case Activation::Relu:
      return g.cwiseProduct(z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    case Activation::Softmax: {
      Matrix out(g.rows(), g.cols());
      for (Index j = 0; j < g.cols(); ++j) {
        const double dot = g.col(j).dot(a.col(j));
        out.col(j) = a.col(j).cwiseProduct((g.col(j).array() - dot).matrix());
      }
      return out;
    }
  }
  return g;
}

Matrix draw_mask(const Noise& noise, Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  if (noise.kind == NoiseKind::Bernoulli) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - noise.rate);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng) >= noise.rate ? keep_scale : 0.0;
  } else {
    std::normal_distribution<double> n(1.0, noise.gaussian_sigma());
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  }
  return m;
}

// W * X with the column count padded to a multiple of 8: every column then goes
// through the same GEMM kernel, so a sample's result does not depend on its
// position in the batch.
Matrix times(const Matrix& W, const Matrix& X) {
  const Index n = X.cols();
  const Index padded = (n + 7) / 8 * 8;
  if (padded == n) return W * X;
  Matrix xp(X.rows(), padded);
  xp.leftCols(n) = X;
  xp.rightCols(padded - n).setZero();
  Matrix z = W * xp;
  return z.leftCols(n);
}

// Linear part of a layer (everything before the activation).
Matrix layer_linear(const Layer& L, const Matrix& in, std::vector<Index>* route, Matrix* keep_patches) {
  const LayerSpec& s = L.spec;
  const Index batch = in.cols();
  switch (s.kind) {
    case LayerKind::Dense: {
      Matrix z = times(L.weights, in);
      z.colwise() += L.bias;
      return z;
    }
    case LayerKind::Conv2D: {
      const ConvGeometry g = conv_geometry(s, L.in);
      Matrix col = im2col(in, g);
      Matrix z = times(L.weights, col);
      z.colwise() += L.bias;
      if (keep_patches) *keep_patches = std::move(col);
      // Column-major F x (positions * batch) is already channels-last per sample.
      return Eigen::Map<const Matrix>(z.data(), L.out.size(), batch);
    }
    case LayerKind::MaxPool2D: {
      Matrix z(L.out.size(), batch);
      if (route) route->assign(static_cast<std::size_t>(z.size()), 0);
      const int k = s.pool;
      const int C = L.in.c;
      for (Index b = 0; b < batch; ++b) {
        for (int oy = 0; oy < L.out.h; ++oy) {
          for (int ox = 0; ox < L.out.w; ++ox) {
            for (int ch = 0; ch < C; ++ch) {
              double best = 0.0;
              Index best_idx = -1;
              for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * k + ky;
                if (iy >= L.in.h) break;
                for (int kx = 0; kx < k; ++kx) {
                  const int ix = ox * k + kx;
                  if (ix >= L.in.w) break;
                  const Index idx = (Index(iy) * L.in.w + ix) * C + ch;
                  const double v = in(idx, b);
                  if (best_idx < 0 || v > best) {  // strict: first occurrence wins ties
                    best = v;
                    best_idx = idx;
                  }
                }
              }
              const Index o = (Index(oy) * L.out.w + ox) * C + ch;
              z(o, b) = best;
              if (route) (*route)[static_cast<std::size_t>(b * z.rows() + o)] = b * in.rows() + best_idx;
            }
          }
        }
      }
      return z;
    }
    case LayerKind::UpSample2D: {
      Matrix z(L.out.size(), batch);
      const int k = s.pool;
      const int C = L.in.c;
      for (Index b = 0; b < batch; ++b)
        for (int oy = 0; oy < L.out.h; ++oy)
          for (int ox = 0; ox < L.out.w; ++ox)
            for (int ch = 0; ch < C; ++ch)
              z((Index(oy) * L.out.w + ox) * C + ch, b) =
                  in((Index(oy / k) * L.in.w + ox / k) * C + ch, b);
      return z;
    }
    case LayerKind::GlobalAvgPool: {
      const Index positions = Index(L.in.h) * L.in.w;
      Matrix z = Matrix::Zero(L.in.c, batch);
      for (Index b = 0; b < batch; ++b)
        for (Index p = 0; p < positions; ++p) z.col(b) += in.col(b).segment(p * L.in.c, L.in.c);
      return z / static_cast<double>(positions);
    }
    case LayerKind::Flatten:
    case LayerKind::Identity:
      return in;
  }
  return in;
}

void check_finite(const Matrix& m, int layer) {
  if (!m.allFinite())
    throw NumericalError("non-finite activation in layer " + std::to_string(layer));
}

}  // namespace

// --- names ---------------------------------------------------------------

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::MaxPool2D: return "maxpool2d";
    case LayerKind::UpSample2D: return "upsample2d";
    case LayerKind::GlobalAvgPool: return "globalavgpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Identity: return "identity";
  }
  return "?";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::Bernoulli: return "bernoulli";
    case NoiseKind::Gaussian: return "gaussian";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  for (auto k : {LayerKind::Dense, LayerKind::Conv2D, LayerKind::MaxPool2D, LayerKind::UpSample2D,
                 LayerKind::GlobalAvgPool, LayerKind::Flatten, LayerKind::Identity})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  for (auto a : {Activation::Identity, Activation::Sigmoid, Activation::Relu, Activation::Softmax})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown activation '" + s + "'");
}

NoiseKind parse_noise_kind(const std::string& s) {
  for (auto k : {NoiseKind::None, NoiseKind::Bernoulli, NoiseKind::Gaussian})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown noise kind '" + s + "'");
}

std::string to_string(const Shape& s) {
  std::ostringstream os;
  if (s.spatial)
    os << s.h << "x" << s.w << "x" << s.c;
  else
    os << s.c;
  return os.str();
}

double Noise::gaussian_sigma() const { return std::sqrt(rate / (1.0 - rate)); }

// --- LayerSpec factories ------------------------------------------------------

LayerSpec LayerSpec::dense(int units, Activation act, Noise noise) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  s.activation = act;
  s.noise = noise;
  return s;
}

LayerSpec LayerSpec::conv2d(int filters, int kernel, Activation act, Padding pad, Noise noise) {
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.units = filters;
  s.kernel_h = s.kernel_w = kernel;
  s.padding = pad;
  s.activation = act;
  s.noise = noise;
  return s;
}

LayerSpec LayerSpec::max_pool(int k, Noise noise) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2D;
  s.pool = k;
  s.noise = noise;
  return s;
}

LayerSpec LayerSpec::up_sample(int k) {
  LayerSpec s;
  s.kind = LayerKind::UpSample2D;
  s.pool = k;
  return s;
}

LayerSpec LayerSpec::global_avg_pool(Noise noise) {
  LayerSpec s;
  s.kind = LayerKind::GlobalAvgPool;
  s.noise = noise;
  return s;
}

LayerSpec LayerSpec::flatten(Noise noise) {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.noise = noise;
  return s;
}

LayerSpec LayerSpec::identity(Noise noise) {
  LayerSpec s;
  s.kind = LayerKind::Identity;
  s.noise = noise;
  return s;
}

// --- Network --------------------------------------------------------------

Network Network::build(const std::vector<LayerSpec>& specs, Shape input, std::uint64_t seed) {
  if (input.size() <= 0) throw ConfigError("input shape must be non-empty");
  Network net;
  net.input_ = input;
  net.seed_ = seed;
  Rng rng = make_rng(seed, 0x1a17);

  Shape cur = input;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(s.kind) + "): ";
    if (s.noise.kind != NoiseKind::None && !(s.noise.rate >= 0.0 && s.noise.rate < 1.0))
      throw ConfigError(where + "noise rate must lie in [0, 1)");
    if (s.activation == Activation::Softmax && i + 1 != specs.size())
      throw ConfigError(where + "softmax is only allowed on the final layer");
    if (s.activation == Activation::Softmax && s.noise.active())
      throw ConfigError(where + "noise on the softmax output is not supported");

    Layer L;
    L.spec = s;
    L.in = cur;
    switch (s.kind) {
      case LayerKind::Dense: {
        if (cur.spatial)
          throw ConfigError(where + "dense layer needs a rank-1 input (add a flatten layer)");
        if (s.units <= 0) throw ConfigError(where + "units must be positive");
        L.out = Shape::vec(s.units);
        const double limit = std::sqrt(6.0 / double(cur.size() + s.units));
        std::uniform_real_distribution<double> u(-limit, limit);
        L.weights.resize(s.units, cur.size());
        for (Index k = 0; k < L.weights.size(); ++k) L.weights.data()[k] = u(rng);
        L.bias = Vector::Zero(s.units);
        break;
      }
      case LayerKind::Conv2D: {
        if (!cur.spatial) throw ConfigError(where + "conv2d needs a spatial (h x w x c) input");
        if (s.units <= 0 || s.kernel_h <= 0 || s.kernel_w <= 0 || s.stride <= 0)
          throw ConfigError(where + "filters, kernel and stride must be positive");
        const ConvGeometry g = conv_geometry(s, cur);
        if (g.out_h <= 0 || g.out_w <= 0) throw ConfigError(where + "kernel larger than input");
        L.out = Shape::image(g.out_h, g.out_w, s.units);
        const double fan_in = double(s.kernel_h) * s.kernel_w * cur.c;
        const double fan_out = double(s.kernel_h) * s.kernel_w * s.units;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        L.weights.resize(s.units, g.rows());
        for (Index k = 0; k < L.weights.size(); ++k) L.weights.data()[k] = u(rng);
        L.bias = Vector::Zero(s.units);
        break;
      }
      case LayerKind::MaxPool2D:
        if (!cur.spatial) throw ConfigError(where + "pooling needs a spatial input");
        if (s.pool <= 0) throw ConfigError(where + "pool size must be positive");
        L.out = Shape::image((cur.h + s.pool - 1) / s.pool, (cur.w + s.pool - 1) / s.pool, cur.c);
        break;
      case LayerKind::UpSample2D:
        if (!cur.spatial) throw ConfigError(where + "upsampling needs a spatial input");
        if (s.pool <= 0) throw ConfigError(where + "upsampling factor must be positive");
        L.out = Shape::image(cur.h * s.pool, cur.w * s.pool, cur.c);
        break;
      case LayerKind::GlobalAvgPool:
        if (!cur.spatial) throw ConfigError(where + "global pooling needs a spatial input");
        L.out = Shape::vec(cur.c);
        break;
      case LayerKind::Flatten:
        L.out = Shape::vec(static_cast<int>(cur.size()));
        break;
      case LayerKind::Identity:
        L.out = cur;
        break;
    }
    cur = L.out;
    net.layers_.push_back(std::move(L));
  }
  return net;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& L : layers_) out.push_back(L.spec);
  return out;
}

Network Network::slice(int begin, int end) const {
  if (begin < 0 || end > depth() || begin >= end) throw ConfigError("invalid layer slice");
  Network net;
  net.seed_ = seed_;
  net.input_ = layers_[static_cast<std::size_t>(begin)].in;
  net.layers_.assign(layers_.begin() + begin, layers_.begin() + end);
  return net;
}

void Network::set_noise(int layer, Noise noise) {
  if (noise.kind != NoiseKind::None && !(noise.rate >= 0.0 && noise.rate < 1.0))
    throw ConfigError("noise rate must lie in [0, 1)");
  Layer& L = this->layer(layer);
  if (L.spec.activation == Activation::Softmax && noise.active())
    throw ConfigError("noise on the softmax output is not supported");
  L.spec.noise = noise;
}

Index Network::parameter_count() const {
  Index n = 0;
  for (const auto& L : layers_) n += L.weights.size() + L.bias.size();
  return n;
}

// --- forward / backward ------------------------------------------------------

ForwardTrace forward(const Network& net, const Matrix& x, Mode mode, Rng* rng, int last) {
  if (last < 0) last = net.depth() - 1;
  if (last >= net.depth()) throw ConfigError("layer index " + std::to_string(last) + " out of range");
  if (x.rows() != net.input_shape().size())
    throw ConfigError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                      std::to_string(net.input_shape().size()));
  ForwardTrace t;
  const auto n = static_cast<std::size_t>(last + 1);
  t.pre.resize(n);
  t.act.resize(n);
  t.out.resize(n);
  t.mask.resize(n);
  t.route.resize(n);
  t.patches.resize(n);
  for (int l = 0; l <= last; ++l) {
    const Layer& L = net.layer(l);
    const Matrix& in = l == 0 ? x : t.out[static_cast<std::size_t>(l - 1)];
    const auto u = static_cast<std::size_t>(l);
    const bool keep = mode == Mode::Train && L.spec.kind == LayerKind::Conv2D;
    t.pre[u] = layer_linear(L, in, L.spec.kind == LayerKind::MaxPool2D ? &t.route[u] : nullptr,
                            keep ? &t.patches[u] : nullptr);
    t.act[u] = apply_activation(L.spec.activation, t.pre[u]);
    if (mode == Mode::Train && L.spec.noise.active()) {
      if (!rng) throw ConfigError("train-mode forward needs a random generator");
      t.mask[u] = draw_mask(L.spec.noise, t.act[u].rows(), t.act[u].cols(), *rng);
      t.out[u] = t.act[u].cwiseProduct(t.mask[u]);
    } else {
      t.out[u] = t.act[u];
    }
    check_finite(t.out[u], l);
  }
  return t;
}

namespace {
constexpr Index kEvalChunk = 256;
}

Matrix activations(const Network& net, const Matrix& x, int layer) {
  if (layer < 0 || layer >= net.depth())
    throw ConfigError("layer index " + std::to_string(layer) + " out of range");
  Matrix out(net.layer(layer).out.size(), x.cols());
  for (Index start = 0; start < x.cols(); start += kEvalChunk) {
    const Index n = std::min(kEvalChunk, x.cols() - start);
    ForwardTrace t = forward(net, x.middleCols(start, n), Mode::Eval, nullptr, layer);
    out.middleCols(start, n) = t.output();
  }
  return out;
}

std::vector<Matrix> all_activations(const Network& net, const Matrix& x) {
  std::vector<Matrix> out;
  for (const auto& L : net.layers()) out.emplace_back(L.out.size(), x.cols());
  for (Index start = 0; start < x.cols(); start += kEvalChunk) {
    const Index n = std::min(kEvalChunk, x.cols() - start);
    ForwardTrace t = forward(net, x.middleCols(start, n), Mode::Eval);
    for (std::size_t l = 0; l < out.size(); ++l) out[l].middleCols(start, n) = t.out[l];
  }
  return out;
}

Matrix predict(const Network& net, const Matrix& x) {
  return activations(net, x, net.depth() - 1);
}

Gradients backward(const Network& net, const Matrix& x, const ForwardTrace& trace,
                   const Matrix& grad, GradientAt at, bool want_input, bool want_params) {
  const int last = static_cast<int>(trace.out.size()) - 1;
  Gradients G;
  if (want_params) {
    G.weights.resize(static_cast<std::size_t>(net.depth()));
    G.bias.resize(static_cast<std::size_t>(net.depth()));
  }
  Matrix g = grad;
  for (int l = last; l >= 0; --l) {
    const Layer& L = net.layer(l);
    const auto u = static_cast<std::size_t>(l);
    if (!(l == last && at == GradientAt::PreActivation)) {
      if (trace.mask[u].size() > 0) g = g.cwiseProduct(trace.mask[u]);
      g = activation_backward(L.spec.activation, g, trace.pre[u], trace.act[u]);
    }
    const Matrix& in = l == 0 ? x : trace.out[u - 1];
    const bool need_input_grad = l > 0 || want_input;
    const Index batch = g.cols();
    switch (L.spec.kind) {
      case LayerKind::Dense:
        if (want_params) {
          G.weights[u] = g * in.transpose();
          G.bias[u] = g.rowwise().sum();
        }
        if (need_input_grad) g = L.weights.transpose() * g;
        break;
      case LayerKind::Conv2D: {
        const ConvGeometry geo = conv_geometry(L.spec, L.in);
        const Eigen::Map<const Matrix> gz(g.data(), L.spec.units, geo.positions() * batch);
        if (want_params) {
          const bool cached = trace.patches.size() > u && trace.patches[u].size() > 0;
          const Matrix fresh = cached ? Matrix() : im2col(in, geo);
          const Matrix& col = cached ? trace.patches[u] : fresh;
          G.weights[u] = gz * col.transpose();
          G.bias[u] = gz.rowwise().sum();
        }
        if (need_input_grad) {
          const Matrix dcol = L.weights.transpose() * gz;
          Matrix dx = Matrix::Zero(L.in.size(), batch);
          col2im_add(dcol, geo, dx);
          g = std::move(dx);
        }
        break;
      }
      case LayerKind::MaxPool2D: {
        if (!need_input_grad) break;
        Matrix dx = Matrix::Zero(L.in.size(), batch);
        const auto& route = trace.route[u];
        for (Index k = 0; k < g.size(); ++k) dx.data()[route[static_cast<std::size_t>(k)]] += g.data()[k];
        g = std::move(dx);
        break;
      }
      case LayerKind::UpSample2D: {
        if (!need_input_grad) break;
        Matrix dx = Matrix::Zero(L.in.size(), batch);
        const int k = L.spec.pool;
        const int C = L.in.c;
        for (Index b = 0; b < batch; ++b)
          for (int oy = 0; oy < L.out.h; ++oy)
            for (int ox = 0; ox < L.out.w; ++ox)
              for (int ch = 0; ch < C; ++ch)
                dx((Index(oy / k) * L.in.w + ox / k) * C + ch, b) +=
                    g((Index(oy) * L.out.w + ox) * C + ch, b);
        g = std::move(dx);
        break;
      }
      case LayerKind::GlobalAvgPool: {
        if (!need_input_grad) break;
        const Index positions = Index(L.in.h) * L.in.w;
        Matrix dx(L.in.size(), batch);
        for (Index b = 0; b < batch; ++b)
          for (Index p = 0; p < positions; ++p)
            dx.col(b).segment(p * L.in.c, L.in.c) = g.col(b) / static_cast<double>(positions);
        g = std::move(dx);
        break;
      }
      case LayerKind::Flatten:
      case LayerKind::Identity:
        break;
    }
  }
  if (want_input) G.input = std::move(g);
  return G;
}

Matrix input_gradient(const Network& net, const Matrix& x, int layer, const Matrix& target) {
  if (layer < 0 || layer >= net.depth())
    throw ConfigError("layer index " + std::to_string(layer) + " out of range");
  const Layer& L = net.layer(layer);
  if (target.rows() != L.out.size() || target.cols() != x.cols())
    throw ConfigError("target activity shape does not match layer " + std::to_string(layer));
  ForwardTrace t = forward(net, x, Mode::Eval, nullptr, layer);
  const Matrix grad = 2.0 * (t.output() - target);
  return backward(net, x, t, grad, GradientAt::Output, true, false).input;
}

TangentResult forward_tangents(const Network& net, const Matrix& x, int layer) {
  if (layer < 0 || layer >= net.depth())
    throw ConfigError("layer index " + std::to_string(layer) + " out of range");
  const Index K = x.rows();
  TangentResult r;
  r.value = x;
  r.tangent.reserve(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    Matrix e = Matrix::Zero(K, x.cols());
    e.row(k).setOnes();
    r.tangent.push_back(std::move(e));
  }
  for (int l = 0; l <= layer; ++l) {
    const Layer& L = net.layer(l);
    switch (L.spec.kind) {
      case LayerKind::Dense: {
        Matrix z = times(L.weights, r.value);
        z.colwise() += L.bias;
        const Matrix a = apply_activation(L.spec.activation, z);
        for (auto& t : r.tangent) t = activation_backward(L.spec.activation, times(L.weights, t), z, a);
        r.value = a;
        break;
      }
      case LayerKind::Flatten:
      case LayerKind::Identity: {
        const Matrix a = apply_activation(L.spec.activation, r.value);
        for (auto& t : r.tangent) t = activation_backward(L.spec.activation, t, r.value, a);
        r.value = a;
        break;
      }
      default:
        throw ConfigError("forward-mode tangents support dense stacks only (layer " +
                          std::to_string(l) + " is " + to_string(L.spec.kind) + ")");
    }
    check_finite(r.value, l);
  }
  return r;
}

Matrix jacobian(const Network& net, const Vector& x, int layer) {
  TangentResult r = forward_tangents(net, x, layer);
  Matrix J(r.value.rows(), static_cast<Index>(r.tangent.size()));
  for (std::size_t k = 0; k < r.tangent.size(); ++k) J.col(static_cast<Index>(k)) = r.tangent[k];
  return J;
}

}  // namespace catgeo
