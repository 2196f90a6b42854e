#include "catgeo/continua.hpp"

#include <algorithm>
#include <cmath>

namespace catgeo {

Continuum linear_continuum(const Vector& a, const Vector& b, Index n) {
  if (n < 2) throw ConfigError("a continuum needs at least 2 items");
  if (a.size() != b.size()) throw ConfigError("continuum endpoints differ in shape");
  Continuum c;
  c.items.resize(a.size(), n);
  for (Index i = 0; i < n; ++i) {
    const double t = double(i) / double(n - 1);
    c.items.col(i) = (1.0 - t) * a + t * b;
  }
  return c;
}

Matrix Autoencoder::encode(const Matrix& images) const { return predict(encoder, images); }
Matrix Autoencoder::decode(const Matrix& latents) const { return predict(decoder, latents); }

std::vector<LayerSpec> autoencoder_layers(Shape image, const AutoencoderConfig& cfg, int* latent_layer) {
  if (!image.spatial) throw ConfigError("autoencoder needs image-shaped input");
  if (cfg.encoder_filters.size() != 3) throw ConfigError("autoencoder uses exactly three encoder filters");
  const int k = cfg.kernel;
  auto side_after_pools = [](int s) { return (((s + 1) / 2 + 1) / 2 + 1) / 2; };
  Padding last_pad = Padding::Same;
  for (int side : {image.h, image.w}) {
    const int full = 8 * side_after_pools(side);
    if (full == side) continue;
    if (full - 2 * (k - 1) == side) {
      last_pad = Padding::Valid;
      continue;
    }
    throw ConfigError("image side " + std::to_string(side) + " cannot be reconstructed by the autoencoder");
  }
  if (last_pad == Padding::Valid && 8 * side_after_pools(image.h) - image.h != 8 * side_after_pools(image.w) - image.w)
    throw ConfigError("autoencoder needs both image sides to round the same way");

  using A = Activation;
  const auto& f = cfg.encoder_filters;
  std::vector<LayerSpec> layers{
      LayerSpec::conv2d(f[0], k, A::Relu), LayerSpec::max_pool(2),
      LayerSpec::conv2d(f[1], k, A::Relu), LayerSpec::max_pool(2),
      LayerSpec::conv2d(f[2], k, A::Relu), LayerSpec::max_pool(2),
      LayerSpec::conv2d(f[2], k, A::Relu), LayerSpec::up_sample(2),
      LayerSpec::conv2d(f[1], k, A::Relu), LayerSpec::up_sample(2),
      LayerSpec::conv2d(f[0], k, A::Relu, last_pad), LayerSpec::up_sample(2),
      LayerSpec::conv2d(image.c, k, A::Relu)};
  if (latent_layer) *latent_layer = 5;
  return layers;
}

AutoencoderTraining train_autoencoder(const Matrix& images, Shape image, const AutoencoderConfig& cfg,
                                      std::uint64_t seed, const EpochCallback& on_epoch) {
  if (images.size() > 0 && (images.minCoeff() < 0.0 || images.maxCoeff() > 1.0))
    throw ConfigError("autoencoder inputs must be normalized to [0, 1]");
  int latent = 0;
  Network net = Network::build(autoencoder_layers(image, cfg, &latent), image, seed);
  TrainConfig tc = cfg.train;
  tc.loss = Loss::MeanSquaredError;
  AutoencoderTraining out;
  out.history = train(net, images, images, tc, on_epoch);
  out.model.encoder = net.slice(0, latent + 1);
  out.model.decoder = net.slice(latent + 1, net.depth());
  return out;
}

Continuum latent_continuum(const Autoencoder& ae, const Vector& a, const Vector& b, Index n) {
  if (n < 2) throw ConfigError("a continuum needs at least 2 items");
  Matrix ends(a.size(), 2);
  ends.col(0) = a;
  ends.col(1) = b;
  const Matrix z = ae.encode(ends);
  Matrix latents(z.rows(), n);
  for (Index i = 0; i < n; ++i) {
    const double t = double(i) / double(n - 1);
    latents.col(i) = z.col(0) + t * (z.col(1) - z.col(0));
  }
  latents.col(n - 1) = z.col(1);
  Continuum c;
  c.items = ae.decode(latents);
  return c;
}

std::optional<double> crossing_position(const Matrix& posteriors, int source, int target) {
  const Index n = posteriors.cols();
  for (Index i = 0; i + 1 < n; ++i) {
    const double d0 = posteriors(target, i) - posteriors(source, i);
    const double d1 = posteriors(target, i + 1) - posteriors(source, i + 1);
    if (d0 < 0.0 && d1 >= 0.0) return double(i) + (-d0) / (d1 - d0);
  }
  return std::nullopt;
}

std::string to_string(RejectReason r) {
  switch (r) {
    case RejectReason::None: return "";
    case RejectReason::PosteriorSumBelowThreshold: return "posterior_sum_below_threshold";
    case RejectReason::BoundaryNearExtremity: return "boundary_near_extremity";
  }
  return "?";
}

PairVerdict judge_pair(const ContinuumPosteriors& c, double threshold, int margin) {
  PairVerdict v;
  v.crossing = crossing_position(c.posteriors, c.source_label, c.target_label);
  for (Index i = 0; i < c.posteriors.cols(); ++i) {
    if (c.posteriors(c.source_label, i) + c.posteriors(c.target_label, i) < threshold) {
      v.reason = RejectReason::PosteriorSumBelowThreshold;
      return v;
    }
  }
  const double last = double(c.posteriors.cols() - 1);
  if (!v.crossing || *v.crossing < margin || *v.crossing > last - margin) {
    v.reason = RejectReason::BoundaryNearExtremity;
    return v;
  }
  v.kept = true;
  return v;
}

PairSelection select_valid_pairs(const std::vector<ContinuumPosteriors>& candidates, double threshold,
                                 int margin) {
  PairSelection sel;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    sel.verdicts.push_back(judge_pair(candidates[i], threshold, margin));
    if (sel.verdicts.back().kept) sel.kept.push_back(i);
  }
  return sel;
}

std::vector<CandidatePair> candidate_pairs(const std::vector<int>& labels, int classes, int per_class) {
  std::vector<std::vector<int>> first(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& bucket = first[static_cast<std::size_t>(labels[i])];
    if (int(bucket.size()) < per_class) bucket.push_back(int(i));
  }
  std::vector<CandidatePair> out;
  for (int a = 0; a < classes; ++a)
    for (int b = a + 1; b < classes; ++b) {
      const auto& A = first[std::size_t(a)];
      const auto& B = first[std::size_t(b)];
      for (std::size_t k = 0; k < std::min(A.size(), B.size()); ++k) out.push_back({A[k], B[k], a, b});
    }
  return out;
}

}  // namespace catgeo
