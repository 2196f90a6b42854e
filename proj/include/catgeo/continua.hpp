#pragma once

#include "catgeo/network.hpp"
#include "catgeo/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace catgeo {

/// Ordered inputs interpolating between two stimuli, one item per column.
struct Continuum {
  Matrix items;
  int source_label = -1;
  int target_label = -1;
  int source_index = -1;  // dataset index of the source stimulus, if any
  int target_index = -1;

  Index length() const { return items.cols(); }
};

/// Items (1 - t) a + t b for n evenly spaced t in [0, 1].
Continuum linear_continuum(const Vector& a, const Vector& b, Index n);

/// Encoder/decoder pair cut from one trained network at the latent layer.
struct Autoencoder {
  Network encoder;
  Network decoder;

  Matrix encode(const Matrix& images) const;
  Matrix decode(const Matrix& latents) const;
  Shape latent_shape() const { return encoder.output_shape(); }
};

struct AutoencoderConfig {
  std::vector<int> encoder_filters{16, 8, 8};
  int kernel = 3;
  TrainConfig train{30, 32, 1e-4, Loss::MeanSquaredError, {}, 0};
};

/// 3 x (Conv2D + MaxPool2D) encoder, mirrored 3 x (Conv2D + UpSample2D)
/// decoder, ReLU throughout, and a final 1-filter ReLU conv back to the image.
/// For inputs whose side is not a multiple of 8 the last decoder conv before
/// the final upsampling uses valid padding (e.g. 28: 4 -> 8 -> 16 -> 14 -> 28).
std::vector<LayerSpec> autoencoder_layers(Shape image, const AutoencoderConfig& cfg,
                                          int* latent_layer = nullptr);

struct AutoencoderTraining {
  Autoencoder model;
  History history;
};

AutoencoderTraining train_autoencoder(const Matrix& images, Shape image, const AutoencoderConfig& cfg,
                                      std::uint64_t seed, const EpochCallback& on_epoch = {});

/// decode((1 - t) enc(a) + t enc(b)) for n evenly spaced t.
Continuum latent_continuum(const Autoencoder& ae, const Vector& a, const Vector& b, Index n);

/// Real-valued index where P(target) - P(source) first changes sign from
/// negative to non-negative, linearly interpolated. Empty if it never does.
std::optional<double> crossing_position(const Matrix& posteriors, int source, int target);

enum class RejectReason { None, PosteriorSumBelowThreshold, BoundaryNearExtremity };
std::string to_string(RejectReason r);

struct PairVerdict {
  bool kept = false;
  RejectReason reason = RejectReason::None;
  std::optional<double> crossing;
};

struct ContinuumPosteriors {
  Matrix posteriors;  // classes x items
  int source_label;
  int target_label;
};

struct PairSelection {
  std::vector<PairVerdict> verdicts;  // one per candidate
  std::vector<std::size_t> kept;      // candidate indices that passed
};

/// Keeps a pair iff P(source) + P(target) >= threshold at every item and the
/// crossing lies in [margin, n - 1 - margin].
PairVerdict judge_pair(const ContinuumPosteriors& c, double threshold, int margin);
PairSelection select_valid_pairs(const std::vector<ContinuumPosteriors>& candidates, double threshold,
                                 int margin);

/// Candidate pairs: the k-th of the first `per_class` samples of class a paired
/// with the k-th sample of class b, for every a < b.
struct CandidatePair {
  int source_index;
  int target_index;
  int source_label;
  int target_label;
};
std::vector<CandidatePair> candidate_pairs(const std::vector<int>& labels, int classes, int per_class);

}  // namespace catgeo
