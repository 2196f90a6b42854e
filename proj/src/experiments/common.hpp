#pragma once

#include "catgeo/continua.hpp"
#include "catgeo/dataset.hpp"
#include "catgeo/metrics.hpp"
#include "catgeo/experiments.hpp"
#include "catgeo/train.hpp"

#include <vector>

namespace catgeo::detail {

struct Context {
  Json cfg;
  RunOutput& out;
  Logger log;
  std::uint64_t seed = 0;
  Json results = Json::object();

  void info(const std::string& msg) const {
    if (log) log("[" + cfg["experiment"].get<std::string>() + "] " + msg);
  }
  const Json& metrics() const { return cfg["metrics"]; }
  int trials() const { return cfg["train"]["trials"].get<int>(); }
  TrainConfig train(std::uint64_t s) const { return parse_train(cfg["train"], s); }
};

/// Runs fn; any exception becomes a StageError tagged with `name`.
template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(name, e.what(), 2);
  } catch (const FormatError& e) {
    throw StageError(name, e.what(), 2);
  } catch (const NumericalError& e) {
    throw StageError(name, e.what(), 3);
  } catch (const EvaluationError& e) {
    throw StageError(name, e.what(), 3);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), 1);
  }
}

struct ImageData {
  LabeledDataset train;
  LabeledDataset test;
};

/// Loads the configured image dataset and applies the per-class subsets.
ImageData load_images(Context& ctx);

/// Trains the autoencoder on `train`, or reuses a cached one whose settings
/// and training data match.
Autoencoder obtain_autoencoder(Context& ctx, const LabeledDataset& train);

/// Layers whose activity is analysed: everything but the output layer and
/// pure reshapes (Flatten, Identity).
std::vector<int> hidden_layers(const Network& net);
/// "dense_1", "conv2d_2", ... counted per kind.
std::string layer_name(const Network& net, int layer);

/// Input shape for a layer list: images for convolutional nets, flat otherwise.
Shape input_shape_for(const std::vector<LayerSpec>& specs, Shape image);

void add_history(CsvTable& table, const std::string& prefix_cell, const History& h);

/// Percentile bootstrap of the mean, widened to contain the mean.
Interval mean_ci(const std::vector<double>& values, int n_resamples, std::uint64_t seed);

void run_toy1d(Context& ctx);
void run_toy2d(Context& ctx);
void run_mnist_continuum(Context& ctx);
void run_mnist_depth(Context& ctx);
void run_categoricality(Context& ctx, bool ablation);
void run_dropout_sweep(Context& ctx);

}  // namespace catgeo::detail
