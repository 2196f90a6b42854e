#include "common.hpp"

#include "catgeo/checkpoint.hpp"
#include "catgeo/metrics.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace catgeo {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  Rng r = make_rng(seed, (purpose << 40) ^ index);
  return r();
}

int thread_count() {
  if (const char* env = std::getenv("CATGEO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(n, thread_count());
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        {
          std::lock_guard lock(m);
          if (error) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Json apply_overrides(const Json& resolved, const RunOverrides& o) {
  Json c = resolved;
  if (o.seed) c["seed"] = *o.seed;
  if (o.output_dir) c["output_dir"] = *o.output_dir;
  if (o.trials) c["train"]["trials"] = *o.trials;
  if (o.epochs) c["train"]["epochs"] = *o.epochs;
  if (o.subset) {
    if (c["dataset"].contains("n_train"))
      c["dataset"]["n_train"] = *o.subset;
    else
      c["dataset"]["train_subset"] = *o.subset;
  }
  return resolve_config(c);
}

std::string run_id(const Json& resolved) {
  return resolved["experiment"].get<std::string>() + "-s" + std::to_string(resolved["seed"].get<std::uint64_t>());
}

ExperimentRun run_experiment(const Json& resolved_in, const Logger& log) {
  const Json resolved = detail::stage("config", [&] { return resolve_config(resolved_in); });
  const std::string name = resolved["experiment"].get<std::string>();
  RunOutput out = detail::stage("output", [&] {
    return RunOutput(fs::path(resolved["output_dir"].get<std::string>()), run_id(resolved));
  });
  detail::Context ctx{resolved, out, log, resolved["seed"].get<std::uint64_t>()};
  try {
    if (name == "toy1d")
      detail::run_toy1d(ctx);
    else if (name == "toy2d")
      detail::run_toy2d(ctx);
    else if (name == "mnist-continuum")
      detail::run_mnist_continuum(ctx);
    else if (name == "mnist-depth")
      detail::run_mnist_depth(ctx);
    else if (name == "categoricality")
      detail::run_categoricality(ctx, false);
    else if (name == "categoricality-ablation")
      detail::run_categoricality(ctx, true);
    else if (name == "dropout-sweep")
      detail::run_dropout_sweep(ctx);
    else
      throw StageError("config", "unknown experiment " + name, 2);
  } catch (const StageError& e) {
    out.mark_partial();
    write_report(out, resolved, ctx.results, "failed", e.what());
    throw;
  }
  detail::stage("report", [&] { write_report(out, resolved, ctx.results, "complete"); });
  return {name, resolved, out.dir(), ctx.results, out.artifacts()};
}

namespace detail {

ImageData load_images(Context& ctx) {
  return stage("load-data", [&] {
    const Json& d = ctx.cfg["dataset"];
    ImageData data;
    if (d["format"] == "idx") {
      const auto ti = d["train_images"].get<std::string>(), tl = d["train_labels"].get<std::string>();
      const auto vi = d["test_images"].get<std::string>(), vl = d["test_labels"].get<std::string>();
      data.train = load_idx(ti, tl, Split::Train);
      data.test = load_idx(vi, vl, Split::Test);
      for (const auto& p : {ti, tl, vi, vl}) ctx.out.add_input(p);
    } else {
      const auto tr = d["cifar_train"].get<std::vector<std::string>>();
      const auto te = d["cifar_test"].get<std::vector<std::string>>();
      if (tr.empty() || te.empty()) throw ConfigError("/dataset: cifar_train and cifar_test must list batch files");
      data.train = load_cifar10(tr, Split::Train);
      data.test = load_cifar10(te, Split::Test);
      for (const auto& p : tr) ctx.out.add_input(p);
      for (const auto& p : te) ctx.out.add_input(p);
    }
    data.test.class_count = data.train.class_count = std::max(data.train.class_count, data.test.class_count);
    auto subset = [](LabeledDataset& ds, int total) {
      if (total > 0) ds = stratified_subset(ds, std::max(1, total / ds.class_count));
    };
    subset(data.train, d["train_subset"].get<int>());
    subset(data.test, d["test_subset"].get<int>());
    ctx.info("data: " + std::to_string(data.train.size()) + " train / " + std::to_string(data.test.size()) +
             " test items of " + to_string(data.train.shape));
    ctx.results["data"] = {{"train_items", data.train.size()}, {"test_items", data.test.size()}};
    return data;
  });
}

Autoencoder obtain_autoencoder(Context& ctx, const LabeledDataset& train) {
  return stage("autoencoder", [&] {
    const Json& a = ctx.cfg["network"]["autoencoder"];
    AutoencoderConfig ac;
    ac.encoder_filters = a["filters"].get<std::vector<int>>();
    ac.kernel = a["kernel"].get<int>();
    ac.train.epochs = a["epochs"].get<int>();
    ac.train.batch_size = a["batch_size"].get<int>();
    ac.train.learning_rate = a["learning_rate"].get<double>();
    ac.train.adam = ctx.train(0).adam;
    const int subset = a["train_subset"].get<int>();
    const LabeledDataset ds = subset > 0 ? stratified_subset(train, std::max(1, subset / train.class_count)) : train;
    const std::uint64_t seed = derive_seed(ctx.seed, 20);

    // cache key: settings, seed and the exact training pixels
    Json key = a;
    key.erase("checkpoint");
    key["seed"] = seed;
    key["data_sha1"] = git_blob_sha1(std::string(reinterpret_cast<const char*>(ds.inputs.data()),
                                                  std::size_t(ds.inputs.size()) * sizeof(double)));
    const std::string prefix = a["checkpoint"].get<std::string>();
    if (!prefix.empty() && fs::exists(prefix + ".json") && fs::exists(prefix + ".encoder.ckpt") &&
        fs::exists(prefix + ".decoder.ckpt") && load_json_file(prefix + ".json") == key) {
      ctx.info("autoencoder: cached " + prefix);
      ctx.out.add_input(prefix + ".encoder.ckpt");
      ctx.out.add_input(prefix + ".decoder.ckpt");
      return Autoencoder{load_checkpoint(prefix + ".encoder.ckpt"), load_checkpoint(prefix + ".decoder.ckpt")};
    }
    ctx.info("autoencoder: training on " + std::to_string(ds.size()) + " images for " +
             std::to_string(ac.train.epochs) + " epochs");
    ac.train.seed = derive_seed(ctx.seed, 21);
    CsvTable hist({"epoch", "loss"});
    auto trained = train_autoencoder(ds.inputs, ds.shape, ac, seed, [&](int e, const EpochStats& s, const Network&) {
      hist.row({cell(e), cell(s.loss)});
      ctx.info("autoencoder epoch " + std::to_string(e) + " mse " + format_number(s.loss));
    });
    ctx.out.write("autoencoder_training.csv", "csv", hist.str());
    save_checkpoint(trained.model.encoder, ctx.out.path("autoencoder.encoder.ckpt").string());
    save_checkpoint(trained.model.decoder, ctx.out.path("autoencoder.decoder.ckpt").string());
    ctx.out.add_file("autoencoder.encoder.ckpt", "checkpoint");
    ctx.out.add_file("autoencoder.decoder.ckpt", "checkpoint");
    if (!prefix.empty()) {
      if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
      save_checkpoint(trained.model.encoder, prefix + ".encoder.ckpt");
      save_checkpoint(trained.model.decoder, prefix + ".decoder.ckpt");
      std::ofstream(prefix + ".json") << key.dump(2) << "\n";
    }
    if (!trained.history.empty()) ctx.results["autoencoder_mse"] = trained.history.back().loss;
    return trained.model;
  });
}

std::vector<int> hidden_layers(const Network& net) {
  std::vector<int> out;
  for (int i = 0; i + 1 < net.depth(); ++i) {
    const LayerKind k = net.layer(i).spec.kind;
    if (k != LayerKind::Flatten && k != LayerKind::Identity) out.push_back(i);
  }
  return out;
}

std::string layer_name(const Network& net, int layer) {
  const LayerKind kind = net.layer(layer).spec.kind;
  int count = 0;
  for (int i = 0; i <= layer; ++i)
    if (net.layer(i).spec.kind == kind) ++count;
  return to_string(kind) + "_" + std::to_string(count);
}

Shape input_shape_for(const std::vector<LayerSpec>& specs, Shape image) {
  const bool conv = !specs.empty() && (specs.front().kind == LayerKind::Conv2D ||
                                       specs.front().kind == LayerKind::MaxPool2D);
  return conv ? image : Shape::vec(int(image.size()));
}

void add_history(CsvTable& table, const std::string& prefix_cell, const History& h) {
  for (std::size_t e = 0; e < h.size(); ++e)
    table.row({prefix_cell, cell(e + 1), cell(h[e].loss), cell(h[e].accuracy)});
}

Interval mean_ci(const std::vector<double>& values, int n_resamples, std::uint64_t seed) {
  const double m = mean(values);
  Interval ci = bootstrap_ci(values, [](const std::vector<double>& v) { return mean(v); }, n_resamples, 0.95, seed);
  ci.lo = std::min(ci.lo, m);
  ci.hi = std::max(ci.hi, m);
  return ci;
}

}  // namespace detail
}  // namespace catgeo
