#include "common.hpp"

#include "catgeo/checkpoint.hpp"
#include "catgeo/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace catgeo::detail {

namespace {

struct Trained {
  Network net;
  Network untrained;
  History history;
  double test_accuracy = 0.0;
};

Trained train_classifier(const Context& ctx, const std::vector<LayerSpec>& specs, const ImageData& data,
                         std::uint64_t init_seed, std::uint64_t train_seed, const std::string& tag) {
  Trained t;
  t.net = stage("build", [&] { return Network::build(specs, input_shape_for(specs, data.train.shape), init_seed); });
  t.untrained = t.net;
  t.history = stage("train", [&] {
    return train(t.net, data.train.inputs, one_hot(data.train.labels, data.train.class_count), ctx.train(train_seed),
                 [&](int e, const EpochStats& s, const Network&) {
                   ctx.info(tag + " epoch " + std::to_string(e) + " loss " + format_number(s.loss) + " acc " +
                            format_number(s.accuracy));
                 });
  });
  t.test_accuracy = accuracy(predict(t.net, data.test.inputs), data.test.labels);
  ctx.info(tag + " test accuracy " + format_number(t.test_accuracy));
  return t;
}

/// First two principal axes of the columns of `a` (centered).
Matrix principal_axes(const Matrix& a, Vector& center) {
  center = a.rowwise().mean();
  const Matrix c = a.colwise() - center;
  const Matrix cov = c * c.transpose() / double(std::max<Index>(1, a.cols() - 1));
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Index n = cov.rows();
  Matrix axes(n, 2);
  axes.col(0) = es.eigenvectors().col(n - 1);
  axes.col(1) = es.eigenvectors().col(n - 2);
  // fix the sign so that runs are comparable
  for (int k = 0; k < 2; ++k) {
    Index big = 0;
    axes.col(k).cwiseAbs().maxCoeff(&big);
    if (axes(big, k) < 0) axes.col(k) *= -1.0;
  }
  return axes;
}

/// Stacks several continua (same length) vertically: one tall image per position.
Matrix stack_continua(const std::vector<Matrix>& rows) {
  const Index px = rows.front().rows(), n = rows.front().cols();
  Matrix tall(px * Index(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) tall.middleRows(Index(r) * px, px) = rows[r];
  return tall;
}

double least_squares_slope(const std::vector<double>& y) {
  const double n = double(y.size());
  if (y.size() < 2) return NAN;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = double(i + 1);
    sx += x, sy += y[i], sxx += x * x, sxy += x * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

void run_mnist_continuum(Context& ctx) {
  const Json& m = ctx.metrics();
  const ImageData data = load_images(ctx);
  const auto specs = parse_layers(ctx.cfg["network"]["layers"]);
  Trained tr = train_classifier(ctx, specs, data, derive_seed(ctx.seed, 2), derive_seed(ctx.seed, 3), "classifier");
  save_checkpoint(tr.net, ctx.out.path("classifier.ckpt").string());
  ctx.out.add_file("classifier.ckpt", "checkpoint");
  const Autoencoder ae = obtain_autoencoder(ctx, data.train);

  const int src = m["source_class"].get<int>(), tgt = m["target_class"].get<int>();
  const int k = m["pair_index"].get<int>();
  const Index n = m["continuum_length"].get<Index>();
  const auto si = indices_of_class(data.test, src), ti = indices_of_class(data.test, tgt);
  if (k < 0 || std::size_t(k) >= si.size() || std::size_t(k) >= ti.size())
    throw StageError("config", "/metrics/pair_index: not enough test items of the chosen classes", 2);
  const Continuum c = stage("continuum", [&] {
    return latent_continuum(ae, data.test.inputs.col(si[std::size_t(k)]), data.test.inputs.col(ti[std::size_t(k)]), n);
  });
  ctx.out.write("continuum.pgm", "pgm", image_strip(c.items, data.test.shape));

  CsvTable post({"network", "item", "p_source", "p_target", "predicted"});
  CsvTable dist({"network", "layer", "layer_name", "position", "distance"});
  CsvTable pca({"network", "layer", "set", "index", "label", "pc1", "pc2"});
  std::vector<PlotSeries> dist_series, post_series;
  Json summary = Json::object();
  const auto hidden = hidden_layers(tr.net);
  for (const auto& [name, net] : {std::pair<std::string, const Network*>{"untrained", &tr.untrained},
                                  std::pair<std::string, const Network*>{"trained", &tr.net}}) {
    const Matrix p = predict(*net, c.items);
    const auto labels = argmax_columns(p);
    PlotSeries ps{name + " P(" + std::to_string(src) + ")", {}, {}, {}, {}}, pt{name + " P(" + std::to_string(tgt) + ")", {}, {}, {}, {}};
    for (Index i = 0; i < n; ++i) {
      post.row({name, cell(i), cell(p(src, i)), cell(p(tgt, i)), cell(labels[std::size_t(i)])});
      ps.x.push_back(double(i)), ps.y.push_back(p(src, i));
      pt.x.push_back(double(i)), pt.y.push_back(p(tgt, i));
    }
    post_series.push_back(ps), post_series.push_back(pt);
    const auto crossing = crossing_position(p, src, tgt);
    Json layers = Json::array();
    for (int l : hidden) {
      const Matrix act = activations(*net, c.items, l);
      const DistanceProfile prof = distance_profile(act, p, src, tgt, l);
      PlotSeries s{name + " " + layer_name(*net, l), {}, {}, {}, {}};
      double peak = -1, peak_pos = NAN;
      for (std::size_t i = 0; i < prof.distances.size(); ++i) {
        dist.row({name, cell(l), layer_name(*net, l), cell(double(i) + 0.5), cell(prof.distances[i])});
        s.x.push_back(double(i) + 0.5), s.y.push_back(prof.distances[i]);
        if (std::isfinite(prof.distances[i]) && prof.distances[i] > peak) peak = prof.distances[i], peak_pos = double(i) + 0.5;
      }
      dist_series.push_back(s);
      layers.push_back({{"layer", layer_name(*net, l)}, {"peak_position", peak_pos}, {"peak_distance", peak}});

      // two-dimensional projection of the test set with the continuum on top
      const Matrix test_act = activations(*net, data.test.inputs, l);
      Vector center;
      const Matrix axes = principal_axes(test_act, center);
      const Matrix proj_test = axes.transpose() * (test_act.colwise() - center);
      const Matrix proj_c = axes.transpose() * (act.colwise() - center);
      for (Index j = 0; j < proj_test.cols(); j += 4)
        pca.row({name, cell(l), "test", cell(j), cell(data.test.labels[std::size_t(j)]), cell(proj_test(0, j)),
                 cell(proj_test(1, j))});
      for (Index j = 0; j < proj_c.cols(); ++j)
        pca.row({name, cell(l), "continuum", cell(j), cell(labels[std::size_t(j)]), cell(proj_c(0, j)), cell(proj_c(1, j))});
    }
    summary[name] = {{"crossing", crossing ? Json(*crossing) : Json(nullptr)}, {"layers", layers}};
  }
  ctx.results["continuum"] = summary;
  ctx.results["test_accuracy"] = tr.test_accuracy;
  CsvTable hist({"network", "epoch", "loss", "accuracy"});
  add_history(hist, "classifier", tr.history);
  ctx.out.write("training.csv", "csv", hist.str());
  ctx.out.write("continuum_posteriors.csv", "csv", post.str());
  ctx.out.write("continuum_distance.csv", "csv", dist.str());
  ctx.out.write("pca.csv", "csv", pca.str());
  ctx.out.write("continuum_posteriors.svg", "svg",
                svg_line_plot({"Posteriors along the continuum", "item", "posterior", post_series}));
  ctx.out.write("continuum_distance.svg", "svg",
                svg_line_plot({"Neural distance between adjacent items", "position", "cosine distance", dist_series}));
}

void run_mnist_depth(Context& ctx) {
  const Json& m = ctx.metrics();
  const ImageData data = load_images(ctx);
  const auto specs = parse_layers(ctx.cfg["network"]["layers"]);
  Trained tr = train_classifier(ctx, specs, data, derive_seed(ctx.seed, 2), derive_seed(ctx.seed, 3), "classifier");
  save_checkpoint(tr.net, ctx.out.path("classifier.ckpt").string());
  ctx.out.add_file("classifier.ckpt", "checkpoint");
  const Autoencoder ae = obtain_autoencoder(ctx, data.train);

  const Index n = m["continuum_length"].get<Index>();
  const int margin = m["margin"].get<int>();
  const double threshold = m["threshold"].get<double>();
  const auto candidates = stage("pairs", [&] {
    return candidate_pairs(data.test.labels, data.test.class_count, m["per_class"].get<int>());
  });
  const auto hidden = hidden_layers(tr.net);
  ctx.info(std::to_string(candidates.size()) + " candidate pairs, continua of " + std::to_string(n) + " items");

  struct PairResult {
    PairVerdict verdict;
    std::vector<DistanceProfile> profiles;  // one per hidden layer, kept pairs only
    Matrix items;
  };
  std::vector<PairResult> pairs(candidates.size());
  stage("continua", [&] {
    parallel_for(int(candidates.size()), [&](int i) {
      const auto& cp = candidates[std::size_t(i)];
      const Continuum c = latent_continuum(ae, data.test.inputs.col(cp.source_index), data.test.inputs.col(cp.target_index), n);
      const auto trace = all_activations(tr.net, c.items);
      const Matrix& p = trace.back();
      PairResult& r = pairs[std::size_t(i)];
      r.verdict = judge_pair({p, cp.source_label, cp.target_label}, threshold, margin);
      if (!r.verdict.kept) return;
      for (int l : hidden) r.profiles.push_back(distance_profile(trace[std::size_t(l)], p, cp.source_label, cp.target_label, l));
      r.items = c.items;
    });
  });

  CsvTable manifest({"pair_id", "src_index", "dst_index", "src_label", "dst_label", "kept", "reason", "crossing_index"});
  CsvTable raw({"pair_id", "layer", "position", "distance"});
  std::vector<std::vector<DistanceProfile>> by_layer(hidden.size());
  std::vector<Matrix> examples;
  int kept = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& cp = candidates[i];
    const auto& v = pairs[i].verdict;
    manifest.row({cell(i), cell(long(cp.source_index)), cell(long(cp.target_index)), cell(cp.source_label),
                  cell(cp.target_label), cell(v.kept), to_string(v.reason), v.crossing ? cell(*v.crossing) : ""});
    if (!v.kept) continue;
    ++kept;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      by_layer[l].push_back(pairs[i].profiles[l]);
      const auto& d = pairs[i].profiles[l].distances;
      for (std::size_t j = 0; j < d.size(); ++j) raw.row({cell(i), cell(int(l) + 1), cell(double(j) + 0.5), cell(d[j])});
    }
    if (examples.size() < 10) examples.push_back(pairs[i].items);
  }
  ctx.info(std::to_string(kept) + " of " + std::to_string(candidates.size()) + " pairs kept");
  ctx.out.write("continua_manifest.csv", "csv", manifest.str());
  ctx.out.write("continua_distances.csv", "csv", raw.str());
  if (!examples.empty()) {
    const Shape s = data.test.shape;
    ctx.out.write("continua_examples.pgm", "pgm",
                  image_strip(stack_continua(examples), Shape::image(s.h * int(examples.size()), s.w, s.c)));
  }

  const int min_count = m["min_count"].get<int>(), boot = m["bootstrap"].get<int>();
  const double level = m["level"].get<double>();
  CsvTable profiles({"run_id", "layer", "offset", "mean_distance", "ci_lo", "ci_hi"});
  CsvTable control({"run_id", "layer", "offset", "mean_distance", "ci_lo", "ci_hi"});
  std::vector<PlotSeries> series, control_series;
  Json layers = Json::array();
  stage("alignment", [&] {
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      const AlignedCurve curve = align_profiles(by_layer[l], min_count, boot, level, derive_seed(ctx.seed, 10, l));
      PlotSeries s{"hidden layer " + std::to_string(l + 1), {}, {}, {}, {}};
      for (std::size_t j = 0; j < curve.offsets.size(); ++j) {
        profiles.row({ctx.out.run_id(), cell(int(l) + 1), cell(curve.offsets[j]), cell(curve.mean[j]), cell(curve.lo[j]),
                      cell(curve.hi[j])});
        s.x.push_back(curve.offsets[j]), s.y.push_back(curve.mean[j]), s.lo.push_back(curve.lo[j]), s.hi.push_back(curve.hi[j]);
      }
      series.push_back(s);
      Json entry = {{"layer", l + 1}, {"name", layer_name(tr.net, hidden[l])}, {"peak_offset", curve.peak_offset()},
                    {"peak", curve.peak()}, {"profiles", by_layer[l].size()}};

      if (m["shuffle_control"].get<bool>()) {
        // alignment anchored at a random position instead of the posterior crossing
        Rng rng = make_rng(derive_seed(ctx.seed, 11, l));
        std::uniform_int_distribution<int> pos(margin, int(n) - 1 - margin);
        std::vector<int> shifts;
        for (std::size_t p = 0; p < by_layer[l].size(); ++p) shifts.push_back(pos(rng));
        const AlignedCurve cc = align_with_shifts(by_layer[l], shifts, min_count, boot, level, derive_seed(ctx.seed, 12, l));
        PlotSeries cs{"hidden layer " + std::to_string(l + 1) + " (random anchor)", {}, {}, {}, {}};
        for (std::size_t j = 0; j < cc.offsets.size(); ++j) {
          control.row({ctx.out.run_id(), cell(int(l) + 1), cell(cc.offsets[j]), cell(cc.mean[j]), cell(cc.lo[j]), cell(cc.hi[j])});
          cs.x.push_back(cc.offsets[j]), cs.y.push_back(cc.mean[j]), cs.lo.push_back(cc.lo[j]), cs.hi.push_back(cc.hi[j]);
        }
        control_series.push_back(cs);
        entry["control_peak"] = cc.peak();
      }
      layers.push_back(entry);
    }
  });
  ctx.results["test_accuracy"] = tr.test_accuracy;
  ctx.results["pairs"] = {{"candidates", candidates.size()}, {"kept", kept}};
  ctx.results["layers"] = layers;
  CsvTable hist({"network", "epoch", "loss", "accuracy"});
  add_history(hist, "classifier", tr.history);
  ctx.out.write("training.csv", "csv", hist.str());
  ctx.out.write("profiles.csv", "csv", profiles.str());
  ctx.out.write("profiles.svg", "svg",
                svg_line_plot({"Aligned neural distance profiles", "offset from the posterior crossing",
                               "mean cosine distance", series}));
  if (m["shuffle_control"].get<bool>()) {
    ctx.out.write("profiles_control.csv", "csv", control.str());
    ctx.out.write("profiles_control.svg", "svg",
                  svg_line_plot({"Profiles aligned at a random anchor", "offset", "mean cosine distance", control_series}));
  }
}

void run_categoricality(Context& ctx, bool ablation) {
  const Json& m = ctx.metrics();
  const ImageData data = load_images(ctx);
  struct Variant {
    std::string name;
    std::vector<LayerSpec> specs;
  };
  std::vector<Variant> variants;
  auto add = [&](const std::string& model, std::vector<LayerSpec> specs) {
    if (!ablation) {
      variants.push_back({model, specs});
      return;
    }
    variants.push_back({model + "-noise", specs});
    for (auto& s : specs) s.noise = Noise::none();
    variants.push_back({model + "-none", specs});
  };
  add("mlp", parse_layers(ctx.cfg["network"]["layers"]));
  if (ctx.cfg["network"]["include_cnn"].get<bool>()) add("cnn", parse_layers(ctx.cfg["network"]["cnn_layers"], "/network/cnn_layers"));

  const int T = ctx.trials();
  const int n_pairs = m["pairs"].get<int>(), boot = m["bootstrap"].get<int>();
  struct Job {
    std::size_t variant;
    int trial;
    Trained net;
    std::vector<std::string> names;
    std::vector<CategoricalityResult> trained, untrained;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < variants.size(); ++v)
    for (int t = 0; t < T; ++t) jobs.push_back({v, t, {}, {}, {}, {}});
  parallel_for(int(jobs.size()), [&](int j) {
    Job& job = jobs[std::size_t(j)];
    const Variant& v = variants[job.variant];
    const std::string tag = v.name + " trial " + std::to_string(job.trial);
    // trials share initialization and batch order across variants
    job.net = train_classifier(ctx, v.specs, data, derive_seed(ctx.seed, 2, job.trial), derive_seed(ctx.seed, 3, job.trial), tag);
    stage("categoricality", [&] {
      for (int l : hidden_layers(job.net.net)) {
        const std::uint64_t pair_seed = derive_seed(ctx.seed, 7, std::uint64_t(job.trial) * 64 + std::uint64_t(l));
        job.names.push_back(layer_name(job.net.net, l));
        job.trained.push_back(categoricality_index(job.net.net, l, data.test.inputs, data.test.labels, n_pairs, pair_seed, boot));
        job.untrained.push_back(
            categoricality_index(job.net.untrained, l, data.test.inputs, data.test.labels, n_pairs, pair_seed, boot));
      }
    });
  });

  const bool prefix = variants.size() > 1;
  CsvTable agg({"run_id", "layer_name", "trained", "ks", "ci_lo", "ci_hi"});
  CsvTable per_trial({"run_id", "variant", "trial", "layer_name", "trained", "ks", "ci_lo", "ci_hi", "n_within",
                      "n_between", "test_accuracy"});
  CsvTable hist({"network", "epoch", "loss", "accuracy"});
  std::vector<PlotSeries> series;
  Json summary = Json::array();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<const Job*> mine;
    for (const auto& j : jobs)
      if (j.variant == v) mine.push_back(&j);
    const auto& names = mine.front()->names;
    Json vs = {{"variant", variants[v].name}, {"layers", Json::array()}};
    std::vector<double> accs;
    for (const Job* j : mine) {
      accs.push_back(j->net.test_accuracy);
      add_history(hist, variants[v].name + "/" + std::to_string(j->trial), j->net.history);
      for (std::size_t l = 0; l < names.size(); ++l)
        for (bool trained : {true, false}) {
          const auto& r = trained ? j->trained[l] : j->untrained[l];
          per_trial.row({ctx.out.run_id(), variants[v].name, cell(j->trial), names[l], cell(trained), cell(r.ks), cell(r.ci.lo),
                         cell(r.ci.hi), cell(r.n_within), cell(r.n_between), cell(j->net.test_accuracy)});
        }
    }
    std::vector<double> trained_means;
    for (bool trained : {true, false}) {
      PlotSeries s{variants[v].name + (trained ? " trained" : " untrained"), {}, {}, {}, {}};
      for (std::size_t l = 0; l < names.size(); ++l) {
        std::vector<double> ks;
        for (const Job* j : mine) ks.push_back((trained ? j->trained[l] : j->untrained[l]).ks);
        const double mk = mean(ks);
        // one trial: its own bootstrap interval; several: bootstrap over trials
        const Interval ci = ks.size() == 1 ? (trained ? mine[0]->trained[l] : mine[0]->untrained[l]).ci
                                           : mean_ci(ks, boot, derive_seed(ctx.seed, 13, v * 256 + l * 2 + trained));
        const std::string lname = prefix ? variants[v].name + "/" + names[l] : names[l];
        agg.row({ctx.out.run_id(), lname, cell(trained), cell(mk), cell(ci.lo), cell(ci.hi)});
        s.x.push_back(double(l + 1)), s.y.push_back(mk), s.lo.push_back(ci.lo), s.hi.push_back(ci.hi);
        if (trained) {
          trained_means.push_back(mk);
          vs["layers"].push_back({{"name", names[l]}});
        }
        auto& entry = vs["layers"][l];
        entry[trained ? "trained" : "untrained"] = {{"ks", mk}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}};
      }
      series.push_back(s);
    }
    vs["trained_slope"] = least_squares_slope(trained_means);
    vs["test_accuracy"] = mean(accs);
    summary.push_back(vs);
  }
  ctx.results["variants"] = summary;
  if (ablation) {
    for (std::size_t v = 0; v + 1 < variants.size(); v += 2)
      ctx.results["slope_noise_ge_none_" + variants[v].name.substr(0, variants[v].name.find('-'))] =
          summary[v]["trained_slope"].get<double>() >= summary[v + 1]["trained_slope"].get<double>();
  }
  ctx.out.write("training.csv", "csv", hist.str());
  ctx.out.write("categoricality.csv", "csv", agg.str());
  ctx.out.write("categoricality_trials.csv", "csv", per_trial.str());
  ctx.out.write("categoricality.svg", "svg",
                svg_line_plot({"Categoricality index by layer", "hidden layer", "KS statistic", series}));
}

}  // namespace catgeo::detail
