#include "common.hpp"

#include "catgeo/metrics.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace catgeo::detail {

namespace {

/// Dropout after the input and after every hidden layer, one rate per position.
std::vector<LayerSpec> sweep_network(const Json& net, const std::vector<double>& rates, int classes) {
  const auto hidden = net["hidden"].get<std::vector<int>>();
  const NoiseKind kind = parse_noise_kind(net["noise"].get<std::string>());
  const Activation act = parse_activation(net["activation"].get<std::string>());
  auto noise = [&](double r) { return r > 0.0 ? Noise{kind, r} : Noise::none(); };
  std::vector<LayerSpec> specs{LayerSpec::identity(noise(rates[0]))};
  for (std::size_t i = 0; i < hidden.size(); ++i) specs.push_back(LayerSpec::dense(hidden[i], act, noise(rates[i + 1])));
  specs.push_back(LayerSpec::dense(classes, Activation::Softmax));
  return specs;
}

double mean_of_best(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end(), std::greater<>());
  v.resize(std::min(v.size(), std::size_t(std::max(1, k))));
  return mean(v);
}

}  // namespace

void run_dropout_sweep(Context& ctx) {
  const Json& m = ctx.metrics();
  const Json& netcfg = ctx.cfg["network"];
  const auto hidden = netcfg["hidden"].get<std::vector<int>>();
  const auto rates = m["rates"].get<std::vector<double>>();
  const double fixed = m["fixed_rate"].get<double>();
  const int best_k = m["best_k"].get<int>(), boot = m["bootstrap"].get<int>();
  const std::size_t positions = hidden.size() + 1;
  for (double r : rates)
    if (!(r >= 0.0 && r < 1.0)) throw StageError("config", "/metrics/rates: rates must be in [0, 1)", 2);
  if (hidden.empty()) throw StageError("config", "/network/hidden: at least one hidden layer", 2);
  parse_noise_kind(netcfg["noise"].get<std::string>());

  const ImageData data = load_images(ctx);
  const int classes = data.train.class_count;

  // distinct rate vectors; the all-fixed one is shared by every position
  std::vector<std::vector<double>> configs;
  std::map<std::vector<double>, std::size_t> index;
  std::vector<std::vector<std::size_t>> grid(positions, std::vector<std::size_t>(rates.size()));
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t r = 0; r < rates.size(); ++r) {
      std::vector<double> v(positions, fixed);
      v[p] = rates[r];
      auto [it, inserted] = index.emplace(v, configs.size());
      if (inserted) configs.push_back(v);
      grid[p][r] = it->second;
    }
  const int T = ctx.trials();
  const int epochs = ctx.train(0).epochs;
  if (epochs < 1) throw StageError("config", "/train/epochs: the sweep needs at least one epoch", 2);
  ctx.info(std::to_string(configs.size()) + " rate settings x " + std::to_string(T) + " trials x " +
           std::to_string(epochs) + " epochs");

  const Shape in = Shape::vec(int(data.train.shape.size()));
  const Matrix targets = one_hot(data.train.labels, classes);
  struct Job {
    std::vector<double> test_acc;
    History history;
  };
  std::vector<Job> jobs(configs.size() * std::size_t(T));
  stage("train", [&] {
    parallel_for(int(jobs.size()), [&](int j) {
      const std::size_t c = std::size_t(j) / std::size_t(T);
      const int t = j % T;
      // every rate setting of one trial starts from the same weights and batch order
      Network net = Network::build(sweep_network(netcfg, configs[c], classes), in, derive_seed(ctx.seed, 2, t));
      Job& job = jobs[std::size_t(j)];
      job.history = train(net, data.train.inputs, targets, ctx.train(derive_seed(ctx.seed, 3, t)),
                          [&](int, const EpochStats&, const Network& n) {
                            job.test_acc.push_back(accuracy(predict(n, data.test.inputs), data.test.labels));
                          });
      std::string rs;
      for (double r : configs[c]) rs += (rs.empty() ? "" : "/") + format_number(r);
      ctx.info("rates " + rs + " trial " + std::to_string(t) + ": best-" + std::to_string(best_k) + " test accuracy " +
               format_number(mean_of_best(job.test_acc, best_k)));
    });
  });

  auto position_name = [&](std::size_t p) { return p == 0 ? std::string("input") : "hidden_" + std::to_string(p); };
  CsvTable curves({"config", "rates", "trial", "epoch", "train_loss", "test_accuracy"});
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::string rs;
    for (double r : configs[c]) rs += (rs.empty() ? "" : "/") + format_number(r);
    for (int t = 0; t < T; ++t) {
      const Job& job = jobs[c * std::size_t(T) + std::size_t(t)];
      for (std::size_t e = 0; e < job.test_acc.size(); ++e)
        curves.row({cell(c), rs, cell(t), cell(e + 1), cell(job.history[e].loss), cell(job.test_acc[e])});
    }
  }

  CsvTable scores({"run_id", "position", "layer", "rate", "trial", "score"});
  CsvTable summary({"run_id", "position", "layer", "rate", "mean_score", "ci_lo", "ci_hi", "trials"});
  std::vector<PlotSeries> series;
  Json layers = Json::array();
  for (std::size_t p = 0; p < positions; ++p) {
    PlotSeries s{"dropout at " + position_name(p), {}, {}, {}, {}};
    double best = -1.0, best_rate = NAN;
    std::vector<double> means;
    for (std::size_t r = 0; r < rates.size(); ++r) {
      std::vector<double> per_trial;
      for (int t = 0; t < T; ++t) {
        const double sc = mean_of_best(jobs[grid[p][r] * std::size_t(T) + std::size_t(t)].test_acc, best_k);
        per_trial.push_back(sc);
        scores.row({ctx.out.run_id(), cell(p), position_name(p), cell(rates[r]), cell(t), cell(sc)});
      }
      const double mu = mean(per_trial);
      const Interval ci = mean_ci(per_trial, boot, derive_seed(ctx.seed, 14, p * 64 + r));
      summary.row({ctx.out.run_id(), cell(p), position_name(p), cell(rates[r]), cell(mu), cell(ci.lo), cell(ci.hi), cell(T)});
      s.x.push_back(rates[r]), s.y.push_back(mu), s.lo.push_back(ci.lo), s.hi.push_back(ci.hi);
      means.push_back(mu);
      if (mu > best) best = mu, best_rate = rates[r];
    }
    series.push_back(s);
    Json entry = {{"position", p}, {"layer", position_name(p)}, {"best_rate", best_rate}, {"best_score", best},
                  {"scores", means}};
    // score change when this position alone goes from the fixed rate to the largest rate
    const auto fixed_it = std::find(rates.begin(), rates.end(), fixed);
    if (fixed_it != rates.end())
      entry["drop_at_max_rate"] = means[std::size_t(fixed_it - rates.begin())] - means.back();
    layers.push_back(entry);
  }
  ctx.results["positions"] = layers;
  ctx.results["rate_settings"] = configs.size();
  ctx.out.write("accuracy_curves.csv", "csv", curves.str());
  ctx.out.write("sweep_scores.csv", "csv", scores.str());
  ctx.out.write("sweep.csv", "csv", summary.str());
  ctx.out.write("sweep.svg", "svg",
                svg_line_plot({"Test accuracy vs dropout rate", "dropout rate",
                               "mean of the " + std::to_string(best_k) + " best test accuracies", series}));
}

}  // namespace catgeo::detail
