#include "common.hpp"

#include "catgeo/categories.hpp"
#include "catgeo/checkpoint.hpp"
#include "catgeo/inversion.hpp"
#include "catgeo/metrics.hpp"

#include <cmath>
#include <numbers>

namespace catgeo::detail {

namespace {

using Rows = std::vector<std::vector<std::string>>;

Matrix grid_1d(const Json& g) {
  const double lo = g["min"].get<double>(), hi = g["max"].get<double>();
  const int n = g["points"].get<int>();
  if (n < 2 || !(hi > lo)) throw ConfigError("/metrics/grid: need points >= 2 and max > min");
  Matrix x(1, n);
  for (int i = 0; i < n; ++i) x(0, i) = lo + (hi - lo) * double(i) / double(n - 1);
  return x;
}

GaussianCategoryModel toy_model(const Context& ctx, int dimension) {
  const auto model = GaussianCategoryModel::from_json(ctx.cfg["dataset"]["model"]);
  if (model.dimension() != dimension)
    throw ConfigError("/dataset/model: expected a " + std::to_string(dimension) + "-dimensional model");
  return model;
}

std::string xs(double v) { return cell(v); }

void append(Rows& to, Rows&& from) {
  for (auto& r : from) to.push_back(std::move(r));
}

CsvTable table(std::vector<std::string> columns, const Rows& rows) {
  CsvTable t(std::move(columns));
  for (const auto& r : rows) t.row(r);
  return t;
}

// --- toy 1D --------------------------------------------------------------------

struct Toy1dTrial {
  Rows history, posterior, distance, inversion, fisher, skl, cost;
  Json summary;
};

Toy1dTrial toy1d_trial(const Context& ctx, const GaussianCategoryModel& model, const std::vector<LayerSpec>& specs,
                       int t) {
  const Json& m = ctx.metrics();
  const int layer = m["layer"].get<int>();
  const std::string tr = std::to_string(t);
  Toy1dTrial out;

  const auto data = model.sample(ctx.cfg["dataset"]["n_train"].get<Index>(), derive_seed(ctx.seed, 1, t));
  const auto test = model.sample(ctx.cfg["dataset"]["n_test"].get<Index>(), derive_seed(ctx.seed, 9, t));
  Network net = stage("build", [&] { return Network::build(specs, Shape::vec(1), derive_seed(ctx.seed, 2, t)); });
  if (layer < 0 || layer + 1 >= net.depth()) throw StageError("config", "/metrics/layer: not a hidden layer", 2);
  const Network untrained = net;
  const History h = stage("train", [&] {
    return train(net, data.x, one_hot(data.labels, model.categories()), ctx.train(derive_seed(ctx.seed, 3, t)));
  });
  for (std::size_t e = 0; e < h.size(); ++e) out.history.push_back({tr, cell(e + 1), cell(h[e].loss), cell(h[e].accuracy)});
  const double test_acc = accuracy(predict(net, test.x), test.labels);
  ctx.info("trial " + tr + ": test accuracy " + format_number(test_acc));

  // posterior of the network vs the exact one
  const Matrix pg = grid_1d({{"min", m["grid"]["min"]}, {"max", m["grid"]["max"]}, {"points", m["posterior_points"]}});
  const Matrix p_net = predict(net, pg);
  double mae = 0.0;
  for (Index i = 0; i < pg.cols(); ++i) {
    const double exact = model.posterior(pg.col(i))(1);
    mae += std::abs(p_net(1, i) - exact);
    out.posterior.push_back({tr, xs(pg(0, i)), cell(p_net(1, i)), cell(exact)});
  }
  mae /= double(pg.cols());

  // neural distance between contiguous grid points
  const Matrix grid = grid_1d(m["grid"]);
  const double within_p = m["within_posterior"].get<double>();
  const DistanceProfile prof = stage("distance-profile", [&] {
    return distance_profile(activations(net, grid, layer), predict(net, grid), 0, 1, layer);
  });
  double peak = -1.0, peak_x = NAN;
  std::vector<double> within;
  for (std::size_t i = 0; i < prof.distances.size(); ++i) {
    const double a = grid(0, Index(i)), b = grid(0, Index(i) + 1), mid = 0.5 * (a + b), d = prof.distances[i];
    out.distance.push_back({tr, xs(a), xs(b), xs(mid), cell(d)});
    if (!std::isfinite(d)) continue;
    if (d > peak) peak = d, peak_x = mid;
    if (model.posterior(Vector::Constant(1, mid)).maxCoeff() >= within_p) within.push_back(d);
  }

  // virtual inputs: 1 / variance along the grid
  const InversionOptions opt = parse_inversion(m["inversion"]);
  const Index n_real = m["inversion"]["realizations"].get<Index>();
  const auto inv = stage("inversion", [&] {
    return inversion_variance_profile(net, layer, grid, n_real, derive_seed(ctx.seed, 4, t), opt);
  });
  double inv_peak = -1.0, inv_peak_x = NAN;
  int min_converged = int(n_real);
  for (const auto& p : inv) {
    out.inversion.push_back({tr, xs(p.x(0)), cell(p.n_converged), cell(p.variance), cell(p.inv_variance),
                             cell(p.covariance.size() ? p.covariance(0, 0) : NAN)});
    min_converged = std::min(min_converged, p.n_converged);
    if (std::isfinite(p.inv_variance) && p.inv_variance > inv_peak) inv_peak = p.inv_variance, inv_peak_x = p.x(0);
  }

  // Fisher information of the code and of the categories
  Json fisher_summary = nullptr;
  const Noise& nz = net.layer(layer).spec.noise;
  if (nz.kind == NoiseKind::Gaussian && nz.active()) {
    const double sigma = layer_gaussian_sigma(net, layer);
    const Matrix fg = grid_1d({{"min", m["grid"]["min"]}, {"max", m["grid"]["max"]}, {"points", m["fisher_points"]}});
    const auto f_tr = fisher_code_batch(net, layer, fg, sigma);
    const auto f_un = fisher_code_batch(untrained, layer, fg, sigma);
    for (Index i = 0; i < fg.cols(); ++i) {
      double fc = NAN;
      try {
        fc = model.fisher_cat(fg(0, i));
      } catch (const EvaluationError&) {
      }
      out.fisher.push_back({tr, xs(fg(0, i)), cell(fc), cell(f_tr[std::size_t(i)]), cell(f_un[std::size_t(i)])});
    }

    const double delta = m["skl_delta"].get<double>();
    Rng rng = make_rng(derive_seed(ctx.seed, 5, t));
    std::uniform_real_distribution<double> u(m["grid"]["min"].get<double>(), m["grid"]["max"].get<double>());
    double worst = 0.0;
    for (int k = 0; k < m["skl_points"].get<int>(); ++k) {
      const double x = u(rng);
      const double skl = skl_gaussian_layer(net, layer, Vector::Constant(1, x), Vector::Constant(1, x + delta), sigma);
      const double f = fisher_code_gaussian_layer(net, layer, x, sigma);
      const double rel = std::abs(skl / (delta * delta) - f) / f;
      worst = std::max(worst, rel);
      out.skl.push_back({tr, xs(x), cell(skl / (delta * delta)), cell(f), cell(rel)});
    }

    const int n_cost = m["coding_cost_samples"].get<int>();
    const auto c_tr = stage("coding-cost",
                            [&] { return coding_cost(model, net, layer, sigma, n_cost, derive_seed(ctx.seed, 6, t)); });
    const auto c_un = stage("coding-cost", [&] {
      return coding_cost(model, untrained, layer, sigma, n_cost, derive_seed(ctx.seed, 6, t));
    });
    for (const auto& [name, c] : {std::pair{"trained", c_tr}, std::pair{"untrained", c_un}})
      out.cost.push_back({tr, name, cell(sigma), cell(c.value), cell(c.std_error), cell(c.used), cell(c.excluded)});
    fisher_summary = {{"skl_max_rel_error", worst}, {"coding_cost_trained", c_tr.value},
                      {"coding_cost_untrained", c_un.value}, {"sigma", sigma}};
  }

  save_checkpoint(net, ctx.out.path("trial_" + tr + ".ckpt").string());
  save_checkpoint(untrained, ctx.out.path("trial_" + tr + "_untrained.ckpt").string());

  out.summary = {{"trial", t},
                 {"test_accuracy", test_acc},
                 {"posterior_mae", mae},
                 {"distance_peak_x", peak_x},
                 {"distance_peak", peak},
                 {"within_median_distance", within.empty() ? NAN : median(within)},
                 {"inv_variance_peak_x", inv_peak_x},
                 {"min_converged", min_converged},
                 {"fisher", fisher_summary}};
  return out;
}

// --- toy 2D --------------------------------------------------------------------

struct Toy2dTrial {
  Rows history, profile, virtuals, ratios;
  Json summary = Json::array();
  std::vector<std::pair<int, std::vector<InversionResult>>> snapshots;  // kept for the plots of trial 0
};

Matrix grid_2d(const Json& g) {
  const Matrix axis = grid_1d(g);
  const Index n = axis.cols();
  Matrix x(2, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      x(0, i * n + j) = axis(0, j);
      x(1, i * n + j) = axis(0, i);
    }
  return x;
}

Toy2dTrial toy2d_trial(const Context& ctx, const GaussianCategoryModel& model, const std::vector<LayerSpec>& specs,
                       int t) {
  const Json& m = ctx.metrics();
  const int layer = m["layer"].get<int>();
  const std::string tr = std::to_string(t);
  Toy2dTrial out;

  auto snaps = ctx.cfg["train"]["snapshots"].get<std::vector<int>>();
  const TrainConfig tc = ctx.train(derive_seed(ctx.seed, 3, t));
  for (int s : snaps)
    if (s < 0 || s > tc.epochs) throw StageError("config", "/train/snapshots: epoch " + std::to_string(s) + " out of range", 2);

  const auto data = model.sample(ctx.cfg["dataset"]["n_train"].get<Index>(), derive_seed(ctx.seed, 1, t));
  Network net = stage("build", [&] { return Network::build(specs, Shape::vec(2), derive_seed(ctx.seed, 2, t)); });
  if (layer < 0 || layer + 1 >= net.depth()) throw StageError("config", "/metrics/layer: not a hidden layer", 2);
  std::vector<std::pair<int, Network>> copies;
  if (std::find(snaps.begin(), snaps.end(), 0) != snaps.end()) copies.emplace_back(0, net);
  const History h = stage("train", [&] {
    return train(net, data.x, one_hot(data.labels, model.categories()), tc,
                 [&](int epoch, const EpochStats&, const Network& n) {
                   if (std::find(snaps.begin(), snaps.end(), epoch) != snaps.end()) copies.emplace_back(epoch, n);
                 });
  });
  for (std::size_t e = 0; e < h.size(); ++e) out.history.push_back({tr, cell(e + 1), cell(h[e].loss), cell(h[e].accuracy)});
  const auto test = model.sample(ctx.cfg["dataset"]["n_test"].get<Index>(), derive_seed(ctx.seed, 9, t));
  ctx.info("trial " + tr + ": test accuracy " + format_number(accuracy(predict(net, test.x), test.labels)));

  const Matrix grid = grid_2d(m["grid"]);
  const InversionOptions opt = parse_inversion(m["inversion"]);
  const Index n_real = m["inversion"]["realizations"].get<Index>();
  const double amb = m["ambiguous_posterior"].get<double>();
  const double sigmas = m["ellipse_sigmas"].get<double>();

  for (std::size_t s = 0; s < copies.size(); ++s) {
    const auto& [epoch, snap] = copies[s];
    std::vector<InversionResult> results;
    std::vector<double> amb_ratios;
    for (Index i = 0; i < grid.cols(); ++i) {
      const Vector x = grid.col(i);
      InversionResult r = stage("inversion", [&] {
        return invert_activity(snap, layer, x, n_real, derive_seed(ctx.seed, 4, (std::uint64_t(t) << 24) | (s << 12) | i), opt);
      });
      const Vector normal = model.boundary_normal(x);
      Vector along(2);
      along << -normal(1), normal(0);
      const double sp = directional_std(r.covariance, along), sn = directional_std(r.covariance, normal);
      const double ratio = sp / sn;
      const double pmax = model.posterior(x).maxCoeff();
      const bool ambiguous = pmax < amb;
      if (ambiguous && std::isfinite(ratio)) amb_ratios.push_back(ratio);
      const Ellipse el = confidence_ellipse(r.covariance, sigmas);
      out.profile.push_back({tr, cell(epoch), xs(x(0)), xs(x(1)), cell(r.n_converged), cell(r.total_variance()),
                             cell(1.0 / r.total_variance()), cell(r.covariance(0, 0)), cell(r.covariance(0, 1)),
                             cell(r.covariance(1, 1)), cell(sp), cell(sn), cell(ratio), cell(pmax), cell(ambiguous),
                             cell(el.major), cell(el.minor), cell(el.angle)});
      for (Index k = 0; k < r.estimates.cols(); ++k)
        out.virtuals.push_back({tr, cell(epoch), xs(x(0)), xs(x(1)), cell(k), cell(r.estimates(0, k)),
                                cell(r.estimates(1, k)), cell(bool(r.converged[std::size_t(k)]))});
      results.push_back(std::move(r));
    }
    const double mean_ratio = amb_ratios.empty() ? NAN : mean(amb_ratios);
    out.ratios.push_back({tr, cell(epoch), cell(mean_ratio), cell(amb_ratios.size())});
    out.summary.push_back({{"trial", t}, {"epoch", epoch}, {"mean_ratio", mean_ratio}, {"n_ambiguous", amb_ratios.size()}});
    if (t == 0) out.snapshots.emplace_back(epoch, std::move(results));
  }
  save_checkpoint(net, ctx.out.path("trial_" + tr + ".ckpt").string());
  return out;
}

}  // namespace

void run_toy1d(Context& ctx) {
  const auto model = stage("config", [&] { return toy_model(ctx, 1); });
  const auto specs = parse_layers(ctx.cfg["network"]["layers"]);
  const int T = ctx.trials();
  std::vector<Toy1dTrial> trials(static_cast<std::size_t>(T));
  parallel_for(T, [&](int t) { trials[std::size_t(t)] = toy1d_trial(ctx, model, specs, t); });

  Rows history, posterior, distance, inversion, fisher, skl, cost;
  Json summary = Json::array();
  for (auto& tr : trials) {
    append(history, std::move(tr.history));
    append(posterior, std::move(tr.posterior));
    append(distance, std::move(tr.distance));
    append(inversion, std::move(tr.inversion));
    append(fisher, std::move(tr.fisher));
    append(skl, std::move(tr.skl));
    append(cost, std::move(tr.cost));
    summary.push_back(tr.summary);
  }
  ctx.results["trials"] = summary;
  for (int t = 0; t < T; ++t) {
    ctx.out.add_file("trial_" + std::to_string(t) + ".ckpt", "checkpoint");
    ctx.out.add_file("trial_" + std::to_string(t) + "_untrained.ckpt", "checkpoint");
  }
  ctx.out.write("training.csv", "csv", table({"trial", "epoch", "loss", "accuracy"}, history).str());
  ctx.out.write("posterior.csv", "csv", table({"trial", "x", "p_network", "p_exact"}, posterior).str());
  ctx.out.write("distance_profile.csv", "csv", table({"trial", "x_left", "x_right", "x", "distance"}, distance).str());
  ctx.out.write("inversion_profile.csv", "csv",
                table({"trial", "x", "n_converged", "variance", "inv_variance", "cov_x_x"}, inversion).str());
  if (!fisher.empty()) {
    ctx.out.write("fisher.csv", "csv", table({"trial", "x", "f_cat", "f_code_trained", "f_code_untrained"}, fisher).str());
    ctx.out.write("skl.csv", "csv", table({"trial", "x", "skl_over_delta2", "f_code", "rel_error"}, skl).str());
    ctx.out.write("coding_cost.csv", "csv",
                  table({"trial", "network", "sigma", "coding_cost", "std_error", "used", "excluded"}, cost).str());
  }

  // plots read the rows just written
  auto series_by_trial = [&](const Rows& rows, std::size_t xcol, std::size_t ycol) {
    std::vector<PlotSeries> out;
    for (int t = 0; t < T; ++t) {
      PlotSeries s{"trial " + std::to_string(t), {}, {}, {}, {}};
      for (const auto& r : rows)
        if (r[0] == std::to_string(t)) s.x.push_back(std::stod(r[xcol])), s.y.push_back(std::stod(r[ycol]));
      out.push_back(std::move(s));
    }
    return out;
  };
  ctx.out.write("distance_profile.svg", "svg",
                svg_line_plot({"Neural distance between contiguous stimuli", "x", "cosine distance",
                               series_by_trial(distance, 3, 4)}));
  ctx.out.write("inv_variance.svg", "svg",
                svg_line_plot({"Inverse variance of virtual inputs", "x", "1 / variance", series_by_trial(inversion, 1, 4)}));
  auto post = series_by_trial(posterior, 1, 2);
  PlotSeries exact{"exact", {}, {}, {}, {}};
  for (const auto& r : posterior)
    if (r[0] == "0") exact.x.push_back(std::stod(r[1])), exact.y.push_back(std::stod(r[3]));
  post.push_back(exact);
  ctx.out.write("posterior.svg", "svg", svg_line_plot({"Posterior of category 2", "x", "P(2|x)", post}));
  if (!fisher.empty()) {
    PlotSeries fc{"F_cat", {}, {}, {}, {}}, ft{"F_code trained", {}, {}, {}, {}}, fu{"F_code untrained", {}, {}, {}, {}};
    for (const auto& r : fisher)
      if (r[0] == "0") {
        const double x = std::stod(r[1]);
        fc.x.push_back(x), fc.y.push_back(std::stod(r[2]));
        ft.x.push_back(x), ft.y.push_back(std::stod(r[3]));
        fu.x.push_back(x), fu.y.push_back(std::stod(r[4]));
      }
    ctx.out.write("fisher.svg", "svg", svg_line_plot({"Fisher information (trial 0)", "x", "F", {fc, ft, fu}}));
  }
}

void run_toy2d(Context& ctx) {
  const auto model = stage("config", [&] { return toy_model(ctx, 2); });
  const auto specs = parse_layers(ctx.cfg["network"]["layers"]);
  const int T = ctx.trials();
  std::vector<Toy2dTrial> trials(static_cast<std::size_t>(T));
  parallel_for(T, [&](int t) { trials[std::size_t(t)] = toy2d_trial(ctx, model, specs, t); });

  Rows history, profile, virtuals, ratios;
  Json summary = Json::array();
  for (auto& tr : trials) {
    append(history, std::move(tr.history));
    append(profile, std::move(tr.profile));
    append(virtuals, std::move(tr.virtuals));
    append(ratios, std::move(tr.ratios));
    for (auto& s : tr.summary) summary.push_back(s);
  }
  ctx.results["snapshots"] = summary;
  for (int t = 0; t < T; ++t) ctx.out.add_file("trial_" + std::to_string(t) + ".ckpt", "checkpoint");
  ctx.out.write("training.csv", "csv", table({"trial", "epoch", "loss", "accuracy"}, history).str());
  ctx.out.write("inversion_profile.csv", "csv",
                table({"trial", "epoch", "x1", "x2", "n_converged", "variance", "inv_variance", "cov_11", "cov_12",
                       "cov_22", "std_parallel", "std_normal", "ratio", "max_posterior", "ambiguous", "ellipse_major",
                       "ellipse_minor", "ellipse_angle"},
                      profile)
                    .str());
  ctx.out.write("virtual_inputs.csv", "csv",
                table({"trial", "epoch", "x1", "x2", "realization", "xhat1", "xhat2", "converged"}, virtuals).str());
  ctx.out.write("anisotropy.csv", "csv", table({"trial", "epoch", "mean_ratio", "n_ambiguous"}, ratios).str());

  const double sigmas = ctx.metrics()["ellipse_sigmas"].get<double>();
  for (const auto& [epoch, results] : trials.front().snapshots) {
    PlotSeries pts{"virtual inputs", {}, {}, {}, {}, true}, centers{"stimuli", {}, {}, {}, {}, true};
    PlotSeries ell{"confidence ellipse", {}, {}, {}, {}};
    for (const auto& r : results) {
      for (Index k = 0; k < r.estimates.cols(); ++k) pts.x.push_back(r.estimates(0, k)), pts.y.push_back(r.estimates(1, k));
      centers.x.push_back(r.stimulus(0)), centers.y.push_back(r.stimulus(1));
      const Ellipse e = confidence_ellipse(r.covariance, sigmas);
      for (int a = 0; a <= 48; ++a) {
        const double th = 2.0 * std::numbers::pi * a / 48.0;
        const double u = e.major * std::cos(th), v = e.minor * std::sin(th);
        ell.x.push_back(r.stimulus(0) + u * std::cos(e.angle) - v * std::sin(e.angle));
        ell.y.push_back(r.stimulus(1) + u * std::sin(e.angle) + v * std::cos(e.angle));
      }
      ell.x.push_back(NAN), ell.y.push_back(NAN);
    }
    ctx.out.write("virtual_inputs_epoch" + std::to_string(epoch) + ".svg", "svg",
                  svg_line_plot({"Virtual inputs after " + std::to_string(epoch) + " epochs (trial 0)", "x1", "x2",
                                 {pts, centers, ell}}));
  }
}

}  // namespace catgeo::detail
