#include "catgeo/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace catgeo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uniform_int_distribution<std::size_t> index_dist(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1);
}

Interval percentile_interval(std::vector<double> stats, double level) {
  std::sort(stats.begin(), stats.end());
  const double a = (1.0 - level) / 2.0;
  return {sorted_quantile(stats, a), sorted_quantile(stats, 1.0 - a)};
}

Interval contain(Interval ci, double stat) {
  ci.lo = std::min(ci.lo, stat);
  ci.hi = std::max(ci.hi, stat);
  return ci;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw EvaluationError("quantile of an empty sample");
  const double pos = q * double(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - double(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

Interval bootstrap_ci(const std::vector<double>& values,
                      const std::function<double(const std::vector<double>&)>& statistic, int n_resamples,
                      double level, std::uint64_t seed) {
  if (values.empty()) throw EvaluationError("bootstrap of an empty sample");
  if (n_resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  Rng rng = make_rng(seed, 0xb007);
  auto pick = index_dist(values.size());
  std::vector<double> resample(values.size());
  std::vector<double> stats(static_cast<std::size_t>(n_resamples));
  for (auto& s : stats) {
    for (auto& r : resample) r = values[pick(rng)];
    s = statistic(resample);
  }
  return percentile_interval(std::move(stats), level);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw EvaluationError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) throw EvaluationError("median of an empty sample");
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, 0.5);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw EvaluationError("spearman needs two equal samples of size >= 2");
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return kNaN;
  return sab / std::sqrt(saa * sbb);
}

// --- distance profiles ------------------------------------------------------

DistanceProfile distance_profile(const Matrix& activity, const Matrix& posteriors, int source, int target,
                                 int layer) {
  if (activity.cols() < 2) throw EvaluationError("distance profile needs a continuum of length >= 2");
  DistanceProfile p;
  p.layer = layer;
  const Index n = activity.cols() - 1;
  p.distances.assign(static_cast<std::size_t>(n), kNaN);
  p.valid.assign(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    try {
      p.distances[std::size_t(i)] = cosine_distance(activity.col(i), activity.col(i + 1));
      p.valid[std::size_t(i)] = true;
    } catch (const EvaluationError&) {
      // dead layer for this pair; left as NaN
    }
  }
  p.crossing = crossing_position(posteriors, source, target);
  return p;
}

DistanceProfile distance_profile(const Network& net, int layer, const Continuum& c) {
  const Matrix act = activations(net, c.items, layer);
  const Matrix post = predict(net, c.items);
  return distance_profile(act, post, c.source_label, c.target_label, layer);
}

int AlignedCurve::peak_offset() const {
  if (mean.empty()) throw EvaluationError("empty aligned curve");
  const auto it = std::max_element(mean.begin(), mean.end());
  return offsets[std::size_t(it - mean.begin())];
}

double AlignedCurve::peak() const {
  if (mean.empty()) throw EvaluationError("empty aligned curve");
  return *std::max_element(mean.begin(), mean.end());
}

AlignedCurve align_with_shifts(const std::vector<DistanceProfile>& profiles, const std::vector<int>& shifts,
                               int min_count, int n_resamples, double level, std::uint64_t seed) {
  if (profiles.size() < 2) throw EvaluationError("alignment needs at least 2 profiles");
  if (shifts.size() != profiles.size()) throw EvaluationError("one shift per profile required");
  std::map<int, std::vector<double>> by_offset;
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const auto& d = profiles[p].distances;
    for (std::size_t j = 0; j < d.size(); ++j)
      if (profiles[p].valid[j]) by_offset[int(j) - shifts[p]].push_back(d[j]);
  }
  AlignedCurve c;
  const auto mean_of = [](const std::vector<double>& v) { return catgeo::mean(v); };
  for (const auto& [off, vals] : by_offset) {
    if (int(vals.size()) < min_count) continue;
    const double m = mean(vals);
    const Interval ci =
        contain(bootstrap_ci(vals, mean_of, n_resamples, level, seed + std::uint64_t(off + (1 << 20))), m);
    c.offsets.push_back(off);
    c.mean.push_back(m);
    c.lo.push_back(ci.lo);
    c.hi.push_back(ci.hi);
    c.count.push_back(int(vals.size()));
  }
  return c;
}

AlignedCurve align_profiles(const std::vector<DistanceProfile>& profiles, int min_count, int n_resamples,
                            double level, std::uint64_t seed) {
  std::vector<int> shifts;
  shifts.reserve(profiles.size());
  for (const auto& p : profiles) {
    if (!p.crossing) throw EvaluationError("profile without a posterior crossing cannot be aligned");
    // the crossing lies inside pair floor(c); round(c - 0.5) picks it
    shifts.push_back(int(std::lround(*p.crossing - 0.5)));
  }
  return align_with_shifts(profiles, shifts, min_count, n_resamples, level, seed);
}

// --- categoricality ---------------------------------------------------------

CategoricalityResult categoricality_from_activity(const Matrix& activity, const std::vector<int>& labels,
                                                  int n_pairs, std::uint64_t seed, int n_resamples) {
  if (Index(labels.size()) != activity.cols()) throw EvaluationError("one label per item required");
  if (n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
  std::map<int, std::vector<Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(Index(i));
  if (members.size() < 2) throw EvaluationError("categoricality needs at least 2 categories");
  std::vector<const std::vector<Index>*> cats;
  for (const auto& [label, m] : members) {
    if (m.size() < 2) throw EvaluationError("category " + std::to_string(label) + " has fewer than 2 items");
    cats.push_back(&m);
  }

  Rng rng = make_rng(seed, 0xca7);
  auto pick_cat = index_dist(cats.size());
  CategoricalityResult r;
  const long max_attempts = 20L * n_pairs;

  long attempts = 0;
  while (int(r.within.size()) < n_pairs) {
    if (++attempts > max_attempts) throw EvaluationError("too many zero activations while sampling pairs");
    const auto& m = *cats[pick_cat(rng)];
    auto pick = index_dist(m.size());
    const std::size_t a = pick(rng);
    std::size_t b = index_dist(m.size() - 1)(rng);
    if (b >= a) ++b;
    try {
      r.within.push_back(cosine_distance(activity.col(m[a]), activity.col(m[b])));
    } catch (const EvaluationError&) {
    }
  }
  attempts = 0;
  while (int(r.between.size()) < n_pairs) {
    if (++attempts > max_attempts) throw EvaluationError("too many zero activations while sampling pairs");
    const std::size_t ca = pick_cat(rng);
    std::size_t cb = index_dist(cats.size() - 1)(rng);
    if (cb >= ca) ++cb;
    const auto& ma = *cats[ca];
    const auto& mb = *cats[cb];
    const Index a = ma[index_dist(ma.size())(rng)];
    const Index b = mb[index_dist(mb.size())(rng)];
    try {
      r.between.push_back(cosine_distance(activity.col(a), activity.col(b)));
    } catch (const EvaluationError&) {
    }
  }
  r.n_within = int(r.within.size());
  r.n_between = int(r.between.size());
  r.ks = ks_statistic(r.within, r.between);

  Rng boot = make_rng(seed, 0xb007);
  auto pw = index_dist(r.within.size());
  auto pb = index_dist(r.between.size());
  std::vector<double> w(r.within.size()), b(r.between.size());
  std::vector<double> stats(static_cast<std::size_t>(n_resamples));
  for (auto& s : stats) {
    for (auto& v : w) v = r.within[pw(boot)];
    for (auto& v : b) v = r.between[pb(boot)];
    s = ks_statistic(w, b);
  }
  r.ci = contain(percentile_interval(std::move(stats), 0.95), r.ks);
  return r;
}

CategoricalityResult categoricality_index(const Network& net, int layer, const Matrix& inputs,
                                          const std::vector<int>& labels, int n_pairs, std::uint64_t seed,
                                          int n_resamples) {
  return categoricality_from_activity(activations(net, inputs, layer), labels, n_pairs, seed, n_resamples);
}

// --- Fisher information of Gaussian-noise layers -------------------------------

double layer_gaussian_sigma(const Network& net, int layer) {
  const Noise& nz = net.layer(layer).spec.noise;
  if (nz.kind != NoiseKind::Gaussian || !nz.active())
    throw ConfigError("layer " + std::to_string(layer) + " has no Gaussian noise");
  return nz.gaussian_sigma();
}

FisherCode fisher_code_gaussian_layer(const Network& net, int layer, const Vector& x, double sigma) {
  const TangentResult t = forward_tangents(net, x, layer);
  const Index K = x.size();
  FisherCode F;
  F.value = Matrix::Zero(K, K);
  const double w = 1.0 / (sigma * sigma) + 2.0;
  Vector g(K);
  bool any = false;
  for (Index i = 0; i < t.value.rows(); ++i) {
    const double f = t.value(i, 0);
    if (std::abs(f) < kExcludeActivity) {
      ++F.excluded;
      continue;
    }
    any = true;
    for (Index k = 0; k < K; ++k) g(k) = t.tangent[std::size_t(k)](i, 0) / f;
    F.value.noalias() += w * g * g.transpose();
  }
  if (!any) throw EvaluationError("all units of layer " + std::to_string(layer) + " excluded");
  F.value = 0.5 * (F.value + F.value.transpose()).eval();
  return F;
}

double fisher_code_gaussian_layer(const Network& net, int layer, double x, double sigma) {
  return fisher_code_gaussian_layer(net, layer, Vector::Constant(1, x), sigma).scalar();
}

std::vector<double> fisher_code_batch(const Network& net, int layer, const Matrix& x, double sigma,
                                      std::vector<int>* excluded) {
  if (x.rows() != 1) throw ConfigError("fisher_code_batch expects 1D inputs");
  const TangentResult t = forward_tangents(net, x, layer);
  const double w = 1.0 / (sigma * sigma) + 2.0;
  std::vector<double> out(static_cast<std::size_t>(x.cols()));
  if (excluded) excluded->assign(out.size(), 0);
  for (Index s = 0; s < x.cols(); ++s) {
    double acc = 0.0;
    int used = 0;
    for (Index i = 0; i < t.value.rows(); ++i) {
      const double f = t.value(i, s);
      if (std::abs(f) < kExcludeActivity) continue;
      const double r = t.tangent[0](i, s) / f;
      acc += r * r;
      ++used;
    }
    out[std::size_t(s)] = used ? w * acc : kNaN;
    if (excluded) (*excluded)[std::size_t(s)] = int(t.value.rows()) - used;
  }
  return out;
}

double skl_gaussian_layer(const Network& net, int layer, const Vector& x1, const Vector& x2, double sigma) {
  Matrix x(x1.size(), 2);
  x.col(0) = x1;
  x.col(1) = x2;
  const Matrix f = activations(net, x, layer);
  const double s2 = sigma * sigma;
  double d = 0.0;
  bool any = false;
  for (Index i = 0; i < f.rows(); ++i) {
    const double m1 = f(i, 0), m2 = f(i, 1);
    if (std::abs(m1) < kExcludeActivity || std::abs(m2) < kExcludeActivity) continue;
    any = true;
    const double v1 = s2 * m1 * m1, v2 = s2 * m2 * m2;
    const double dm = m1 - m2;
    d += 0.5 * ((v1 / v2 + v2 / v1 - 2.0) + dm * dm * (1.0 / v1 + 1.0 / v2));
  }
  if (!any) throw EvaluationError("all units of layer " + std::to_string(layer) + " excluded");
  return d;
}

CodingCost coding_cost_from(const std::vector<double>& fisher_cat, const std::vector<double>& fisher_code) {
  if (fisher_cat.size() != fisher_code.size()) throw EvaluationError("sample count mismatch");
  std::vector<double> ratio;
  ratio.reserve(fisher_cat.size());
  CodingCost c;
  for (std::size_t s = 0; s < fisher_cat.size(); ++s) {
    const double fc = fisher_code[s];
    if (!(fc > 0.0) || !std::isfinite(fc)) {
      ++c.excluded;
      continue;
    }
    ratio.push_back(fisher_cat[s] / fc);
  }
  c.used = int(ratio.size());
  if (ratio.empty()) throw EvaluationError("coding cost: every sample excluded");
  const double m = mean(ratio);
  double ss = 0.0;
  for (double r : ratio) ss += (r - m) * (r - m);
  const double sd = ratio.size() > 1 ? std::sqrt(ss / double(ratio.size() - 1)) : 0.0;
  c.value = 0.5 * m;
  c.std_error = 0.5 * sd / std::sqrt(double(ratio.size()));
  return c;
}

CodingCost coding_cost(const GaussianCategoryModel& model, const Network& net, int layer, double sigma,
                       Index n_samples, std::uint64_t seed) {
  if (model.dimension() != 1) throw ConfigError("coding cost is implemented for 1D models");
  const LabeledPoints pts = model.sample(n_samples, seed);
  std::vector<double> fcat(static_cast<std::size_t>(n_samples));
  for (Index s = 0; s < n_samples; ++s) {
    try {
      fcat[std::size_t(s)] = model.fisher_cat(pts.x(0, s));
    } catch (const EvaluationError&) {
      fcat[std::size_t(s)] = 0.0;  // posterior saturated: F_cat underflows to 0
    }
  }
  return coding_cost_from(fcat, fisher_code_batch(net, layer, pts.x, sigma));
}

}  // namespace catgeo
