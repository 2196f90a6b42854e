#pragma once

#include "catgeo/categories.hpp"
#include "catgeo/continua.hpp"
#include "catgeo/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace catgeo {

/// 1 - a.b / (|a| |b|), clamped to [0, 2]. Throws EvaluationError on a zero vector.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_distance(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) throw EvaluationError("cosine distance of a zero vector");
  const Scalar d = Scalar(1) - a.dot(b) / (na * nb);
  return std::clamp(d, Scalar(0), Scalar(2));
}

/// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)|.
template <typename Scalar>
Scalar ks_statistic(std::span<const Scalar> a, std::span<const Scalar> b) {
  if (a.empty() || b.empty()) throw EvaluationError("KS statistic needs non-empty samples");
  std::vector<Scalar> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const Scalar na = Scalar(sa.size()), nb = Scalar(sb.size());
  std::size_t i = 0, j = 0;
  Scalar d = 0;
  while (i < sa.size() && j < sb.size()) {
    const Scalar t = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == t) ++i;
    while (j < sb.size() && sb[j] == t) ++j;
    d = std::max(d, std::abs(Scalar(i) / na - Scalar(j) / nb));
  }
  return d;
}

inline double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  return ks_statistic<double>(std::span<const double>(a), std::span<const double>(b));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Linear-interpolated quantile of a sorted sample.
double sorted_quantile(const std::vector<double>& sorted, double q);

/// Percentile bootstrap of `statistic` over resamples of `values`.
Interval bootstrap_ci(const std::vector<double>& values,
                      const std::function<double(const std::vector<double>&)>& statistic,
                      int n_resamples = 1000, double level = 0.95, std::uint64_t seed = 0);

double mean(const std::vector<double>& v);
double median(std::vector<double> v);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// --- distance profiles ------------------------------------------------------

struct DistanceProfile {
  int layer = 0;
  std::vector<double> distances;  // between items i and i+1; NaN where undefined
  std::vector<bool> valid;
  std::optional<double> crossing;
  bool aligned = false;
};

/// Adjacent-item cosine distances of eval-mode activity at `layer`. The
/// crossing comes from the network's own output posteriors along the
/// continuum (source/target labels of the continuum).
DistanceProfile distance_profile(const Network& net, int layer, const Continuum& c);

/// Same, from precomputed activity (one item per column) and output posteriors.
DistanceProfile distance_profile(const Matrix& activity, const Matrix& posteriors, int source, int target,
                                 int layer = 0);

struct AlignedCurve {
  std::vector<int> offsets;
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> count;

  /// Offset of the largest mean value.
  int peak_offset() const;
  double peak() const;
};

/// Shifts each profile so the pair containing its crossing sits at offset 0,
/// averages offsets covered by at least `min_count` profiles and attaches a
/// percentile bootstrap CI over profiles.
AlignedCurve align_profiles(const std::vector<DistanceProfile>& profiles, int min_count = 30,
                            int n_resamples = 1000, double level = 0.95, std::uint64_t seed = 0);

/// Alignment with explicit per-profile shifts (used by the shuffled control).
AlignedCurve align_with_shifts(const std::vector<DistanceProfile>& profiles, const std::vector<int>& shifts,
                               int min_count, int n_resamples, double level, std::uint64_t seed);

// --- categoricality ---------------------------------------------------------

struct CategoricalityResult {
  double ks = 0.0;
  Interval ci;
  int n_within = 0;
  int n_between = 0;
  std::vector<double> within;
  std::vector<double> between;
};

/// KS statistic between within-category and between-category cosine
/// distances of sampled item pairs (`activity`: one item per column).
CategoricalityResult categoricality_from_activity(const Matrix& activity, const std::vector<int>& labels,
                                                  int n_pairs, std::uint64_t seed, int n_resamples = 1000);

CategoricalityResult categoricality_index(const Network& net, int layer, const Matrix& inputs,
                                          const std::vector<int>& labels, int n_pairs, std::uint64_t seed,
                                          int n_resamples = 1000);

// --- Fisher information of Gaussian-noise layers -------------------------------

struct FisherCode {
  Matrix value;  // K x K
  int excluded = 0;
  double scalar() const { return value(0, 0); }
};

inline constexpr double kExcludeActivity = 1e-6;

/// Closed-form Fisher information of r_i ~ N(f_i, sigma^2 f_i^2):
/// sum_i grad f_i grad f_i^T / f_i^2 * (1/sigma^2 + 2); units with |f_i| < eps excluded.
FisherCode fisher_code_gaussian_layer(const Network& net, int layer, const Vector& x, double sigma);
double fisher_code_gaussian_layer(const Network& net, int layer, double x, double sigma);

/// Scalar F_code for a batch of 1D inputs (1 x n). NaN where every unit is excluded.
std::vector<double> fisher_code_batch(const Network& net, int layer, const Matrix& x, double sigma,
                                      std::vector<int>* excluded = nullptr);

/// Gaussian-noise sigma of a layer; throws for Bernoulli or noiseless layers.
double layer_gaussian_sigma(const Network& net, int layer);

/// Symmetrized KL divergence between the unit-wise Gaussian activity
/// distributions evoked by x1 and x2.
double skl_gaussian_layer(const Network& net, int layer, const Vector& x1, const Vector& x2, double sigma);

struct CodingCost {
  double value = 0.0;
  double std_error = 0.0;
  int used = 0;
  int excluded = 0;
};

/// (1 / 2n) sum_s F_cat(x_s) / F_code(x_s), x_s ~ p(x). 1D models only.
CodingCost coding_cost(const GaussianCategoryModel& model, const Network& net, int layer, double sigma,
                       Index n_samples, std::uint64_t seed);

/// Same estimator with F_code values supplied (samples drawn identically).
CodingCost coding_cost_from(const std::vector<double>& fisher_cat, const std::vector<double>& fisher_code);

}  // namespace catgeo
