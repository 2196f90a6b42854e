#pragma once

#include "catgeo/core.hpp"

#include <json.hpp>

#include <vector>

namespace catgeo {

struct LabeledPoints {
  Matrix x;  // K x n
  std::vector<int> labels;
};

/// M Gaussian categories in K dimensions with prior probabilities. Provides
/// the exact posterior P(mu|x), the category Fisher information F_cat(x) and
/// the mutual information I(mu, x).
class GaussianCategoryModel {
 public:
  GaussianCategoryModel(std::vector<Vector> means, std::vector<Matrix> covariances,
                        std::vector<double> priors);

  /// Two 1D categories at -0.5 and +0.5 with variance 0.25, equal priors.
  static GaussianCategoryModel toy1d();
  /// Two 2D categories at (-0.5,-0.5) and (0.5,0.5), covariance 0.25 I, equal priors.
  static GaussianCategoryModel toy2d();

  int categories() const { return static_cast<int>(means_.size()); }
  int dimension() const { return static_cast<int>(means_.front().size()); }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covariances() const { return covs_; }
  const std::vector<double>& priors() const { return priors_; }

  LabeledPoints sample(Index n, std::uint64_t seed) const;

  double log_density(int category, const Vector& x) const;
  /// ln p(x) = ln sum_mu q_mu P(x|mu)
  double log_marginal(const Vector& x) const;
  Vector posterior(const Vector& x) const;
  /// Column mu holds d P(mu|x) / dx.
  Matrix posterior_gradient(const Vector& x) const;
  /// K x K matrix sum_mu grad P grad P^T / P. Throws EvaluationError if any
  /// posterior is below 1e-300.
  Matrix fisher_cat(const Vector& x) const;
  double fisher_cat(double x) const;

  /// Unit vector along grad(ln P(x|b) - ln P(x|a)): the normal of the a/b
  /// decision boundary through x.
  Vector boundary_normal(const Vector& x, int a = 0, int b = 1) const;

  nlohmann::json to_json() const;
  static GaussianCategoryModel from_json(const nlohmann::json& j);

 private:
  std::vector<Vector> means_;
  std::vector<Matrix> covs_;
  std::vector<double> priors_;
  std::vector<Matrix> precisions_;
  std::vector<Matrix> chol_;  // lower Cholesky factors
  std::vector<double> log_norm_;
};

/// I(mu, x) in nats for K = 1, by adaptive Gauss-Kronrod quadrature over the
/// union of mean +- 12 sigma. Absolute tolerance `tol`.
double mutual_information(const GaussianCategoryModel& model, double tol = 1e-6);

/// H(mu) = -sum q ln q.
double prior_entropy(const GaussianCategoryModel& model);

}  // namespace catgeo
