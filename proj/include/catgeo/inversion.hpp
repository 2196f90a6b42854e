#pragma once

#include "catgeo/network.hpp"

#include <vector>

namespace catgeo {

enum class InversionMethod { LevenbergMarquardt, Adam };

struct InversionOptions {
  InversionMethod method = InversionMethod::LevenbergMarquardt;
  int max_iterations = 200;   // Levenberg-Marquardt
  double tolerance = 1e-10;   // stop once one iteration improves the objective by less
  double adam_learning_rate = 1e-2;
  int adam_max_iterations = 500;
};

/// Virtual inputs for one stimulus: for each noisy realization r of a layer's
/// activity, the input x_hat whose noiseless activity best matches r.
struct InversionResult {
  Vector stimulus;
  Matrix estimates;  // K x n, one column per realization
  std::vector<bool> converged;
  Vector objective;  // final ||r - f(x_hat)||^2 per realization
  int n_converged = 0;
  Vector mean;        // over converged estimates
  Matrix covariance;  // K x K sample covariance over converged estimates

  Vector variance() const { return covariance.diagonal(); }
  double total_variance() const { return covariance.trace(); }
};

/// Draws n train-mode activities at `layer` for input x (noise of every layer
/// up to `layer` applies) and reconstructs each by minimizing the squared
/// error, warm-started at x. Deterministic given seed.
InversionResult invert_activity(const Network& net, int layer, const Vector& x, Index n,
                                std::uint64_t seed, const InversionOptions& opt = {});

/// Reconstructs given target activities (N x n) from a common start point.
InversionResult invert_targets(const Network& net, int layer, const Vector& start, const Matrix& targets,
                               const InversionOptions& opt = {});

struct InversionProfilePoint {
  Vector x;
  int n_converged = 0;
  Matrix covariance;
  double variance = 0.0;  // trace of covariance
  double inv_variance = 0.0;
};

/// invert_activity at every grid column; point i uses stream (seed, i).
std::vector<InversionProfilePoint> inversion_variance_profile(const Network& net, int layer,
                                                             const Matrix& grid, Index n,
                                                             std::uint64_t seed,
                                                             const InversionOptions& opt = {});

/// Standard deviation of the estimates along a unit direction.
double directional_std(const Matrix& covariance, const Vector& direction);

/// Semi-axes (scaled by `sigmas`) and the angle of the major axis, for a 2x2 covariance.
struct Ellipse {
  double major = 0.0;
  double minor = 0.0;
  double angle = 0.0;  // radians, major axis vs first coordinate
};
Ellipse confidence_ellipse(const Matrix& covariance, double sigmas = 2.0);

}  // namespace catgeo
