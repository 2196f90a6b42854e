#include "catgeo/inversion.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace catgeo {

namespace {

Vector column_objective(const Matrix& f, const Matrix& r) { return (f - r).colwise().squaredNorm(); }

void solve_levenberg_marquardt(const Network& net, int layer, const Matrix& targets, Matrix& x,
                               Vector& obj, std::vector<bool>& converged, const InversionOptions& opt) {
  const Index K = x.rows();
  const Index n = x.cols();
  Vector lambda = Vector::Constant(n, 1e-3);
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  obj = column_objective(activations(net, x, layer), targets);

  for (int it = 0; it < opt.max_iterations; ++it) {
    std::vector<Index> active;
    for (Index j = 0; j < n; ++j)
      if (!done[std::size_t(j)]) active.push_back(j);
    if (active.empty()) break;
    const Index m = Index(active.size());
    Matrix xa(K, m), ra(targets.rows(), m);
    for (Index a = 0; a < m; ++a) {
      xa.col(a) = x.col(active[std::size_t(a)]);
      ra.col(a) = targets.col(active[std::size_t(a)]);
    }
    const TangentResult tr = forward_tangents(net, xa, layer);
    const Matrix res = tr.value - ra;

    Matrix proposal(K, m);
    Matrix grad(K, m);
    for (Index a = 0; a < m; ++a) {
      Matrix H(K, K);
      Vector g(K);
      for (Index k = 0; k < K; ++k) {
        g[k] = tr.tangent[std::size_t(k)].col(a).dot(res.col(a));
        for (Index l = 0; l <= k; ++l)
          H(k, l) = H(l, k) = tr.tangent[std::size_t(k)].col(a).dot(tr.tangent[std::size_t(l)].col(a));
      }
      grad.col(a) = g;
      const double lam = lambda[active[std::size_t(a)]];
      Matrix A = H;
      for (Index k = 0; k < K; ++k) A(k, k) += lam * std::max(H(k, k), 1e-12);
      proposal.col(a) = xa.col(a) - A.ldlt().solve(g);
    }
    const Vector trial = column_objective(activations(net, proposal, layer), ra);
    for (Index a = 0; a < m; ++a) {
      const Index j = active[std::size_t(a)];
      const auto u = std::size_t(j);
      if (grad.col(a).norm() <= 1e-15 * (1.0 + std::sqrt(obj[j]))) {
        done[u] = converged[u] = true;
        continue;
      }
      if (trial[a] < obj[j]) {
        const double improvement = obj[j] - trial[a];
        x.col(j) = proposal.col(a);
        obj[j] = trial[a];
        lambda[j] = std::max(lambda[j] / 10.0, 1e-12);
        if (improvement < opt.tolerance) done[u] = converged[u] = true;
      } else {
        lambda[j] *= 10.0;
        // Damping so large that the step is below resolution: stationary point.
        if ((proposal.col(a) - xa.col(a)).norm() <= 1e-13 * (1.0 + xa.col(a).norm()))
          done[u] = converged[u] = true;
      }
    }
  }
}

void solve_adam(const Network& net, int layer, const Matrix& targets, Matrix& x, Vector& obj,
                std::vector<bool>& converged, const InversionOptions& opt) {
  const Index n = x.cols();
  Matrix m = Matrix::Zero(x.rows(), n), v = Matrix::Zero(x.rows(), n);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  obj = column_objective(activations(net, x, layer), targets);
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < n; ++j)
    if (obj[j] == 0.0) done[std::size_t(j)] = converged[std::size_t(j)] = true;
  for (int t = 1; t <= opt.adam_max_iterations; ++t) {
    const Matrix g = input_gradient(net, x, layer, targets);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
    const Matrix step = opt.adam_learning_rate * (m / c1).array() / ((v / c2).array().sqrt() + eps);
    bool any = false;
    for (Index j = 0; j < n; ++j)
      if (!done[std::size_t(j)]) {
        x.col(j) -= step.col(j);
        any = true;
      }
    if (!any) break;
    const Vector next = column_objective(activations(net, x, layer), targets);
    for (Index j = 0; j < n; ++j) {
      const auto u = std::size_t(j);
      if (done[u]) continue;
      if (std::abs(obj[j] - next[j]) < opt.tolerance) done[u] = converged[u] = true;
      obj[j] = next[j];
    }
  }
}

void summarize(InversionResult& r) {
  const Index K = r.estimates.rows();
  r.n_converged = 0;
  r.mean = Vector::Zero(K);
  for (Index j = 0; j < r.estimates.cols(); ++j)
    if (r.converged[std::size_t(j)]) {
      r.mean += r.estimates.col(j);
      ++r.n_converged;
    }
  r.covariance = Matrix::Zero(K, K);
  if (r.n_converged == 0) {
    r.mean.setConstant(std::numeric_limits<double>::quiet_NaN());
    r.covariance.setConstant(std::numeric_limits<double>::quiet_NaN());
    return;
  }
  r.mean /= double(r.n_converged);
  if (r.n_converged < 2) return;
  for (Index j = 0; j < r.estimates.cols(); ++j)
    if (r.converged[std::size_t(j)]) {
      const Vector d = r.estimates.col(j) - r.mean;
      r.covariance += d * d.transpose();
    }
  r.covariance /= double(r.n_converged - 1);
}

}  // namespace

InversionResult invert_targets(const Network& net, int layer, const Vector& start, const Matrix& targets,
                               const InversionOptions& opt) {
  if (layer < 0 || layer >= net.depth()) throw ConfigError("layer index out of range");
  if (start.size() != net.input_shape().size()) throw ConfigError("stimulus does not match input shape");
  InversionResult r;
  r.stimulus = start;
  r.estimates = start.replicate(1, targets.cols());
  r.converged.assign(static_cast<std::size_t>(targets.cols()), false);
  if (opt.method == InversionMethod::LevenbergMarquardt)
    solve_levenberg_marquardt(net, layer, targets, r.estimates, r.objective, r.converged, opt);
  else
    solve_adam(net, layer, targets, r.estimates, r.objective, r.converged, opt);
  summarize(r);
  return r;
}

InversionResult invert_activity(const Network& net, int layer, const Vector& x, Index n,
                                std::uint64_t seed, const InversionOptions& opt) {
  if (n < 1) throw ConfigError("need at least one realization");
  if (layer < 0 || layer >= net.depth()) throw ConfigError("layer index out of range");
  Rng rng = make_rng(seed, 0x1feb);
  const Matrix noisy = forward(net, x.replicate(1, n), Mode::Train, &rng, layer).output();
  return invert_targets(net, layer, x, noisy, opt);
}

std::vector<InversionProfilePoint> inversion_variance_profile(const Network& net, int layer,
                                                             const Matrix& grid, Index n,
                                                             std::uint64_t seed,
                                                             const InversionOptions& opt) {
  if (grid.cols() == 0) throw ConfigError("inversion grid is empty");
  std::vector<InversionProfilePoint> out;
  for (Index i = 0; i < grid.cols(); ++i) {
    const std::uint64_t point_seed = make_rng(seed, std::uint64_t(i))();
    const InversionResult r = invert_activity(net, layer, grid.col(i), n, point_seed, opt);
    InversionProfilePoint p;
    p.x = grid.col(i);
    p.n_converged = r.n_converged;
    p.covariance = r.covariance;
    p.variance = r.total_variance();
    p.inv_variance = 1.0 / p.variance;
    out.push_back(std::move(p));
  }
  return out;
}

double directional_std(const Matrix& covariance, const Vector& direction) {
  return std::sqrt(std::max(0.0, direction.dot(covariance * direction)));
}

Ellipse confidence_ellipse(const Matrix& covariance, double sigmas) {
  if (covariance.rows() != 2 || covariance.cols() != 2) throw ConfigError("ellipse needs a 2x2 covariance");
  Eigen::SelfAdjointEigenSolver<Matrix> es(covariance);
  const Vector ev = es.eigenvalues().cwiseMax(0.0);  // ascending
  Ellipse e;
  e.major = sigmas * std::sqrt(ev[1]);
  e.minor = sigmas * std::sqrt(ev[0]);
  e.angle = std::atan2(es.eigenvectors()(1, 1), es.eigenvectors()(0, 1));
  return e;
}

}  // namespace catgeo
