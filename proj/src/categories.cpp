#include "catgeo/categories.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace catgeo {

GaussianCategoryModel::GaussianCategoryModel(std::vector<Vector> means,
                                             std::vector<Matrix> covariances,
                                             std::vector<double> priors)
    : means_(std::move(means)), covs_(std::move(covariances)), priors_(std::move(priors)) {
  if (means_.empty()) throw ConfigError("category model needs at least one category");
  if (covs_.size() != means_.size() || priors_.size() != means_.size())
    throw ConfigError("means, covariances and priors must have the same length");
  const Index K = means_.front().size();
  if (K == 0) throw ConfigError("category means must be non-empty");
  double total = 0.0;
  for (double q : priors_) {
    if (!(q >= 0.0)) throw ConfigError("priors must be non-negative");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("priors must sum to 1");
  for (std::size_t m = 0; m < means_.size(); ++m) {
    const Matrix& S = covs_[m];
    if (means_[m].size() != K || S.rows() != K || S.cols() != K)
      throw ConfigError("category " + std::to_string(m) + " has inconsistent dimensions");
    if (!S.isApprox(S.transpose(), 1e-12))
      throw ConfigError("covariance " + std::to_string(m) + " is not symmetric");
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success)
      throw ConfigError("covariance " + std::to_string(m) + " is not positive definite");
    Matrix L = llt.matrixL();
    precisions_.push_back(llt.solve(Matrix::Identity(K, K)));
    double logdet = 0.0;
    for (Index i = 0; i < K; ++i) logdet += 2.0 * std::log(L(i, i));
    log_norm_.push_back(-0.5 * (double(K) * std::log(2.0 * std::numbers::pi) + logdet));
    chol_.push_back(std::move(L));
  }
}

GaussianCategoryModel GaussianCategoryModel::toy1d() {
  return {{Vector::Constant(1, -0.5), Vector::Constant(1, 0.5)},
          {Matrix::Constant(1, 1, 0.25), Matrix::Constant(1, 1, 0.25)},
          {0.5, 0.5}};
}

GaussianCategoryModel GaussianCategoryModel::toy2d() {
  return {{Vector::Constant(2, -0.5), Vector::Constant(2, 0.5)},
          {0.25 * Matrix::Identity(2, 2), 0.25 * Matrix::Identity(2, 2)},
          {0.5, 0.5}};
}

LabeledPoints GaussianCategoryModel::sample(Index n, std::uint64_t seed) const {
  if (n < 1) throw ConfigError("sample size must be >= 1");
  Rng rng = make_rng(seed, 0xca7);
  std::discrete_distribution<int> pick(priors_.begin(), priors_.end());
  std::normal_distribution<double> z(0.0, 1.0);
  const Index K = dimension();
  LabeledPoints out{Matrix(K, n), std::vector<int>(static_cast<std::size_t>(n))};
  Vector e(K);
  for (Index j = 0; j < n; ++j) {
    const int m = pick(rng);
    for (Index k = 0; k < K; ++k) e[k] = z(rng);
    out.x.col(j) = means_[static_cast<std::size_t>(m)] + chol_[static_cast<std::size_t>(m)] * e;
    out.labels[static_cast<std::size_t>(j)] = m;
  }
  return out;
}

double GaussianCategoryModel::log_density(int category, const Vector& x) const {
  const auto m = static_cast<std::size_t>(category);
  const Vector d = x - means_[m];
  return log_norm_[m] - 0.5 * d.dot(precisions_[m] * d);
}

namespace {

// ln(q_mu P(x|mu)) for every category; -inf where q_mu = 0.
Vector log_joint(const GaussianCategoryModel& model, const Vector& x) {
  Vector lj(model.categories());
  for (int m = 0; m < model.categories(); ++m) {
    const double q = model.priors()[static_cast<std::size_t>(m)];
    lj[m] = q > 0.0 ? std::log(q) + model.log_density(m, x) : -std::numeric_limits<double>::infinity();
  }
  return lj;
}

double log_sum_exp(const Vector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

double GaussianCategoryModel::log_marginal(const Vector& x) const {
  return log_sum_exp(log_joint(*this, x));
}

Vector GaussianCategoryModel::posterior(const Vector& x) const {
  if (x.size() != dimension()) throw ConfigError("point dimension does not match the model");
  const Vector lj = log_joint(*this, x);
  return (lj.array() - log_sum_exp(lj)).exp().matrix();
}

Matrix GaussianCategoryModel::posterior_gradient(const Vector& x) const {
  const Vector p = posterior(x);
  const Index K = dimension();
  // grad ln P(x|mu) = -Sigma_mu^{-1} (x - m_mu)
  Matrix g(K, categories());
  for (int m = 0; m < categories(); ++m) {
    const auto u = static_cast<std::size_t>(m);
    g.col(m) = -precisions_[u] * (x - means_[u]);
  }
  const Vector mean_g = g * p;
  Matrix dp(K, categories());
  for (int m = 0; m < categories(); ++m) dp.col(m) = p[m] * (g.col(m) - mean_g);
  return dp;
}

Matrix GaussianCategoryModel::fisher_cat(const Vector& x) const {
  const Vector p = posterior(x);
  if (p.minCoeff() < 1e-300)
    throw EvaluationError("degenerate posterior: some P(mu|x) < 1e-300");
  const Matrix dp = posterior_gradient(x);
  Matrix F = Matrix::Zero(dimension(), dimension());
  for (int m = 0; m < categories(); ++m) F += dp.col(m) * dp.col(m).transpose() / p[m];
  return F;
}

double GaussianCategoryModel::fisher_cat(double x) const {
  if (dimension() != 1) throw ConfigError("scalar fisher_cat needs a 1D model");
  return fisher_cat(Vector::Constant(1, x))(0, 0);
}

Vector GaussianCategoryModel::boundary_normal(const Vector& x, int a, int b) const {
  const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
  const Vector g = -precisions_[ub] * (x - means_[ub]) + precisions_[ua] * (x - means_[ua]);
  const double n = g.norm();
  if (n == 0.0) throw EvaluationError("boundary normal undefined (identical categories)");
  return g / n;
}

nlohmann::json GaussianCategoryModel::to_json() const {
  nlohmann::json j;
  j["means"] = nlohmann::json::array();
  j["covariances"] = nlohmann::json::array();
  for (std::size_t m = 0; m < means_.size(); ++m) {
    j["means"].push_back(std::vector<double>(means_[m].data(), means_[m].data() + means_[m].size()));
    nlohmann::json rows = nlohmann::json::array();
    for (Index r = 0; r < covs_[m].rows(); ++r) {
      std::vector<double> row;
      for (Index c = 0; c < covs_[m].cols(); ++c) row.push_back(covs_[m](r, c));
      rows.push_back(row);
    }
    j["covariances"].push_back(rows);
  }
  j["priors"] = priors_;
  return j;
}

GaussianCategoryModel GaussianCategoryModel::from_json(const nlohmann::json& j) {
  try {
    for (const auto& [key, _] : j.items())
      if (key != "means" && key != "covariances" && key != "priors")
        throw ConfigError("unknown key '" + key + "' in category model");
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (const auto& m : j.at("means")) {
      const auto v = m.get<std::vector<double>>();
      means.push_back(Eigen::Map<const Vector>(v.data(), Index(v.size())));
    }
    for (const auto& c : j.at("covariances")) {
      const auto rows = c.get<std::vector<std::vector<double>>>();
      Matrix S(Index(rows.size()), rows.empty() ? 0 : Index(rows.front().size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (Index(rows[r].size()) != S.cols()) throw ConfigError("ragged covariance matrix");
        for (std::size_t k = 0; k < rows[r].size(); ++k) S(Index(r), Index(k)) = rows[r][k];
      }
      covs.push_back(std::move(S));
    }
    std::vector<double> priors;
    if (j.contains("priors"))
      priors = j.at("priors").get<std::vector<double>>();
    else
      priors.assign(means.size(), 1.0 / double(means.size()));
    return {std::move(means), std::move(covs), std::move(priors)};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("category model: ") + e.what());
  }
}

double prior_entropy(const GaussianCategoryModel& model) {
  double h = 0.0;
  for (double q : model.priors())
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

namespace {

// 15-point Kronrod rule with embedded 7-point Gauss rule.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
std::pair<double, double> gauss_kronrod(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kWgk[7];
  double g = fc * kWg[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    const double s = f(c - dx) + f(c + dx);
    k += kWgk[i] * s;
    if (i % 2 == 1) g += kWg[i / 2] * s;
  }
  return {k * h, std::abs((k - g) * h)};
}

template <typename F>
double adaptive(const F& f, double a, double b, double tol, int depth) {
  const auto [val, err] = gauss_kronrod(f, a, b);
  if (err <= tol) return val;
  if (depth >= 50) throw EvaluationError("quadrature did not converge");
  const double m = 0.5 * (a + b);
  return adaptive(f, a, m, 0.5 * tol, depth + 1) + adaptive(f, m, b, 0.5 * tol, depth + 1);
}

}  // namespace

double mutual_information(const GaussianCategoryModel& model, double tol) {
  if (model.dimension() != 1) throw ConfigError("mutual_information supports 1D models only");
  // Union of [mean - 12 sigma, mean + 12 sigma] intervals.
  std::vector<std::pair<double, double>> spans;
  double min_sigma = std::numeric_limits<double>::infinity();
  for (int m = 0; m < model.categories(); ++m) {
    const double mu = model.means()[std::size_t(m)][0];
    const double s = std::sqrt(model.covariances()[std::size_t(m)](0, 0));
    min_sigma = std::min(min_sigma, s);
    spans.emplace_back(mu - 12 * s, mu + 12 * s);
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, s.second);
    else
      merged.push_back(s);
  }
  auto integrand = [&](double xv) {
    const Vector x = Vector::Constant(1, xv);
    const double lp = model.log_marginal(x);
    double v = 0.0;
    for (int m = 0; m < model.categories(); ++m) {
      const double q = model.priors()[std::size_t(m)];
      if (q == 0.0) continue;
      const double ld = model.log_density(m, x);
      v += q * std::exp(ld) * (ld - lp);
    }
    return v;
  };
  // Start from panels no wider than the narrowest sigma so that peaks are seen.
  double total = 0.0;
  for (const auto& [a, b] : merged) {
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / min_sigma)));
    const double w = (b - a) / panels;
    for (int i = 0; i < panels; ++i)
      total += adaptive(integrand, a + i * w, a + (i + 1) * w, tol / panels, 0);
  }
  return total;
}

}  // namespace catgeo
