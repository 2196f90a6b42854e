#include "catgeo/categories.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace catgeo;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

// Closed form for the 1D toy: log-odds ln P(mu1|x)/P(mu2|x) = -4x.
double toy_p1(double x) { return 1.0 / (1.0 + std::exp(4.0 * x)); }

// -sum_mu P(mu|x) d^2 ln P(mu|x) / dx^2 via a 5-point stencil.
double fisher_cat_numeric(const GaussianCategoryModel& m, double x, double h = 1e-3) {
  auto lnp = [&](double t) -> Vector { return m.posterior(v1(t)).array().log().matrix(); };
  const Vector d2 = (-lnp(x + 2 * h) + 16 * lnp(x + h) - 30 * lnp(x) + 16 * lnp(x - h) - lnp(x - 2 * h)) /
                    (12 * h * h);
  return -m.posterior(v1(x)).dot(d2);
}

GaussianCategoryModel three_category_model() {
  return {{v1(-1.0), v1(0.2), v1(1.5)},
          {Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.2)},
          {0.2, 0.5, 0.3}};
}

}  // namespace

TEST_CASE("model: validation") {
  CHECK_THROWS_AS(GaussianCategoryModel({v1(0)}, {Matrix::Constant(1, 1, 1.0)}, {0.9}), ConfigError);
  CHECK_THROWS_AS(GaussianCategoryModel({v1(0)}, {Matrix::Constant(1, 1, -1.0)}, {1.0}), ConfigError);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(GaussianCategoryModel({Vector::Zero(2)}, {asym}, {1.0}), ConfigError);
}

TEST_CASE("sample: empirical class mean and label frequencies") {
  const auto model = GaussianCategoryModel::toy1d();
  const auto s = model.sample(10000, 1);
  double sum = 0.0;
  int n = 0;
  for (std::size_t j = 0; j < s.labels.size(); ++j)
    if (s.labels[j] == 0) {
      sum += s.x(0, Index(j));
      ++n;
    }
  CHECK(std::abs(sum / n + 0.5) < 0.02);

  const auto big = model.sample(100000, 2);
  const double f0 = double(std::count(big.labels.begin(), big.labels.end(), 0)) / 1e5;
  CHECK(std::abs(f0 - 0.5) < 0.005);

  const GaussianCategoryModel only_first({v1(-0.5), v1(0.5)},
                                         {Matrix::Constant(1, 1, 0.25), Matrix::Constant(1, 1, 0.25)},
                                         {1.0, 0.0});
  const auto all = only_first.sample(500, 3);
  CHECK(std::all_of(all.labels.begin(), all.labels.end(), [](int l) { return l == 0; }));
  CHECK(model.sample(10, 5).x == model.sample(10, 5).x);
}

TEST_CASE("posterior: closed-form values") {
  const auto model = GaussianCategoryModel::toy1d();
  const Vector p0 = model.posterior(v1(0.0));
  CHECK(p0[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p0[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(model.posterior(v1(-0.5))[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));
  CHECK(model.posterior(v1(-0.5))[0] == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(model.posterior(v1(-10.0))[0] > 1.0 - 1e-6);
  CHECK(model.posterior(v1(-400.0))[0] == 1.0);  // no underflow to NaN
}

TEST_CASE("posterior: normalized on a 1001-point grid") {
  const auto m3 = three_category_model();
  for (int i = 0; i <= 1000; ++i) {
    const double x = -3.0 + 6.0 * i / 1000.0;
    CHECK(std::abs(GaussianCategoryModel::toy1d().posterior(v1(x)).sum() - 1.0) < 1e-12);
    CHECK(std::abs(m3.posterior(v1(x)).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("fisher_cat: closed form 16 p (1 - p) on the 1D toy") {
  const auto model = GaussianCategoryModel::toy1d();
  CHECK(model.fisher_cat(0.0) == doctest::Approx(4.0).epsilon(1e-14));
  const double p = toy_p1(-0.5);
  CHECK(model.fisher_cat(-0.5) == doctest::Approx(16 * p * (1 - p)).epsilon(1e-12));
  CHECK(model.fisher_cat(-0.5) == doctest::Approx(1.680).epsilon(1e-3));
  for (int i = 0; i <= 200; ++i) {
    const double x = -1.0 + i / 100.0;
    CHECK(model.fisher_cat(x) == doctest::Approx(16 * toy_p1(x) * (1 - toy_p1(x))).epsilon(1e-10));
  }
}

TEST_CASE("fisher_cat: even, non-negative, maximal at the boundary") {
  const auto model = GaussianCategoryModel::toy1d();
  double best = -1.0, argbest = 99.0;
  for (int i = 0; i <= 200; ++i) {
    const double x = -1.0 + i / 100.0;
    const double f = model.fisher_cat(x);
    CHECK(f >= 0.0);
    CHECK(f == doctest::Approx(model.fisher_cat(-x)).epsilon(1e-12));
    if (f > best) {
      best = f;
      argbest = x;
    }
  }
  CHECK(std::abs(argbest) < 1e-12);
}

TEST_CASE("fisher_cat: identity sum P'^2/P = -sum P (ln P)'' (5-point oracle)") {
  for (const auto& model : {GaussianCategoryModel::toy1d(), three_category_model()}) {
    for (double x : {-1.3, -0.7, -0.25, 0.0, 0.1, 0.45, 0.9, 1.6}) {
      const double analytic = model.fisher_cat(x);
      const double numeric = fisher_cat_numeric(model, x);
      CHECK(std::abs(analytic - numeric) / analytic < 1e-5);
    }
  }
}

TEST_CASE("fisher_cat: degenerate posterior is an evaluation error") {
  const auto model = GaussianCategoryModel::toy1d();
  CHECK_THROWS_AS(model.fisher_cat(-200.0), EvaluationError);
}

TEST_CASE("fisher_cat: 2D toy is rank one along the boundary normal") {
  const auto model = GaussianCategoryModel::toy2d();
  Vector x(2);
  x << 0.3, -0.1;
  const Matrix F = model.fisher_cat(x);
  CHECK((F - F.transpose()).norm() < 1e-15);
  const Vector n = model.boundary_normal(x);
  CHECK(n[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(n[1] == doctest::Approx(std::sqrt(0.5)));
  Vector t(2);
  t << n[1], -n[0];
  CHECK(std::abs(t.dot(F * t)) < 1e-14);
  CHECK(n.dot(F * n) > 0.0);
}

TEST_CASE("mutual_information: limits") {
  const GaussianCategoryModel same({v1(0.3), v1(0.3)},
                                   {Matrix::Constant(1, 1, 0.4), Matrix::Constant(1, 1, 0.4)}, {0.5, 0.5});
  CHECK(std::abs(mutual_information(same)) < 1e-9);
  const GaussianCategoryModel far({v1(-50), v1(50)},
                                  {Matrix::Constant(1, 1, 0.25), Matrix::Constant(1, 1, 0.25)}, {0.5, 0.5});
  CHECK(std::abs(mutual_information(far) - std::log(2.0)) < 1e-4);
}

TEST_CASE("mutual_information: 1D toy model against a Monte-Carlo oracle") {
  const auto model = GaussianCategoryModel::toy1d();
  const double I = mutual_information(model);
  CHECK(I > 0.0);
  CHECK(I < std::log(2.0));
  CHECK(I <= prior_entropy(model));
  // I = E_x KL(P(mu|x) || q), x ~ p(x); 10^6 samples.
  const auto s = model.sample(1000000, 123);
  double acc = 0.0;
  for (Index j = 0; j < s.x.cols(); ++j) {
    const Vector p = model.posterior(s.x.col(j));
    for (int m = 0; m < 2; ++m)
      if (p[m] > 0) acc += p[m] * std::log(p[m] / 0.5);
  }
  CHECK(std::abs(I - acc / double(s.x.cols())) < 1e-3);

  const auto m3 = three_category_model();
  const double I3 = mutual_information(m3);
  CHECK(I3 > 0.0);
  CHECK(I3 <= prior_entropy(m3));
}

TEST_CASE("model: json round trip") {
  const auto model = three_category_model();
  const auto back = GaussianCategoryModel::from_json(model.to_json());
  CHECK(back.to_json() == model.to_json());
  CHECK_THROWS_AS(GaussianCategoryModel::from_json(nlohmann::json::parse(R"({"means":[[0]],"covariances":[[[1]]],"priors":[1],"bogus":1})")),
                  ConfigError);
}
