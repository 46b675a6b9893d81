#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "scm/erm.hpp"
#include "scm/errors.hpp"
#include "scm/sampling.hpp"
#include "scm/sc_calculus.hpp"

using namespace scm;
using doctest::Approx;

namespace {

Dataset make_data(const LossModel& loss, const ResponseMechanism& mech, Eigen::Index n, const Vector& theta,
                  std::uint64_t seed) {
  Matrix x = gen_design(DesignLaw::gaussian(Matrix::Identity(theta.size(), theta.size())), n, seed, 0);
  Vector y = gen_response(mech, x, loss, theta, seed, 0);
  return Dataset(std::move(x), std::move(y));
}

Vector e1(Eigen::Index d, double v = 1.0) {
  Vector t = Vector::Zero(d);
  t[0] = v;
  return t;
}

}  // namespace

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(Dataset(Matrix::Zero(3, 2), Vector::Zero(2)), InvalidArgument);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = NAN;
  CHECK_THROWS_AS(Dataset(bad, Vector::Zero(2)), InvalidArgument);
  Dataset ok(Matrix::Ones(2, 2), Vector::Zero(2));
  CHECK_THROWS_AS(empirical_risk(make_logistic(), ok, Vector::Zero(3)), InvalidArgument);
  Dataset labels(Matrix::Ones(2, 1), Vector::Constant(2, 0.5));
  CHECK_THROWS_AS(empirical_risk(make_logistic(), labels, Vector::Zero(1)), DomainError);
}

TEST_CASE("empirical risk hand values") {
  Dataset one(Matrix::Identity(1, 3), Vector::Ones(1));
  const auto ev = empirical_risk(make_logistic(), one, Vector::Zero(3));
  CHECK(ev.value == Approx(std::log(2.0)));
  CHECK(ev.gradient[0] == Approx(-0.5));
  CHECK(ev.gradient[1] == 0.0);
  CHECK(ev.hessian(0, 0) == Approx(0.25));

  const Dataset q = make_data(make_quadratic(2.0), ResponseMechanism::linear_plus_noise({}), 50, e1(4), 3);
  const Matrix x = q.design();
  const Vector ols = (x.transpose() * x).ldlt().solve(x.transpose() * q.responses());
  const auto at_ols = empirical_risk(make_quadratic(2.0), q, ols);
  CHECK(at_ols.gradient.norm() <= 1e-10);
  const Matrix expected = x.transpose() * x / (4.0 * 50.0);
  CHECK((at_ols.hessian - expected).norm() <= 1e-12);
  const auto elsewhere = empirical_risk(make_quadratic(2.0), q, Vector::Constant(4, 3.0));
  CHECK((elsewhere.hessian - expected).norm() <= 1e-12);
  CHECK(empirical_risk(make_quadratic(2.0), q, ols, EvalLevel::Value).gradient.size() == 0);
}

TEST_CASE("gradient and hessian match finite differences") {
  CounterRng rng(5, 0, 0, StreamTag::Misc);
  for (const auto& loss : registered_losses()) {
    if (loss.kind() == LossKind::ExponentialResponse) continue;
    ResponseMechanism mech = ResponseMechanism::linear_plus_noise({});
    if (loss.response_space() == ResponseSpace::Binary01 || loss.response_space() == ResponseSpace::SignedBinary) {
      mech = ResponseMechanism::glm(LossKind::Logistic);
    }
    if (loss.kind() == LossKind::Poisson) mech = ResponseMechanism::glm(LossKind::Poisson);
    const Dataset data = make_data(loss, mech, 40, Vector::Constant(3, 0.4), 9);
    for (int rep = 0; rep < 5; ++rep) {
      Vector th(3);
      for (int k = 0; k < 3; ++k) th[k] = 2.0 * rng.uniform() - 1.0;
      const auto ev = empirical_risk(loss, data, th);
      const double h = 1e-5;
      for (int k = 0; k < 3; ++k) {
        Vector p = th, m = th;
        p[k] += h;
        m[k] -= h;
        const auto ep = empirical_risk(loss, data, p), em = empirical_risk(loss, data, m);
        INFO(loss.name());
        CHECK(ev.gradient[k] == Approx((ep.value - em.value) / (2 * h)).epsilon(1e-5).scale(1e-3));
        for (int j = 0; j < 3; ++j) {
          CHECK(ev.hessian(j, k) == Approx((ep.gradient[j] - em.gradient[j]) / (2 * h)).epsilon(1e-5).scale(1e-3));
        }
      }
      CHECK((ev.hessian - ev.hessian.transpose()).norm() <= 1e-12 * (1.0 + ev.hessian.norm()));
      CHECK(min_eigenvalue(ev.hessian) >= -1e-10 * ev.hessian.norm());
    }
  }
}

TEST_CASE("positive-domain feasibility") {
  Matrix x(3, 2);
  x << 1, 2, 0.5, 0.5, 3, 1;
  Dataset data(x, Vector::Constant(3, -1.0));
  const Vector start = feasible_start(data);
  CHECK((x * start).minCoeff() == Approx(1.0));
  Vector bad(2);
  bad << 1.0, -1.0;
  try {
    empirical_risk(make_exponential_response(), data, bad);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    REQUIRE(e.row().has_value());
    CHECK(*e.row() == 0);
  }
  const FitResult f = fit_erm(make_exponential_response(), data);
  CHECK(f.converged);
  CHECK((x * f.theta_hat).minCoeff() > 0.0);
}

TEST_CASE("quadratic fit is one Newton step") {
  const Dataset q = make_data(make_quadratic(1.0), ResponseMechanism::linear_plus_noise({}), 100, e1(5, 2.0), 1);
  const FitResult f = fit_erm(make_quadratic(1.0), q);
  CHECK(f.converged);
  CHECK(f.iterations <= 1);
  CHECK(f.final_decrement * f.final_decrement <= 1e-12);
  const Matrix x = q.design();
  const Vector ols = (x.transpose() * x).ldlt().solve(x.transpose() * q.responses());
  CHECK((f.theta_hat - ols).norm() <= 1e-10);
}

TEST_CASE("well-specified logistic fit") {
  const Dataset data = make_data(make_logistic(), ResponseMechanism::glm(LossKind::Logistic), 10000, e1(5), 2);
  const FitResult f = fit_erm(make_logistic(), data);
  CHECK(f.converged);
  CHECK(empirical_risk(make_logistic(), data, f.theta_hat).gradient.norm() <= 1e-8);
  CHECK(f.final_decrement * f.final_decrement <= 1e-12);
  for (std::size_t k = 1; k < f.trace.size(); ++k) CHECK(f.trace[k].value < f.trace[k - 1].value + 1e-14);
  CHECK((f.theta_hat - e1(5)).norm() < 0.2);
}

TEST_CASE("separable data does not converge") {
  Matrix x(4, 2);
  x << 1, 1, 2, 1, -1, -1, -2, -0.5;
  Vector y(4);
  y << 1, 1, 0, 0;
  const FitResult f = fit_erm(make_logistic(), Dataset(x, y));
  CHECK_FALSE(f.converged);
  CHECK(f.diverging);
  CHECK(f.theta_hat.norm() > 10.0);
}

TEST_CASE("singular hessian is an error") {
  Matrix x = Matrix::Zero(5, 2);
  x.col(0).setOnes();
  CHECK_THROWS_AS(fit_erm(make_quadratic(1.0), Dataset(x, Vector::Ones(5))), SingularHessian);
}

TEST_CASE("damped newton is affine invariant") {
  const LossModel loss = make_sc_pseudo_huber(1.0);
  const Dataset data = make_data(loss, ResponseMechanism::linear_plus_noise(NoiseLaw{NoiseKind::StudentT, 1.0, 3.0}),
                                 300, Vector::Constant(3, 0.7), 4);
  Matrix a(3, 3);
  a << 2, 0.3, 0, -0.5, 1, 0.2, 0.1, 0, 3;
  const Dataset moved(data.design() * a.transpose(), data.responses());
  const FitResult f = fit_erm(loss, data);
  const FitResult g = fit_erm(loss, moved);
  REQUIRE(f.converged);
  REQUIRE(g.converged);
  CHECK(f.iterations == g.iterations);
  CHECK((a.transpose() * g.theta_hat - f.theta_hat).norm() <= 1e-8);
  for (std::size_t k = 0; k < std::min(f.trace.size(), g.trace.size()); ++k) {
    CHECK(f.trace[k].value == Approx(g.trace[k].value).epsilon(1e-10));
  }
  // line-search losses agree at the solution
  const Dataset ld = make_data(make_logistic(), ResponseMechanism::glm(LossKind::Logistic), 500, e1(3), 6);
  const Dataset lm(ld.design() * a.transpose(), ld.responses());
  const FitResult lf = fit_erm(make_logistic(), ld), lg = fit_erm(make_logistic(), lm);
  CHECK((a.transpose() * lg.theta_hat - lf.theta_hat).norm() <= 1e-8);
}

TEST_CASE("score norm") {
  const Dataset data = make_data(make_logistic(), ResponseMechanism::glm(LossKind::Logistic), 400, e1(2), 8);
  const FitResult f = fit_erm(make_logistic(), data);
  const Matrix h = empirical_risk(make_logistic(), data, f.theta_hat).hessian;
  CHECK(score_norm(make_logistic(), data, f.theta_hat, h) <= 1e-7);
  const Vector g = empirical_risk(make_logistic(), data, Vector::Zero(2)).gradient;
  CHECK(score_norm(make_logistic(), data, Vector::Zero(2), Matrix::Identity(2, 2)) == Approx(g.norm()));
  Matrix m(2, 2);
  m << 2.0, 0.5, 0.5, 1.0;
  const double det = 2.0 - 0.25;
  Matrix inv(2, 2);
  inv << 1.0 / det, -0.5 / det, -0.5 / det, 2.0 / det;
  CHECK(score_norm(make_logistic(), data, Vector::Zero(2), m) == Approx(std::sqrt(g.dot(inv * g))).epsilon(1e-12));
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(score_norm(make_logistic(), data, Vector::Zero(2), bad), NotPositiveDefinite);
}

TEST_CASE("mahalanobis distance") {
  Vector a(2), b(2);
  a << 3, 4;
  b << 2, 3;
  CHECK(mahalanobis(a, a, Matrix::Identity(2, 2)) == 0.0);
  CHECK(mahalanobis(a, Vector::Zero(2), Matrix::Identity(2, 2)) == Approx(5.0));
  Matrix m = Matrix::Zero(2, 2);
  m.diagonal() << 4, 9;
  CHECK(mahalanobis(a, b, m) == Approx(std::sqrt(13.0)));
  Matrix psd = Matrix::Zero(2, 2);
  psd(0, 0) = 1.0;
  CHECK(mahalanobis(a, b, psd) == Approx(1.0));
  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS(mahalanobis(a, b, bad));
}

TEST_CASE("median of means aggregation") {
  const Matrix one = Matrix::Identity(1, 1);
  auto v = [](double x) { return Vector::Constant(1, x); };
  CHECK(mom_aggregate({{v(3.0), one}}).theta[0] == 3.0);
  const auto r = mom_aggregate({{v(0.0), one}, {v(0.1), one}, {v(50.0), one}});
  CHECK(r.theta[0] < 1.0);
  // exhaustive median of distances: both clustered points have median 0.1, the
  // first index wins the tie
  CHECK(r.index == 0);
  const auto p = mom_aggregate({{v(50.0), one}, {v(0.1), one}, {v(0.0), one}});
  CHECK(p.theta[0] < 1.0);
  CHECK_THROWS_AS(mom_aggregate({}), InvalidArgument);
  CHECK_THROWS(mom_aggregate({{v(0.0), -one}}));
}

TEST_CASE("sandwich on the estimator path") {
  for (const LossModel& loss : {make_logistic(), make_sc_pseudo_huber(1.0)}) {
    const bool canonical = loss.sc_class().kind == ScKind::Canonical;
    const auto mech = canonical ? ResponseMechanism::linear_plus_noise(NoiseLaw{NoiseKind::Laplace, 1.0, 3.0})
                                : ResponseMechanism::glm(LossKind::Logistic);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Vector th = e1(3);
      const Dataset data = make_data(loss, mech, 200, th, 100 + seed);
      const FitResult f = fit_erm(loss, data);
      REQUIRE(f.converged);
      // restriction of L_n along theta* -> theta_hat
      oracle::Restriction r{loss, {}, {}, {}, {}};
      const Vector delta = f.theta_hat - th;
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        r.y.push_back(data.responses()[i]);
        r.a.push_back(data.design().row(i).dot(th));
        r.b.push_back(data.design().row(i).dot(delta));
        r.w.push_back(1.0 / static_cast<double>(data.n()));
      }
      const double direct = empirical_risk(loss, data, f.theta_hat).value - empirical_risk(loss, data, th).value -
                            empirical_risk(loss, data, th).gradient.dot(delta);
      CHECK(oracle::remainder(r, 1.0) == Approx(direct).epsilon(1e-8).scale(1e-6));
      CHECK(oracle::sandwich(r, canonical ? BracketCase::Canonical : BracketCase::Pseudo).inside());
    }
  }
}
