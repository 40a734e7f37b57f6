#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lrvi/bounds.hpp"
#include "lrvi/discrete_lift.hpp"
#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/lp.hpp"

using namespace lrvi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AtomExtension discrete(double n_bar, int d = 2) { return AtomExtension{n_bar, d, false}; }
AtomExtension continuous(double n_bar) { return AtomExtension{n_bar, 0, true}; }

double choose(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

// P_n(h) from P_nbar(H) by drawing n of n_bar without replacement.
Eigen::VectorXd marginalize(const Eigen::VectorXd& big, int n) {
  const int n_bar = static_cast<int>(big.size()) - 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n + 1);
  for (int big_h = 0; big_h <= n_bar; ++big_h) {
    for (int h = std::max(0, n - (n_bar - big_h)); h <= std::min(n, big_h); ++h) {
      out(h) += big(big_h) * choose(big_h, h) * choose(n_bar - big_h, n - h) / choose(n_bar, n);
    }
  }
  return out;
}

Eigen::VectorXd random_simplex(int size, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = e(rng);
  return v / v.sum();
}

HistTable count_table(const Eigen::VectorXd& probs) {
  const int n = static_cast<int>(probs.size()) - 1;
  HistTable t({Atom{"X", AtomDomain::binary(), n}}, TableMeasure::kHistogram);
  for (int h = 0; h <= n; ++h) {
    if (probs(h) > 0.0) t.set({Histogram{{n - h, h}}}, probs(h));
  }
  return t;
}

}  // namespace

TEST_CASE("lemma1_bound") {
  CHECK(lemma1_bound(10, discrete(100)).value == doctest::Approx(0.4));
  CHECK_FALSE(lemma1_bound(10, discrete(100)).vacuous);
  CHECK(lemma1_bound(10, continuous(1000)).value == doctest::Approx(0.09));
  const BoundValue v = lemma1_bound(10, discrete(10));
  CHECK(v.value == doctest::Approx(4.0));
  CHECK(v.vacuous);
  CHECK(lemma1_bound(10, discrete(kInf)).value == 0.0);
  CHECK_THROWS_AS(lemma1_bound(10, discrete(9)), DomainError);

  double last = kInf;
  for (double n_bar : {10.0, 20.0, 50.0, 400.0, 1e6}) {
    const double b = lemma1_bound(10, discrete(n_bar, 3)).value;
    CHECK(b < last);
    last = b;
  }
}

TEST_CASE("lemma3_bound") {
  CHECK(lemma3_bound(10, 10, discrete(200), discrete(200)).value == doctest::Approx(0.4));
  CHECK(lemma3_bound(5, 5, discrete(100), continuous(500)).value == doctest::Approx(0.24));
  CHECK(lemma3_bound(7, 4, continuous(kInf), discrete(kInf)).value == 0.0);
  CHECK_THROWS_AS(lemma3_bound(5, 5, discrete(4), discrete(10)), DomainError);

  const std::pair<AtomExtension, AtomExtension> cases[] = {
      {discrete(50), discrete(80, 3)}, {discrete(30), continuous(900)}, {continuous(100), continuous(200)}};
  for (const auto& [ex, ey] : cases) {
    CHECK(lemma3_bound(6, 8, ex, ey).value ==
          doctest::Approx(lemma1_bound(6, ex).value + lemma1_bound(8, ey).value));
  }
}

TEST_CASE("theorem4_bound") {
  CHECK(theorem4_bound({0.25}).bound.value == doctest::Approx(0.25));
  const Theorem4Bound two = theorem4_bound({0.1, 0.2}, 1.0);
  CHECK(two.bound.value == doctest::Approx(0.3));
  CHECK(two.normalized);
  CHECK_FALSE(theorem4_bound({0.1, 0.2}).normalized);
  CHECK(theorem4_bound({}).bound.value == 0.0);
  CHECK(theorem4_bound({0.1, 0.2}, 2.0).bound.value == doctest::Approx(0.15));
  CHECK_THROWS_AS(theorem4_bound({0.1, -0.2}), DomainError);
}

TEST_CASE("bound_report covers parfactors with declared extensions") {
  const Atom x{"X", AtomDomain::binary(), 10}, y{"Y", AtomDomain::continuous(), 5}, w{"W", AtomDomain::binary(), 3};
  HistTable tx({x});
  tx.set({Histogram{{10, 0}}}, 1.0);
  HistTable tw({w});
  tw.set({Histogram{{3, 0}}}, 1.0);
  const Rhm model({x, y, w}, {Parfactor{"gx", {}, {AtomArg::population("X")}, tx},
                              Parfactor{"gxy", {}, {AtomArg::population("X"), AtomArg::population("Y")},
                                        ParametricDensity::gaussian(0.0, 1.0)},
                              Parfactor{"gw", {}, {AtomArg::population("W")}, tw}});
  const ExtendibilitySpec spec{{"X", discrete(100)}, {"Y", continuous(500)}};
  const BoundReport r = bound_report(model, spec);
  REQUIRE(r.parfactors.size() == 2);
  CHECK(r.parfactors[0].first == "gx");
  CHECK(r.parfactors[0].second.value == doctest::Approx(0.4));
  CHECK(r.parfactors[1].first == "gxy");
  CHECK(r.parfactors[1].second.value == doctest::Approx(0.4 + 0.04));
  CHECK(r.model.bound.value == doctest::Approx(0.84));
  CHECK_FALSE(r.model.normalized);
}

TEST_CASE("solve_lp on small programs") {
  // min -x1 - 2 x2 s.t. x1 + x2 + s1 = 4, x1 + 3 x2 + s2 = 6.
  Eigen::MatrixXd a(2, 4);
  a << 1, 1, 1, 0, 1, 3, 0, 1;
  const Eigen::Vector2d b(4, 6);
  Eigen::Vector4d c(-1, -2, 0, 0);
  const LpResult r = solve_lp(a, b, c);
  REQUIRE(r.status == LpStatus::kOptimal);
  CHECK(r.objective == doctest::Approx(-5.0));
  CHECK(r.x(0) == doctest::Approx(3.0));
  CHECK(r.x(1) == doctest::Approx(1.0));

  Eigen::MatrixXd inf(2, 2);
  inf << 1, 1, 1, 1;
  const LpResult bad = solve_lp(inf, Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0));
  CHECK(bad.status == LpStatus::kInfeasible);
  CHECK(bad.infeasibility > 0.5 - 1e-9);

  Eigen::MatrixXd un(1, 2);
  un << 1, -1;
  CHECK(solve_lp(un, Eigen::VectorXd::Ones(1), Eigen::Vector2d(-1, 0)).status == LpStatus::kUnbounded);
}

TEST_CASE("hypergeometric_matrix columns are distributions") {
  const Eigen::MatrixXd m = hypergeometric_matrix(6, 15);
  CHECK(m.rows() == 7);
  CHECK(m.cols() == 16);
  for (int j = 0; j < m.cols(); ++j) CHECK(m.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m(2, 5) == doctest::Approx(choose(5, 2) * choose(10, 4) / choose(15, 6)));
}

TEST_CASE("mixtures of binomials are extendible") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 6 + 2 * trial;
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(n + 1);
    const Eigen::VectorXd w = random_simplex(3, rng);
    for (int l = 0; l < 3; ++l) {
      const double p = u(rng);
      for (int h = 0; h <= n; ++h) probs(h) += w(l) * binomial_pdf(h, n, p);
    }
    const ExtendibilityResult r = check_extendibility(count_table(probs), std::min(10 * n, 200));
    CHECK(r.feasible);
    CHECK(r.max_residual <= 1e-8);
    CHECK(r.witness.sum() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK((marginalize(r.witness, n) - probs).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("a single central peak is not extendible") {
  Eigen::VectorXd peak = Eigen::VectorXd::Zero(11);
  peak(5) = 1.0;
  const ExtendibilityResult r = check_extendibility(peak, 100);
  CHECK_FALSE(r.feasible);
  CHECK(r.infeasibility > 1e-8);
  CHECK(check_extendibility(peak, 10).feasible);
}

TEST_CASE("marginals of a larger exchangeable distribution are extendible up to its size") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd big = random_simplex(41, rng);
    const Eigen::VectorXd probs = marginalize(big, 10);
    const ExtendibilityResult r = check_extendibility(probs, 40);
    CHECK(r.feasible);
    CHECK((marginalize(r.witness, 10) - probs).cwiseAbs().maxCoeff() <= 1e-8);
    // Feasible at 40 implies feasible at every smaller extension.
    for (int n_bar : {10, 17, 25, 33}) CHECK(check_extendibility(probs, n_bar).feasible);
  }
}

TEST_CASE("extendibility argument checks") {
  CHECK_THROWS_AS(check_extendibility(Eigen::VectorXd::Constant(22, 1.0 / 22), 100), CapacityError);
  CHECK_THROWS_AS(check_extendibility(Eigen::VectorXd::Constant(5, 0.2), 300), CapacityError);
  CHECK_THROWS_AS(check_extendibility(Eigen::VectorXd::Constant(5, 0.2), 3), DomainError);
  HistTable cat({Atom{"C", AtomDomain::categorical(3), 2}});
  cat.set({Histogram{{1, 1, 0}}}, 1.0);
  CHECK_THROWS_AS(check_extendibility(cat, 10), DomainError);
}

TEST_CASE("fitted mixtures respect the single-atom bound on extendible tables") {
  std::mt19937_64 rng(3);
  const int n = 8;
  for (int n_bar : {16, 40, 80}) {
    for (int trial = 0; trial < 4; ++trial) {
      const Eigen::VectorXd probs = marginalize(random_simplex(n_bar + 1, rng), n);
      DiscreteFitOptions o;
      o.tol = 1e-6;
      o.k_max = n;
      o.seed = static_cast<std::uint64_t>(trial);
      const DiscreteFit fit = fit_mixture_discrete(count_table(probs), o);
      CHECK(fit.report.achieved_tv <= lemma1_bound(n, discrete(n_bar)).value);
    }
  }
}
