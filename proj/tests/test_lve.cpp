#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/lve.hpp"
#include "lrvi/oracle.hpp"

using namespace lrvi;

namespace {

Atom binary_atom(const std::string& name, int n) { return Atom{name, AtomDomain::binary(), n}; }
Atom continuous_atom(const std::string& name, int n) { return Atom{name, AtomDomain::continuous(), n}; }

MixtureOfIidDiscrete random_mixture(const std::vector<Atom>& atoms, int k, std::mt19937_64& rng, double lo = 0.2,
                                    double hi = 0.8) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd w(k);
  for (int l = 0; l < k; ++l) w(l) = 0.2 + u(rng);
  w /= w.sum();
  std::vector<Eigen::MatrixXd> params;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    Eigen::MatrixXd p(k, 2);
    for (int l = 0; l < k; ++l) {
      p(l, 1) = lo + (hi - lo) * u(rng);
      p(l, 0) = 1.0 - p(l, 1);
    }
    params.push_back(p);
  }
  return MixtureOfIidDiscrete(atoms, w, params);
}

Populations populations_of(const std::vector<Atom>& atoms) {
  Populations out;
  for (const Atom& a : atoms) out[a.name] = a.population;
  return out;
}

VariationalModel make_model(const std::vector<Atom>& atoms, const std::vector<std::pair<std::string, Potential>>& pots) {
  VariationalModel m;
  m.atoms = atoms;
  m.population = populations_of(atoms);
  for (const auto& [id, p] : pots) m.potentials.push_back(make_variational_potential(id, p));
  return m;
}

double tv(const Eigen::VectorXd& p, const Eigen::VectorXd& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

KdeMixture kde_mixture(const std::vector<Atom>& atoms, const std::vector<double>& w,
                       const std::vector<std::vector<Kde>>& comps) {
  std::vector<std::vector<AtomFactor>> c;
  for (const auto& comp : comps) c.emplace_back(comp.begin(), comp.end());
  return KdeMixture(atoms, Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())), c);
}

double mixture_density(const KdeMixture& m, int atom, double x) {
  double out = 0.0;
  for (int l = 0; l < m.k(); ++l) out += m.weights()(l) * kde_eval(std::get<Kde>(m.factor(l, atom)), x);
  return out;
}

void check_closed(const VariationalPotential& p) {
  CHECK_NOTHROW(p.mixture.validate());
  CHECK(std::abs(p.mixture.weights().sum() - 1.0) <= 1e-9);
  CHECK(std::isfinite(p.log_mass));
}

}  // namespace

TEST_CASE("update_obs") {
  const Atom x = binary_atom("X", 10);
  Eigen::Vector2d w(0.5, 0.5), p(0.1, 0.9);
  const VariationalModel m = make_model({x}, {{"g", MixtureOfIidDiscrete::binary(x, w, p)}});
  const VariationalModel same = update_obs(m, {});
  CHECK(same.potentials[0].mixture.weights() == m.potentials[0].mixture.weights());
  CHECK(same.population.at("X") == 10);

  const VariationalModel one = update_obs(m, {Observation{"X", {0, 1}, {}}});
  CHECK(one.potentials[0].mixture.weights()(0) == doctest::Approx(0.1));
  CHECK(one.potentials[0].mixture.weights()(1) == doctest::Approx(0.9));

  const VariationalModel single =
      make_model({x}, {{"g", MixtureOfIidDiscrete::binary(x, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 0.7))}});
  const VariationalModel three = update_obs(single, {Observation{"X", {}, {1, 1, 0}}});
  CHECK(three.potentials[0].mixture.weights()(0) == doctest::Approx(1.0));
  CHECK(three.potentials[0].log_mass == doctest::Approx(std::log(0.7 * 0.7 * 0.3)));
  CHECK(three.population.at("X") == 7);

  CHECK_THROWS_AS(update_obs(m, {Observation{"X", {6, 5}, {}}}), DomainError);
  CHECK_THROWS_AS(update_obs(m, {Observation{"X", {}, {2}}}), DomainError);
}

TEST_CASE("normal_overlap") {
  const GaussianApproxComponent a{0.0, 1.0};
  CHECK(normal_overlap(a, a) == doctest::Approx(1.0 / (2.0 * std::sqrt(std::numbers::pi))));
  const GaussianApproxComponent b{4.0, 1.0};
  CHECK(normal_overlap(a, b) == doctest::Approx(std::exp(-4.0) / (2.0 * std::sqrt(std::numbers::pi))));
  CHECK(normal_overlap(a, b) == doctest::Approx(0.0103).epsilon(1e-2));
  const GaussianApproxComponent c{1.5, 0.3};
  CHECK(normal_overlap(b, c) == doctest::Approx(normal_overlap(c, b)));
}

TEST_CASE("eliminating the second atom of a single k=1 potential") {
  const Atom x = binary_atom("X", 8);
  const Atom y = binary_atom("Y", 6);
  std::mt19937_64 rng(1);
  const auto p = make_variational_potential("g", random_mixture({x, y}, 1, rng));
  const VariationalPotential r = eliminate_discrete_atom({p}, "Y", populations_of({x, y}));
  REQUIRE(r.atoms().size() == 1);
  CHECK(r.atoms()[0].name == "X");
  CHECK(r.mixture.k() == 1);
  CHECK(r.mixture.weights()(0) == doctest::Approx(1.0));
  CHECK(std::get<CategoricalFactor>(r.mixture.factor(0, 0)) == std::get<CategoricalFactor>(p.mixture.factor(0, 0)));
  check_closed(r);
  CHECK_THROWS_AS(eliminate_continuous_atom({p}, "Y", populations_of({x, y})), DomainError);
}

TEST_CASE("two-atom elimination against the exact histogram sum") {
  std::mt19937_64 rng(2);
  for (int n : {5, 40}) {
    const Atom x = binary_atom("X", n);
    const Atom y = binary_atom("Y", n);
    for (int trial = 0; trial < 5; ++trial) {
      const auto pxy = random_mixture({x, y}, 2, rng);
      const auto py = random_mixture({y}, 2, rng);
      const VariationalModel m = make_model({x, y}, {{"pxy", pxy}, {"py", py}});

      const QueryResult exact = latent_variable_elimination(m, {"X"});
      const Eigen::VectorXd ground = marginal_vector(exact_histogram_marginal({pxy, py}, {"X"}), "X");
      CHECK(tv(marginal_histogram(exact, "X"), ground) <= 1e-9);

      LveOptions approx;
      approx.discrete_product = DiscreteProduct::kNormalApprox;
      const QueryResult normal = latent_variable_elimination(m, {"X"}, {}, approx);
      const Eigen::VectorXd pointwise =
          marginal_vector(exact_histogram_marginal({pxy, py}, {"X"}, EliminationRule::kPointwise), "X");
      CHECK(tv(marginal_histogram(normal, "X"), pointwise) <= (n == 5 ? 0.08 : 0.02));
    }
  }
}

TEST_CASE("multiplying by a uniform single component reweights without adding components") {
  const Atom x = binary_atom("X", 12);
  std::mt19937_64 rng(3);
  const auto p1 = make_variational_potential("p1", random_mixture({x}, 3, rng));
  const auto p2 = make_variational_potential(
      "p2", MixtureOfIidDiscrete::binary(x, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 0.5)));
  for (auto mode : {DiscreteProduct::kExact, DiscreteProduct::kNormalApprox}) {
    LveOptions o;
    o.discrete_product = mode;
    const VariationalPotential r = multiply_discrete_potentials(p1, p2, populations_of({x}), o);
    CHECK(r.mixture.k() == 3);
    Eigen::Index a = 0, b = 0;
    p1.mixture.weights().maxCoeff(&a);
    r.mixture.weights().maxCoeff(&b);
    CHECK(a == b);
    check_closed(r);
  }
}

TEST_CASE("Normal product of two binomials") {
  const int n = 100;
  const Atom x = binary_atom("X", n);
  const auto p1 = make_variational_potential(
      "a", MixtureOfIidDiscrete::binary(x, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 0.3)));
  const auto p2 = make_variational_potential(
      "b", MixtureOfIidDiscrete::binary(x, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 0.5)));
  LveOptions o;
  o.discrete_product = DiscreteProduct::kNormalApprox;
  const VariationalPotential r = multiply_discrete_potentials(p1, p2, populations_of({x}), o);
  REQUIRE(r.mixture.k() == 1);

  // Gaussian product rule by hand.
  const double v1 = n * 0.3 * 0.7, v2 = n * 0.5 * 0.5;
  const double mu = (n * 0.3 / v1 + n * 0.5 / v2) / (1.0 / v1 + 1.0 / v2);
  const double var = 1.0 / (1.0 / v1 + 1.0 / v2);
  CHECK(std::get<CategoricalFactor>(r.mixture.factor(0, 0))(1) == doctest::Approx(mu / n).epsilon(1e-12));
  CHECK(r.log_mass == doctest::Approx(std::log(normal_pdf(n * 0.3, n * 0.5, v1 + v2))).epsilon(1e-12));

  // The product Normal against the exact pointwise product of the two pmfs.
  Eigen::VectorXd exact(n + 1), approx(n + 1);
  for (int h = 0; h <= n; ++h) {
    exact(h) = std::exp(std::lgamma(n + 1.0) * 2 - 2 * std::lgamma(h + 1.0) - 2 * std::lgamma(n - h + 1.0) +
                        h * std::log(0.3 * 0.5) + (n - h) * std::log(0.7 * 0.5));
    approx(h) = std::exp(-0.5 * (h - mu) * (h - mu) / var);
  }
  exact /= exact.sum();
  approx /= approx.sum();
  // The product rule ignores the skew of each pmf, which shifts the mean by about 0.4 here.
  CHECK(tv(exact, approx) <= 0.05);
  double mean = 0.0;
  for (int h = 0; h <= n; ++h) mean += h * exact(h);
  CHECK(std::abs(mean - mu) <= 0.5);
}

TEST_CASE("self product then elimination matches squaring the valuation table") {
  const Atom x = binary_atom("X", 40);
  const Atom y = binary_atom("Y", 40);
  std::mt19937_64 rng(4);
  const auto p = random_mixture({x, y}, 2, rng);
  const auto vp = make_variational_potential("p", p);
  const Populations pop = populations_of({x, y});
  const VariationalPotential sq = multiply_discrete_potentials(vp, vp, pop);
  check_closed(sq);
  const VariationalPotential r = eliminate_discrete_atom({sq}, "Y", pop);
  QueryResult q;
  q.marginal = r;
  q.population = pop;
  const Eigen::VectorXd oracle = marginal_vector(exact_histogram_marginal({p, p}, {"X"}), "X");
  CHECK(tv(marginal_histogram(q, "X"), oracle) <= 0.03);
}

TEST_CASE("continuous elimination of single kernels") {
  const Atom y = continuous_atom("Y", 2);
  const auto f = make_variational_potential("f", kde_mixture({y}, {1.0}, {{Kde::gaussian(0.0, 1.0)}}));
  const auto g = make_variational_potential("g", kde_mixture({y}, {1.0}, {{Kde::gaussian(0.0, 1.0)}}));
  const VariationalPotential r = eliminate_continuous_atom({f, g}, "Y", populations_of({y}));
  CHECK(r.atoms().empty());
  CHECK(r.log_mass == doctest::Approx(2.0 * std::log(1.0 / (2.0 * std::sqrt(std::numbers::pi)))));
  CHECK_THROWS_AS(eliminate_discrete_atom({f, g}, "Y", populations_of({y})), DomainError);
}

TEST_CASE("continuous elimination against two-dimensional quadrature") {
  const Atom x = continuous_atom("X", 1);
  const Atom y = continuous_atom("Y", 1);
  const auto joint = kde_mixture({x, y}, {0.5, 0.5},
                                 {{Kde::gaussian(-3.0, 1.0), Kde::gaussian(-3.0, 1.0)},
                                  {Kde::gaussian(3.0, 1.0), Kde::gaussian(3.0, 1.0)}});
  const auto prior = kde_mixture({y}, {0.3, 0.7}, {{Kde::gaussian(-2.0, 1.5)}, {Kde::gaussian(2.5, 0.8)}});
  const Populations pop = populations_of({x, y});
  const VariationalPotential r = eliminate_continuous_atom(
      {make_variational_potential("j", joint), make_variational_potential("p", prior)}, "Y", pop);
  REQUIRE(r.mixture.k() == 4);
  check_closed(r);

  // Each surviving component (l, r) carries the integral of its term.
  GridSpec spec;
  spec.ranges = {Interval{-12.0, 12.0}, Interval{-12.0, 12.0}};
  spec.points = 201;
  std::vector<double> z;
  for (int l = 0; l < 2; ++l) {
    for (int s = 0; s < 2; ++s) {
      const auto term = [&](std::span<const double> v) {
        return joint.weights()(l) * prior.weights()(s) * kde_eval(std::get<Kde>(joint.factor(l, 0)), v[0]) *
               kde_eval(std::get<Kde>(joint.factor(l, 1)), v[1]) * kde_eval(std::get<Kde>(prior.factor(s, 0)), v[1]);
      };
      z.push_back(std::exp(grid_quadrature(term, spec).log_z));
    }
  }
  const double total = z[0] + z[1] + z[2] + z[3];
  for (int i = 0; i < 4; ++i) CHECK(r.mixture.weights()(i) == doctest::Approx(z[i] / total).epsilon(0.05));
  CHECK(r.log_mass == doctest::Approx(std::log(total)).epsilon(1e-3));
}

TEST_CASE("continuous elimination with disjoint supports") {
  const Atom x = continuous_atom("X", 1);
  const Atom y = continuous_atom("Y", 1);
  const auto joint = kde_mixture({x, y}, {0.5, 0.5},
                                 {{Kde::gaussian(-100.0, 1.0), Kde::gaussian(-100.0, 1.0)},
                                  {Kde::gaussian(100.0, 1.0), Kde::gaussian(100.0, 1.0)}});
  const auto prior = kde_mixture({y}, {0.5, 0.5}, {{Kde::gaussian(-100.0, 1.0)}, {Kde::gaussian(100.0, 1.0)}});
  const VariationalPotential r =
      eliminate_continuous_atom({make_variational_potential("j", joint), make_variational_potential("p", prior)}, "Y",
                                populations_of({x, y}));
  REQUIRE(r.mixture.k() == 4);
  // Pairs in order (0,0), (0,1), (1,0), (1,1).
  const double diag = std::min(r.mixture.weights()(0), r.mixture.weights()(3));
  CHECK(r.mixture.weights()(1) < 1e-12 * diag);
  CHECK(r.mixture.weights()(2) < 1e-12 * diag);
}

TEST_CASE("multiplying by a very wide kernel changes little") {
  const Atom x = continuous_atom("X", 1);
  Eigen::Vector3d c(-1.0, 0.2, 1.5);
  const auto p1 = kde_mixture({x}, {0.4, 0.6}, {{Kde(c, 0.5)}, {Kde::gaussian(3.0, 0.7)}});
  const auto p2 = kde_mixture({x}, {1.0}, {{Kde::gaussian(0.0, 1e3)}});
  const VariationalPotential r = multiply_continuous_potentials(make_variational_potential("a", p1),
                                                                make_variational_potential("b", p2), populations_of({x}));
  check_closed(r);
  for (double t = -3.0; t <= 5.0; t += 0.5) {
    CHECK(mixture_density(r.mixture, 0, t) == doctest::Approx(mixture_density(p1, 0, t)).epsilon(0.02));
  }
}

TEST_CASE("product of two unit Gaussian kernels") {
  const Atom x = continuous_atom("X", 1);
  const auto a = make_variational_potential("a", kde_mixture({x}, {1.0}, {{Kde::gaussian(0.0, 1.0)}}));
  const auto b = make_variational_potential("b", kde_mixture({x}, {1.0}, {{Kde::gaussian(2.0, 1.0)}}));
  const VariationalPotential r = multiply_continuous_potentials(a, b, populations_of({x}));
  REQUIRE(r.mixture.k() == 1);
  const Kde& k = std::get<Kde>(r.mixture.factor(0, 0));
  REQUIRE(k.size() == 1);
  CHECK(k.centers()(0) == doctest::Approx(1.0));
  CHECK(k.bandwidth() * k.bandwidth() == doctest::Approx(0.5));
  CHECK(std::exp(r.log_mass) == doctest::Approx(normal_pdf(0.0, 2.0, 2.0)));
}

TEST_CASE("product mass matches quadrature of the pointwise product") {
  const Atom x = continuous_atom("X", 1);
  Eigen::Vector4d c1(-1.0, 0.0, 0.4, 2.0);
  Eigen::Vector3d c2(0.5, 1.0, -0.7);
  const auto f = kde_mixture({x}, {0.7, 0.3}, {{Kde(c1, 0.6)}, {Kde::gaussian(-2.0, 0.5)}});
  const auto g = kde_mixture({x}, {1.0}, {{Kde(c2, 0.9)}});
  const VariationalPotential r = multiply_continuous_potentials(make_variational_potential("f", f),
                                                                make_variational_potential("g", g), populations_of({x}));
  GridSpec spec;
  spec.ranges = {Interval{-15.0, 15.0}};
  spec.points = 2001;
  const auto product = [&](std::span<const double> v) { return mixture_density(f, 0, v[0]) * mixture_density(g, 0, v[0]); };
  CHECK(std::exp(r.log_mass) == doctest::Approx(std::exp(grid_quadrature(product, spec).log_z)).epsilon(1e-3));
}

TEST_CASE("collapse_mixture") {
  const Atom x = binary_atom("X", 30);
  const Populations pop = populations_of({x});
  std::mt19937_64 rng(5);
  const auto small = make_variational_potential("s", random_mixture({x}, 3, rng));
  const VariationalPotential same = collapse_mixture(small, 4, pop);
  CHECK(same.mixture.weights() == small.mixture.weights());

  Eigen::Vector2d w(0.3, 0.7), p(0.4, 0.4);
  const auto twins = make_variational_potential("t", MixtureOfIidDiscrete::binary(x, w, p), 1.25);
  const VariationalPotential one = collapse_mixture(twins, 1, pop);
  REQUIRE(one.mixture.k() == 1);
  CHECK(one.mixture.weights()(0) == doctest::Approx(1.0));
  CHECK(std::get<CategoricalFactor>(one.mixture.factor(0, 0))(1) == doctest::Approx(0.4));
  CHECK(one.log_mass == 1.25);

  // Sixteen components in four tight groups.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd w16(16), p16(16);
  const double centers[4] = {0.15, 0.4, 0.6, 0.85};
  for (int l = 0; l < 16; ++l) {
    w16(l) = 0.2 + u(rng);
    p16(l) = centers[l % 4] + 0.04 * (u(rng) - 0.5);
  }
  w16 /= w16.sum();
  const auto big = make_variational_potential("b", MixtureOfIidDiscrete::binary(x, w16, p16), -3.0);
  const VariationalPotential four = collapse_mixture(big, 4, pop);
  CHECK(four.mixture.k() == 4);
  CHECK(four.log_mass == -3.0);
  CHECK(four.mixture.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  QueryResult before{big, pop, {}}, after{four, pop, {}};
  CHECK(tv(marginal_histogram(before, "X"), marginal_histogram(after, "X")) <= 0.05);
  CHECK(predictive_categorical(after, "X")(1) == doctest::Approx(predictive_categorical(before, "X")(1)).epsilon(1e-12));
}

TEST_CASE("latent_variable_elimination on a single parfactor") {
  const Atom x = binary_atom("X", 9);
  std::mt19937_64 rng(6);
  const auto p = random_mixture({x}, 3, rng);
  const VariationalModel m = make_model({x}, {{"g", p}});
  const QueryResult r = latent_variable_elimination(m, {"X"});
  const Eigen::VectorXd expected = marginal_vector(normalize_table([&] {
    HistTable t({x}, TableMeasure::kHistogram);
    for (const Histogram& h : enumerate_histograms(9, 2)) t.set_log({h}, p.log_hist_mass({h}));
    return t;
  }()), "X");
  CHECK(tv(marginal_histogram(r, "X"), expected) <= 1e-12);
  CHECK_THROWS_AS(latent_variable_elimination(m, {"Q"}), DomainError);
}

TEST_CASE("chain X-Y-Z against full enumeration") {
  std::mt19937_64 rng(7);
  const Atom x = binary_atom("X", 5), y = binary_atom("Y", 5), z = binary_atom("Z", 5);
  for (int trial = 0; trial < 3; ++trial) {
    const auto pxy = random_mixture({x, y}, 2, rng);
    const auto pyz = random_mixture({y, z}, 3, rng);
    const Rhm rhm({x, y, z}, {Parfactor{"pxy", {}, {AtomArg::population("X"), AtomArg::population("Y")}, pxy},
                              Parfactor{"pyz", {}, {AtomArg::population("Y"), AtomArg::population("Z")}, pyz}});
    const ExactTable joint = enumerate_joint(rhm);
    const VariationalModel m = to_variational_model(rhm);
    const QueryResult r = latent_variable_elimination(m, {"X"});
    CHECK(tv(marginal_histogram(r, "X"), marginal_vector(joint, "X")) <= 0.1);
    // Mass conservation: the carried mass is the model normalizer.
    CHECK(r.marginal.log_mass == doctest::Approx(joint.log_z).epsilon(1e-9));
  }
}

TEST_CASE("chain X-Y-Z at population 40 against the histogram-sum oracle") {
  std::mt19937_64 rng(8);
  const Atom x = binary_atom("X", 40), y = binary_atom("Y", 40), z = binary_atom("Z", 40);
  for (int trial = 0; trial < 3; ++trial) {
    const auto pxy = random_mixture({x, y}, 2, rng);
    const auto pyz = random_mixture({y, z}, 2, rng);
    const VariationalModel m = make_model({x, y, z}, {{"pxy", pxy}, {"pyz", pyz}});
    const QueryResult r = latent_variable_elimination(m, {"X"});
    CHECK(tv(marginal_histogram(r, "X"), marginal_vector(exact_histogram_marginal({pxy, pyz}, {"X"}), "X")) <= 0.03);

    // Either elimination order gives nearly the same answer.
    LveOptions yz, zy;
    yz.discrete_product = zy.discrete_product = DiscreteProduct::kNormalApprox;
    yz.order = {"Y", "Z"};
    zy.order = {"Z", "Y"};
    const Eigen::VectorXd a = marginal_histogram(latent_variable_elimination(m, {"X"}, {}, yz), "X");
    const Eigen::VectorXd b = marginal_histogram(latent_variable_elimination(m, {"X"}, {}, zy), "X");
    CHECK(tv(a, b) <= 0.05);
  }
}

TEST_CASE("elimination cost does not depend on populations") {
  std::mt19937_64 rng(9);
  std::vector<LveCounters> counts;
  for (int n : {30, 3000}) {
    std::mt19937_64 local = rng;
    const Atom x = binary_atom("X", n), y = binary_atom("Y", n), z = binary_atom("Z", n);
    const VariationalModel m =
        make_model({x, y, z}, {{"pxy", random_mixture({x, y}, 3, local)}, {"pyz", random_mixture({y, z}, 3, local)}});
    lve_counters() = {};
    latent_variable_elimination(m, {"X"});
    counts.push_back(lve_counters());
  }
  CHECK(counts[0].component_pairs == counts[1].component_pairs);
  CHECK(counts[0].factor_products == counts[1].factor_products);
  CHECK(counts[0].merge_evaluations == counts[1].merge_evaluations);
  CHECK(counts[0].component_pairs > 0);
}

TEST_CASE("observations condition the query") {
  const Atom x = binary_atom("X", 6), y = binary_atom("Y", 4);
  std::mt19937_64 rng(10);
  const auto pxy = random_mixture({x, y}, 3, rng);
  const VariationalModel m = make_model({x, y}, {{"pxy", pxy}});
  const std::vector<Observation> obs{Observation{"Y", {1, 2}, {}}};
  const QueryResult r = latent_variable_elimination(m, {"X"}, obs);

  // Brute force: weights times the likelihood of the observed Y rvs.
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(7);
  for (int l = 0; l < pxy.k(); ++l) {
    const double q = pxy.params(1)(l, 1);
    const double lik = (1.0 - q) * q * q;
    for (int h = 0; h <= 6; ++h) expected(h) += pxy.weights()(l) * lik * binomial_pdf(h, 6, pxy.params(0)(l, 1));
  }
  expected /= expected.sum();
  CHECK(tv(marginal_histogram(r, "X"), expected) <= 1e-12);
}
