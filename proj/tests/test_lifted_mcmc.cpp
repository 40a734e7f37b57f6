#include <doctest.h>

#include <cmath>

#include "lrvi/errors.hpp"
#include "lrvi/lifted_mcmc.hpp"
#include "lrvi/oracle.hpp"

using namespace lrvi;

namespace {

Atom binary_atom(const std::string& name, int n) { return Atom{name, AtomDomain::binary(), n}; }

MixtureOfIidDiscrete binary_mixture(const Atom& a, std::vector<double> w, std::vector<double> p) {
  return MixtureOfIidDiscrete::binary(a, Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
                                      Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
}

LatentModel latent_model(const std::vector<Atom>& atoms, const std::vector<std::pair<std::string, Potential>>& pots) {
  LatentModel m;
  m.model.atoms = atoms;
  for (const Atom& a : atoms) m.model.population[a.name] = a.population;
  for (const auto& [id, p] : pots) m.model.potentials.push_back(make_variational_potential(id, p));
  return m;
}

}  // namespace

TEST_CASE("single-component potentials never move") {
  const Atom x = binary_atom("X", 10), y = binary_atom("Y", 4);
  const LatentModel m = latent_model({x, y}, {{"a", binary_mixture(x, {1.0}, {0.3})}, {"b", binary_mixture(y, {1.0}, {0.6})}});
  const LiftedTarget target(m, {});
  CHECK(target.latent_count() == 0);
  Rng rng = make_rng(1);
  LatentState s = target.initial_state();
  const LatentState start = s;
  for (int i = 0; i < 100; ++i) s = lifted_gibbs_step(target, s, rng);
  CHECK(s == start);
}

TEST_CASE("detached latent follows its prior weights") {
  const Atom x = binary_atom("X", 10), y = binary_atom("Y", 6);
  const LatentModel m = latent_model(
      {x, y}, {{"a", binary_mixture(x, {0.2, 0.5, 0.3}, {0.1, 0.5, 0.9})}, {"b", binary_mixture(y, {0.6, 0.4}, {0.3, 0.7})}});
  const LiftedTarget target(m, {});
  const LatentState s = target.initial_state();
  const Eigen::VectorXd c = target.component_conditional(0, s);
  CHECK(c(0) == doctest::Approx(0.2));
  CHECK(c(1) == doctest::Approx(0.5));
  CHECK(c(2) == doctest::Approx(0.3));
}

TEST_CASE("coupled latents reach the enumerated stationary distribution") {
  const Atom x = binary_atom("X", 10), y = binary_atom("Y", 10);
  const std::vector<double> wx{0.3, 0.7}, wy{0.5, 0.2, 0.3};
  LatentModel m = latent_model({x, y}, {{"a", binary_mixture(x, wx, {0.2, 0.8})}, {"b", binary_mixture(y, wy, {0.1, 0.5, 0.9})}});
  Eigen::MatrixXd phi(2, 3);
  phi << 5.0, 1.0, 0.5, 0.5, 1.0, 4.0;
  m.component_couplings.push_back(ComponentCoupling{"a", "b", phi});

  // Separate atoms, so the stationary law is w_l w'_l' phi(l, l') normalized.
  Eigen::MatrixXd exact(2, 3);
  for (int l = 0; l < 2; ++l)
    for (int r = 0; r < 3; ++r) exact(l, r) = wx[l] * wy[r] * phi(l, r);
  exact /= exact.sum();

  McmcOptions o;
  o.steps = 100000;
  o.burn_in = 0;
  o.seed = 3;
  const ChainResult chain = run_lifted_mcmc(m, ChainQuery{"X"}, {}, o);
  REQUIRE(chain.trace.size() == 100000);
  Eigen::MatrixXd empirical = Eigen::MatrixXd::Zero(2, 3);
  for (const LatentState& s : chain.trace) empirical(s.component[0], s.component[1]) += 1.0;
  empirical /= empirical.sum();
  CHECK(0.5 * (empirical - exact).cwiseAbs().sum() <= 0.05);
}

TEST_CASE("symmetric two-component model splits evenly") {
  const Atom x = binary_atom("X", 20);
  const LatentModel m = latent_model({x}, {{"a", binary_mixture(x, {0.5, 0.5}, {0.2, 0.8})}});
  McmcOptions o;
  o.steps = 20000;
  o.burn_in = 0;
  o.seed = 4;
  const ChainResult chain = run_lifted_mcmc(m, ChainQuery{"X"}, {}, o);
  double zeros = 0.0;
  for (const LatentState& s : chain.trace) zeros += s.component[0] == 0;
  CHECK(zeros / static_cast<double>(chain.trace.size()) == doctest::Approx(0.5).epsilon(0.06));
  CHECK(chain.estimate(1) == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("lifted and ground chains agree with the analytic posterior") {
  const Atom x = binary_atom("X", 20);
  McmcOptions o;
  o.steps = 100000;
  o.burn_in = 1000;
  o.seed = 5;
  o.keep_trace = false;

  SUBCASE("single component") {
    const LatentModel m = latent_model({x}, {{"a", binary_mixture(x, {1.0}, {0.35})}});
    const std::vector<Observation> obs{Observation{"X", {3, 5}, {}}};
    CHECK(run_lifted_mcmc(m, ChainQuery{"X"}, obs, o).estimate(1) == doctest::Approx(0.35).epsilon(1e-9));
    CHECK(std::abs(run_ground_mcmc(m, ChainQuery{"X"}, obs, o).estimate(1) - 0.35) <= 0.02);
  }
  SUBCASE("two components with observations") {
    const LatentModel m = latent_model({x}, {{"a", binary_mixture(x, {0.6, 0.4}, {0.25, 0.7})}});
    const std::vector<Observation> obs{Observation{"X", {3, 5}, {}}};
    // Posterior weights from the likelihood of three zeros and five ones.
    const double l0 = 0.6 * std::pow(0.75, 3) * std::pow(0.25, 5);
    const double l1 = 0.4 * std::pow(0.3, 3) * std::pow(0.7, 5);
    const double truth = (l0 * 0.25 + l1 * 0.7) / (l0 + l1);
    CHECK(std::abs(run_lifted_mcmc(m, ChainQuery{"X"}, obs, o).estimate(1) - truth) <= 0.02);
    CHECK(std::abs(run_ground_mcmc(m, ChainQuery{"X"}, obs, o).estimate(1) - truth) <= 0.02);
  }
}

TEST_CASE("chains are deterministic given the seed") {
  const Atom x = binary_atom("X", 12), y = binary_atom("Y", 8);
  LatentModel m = latent_model({x, y}, {{"a", binary_mixture(x, {0.4, 0.6}, {0.2, 0.7})},
                                        {"b", binary_mixture(y, {0.5, 0.5}, {0.3, 0.9})}});
  m.component_couplings.push_back(ComponentCoupling{"a", "b", Eigen::Matrix2d{{2.0, 1.0}, {1.0, 2.0}}});
  const std::vector<Observation> obs{Observation{"Y", {1, 2}, {}}};
  McmcOptions o;
  o.steps = 2000;
  o.burn_in = 100;
  o.seed = 6;
  const ChainResult a = run_lifted_mcmc(m, ChainQuery{"X"}, obs, o), b = run_lifted_mcmc(m, ChainQuery{"X"}, obs, o);
  CHECK(a.trace == b.trace);
  CHECK(a.estimate == b.estimate);
  const ChainResult g1 = run_ground_mcmc(m, ChainQuery{"X"}, obs, o), g2 = run_ground_mcmc(m, ChainQuery{"X"}, obs, o);
  CHECK(g1.trace == g2.trace);
  CHECK(g1.estimate == g2.estimate);
  o.seed = 7;
  CHECK(run_lifted_mcmc(m, ChainQuery{"X"}, obs, o).trace != a.trace);
}

TEST_CASE("lifted step cost does not depend on populations") {
  std::vector<long long> evals;
  for (int n : {200, 200000}) {
    JobHouseParams p;
    p.people = n;
    p.houses = n;
    const LatentModel m = make_job_house_model(p);
    McmcOptions o;
    o.steps = 500;
    o.burn_in = 0;
    o.seed = 8;
    mcmc_counters() = {};
    run_lifted_mcmc(m, ChainQuery{"HP", 0.0}, job_house_observations(p), o);
    evals.push_back(mcmc_counters().conditional_evaluations);
  }
  CHECK(evals[0] == evals[1]);
  CHECK(evals[0] > 0);
}

TEST_CASE("job and house-price model against the exact posterior") {
  JobHouseParams p;
  p.houses = 64;
  const JobHouseReference exact = job_house_exact(p);
  CHECK(exact.p_query > 0.0);
  CHECK(exact.p_query < 1.0);
  McmcOptions o;
  o.steps = 50000;
  o.burn_in = 2000;
  o.seed = 9;
  o.keep_trace = false;
  const ChainResult r = run_lifted_mcmc(make_job_house_model(p), ChainQuery{"HP", 0.0}, job_house_observations(p), o);
  CHECK(std::abs(r.estimate(0) - exact.p_query) <= 0.1 * exact.p_query);
  CHECK(r.running_estimate.size() >= 2);
}

TEST_CASE("option and capacity errors") {
  const Atom x = binary_atom("X", 50);
  const LatentModel m = latent_model({x}, {{"a", binary_mixture(x, {0.5, 0.5}, {0.2, 0.8})}});
  McmcOptions bad;
  bad.steps = 10;
  bad.burn_in = 10;
  CHECK_THROWS_AS(run_lifted_mcmc(m, ChainQuery{"X"}, {}, bad), DomainError);
  McmcOptions capped;
  capped.steps = 10;
  capped.burn_in = 0;
  capped.population_cap = 20;
  CHECK_THROWS_AS(run_ground_mcmc(m, ChainQuery{"X"}, {}, capped), CapacityError);
  CHECK_THROWS_AS(run_lifted_mcmc(m, ChainQuery{"Q"}, {}, capped), DomainError);
}
