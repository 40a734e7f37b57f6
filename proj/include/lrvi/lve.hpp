#pragma once

// Latent-variable elimination on variational models.
//
// A variational potential is  mass * sum_l w_l prod_A prod_{i<n_A} f_{A,l}(x_{A,i})
// with iid per-atom factors f (categorical vectors or Kdes) and n_A the
// atom's effective population. Multiplying two potentials multiplies their
// per-rv factors component pair by component pair; summing out an atom from a
// single potential drops its factor, since each factor integrates to one.
//
// Two product rules are available for discrete atoms:
//   kExact        per-rv products p ⊙ p' / c with weight scale c^n,
//                 c = sum_v p_v p'_v. Closed and exact on ground valuations.
//   kNormalApprox products of the histogram pmfs f_M(h; n, p) f_M(h; n, p'),
//                 approximated by products of their Normal approximations
//                 and mapped back to a categorical by moment matching. Falls
//                 back to the exact histogram sum when n < 10 or some p lies
//                 outside [0.05, 0.95].

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lrvi/mixture.hpp"
#include "lrvi/model.hpp"

namespace lrvi {

struct GaussianApproxComponent {
  double mean = 0.0;
  double variance = 1.0;
};

// Normal approximation of f_B(h; n, p): mean n p, variance n p (1 - p).
GaussianApproxComponent normal_approximation(int n, double p);

// ∫ f_N(h; a) f_N(h; b) dh = f_N(mean_a; mean_b, var_a + var_b).
double normal_overlap(const GaussianApproxComponent& a, const GaussianApproxComponent& b);

// Gaussian product rule: f_N(a) f_N(b) = overlap(a, b) * f_N(result).
GaussianApproxComponent normal_product(const GaussianApproxComponent& a, const GaussianApproxComponent& b);

struct VariationalPotential {
  std::string id;
  KdeMixture mixture;
  double log_mass = 0.0;

  const std::vector<Atom>& atoms() const { return mixture.atoms(); }
  bool has_atom(const std::string& name) const { return mixture.atom_index(name) >= 0; }
};

VariationalPotential make_variational_potential(std::string id, const Potential& p, double log_mass = 0.0);

// Effective population of every atom (declared population minus observed rvs).
using Populations = std::map<std::string, int>;

struct VariationalModel {
  std::vector<Atom> atoms;
  std::vector<VariationalPotential> potentials;
  Populations population;

  const Atom& atom(const std::string& name) const;
  void validate() const;
};

// Every parfactor must carry a variational potential over whole populations.
VariationalModel to_variational_model(const Rhm& model);

// Observation of some ground rvs of one atom: value counts for discrete atoms,
// value lists for continuous ones. Never per index.
struct Observation {
  std::string atom;
  std::vector<int> counts;
  std::vector<double> values;

  int observed() const;
};

// Log-likelihood of the observed rvs under one iid factor.
double observation_log_likelihood(const AtomFactor& f, const Atom& atom, const Observation& o);

VariationalModel update_obs(const VariationalModel& model, const std::vector<Observation>& obs);

enum class DiscreteProduct { kExact, kNormalApprox };

struct LveOptions {
  DiscreteProduct discrete_product = DiscreteProduct::kExact;
  int k_cap = 64;
  int max_centers = 256;
  std::uint64_t seed = 0;
  // Elimination order; empty means fewest potentials first, ties by name.
  std::vector<std::string> order;
};

// Product of two potentials; shared atoms get per-rv factor products.
VariationalPotential multiply_potentials(const VariationalPotential& a, const VariationalPotential& b,
                                         const Populations& population, const LveOptions& options, Rng& rng);

// Multiplication restricted to potentials whose shared atoms are discrete
// (resp. continuous); throws DomainError otherwise.
VariationalPotential multiply_discrete_potentials(const VariationalPotential& a, const VariationalPotential& b,
                                                  const Populations& population, const LveOptions& options = {});
VariationalPotential multiply_continuous_potentials(const VariationalPotential& a, const VariationalPotential& b,
                                                    const Populations& population, const LveOptions& options = {});

// Drop one atom from a single potential.
VariationalPotential sum_out(const VariationalPotential& p, const std::string& atom);

// Multiply every potential mentioning `atom`, then sum it out. The result
// covers the remaining atoms of those potentials; a potential with no atoms
// left keeps only its mass.
VariationalPotential eliminate_discrete_atom(const std::vector<VariationalPotential>& potentials,
                                             const std::string& atom, const Populations& population,
                                             const LveOptions& options = {});
VariationalPotential eliminate_continuous_atom(const std::vector<VariationalPotential>& potentials,
                                               const std::string& atom, const Populations& population,
                                               const LveOptions& options = {});

// Greedily merge the component pair with the smallest weight-scaled
// symmetrized divergence until k <= k_target. Categorical factors merge by
// weighted averaging; Kdes by pooling their centers with a common bandwidth
// that keeps the variance. Weights still sum to one and the mass is untouched;
// each atom's per-rv predictive mean is preserved.
VariationalPotential collapse_mixture(const VariationalPotential& p, int k_target, const Populations& population,
                                      int max_centers = 256);

struct QueryResult {
  // Normalized mixture over the query atoms (mass = log normalizer of the
  // whole model, i.e. log z).
  VariationalPotential marginal;
  Populations population;
  std::vector<std::string> elimination_order;
};

QueryResult latent_variable_elimination(const VariationalModel& model, const std::vector<std::string>& query,
                                        const std::vector<Observation>& obs = {}, const LveOptions& options = {});

// Distribution over the histograms of one discrete query atom
// (all histograms of its effective population, enumerate_histograms order).
Eigen::VectorXd marginal_histogram(const QueryResult& result, const std::string& atom);
// Predictive distribution / density of a single unobserved ground rv.
Eigen::VectorXd predictive_categorical(const QueryResult& result, const std::string& atom);
double predictive_density(const QueryResult& result, const std::string& atom, double x);

// Inner-loop iteration counts, used to show elimination cost does not depend
// on populations.
struct LveCounters {
  long long component_pairs = 0;
  long long factor_products = 0;
  long long merge_evaluations = 0;
};
LveCounters& lve_counters();

}  // namespace lrvi
