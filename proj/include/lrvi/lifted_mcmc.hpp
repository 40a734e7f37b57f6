#pragma once

// Gibbs sampling over the latent variables of a variational model, plus a
// ground sampler over every rv of the same model for comparison.
//
// Latents are one component index per potential (L_X) and, optionally,
// continuous latents bound to potential parameters:
//   rate binding    the value-1 probability of a k = 1 binary potential;
//   weight binding  the weights (θ, 1 - θ) of a k = 2 potential;
// and coupled by f_N(θ_a - θ_b; μ, σ²) or by tables over component pairs.
// Continuous latents have uniform priors on their ranges.

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lrvi/lve.hpp"
#include "lrvi/random.hpp"

namespace lrvi {

struct ContinuousLatent {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const ContinuousLatent&, const ContinuousLatent&) = default;
};

struct RateBinding {
  std::string latent;
  std::string potential;
  friend bool operator==(const RateBinding&, const RateBinding&) = default;
};

struct WeightBinding {
  std::string latent;
  std::string potential;
  friend bool operator==(const WeightBinding&, const WeightBinding&) = default;
};

struct GaussianDifferenceCoupling {
  std::string a;
  std::string b;
  double mu = 0.0;
  double var = 1.0;
  friend bool operator==(const GaussianDifferenceCoupling&, const GaussianDifferenceCoupling&) = default;
};

// table(l, l') multiplies the joint when potential_a uses component l and
// potential_b uses component l'.
struct ComponentCoupling {
  std::string potential_a;
  std::string potential_b;
  Eigen::MatrixXd table;
  friend bool operator==(const ComponentCoupling& x, const ComponentCoupling& y) {
    return x.potential_a == y.potential_a && x.potential_b == y.potential_b && x.table == y.table;
  }
};

struct LatentModel {
  VariationalModel model;
  std::vector<ContinuousLatent> latents;
  std::vector<RateBinding> rates;
  std::vector<WeightBinding> weight_bindings;
  std::vector<GaussianDifferenceCoupling> gaussian_couplings;
  std::vector<ComponentCoupling> component_couplings;

  int potential_index(const std::string& id) const;
  int latent_index(const std::string& name) const;
  void validate() const;
};

struct LatentState {
  std::vector<int> component;  // per potential
  std::vector<double> value;   // per continuous latent
  friend bool operator==(const LatentState&, const LatentState&) = default;
};

// Query on one unobserved ground rv of `atom`: its value distribution
// (discrete), or P(x <= threshold) and P(x > threshold) (continuous).
struct ChainQuery {
  std::string atom;
  double threshold = 0.0;
};

// Observation likelihoods and population terms precomputed once, so a
// lifted step never touches ground rvs.
class LiftedTarget {
 public:
  LiftedTarget(LatentModel model, const std::vector<Observation>& obs);

  const LatentModel& model() const { return model_; }
  const Populations& population() const { return population_; }

  // Full conditional over the components of potential p (normalized).
  Eigen::VectorXd component_conditional(int p, const LatentState& s) const;
  // Unnormalized log conditional density of continuous latent j at value x.
  double latent_log_conditional(int j, double x, const LatentState& s) const;
  // Latents that can change: potentials with k > 1 first, then continuous.
  int latent_count() const { return static_cast<int>(free_potentials_.size() + model_.latents.size()); }
  const std::vector<int>& free_potentials() const { return free_potentials_; }

  LatentState initial_state() const;
  // Per-rv factor of potential p, atom a under state s (binding applied).
  AtomFactor effective_factor(int p, int a, int l, const LatentState& s) const;
  // Predictive query estimate for state s, averaged over the full
  // conditional of the query atom's mixing latent when it has one.
  Eigen::VectorXd query_estimate(const ChainQuery& q, const LatentState& s) const;

  // Pieces of the joint over latents.
  double log_weight(int p, int l, const LatentState& s) const;
  double log_obs_term(int p, int l, const LatentState& s) const;
  double log_component_coupling(int p, int l, const LatentState& s) const;
  double log_gaussian_couplings(int j, double x, const LatentState& s) const;
  // Sum over shared atoms of n_eff * log ∫ prod_q f_q (the unobserved rvs
  // summed out); restricted to the atoms of potential `only` when >= 0.
  double log_population_terms(const LatentState& s, int only) const;
  // Potentials binding continuous latent j.
  std::vector<int> rate_potentials(int j) const;
  std::vector<int> weight_potentials(int j) const;
  int rate_latent(int p) const { return rate_of_potential_[static_cast<std::size_t>(p)]; }

 private:

  LatentModel model_;
  Populations population_;
  // loglik_[p][l]: observation log-likelihood of component l of potential p.
  std::vector<std::vector<double>> loglik_;
  // Observed value counts of the binary atom of rate-bound potentials.
  std::vector<std::pair<double, double>> rate_counts_;
  std::vector<int> rate_of_potential_;    // latent index or -1
  std::vector<int> weight_of_potential_;  // latent index or -1
  std::vector<int> free_potentials_;
};

struct StepStats {
  long long conditional_evaluations = 0;
};
StepStats& mcmc_counters();

// Pick one latent uniformly at random and resample it from its full
// conditional (slice sampling for continuous latents).
LatentState lifted_gibbs_step(const LiftedTarget& target, const LatentState& state, Rng& rng);

struct McmcOptions {
  int steps = 10000;
  int burn_in = 1000;
  std::uint64_t seed = 0;
  // Sweep every latent in order instead of choosing one at random.
  bool systematic = false;
  // Ground sampler refuses populations above this.
  int population_cap = 1000000;
  // Record the running estimate every this many post-burn-in steps.
  int record_every = 1000;
  bool keep_trace = true;
};

struct ChainResult {
  std::vector<LatentState> trace;
  Eigen::VectorXd estimate;
  // (steps after burn-in, running estimate of entry 0)
  std::vector<std::pair<int, double>> running_estimate;
  double step_time_us = 0.0;
  // Mean step time per block of record_every steps.
  std::vector<double> block_step_time_us;
  std::vector<long long> selections;  // per latent
  // |first-half estimate - second-half estimate| of entry 0.
  double split_disagreement = 0.0;
  std::uint64_t seed = 0;
};

ChainResult run_lifted_mcmc(const LatentModel& model, const ChainQuery& query, const std::vector<Observation>& obs,
                            const McmcOptions& options = {});

// Gibbs sweeps over every unobserved ground rv and every latent, with the
// plain Monte-Carlo estimator on one fixed query rv.
ChainResult run_ground_mcmc(const LatentModel& model, const ChainQuery& query, const std::vector<Observation>& obs,
                            const McmcOptions& options = {});

// Job / house-price model: Job^n binary with Bernoulli rate p_job, HP^m
// continuous drawn from N(mu_down, sd_down²) with probability p_D and
// N(mu_up, sd_up²) otherwise, coupled by f_N(p_job - p_D; 0, sd_coupling²).
struct JobHouseParams {
  int people = 200;
  int houses = 64;
  double mu_down = -0.3;
  double sd_down = 0.2;
  double mu_up = 0.1;
  double sd_up = 0.2;
  double sd_coupling = 0.2;
  int observed_employed = 30;
  int observed_unemployed = 70;
  std::vector<double> observed_prices{-0.1, 0.05};
};

LatentModel make_job_house_model(const JobHouseParams& params);
std::vector<Observation> job_house_observations(const JobHouseParams& params);

}  // namespace lrvi
