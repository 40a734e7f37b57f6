#pragma once

// Fitting mixtures of binomials / multinomials to potentials over histograms.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "lrvi/mixture.hpp"
#include "lrvi/model.hpp"

namespace lrvi {

struct FitReport {
  double achieved_tv = 1.0;
  // True when achieved_tv is a Monte-Carlo estimate (continuous fits).
  bool tv_estimated = false;
  int k_used = 0;
  int em_iterations = 0;
  // Data log-likelihood after every EM iteration, across all k tried;
  // trace_k[i] is the component count of entry i.
  std::vector<double> log_likelihood_trace;
  std::vector<int> trace_k;
  // TV after each accepted k (index 0 is k = 1).
  std::vector<double> tv_by_k;
  std::vector<std::string> diagnostics;
};

// A normalized probability distribution over histogram tuples.
struct HistDistribution {
  std::vector<Atom> atoms;
  std::vector<HistKey> keys;
  Eigen::VectorXd prob;
};

// Probability over histogram tuples: every entry's histogram-class mass
// (valuation-measure tables are multiplied by their multinomial coefficients),
// normalized to sum to one. Throws DomainError on zero total mass.
HistDistribution normalize_hist_table(const HistTable& table);

// Mass the mixture puts on each key of `dist`.
Eigen::VectorXd mixture_hist_probabilities(const MixtureOfIidDiscrete& m, const std::vector<HistKey>& keys);

// TV between a histogram distribution and a mixture over the full histogram
// space. Keys absent from `dist` carry probability zero there.
double mixture_total_variation(const HistDistribution& dist, const MixtureOfIidDiscrete& m);

struct DiscreteFitOptions {
  double tol = 1e-4;
  int k_max = 8;
  std::uint64_t seed = 0;
  int max_em_iterations = 500;
  double em_relative_tol = 1e-10;
  double prune_weight = 1e-6;
  // Starting points tried for each new component.
  int init_candidates = 4;
};

struct DiscreteFit {
  MixtureOfIidDiscrete mixture;
  FitReport report;
};

// Incremental EM: start from k = 1 and add one component at a time while the
// TV to the normalized table keeps improving by at least tol / 10; stop once
// TV <= tol or k reaches min(k_max, n).
DiscreteFit fit_mixture_discrete(const HistTable& table, const DiscreteFitOptions& options = {});

// The same fit, restricted to tables over exactly two atoms (X, Y).
DiscreteFit fit_joint_mixture_discrete(const HistTable& table, const DiscreteFitOptions& options = {});

// EM at fixed k from `init` on weighted histogram data. Appends to `report`.
MixtureOfIidDiscrete run_discrete_em(const HistDistribution& data, MixtureOfIidDiscrete init,
                                     const DiscreteFitOptions& options, FitReport& report);

}  // namespace lrvi
