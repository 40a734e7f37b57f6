#pragma once

// Sampling unnormalized densities and fitting mixtures of KDE products.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lrvi/discrete_lift.hpp"
#include "lrvi/mixture.hpp"
#include "lrvi/model.hpp"

namespace lrvi {

// N draws over a tuple of atoms. Row t holds the values of every rv, atom by
// atom in tuple order (columns offset(a) .. offset(a) + population - 1).
struct SampleSet {
  std::vector<Atom> atoms;
  Eigen::MatrixXd rows;
  // Unnormalized log target density of every row (empty when unknown).
  Eigen::VectorXd log_target;
  std::uint64_t seed = 0;
  double acceptance_rate = 0.0;
  double ess = 0.0;

  int size() const { return static_cast<int>(rows.rows()); }
  int offset(std::size_t atom) const;
  // Per-atom value vectors of one row.
  std::vector<Eigen::VectorXd> row_values(int t) const;
};

// Log density over per-atom value vectors.
using LogDensity = std::function<double(std::span<const Eigen::VectorXd>)>;

struct SamplerOptions {
  int burn_in_sweeps = 1000;
  int thin = 2;
  int adapt_every = 50;
  int max_restarts = 100;
  int chains = 1;
};

// Random-walk Metropolis-within-Gibbs: every sweep proposes a move for each
// coordinate in turn (Gaussian steps for continuous rvs, a uniformly chosen
// other value for discrete ones). Step sizes adapt during burn-in towards an
// acceptance rate in [0.23, 0.44]. Deterministic given the seed.
SampleSet sample_density(const std::vector<Atom>& atoms, const LogDensity& log_density, int n, std::uint64_t seed,
                         const SamplerOptions& options = {});

// Samples the potential applied to whole populations of `atoms`.
SampleSet sample_potential(const Potential& p, const std::vector<Atom>& atoms, int n, std::uint64_t seed,
                           const SamplerOptions& options = {});

// Samples the product of all ground factors of a parfactor.
SampleSet sample_parfactor(const Parfactor& g, const Rhm& model, int n, std::uint64_t seed,
                           const SamplerOptions& options = {});

// Silverman's rule 1.06 * sd * n_eff^(-1/5) on weighted points, with
// n_eff = (sum w)^2 / sum w^2, floored at 1e-6. Empty weights mean uniform.
double bandwidth_select(const Eigen::VectorXd& points, const Eigen::VectorXd& weights = {});

struct KdeFitOptions {
  int k_max = 4;
  std::uint64_t seed = 0;
  int max_centers = 256;
  int max_em_iterations = 100;
  double em_relative_tol = 1e-6;
  // Minimum held-out mean log-likelihood gain (nats per row) to accept k + 1.
  double min_gain = 0.02;
  // Every holdout_stride-th row is held out when N >= 10.
  int holdout_stride = 5;
  int init_candidates = 2;
};

struct KdeFit {
  KdeMixture mixture;
  FitReport report;
};

// EM over component responsibilities. The M-step rebuilds each component's
// per-atom factor from its responsibility-weighted samples: all values of the
// atom's rvs pooled, at most max_centers centers, Silverman bandwidth; discrete
// atoms get weighted value frequencies. Steps that would lower the training
// log-likelihood are rejected, so each fixed-k trace is nondecreasing.
// Throws ComputationError when k_max exceeds the number of distinct rows.
KdeFit fit_kde_mixture(const SampleSet& samples, const KdeFitOptions& options = {});

// Log density of the fitted mixture on one sample row.
double kde_mixture_log_density(const KdeMixture& m, std::span<const Eigen::VectorXd> values);

// Importance-weighted TV estimate between the normalized target and the
// mixture, using the rows' log_target values.
double estimate_total_variation(const SampleSet& samples, const KdeMixture& m, const std::vector<int>& rows);

}  // namespace lrvi
