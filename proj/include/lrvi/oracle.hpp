#pragma once

// Brute-force references: full enumeration, exact histogram-space
// elimination and grid quadrature. Nothing here calls into the lifted
// inference code; the binomial, multinomial and Gaussian arithmetic is
// reimplemented locally so agreement with the lifted path means something.

#include <Eigen/Core>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lrvi/lifted_mcmc.hpp"
#include "lrvi/model.hpp"

namespace lrvi {

// Normalized joint. Discrete tables map histogram tuples (one histogram per
// atom, in `atoms` order) to probabilities. Grid tables hold a normalized
// density at the nodes of a tensor grid with trapezoid weights.
struct ExactTable {
  std::vector<Atom> atoms;
  std::map<HistKey, double> prob;

  std::vector<Eigen::VectorXd> axes;
  Eigen::VectorXd density;  // node (i0, i1) at i0 * axes[1].size() + i1
  Eigen::VectorXd volume;

  double log_z = 0.0;

  bool is_grid() const { return !axes.empty(); }
  double probability(const HistKey& key) const;
  double total() const;
  void validate() const;
};

struct EnumerateOptions {
  long long max_states = 1LL << 20;
};

// Exact joint of a discrete model. Models whose parfactors all take whole
// populations with table or mixture potentials are enumerated in histogram
// space; anything else by walking every ground valuation.
ExactTable enumerate_joint(const Rhm& model, const EnumerateOptions& options = {});

ExactTable exact_marginal(const ExactTable& table, const std::vector<std::string>& query);

// Histogram probabilities of one atom in enumerate_histograms order.
Eigen::VectorXd marginal_vector(const ExactTable& table, const std::string& atom);

// How potentials combine on histogram tuples:
//   kGround     the ground joint: per-valuation values multiplied, summed over
//               every valuation of the eliminated atom (multinomial weights);
//   kPointwise  histogram masses multiplied pointwise and summed over the
//               eliminated atom's histograms, with no multiplicity correction.
enum class EliminationRule { kGround, kPointwise };

// Multiply the potentials (HistTable, MixtureOfIidDiscrete or all-discrete
// KdeMixture) and sum `atom` out. kGround yields a kValuation table,
// kPointwise a kHistogram table.
HistTable exact_eliminate_histogram(const std::vector<Potential>& potentials, const std::string& atom,
                                    EliminationRule rule = EliminationRule::kGround,
                                    const EnumerateOptions& options = {});

// Normalized joint of the query atoms after eliminating every other atom of
// the potentials one at a time.
ExactTable exact_histogram_marginal(const std::vector<Potential>& potentials, const std::vector<std::string>& query,
                                    EliminationRule rule = EliminationRule::kGround,
                                    const EnumerateOptions& options = {});

// Normalized distribution of a table's histogram classes.
ExactTable normalize_table(const HistTable& table);

struct GridSpec {
  std::vector<Interval> ranges;
  int points = 401;
  bool check_refinement = true;
  double refinement_tol = 1e-3;
  int max_points = 1 << 16;
};

using GridFunction = std::function<double(std::span<const double>)>;

// Trapezoid rule on a uniform grid over one or two rvs. With refinement
// checking, the node count per axis is doubled until the integral moves by
// less than refinement_tol (relative); the finer table is returned.
ExactTable grid_quadrature(const GridFunction& f, const GridSpec& spec);

// Value of a normalized grid density at an arbitrary point (multilinear
// interpolation).
double grid_density(const ExactTable& table, std::span<const double> x);

// Posterior of the job/house model by 2-D quadrature over the two latent
// rates and an exact sum over the price mixture index.
struct JobHouseReference {
  double p_down = 0.0;
  double p_query = 0.0;  // P(HP <= 0) of an unobserved house
};
JobHouseReference job_house_exact(const JobHouseParams& params, int grid_points = 801);

}  // namespace lrvi
