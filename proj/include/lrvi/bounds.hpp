#pragma once

// Error bounds for variational (mixture-of-iid) approximations of
// extendible exchangeable distributions, and an LP test of extendibility.

#include <Eigen/Core>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lrvi/model.hpp"

namespace lrvi {

// Declared extension of one atom: n_bar >= n exchangeable rvs of which the
// atom's population is a marginal. n_bar may be +inf.
struct AtomExtension {
  double n_bar = 0.0;
  int d = 2;
  bool continuous = false;
};

using ExtendibilitySpec = std::map<std::string, AtomExtension>;

struct BoundValue {
  double value = 0.0;
  // A total variation bound above 1 says nothing; it is kept verbatim.
  bool vacuous = false;
  std::string branch;
};

// 2 d n / n_bar (discrete) or n (n - 1) / n_bar (continuous).
BoundValue lemma1_bound(int n, const AtomExtension& ext);
// Sum of the two single-atom branches.
BoundValue lemma3_bound(int n, int m, const AtomExtension& ext_x, const AtomExtension& ext_y);

struct Theorem4Bound {
  BoundValue bound;
  // False when no normalizer was supplied and the sum is reported as is.
  bool normalized = false;
};
Theorem4Bound theorem4_bound(const std::vector<double>& eps, std::optional<double> z = std::nullopt);

struct BoundReport {
  std::vector<std::pair<std::string, BoundValue>> parfactors;
  Theorem4Bound model;
};

// Per-parfactor bound for every parfactor whose atoms all carry a declared
// extension; parfactors over more than two atoms add one branch per atom.
BoundReport bound_report(const Rhm& model, const ExtendibilitySpec& spec, std::optional<double> z = std::nullopt);

struct ExtendibilityResult {
  bool feasible = false;
  // Distribution over extended counts H = 0..n_bar when feasible.
  Eigen::VectorXd witness;
  double max_residual = 0.0;
  double infeasibility = 0.0;
};

struct ExtendibilityOptions {
  int max_n = 20;
  int max_n_bar = 200;
  double tol = 1e-8;
};

// Is the normalized table over one binary atom the hypergeometric marginal
// of some distribution over histograms of n_bar exchangeable binary rvs?
ExtendibilityResult check_extendibility(const HistTable& table, int n_bar, const ExtendibilityOptions& options = {});
// Same on a probability vector indexed by the count of ones, h = 0..n.
ExtendibilityResult check_extendibility(const Eigen::VectorXd& probs, int n_bar,
                                        const ExtendibilityOptions& options = {});

// Hypergeometric marginalization matrix M (n+1 x n_bar+1):
// M(h, H) = C(H, h) C(n_bar - H, n - h) / C(n_bar, n).
Eigen::MatrixXd hypergeometric_matrix(int n, int n_bar);

}  // namespace lrvi
