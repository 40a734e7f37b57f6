#pragma once

// Variational (mixture-of-iid) potential types.
//
// A mixture with k components assigns every atom A in its tuple, per
// component l, an iid factor: a categorical vector p_{A,l} for discrete atoms
// or a Gaussian-kernel density estimator for continuous atoms. Evaluated on a
// ground valuation the potential is
//
//   sum_l w_l prod_A prod_i factor_{A,l}(x_{A,i}),
//
// and, for discrete atoms grouped by histogram, the per-atom product becomes a
// binomial/multinomial pmf.

#include <Eigen/Core>

#include <span>
#include <variant>
#include <vector>

#include "lrvi/atom.hpp"
#include "lrvi/random.hpp"

namespace lrvi {

class MixtureOfIidDiscrete {
 public:
  MixtureOfIidDiscrete() = default;
  // params[a] is a k x d matrix of categorical parameters for atom a.
  MixtureOfIidDiscrete(std::vector<Atom> atoms, Eigen::VectorXd weights, std::vector<Eigen::MatrixXd> params);

  // Single binary atom shorthand; p are the probabilities of value 1.
  static MixtureOfIidDiscrete binary(const Atom& atom, const Eigen::VectorXd& weights, const Eigen::VectorXd& p);

  int k() const { return static_cast<int>(weights_.size()); }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<Eigen::MatrixXd>& params() const { return params_; }
  const Eigen::MatrixXd& params(int atom) const { return params_.at(atom); }
  int atom_index(const std::string& name) const;

  // Throws DomainError on any broken invariant.
  void validate() const;

  // log sum_l w_l prod_A f_M(h_A; n_A, p_{A,l}): mass of the histogram tuple.
  double log_hist_mass(const HistKey& key) const;
  // Value on any single ground valuation with this histogram tuple.
  double log_valuation_value(const HistKey& key) const;
  // Per-rv predictive distribution of one ground rv of `atom`.
  Eigen::VectorXd predictive(int atom) const;

 private:
  std::vector<Atom> atoms_;
  Eigen::VectorXd weights_;
  std::vector<Eigen::MatrixXd> params_;
};

// Gaussian-kernel density estimator
//   f(x) = sum_i a_i K((x - mu_i) / b) / b,
// with a_i = 1/S unless explicit center weights are given.
class Kde {
 public:
  Kde() = default;
  Kde(Eigen::VectorXd centers, double bandwidth, Eigen::VectorXd center_weights = {});

  static Kde gaussian(double mean, double sd) { return Kde(Eigen::VectorXd::Constant(1, mean), sd); }

  int size() const { return static_cast<int>(centers_.size()); }
  const Eigen::VectorXd& centers() const { return centers_; }
  double bandwidth() const { return bandwidth_; }
  bool uniform() const { return center_weights_.size() == 0; }
  // Normalized center weights (materialized when uniform).
  Eigen::VectorXd center_weights() const;

  double mean() const;
  double variance() const;
  void validate() const;

  friend bool operator==(const Kde& a, const Kde& b);

 private:
  Eigen::VectorXd centers_;
  double bandwidth_ = 1.0;
  Eigen::VectorXd center_weights_;
};

double kde_eval(const Kde& f, double x);
double kde_log_eval(const Kde& f, double x);
double kde_cdf(const Kde& f, double x);

// ∫ f(x) g(x) dx, exact: a weighted sum of Gaussian overlaps over center pairs.
double kde_overlap(const Kde& f, const Kde& g);

// Pointwise product f·g = z · h with h a normalized Kde. Each center pair
// (i, j) becomes one kernel at the precision-weighted center with bandwidth
// b b' / sqrt(b^2 + b'^2). When the pair count exceeds `max_centers` the
// result is resampled down to `max_centers` uniform-weight centers.
struct KdeProduct {
  Kde density;
  double log_z = 0.0;
};
KdeProduct kde_product(const Kde& f, const Kde& g, int max_centers, Rng& rng);

// `count` centers drawn by systematic resampling from weighted points taken in
// increasing order, so the centers follow the weighted quantiles.
Eigen::VectorXd systematic_resample(const Eigen::VectorXd& points, const Eigen::VectorXd& weights, int count,
                                    Rng& rng);

using CategoricalFactor = Eigen::VectorXd;
using AtomFactor = std::variant<CategoricalFactor, Kde>;

// Mixture of products of per-atom iid factors over continuous and (hybrid
// case) discrete atoms.
class KdeMixture {
 public:
  KdeMixture() = default;
  // components[l][a] is the factor of atom a in component l.
  KdeMixture(std::vector<Atom> atoms, Eigen::VectorXd weights, std::vector<std::vector<AtomFactor>> components);

  int k() const { return static_cast<int>(weights_.size()); }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<std::vector<AtomFactor>>& components() const { return components_; }
  const AtomFactor& factor(int component, int atom) const { return components_.at(component).at(atom); }
  int atom_index(const std::string& name) const;
  bool all_discrete() const;

  void validate() const;

  // log prod_A prod_i factor_{A,l}(values[A](i)) for component l.
  double log_component_value(int l, std::span<const Eigen::VectorXd> values) const;
  // log sum_l w_l (...) over a ground valuation given per atom.
  double log_valuation_value(std::span<const Eigen::VectorXd> values) const;

 private:
  std::vector<Atom> atoms_;
  Eigen::VectorXd weights_;
  std::vector<std::vector<AtomFactor>> components_;
};

// Log of one iid factor evaluated at one ground value.
double log_factor_value(const AtomFactor& f, double value);

KdeMixture to_kde_mixture(const MixtureOfIidDiscrete& m);
// Throws DomainError if any atom is continuous.
MixtureOfIidDiscrete to_discrete_mixture(const KdeMixture& m);

}  // namespace lrvi
