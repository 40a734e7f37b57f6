#pragma once

// Relational hybrid model: atoms, parfactors, potentials and valuations.

#include <Eigen/Core>

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lrvi/atom.hpp"
#include "lrvi/mixture.hpp"

namespace lrvi {

// What a HistTable value means.
//   kValuation: the potential of any single ground valuation with that
//               histogram tuple (a ground-product table).
//   kHistogram: the total mass of the histogram class, i.e. the valuation
//               value times the multinomial coefficients.
enum class TableMeasure { kValuation, kHistogram };

// Potential over histogram tuples. Values are stored in log space; keys that
// were never set read as zero (log value -inf). The table therefore covers
// every reachable tuple, with absent ones explicitly meaning "impossible".
class HistTable {
 public:
  HistTable() = default;
  explicit HistTable(std::vector<Atom> atoms, TableMeasure measure = TableMeasure::kValuation);

  const std::vector<Atom>& atoms() const { return atoms_; }
  TableMeasure measure() const { return measure_; }

  void set(const HistKey& key, double value);
  void set_log(const HistKey& key, double log_value);
  double value(const HistKey& key) const;
  double log_value(const HistKey& key) const;

  // Log value of one ground valuation with this tuple.
  double log_valuation_value(const HistKey& key) const;
  // Log mass of the whole histogram class.
  double log_hist_mass(const HistKey& key) const;

  const std::map<HistKey, double>& log_entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void validate() const;

 private:
  void check_key(const HistKey& key) const;

  std::vector<Atom> atoms_;
  TableMeasure measure_ = TableMeasure::kValuation;
  std::map<HistKey, double> entries_;
};

// Closed-form unnormalized density of one ground factor. Every form is
// evaluated on the values bound to each atom argument of the factor:
//
//   gaussian(mean, var)            prod over all values of f_N(x; mean, var)
//   linear_gaussian(mu, var)       prod over pairs (x, y) of f_N(x - y; mu, var)
//   ground_table(dims, values)     prod over value tuples of table[x, y, ...]
//   iid_gaussian_mixture(w, mu1, var1, mu2, var2)
//                                  w prod f_N(x; mu1, var1) + (1-w) prod f_N(x; mu2, var2)
class ParametricDensity {
 public:
  using Params = std::vector<std::pair<std::string, double>>;

  ParametricDensity() = default;
  ParametricDensity(std::string form, Params params, std::vector<int> dims = {}, std::vector<double> table = {});

  static ParametricDensity gaussian(double mean, double var);
  static ParametricDensity linear_gaussian(double mu, double var);
  static ParametricDensity ground_table(std::vector<int> dims, std::vector<double> values);
  static ParametricDensity iid_gaussian_mixture(double w, double mu1, double var1, double mu2, double var2);

  const std::string& form() const { return form_; }
  const Params& params() const { return params_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<double>& table() const { return table_; }
  double param(std::string_view name) const;

  // Number of atom arguments the form requires, or -1 when any count works.
  int arity() const;
  bool discrete_only() const { return form_ == "ground_table"; }

  double log_factor(std::span<const Eigen::VectorXd> args) const;

  friend bool operator==(const ParametricDensity&, const ParametricDensity&) = default;

 private:
  std::string form_;
  Params params_;
  std::vector<int> dims_;
  std::vector<double> table_;
};

using Potential = std::variant<HistTable, ParametricDensity, MixtureOfIidDiscrete, KdeMixture>;

bool is_variational(const Potential& p);

// A logical (parameter) variable with a finite domain of opaque constants.
struct LogicalVar {
  std::string name;
  std::vector<std::string> constants;

  int size() const { return static_cast<int>(constants.size()); }
  // Domain of `n` generated constants name_0 .. name_{n-1}.
  static LogicalVar sized(std::string name, int n);
  friend bool operator==(const LogicalVar&, const LogicalVar&) = default;
};

// How a parfactor refers to an atom:
//   kPopulation  the whole population at once (counting-style argument);
//   kVariable    one rv per substitution of a logical variable;
//   kIndex       one fixed rv (produced by shattering).
enum class ArgKind { kPopulation, kVariable, kIndex };

struct AtomArg {
  std::string atom;
  ArgKind kind = ArgKind::kPopulation;
  std::string var;
  int index = 0;

  static AtomArg population(std::string atom) { return {std::move(atom), ArgKind::kPopulation, {}, 0}; }
  static AtomArg variable(std::string atom, std::string var) {
    return {std::move(atom), ArgKind::kVariable, std::move(var), 0};
  }
  static AtomArg at(std::string atom, int index) { return {std::move(atom), ArgKind::kIndex, {}, index}; }
  friend bool operator==(const AtomArg&, const AtomArg&) = default;
};

struct Parfactor {
  std::string id;
  std::vector<LogicalVar> params;
  std::vector<AtomArg> args;
  Potential potential;
};

// Ground values of every rv of every atom.
struct Valuation {
  std::map<std::string, Eigen::VectorXd> values;

  const Eigen::VectorXd& at(const std::string& atom) const;
};

// One element of gr(g): the substitution and, per atom argument, the indices
// of the ground rvs it touches.
struct GroundFactor {
  std::vector<std::string> substitution;
  std::vector<std::vector<int>> rv_indices;
};

class Rhm {
 public:
  Rhm() = default;
  Rhm(std::vector<Atom> atoms, std::vector<Parfactor> parfactors);

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Parfactor>& parfactors() const { return parfactors_; }
  const Atom& atom(const std::string& name) const;
  bool has_atom(const std::string& name) const;
  const Parfactor& parfactor(const std::string& id) const;
  std::vector<Atom> parfactor_atoms(const Parfactor& g) const;

  void validate() const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Parfactor> parfactors_;
};

// --- operations -------------------------------------------------------------

Histogram histogram_of(const Valuation& valuation, const Atom& atom);

// Potential value on a histogram tuple. HistTable returns its stored value;
// mixtures return the histogram mass sum_l w_l prod_A f_M(h_A; n_A, p_{A,l}).
double eval_potential(const Potential& p, const HistKey& key);
double log_eval_potential(const Potential& p, const HistKey& key);

// Potential value on the ground values bound to each atom argument of one
// ground factor.
double eval_potential(const Potential& p, std::span<const Eigen::VectorXd> args);
double log_eval_potential(const Potential& p, std::span<const Eigen::VectorXd> args);

std::vector<GroundFactor> ground(const Parfactor& g, const Rhm& model);

// Values bound to each argument of one ground factor.
std::vector<Eigen::VectorXd> factor_arguments(const Parfactor& g, const GroundFactor& f, const Valuation& v);

// log prod_{f in gr(g)} phi_f(v).
double log_parfactor_value(const Parfactor& g, const Rhm& model, const Valuation& v);
// log of the unnormalized joint prod_g prod_{f in gr(g)} phi_f(v).
double log_joint_unnormalized(const Rhm& model, const Valuation& v);

// Exact ground-product HistTable of a parfactor over discrete atoms, keyed by
// the histograms of its atom tuple. Requires each atom to be exchangeable
// within the parfactor (no logical variable shared between two arguments).
HistTable ground_product_table(const Parfactor& g, const Rhm& model);

// Replace `atom` by population-many singleton atoms name#0 .. name#{n-1} and
// expand every parfactor touching it; the joint density is unchanged.
Rhm shatter_non_exchangeable(const Rhm& model, const std::string& atom);

std::string singleton_name(const std::string& atom, int index);

}  // namespace lrvi
