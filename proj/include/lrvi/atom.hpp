#pragma once

#include <Eigen/Core>

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace lrvi {

enum class DomainKind { kBinary, kCategorical, kContinuous };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

class AtomDomain {
 public:
  static AtomDomain binary();
  static AtomDomain categorical(int d);
  static AtomDomain continuous(std::optional<Interval> support = std::nullopt);

  DomainKind kind() const { return kind_; }
  bool is_discrete() const { return kind_ != DomainKind::kContinuous; }
  // 2 for binary, d for categorical, 0 for continuous.
  int value_count() const { return values_; }
  const std::optional<Interval>& support() const { return support_; }
  bool contains(double v) const;

  friend bool operator==(const AtomDomain&, const AtomDomain&) = default;

 private:
  AtomDomain(DomainKind kind, int values, std::optional<Interval> support)
      : kind_(kind), values_(values), support_(support) {}

  DomainKind kind_;
  int values_;
  std::optional<Interval> support_;
};

// A named exchangeable population of `population` ground rvs.
struct Atom {
  std::string name;
  AtomDomain domain = AtomDomain::binary();
  int population = 1;

  void validate() const;
  friend bool operator==(const Atom&, const Atom&) = default;
};

// Per-value occupancy counts of one discrete atom's population.
struct Histogram {
  std::vector<int> counts;

  int population() const;
  // counts[1] for binary atoms.
  int ones() const { return counts.at(1); }
  Eigen::VectorXd as_vector() const;

  friend auto operator<=>(const Histogram&, const Histogram&) = default;
};

// One histogram per atom of a parfactor, in atom-tuple order.
using HistKey = std::vector<Histogram>;

// Throws DomainError unless `h` is a valid histogram of `atom` with the given
// population (defaults to the atom's own population).
void validate_histogram(const Histogram& h, const Atom& atom, std::optional<int> population = std::nullopt);

// Counts of v over the ground values of one atom.
Histogram histogram_of(const Eigen::Ref<const Eigen::VectorXd>& values, const Atom& atom);

// n! / prod_v counts[v]!, the number of ground valuations with histogram h.
double multinomial_coefficient(const Histogram& h);
double log_multinomial_coefficient(const Histogram& h);

// Every histogram of `population` rvs over `d` values, in lexicographic order
// of counts. There are C(population + d - 1, d - 1) of them.
std::vector<Histogram> enumerate_histograms(int population, int d);

// Cartesian product of enumerate_histograms over several atoms.
std::vector<HistKey> enumerate_hist_keys(const std::vector<std::pair<int, int>>& population_and_d);

}  // namespace lrvi
