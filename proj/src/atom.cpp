#include "lrvi/atom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"

namespace lrvi {

AtomDomain AtomDomain::binary() { return AtomDomain(DomainKind::kBinary, 2, std::nullopt); }

AtomDomain AtomDomain::categorical(int d) {
  if (d < 2) throw DomainError("categorical domain needs d >= 2, got " + std::to_string(d));
  return AtomDomain(DomainKind::kCategorical, d, std::nullopt);
}

AtomDomain AtomDomain::continuous(std::optional<Interval> support) {
  if (support && !(support->lo < support->hi)) throw DomainError("continuous support needs lower < upper");
  return AtomDomain(DomainKind::kContinuous, 0, support);
}

bool AtomDomain::contains(double v) const {
  if (!std::isfinite(v)) return false;
  if (kind_ == DomainKind::kContinuous) {
    return !support_ || (v >= support_->lo && v <= support_->hi);
  }
  return v == std::floor(v) && v >= 0 && v < values_;
}

void Atom::validate() const {
  if (name.empty()) throw DomainError("atom name must not be empty");
  if (population < 1) throw DomainError("atom " + name + ": population must be >= 1");
}

int Histogram::population() const { return std::accumulate(counts.begin(), counts.end(), 0); }

Eigen::VectorXd Histogram::as_vector() const {
  Eigen::VectorXd out(counts.size());
  for (std::size_t v = 0; v < counts.size(); ++v) out(static_cast<Eigen::Index>(v)) = counts[v];
  return out;
}

void validate_histogram(const Histogram& h, const Atom& atom, std::optional<int> population) {
  if (!atom.domain.is_discrete()) throw DomainError("histogram undefined for continuous atom " + atom.name);
  if (static_cast<int>(h.counts.size()) != atom.domain.value_count()) {
    throw DomainError("histogram length does not match domain of " + atom.name);
  }
  for (int c : h.counts) {
    if (c < 0) throw DomainError("negative histogram count for " + atom.name);
  }
  if (h.population() != population.value_or(atom.population)) {
    throw DomainError("histogram of " + atom.name + " does not sum to its population");
  }
}

Histogram histogram_of(const Eigen::Ref<const Eigen::VectorXd>& values, const Atom& atom) {
  if (!atom.domain.is_discrete()) throw DomainError("histogram_of: atom " + atom.name + " is continuous");
  Histogram h{std::vector<int>(atom.domain.value_count(), 0)};
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!atom.domain.contains(values(i))) throw DomainError("histogram_of: value outside domain of " + atom.name);
    ++h.counts[static_cast<std::size_t>(values(i))];
  }
  return h;
}

double log_multinomial_coefficient(const Histogram& h) {
  double out = log_factorial<double>(h.population());
  for (int c : h.counts) out -= log_factorial<double>(c);
  return out;
}

double multinomial_coefficient(const Histogram& h) { return std::round(std::exp(log_multinomial_coefficient(h))); }

namespace {

void enumerate_rec(int remaining, int slot, std::vector<int>& counts, std::vector<Histogram>& out) {
  const int d = static_cast<int>(counts.size());
  if (slot == d - 1) {
    counts[slot] = remaining;
    out.push_back(Histogram{counts});
    return;
  }
  for (int c = remaining; c >= 0; --c) {
    counts[slot] = c;
    enumerate_rec(remaining - c, slot + 1, counts, out);
  }
}

}  // namespace

std::vector<Histogram> enumerate_histograms(int population, int d) {
  if (d < 1 || population < 0) throw DomainError("enumerate_histograms: bad arguments");
  std::vector<Histogram> out;
  std::vector<int> counts(d, 0);
  enumerate_rec(population, 0, counts, out);
  // counts[0] descends, so reverse to get h=(n,0) ... (0,n) ordered by ones for binary.
  std::sort(out.begin(), out.end(), [](const Histogram& a, const Histogram& b) {
    return std::lexicographical_compare(a.counts.rbegin(), a.counts.rend(), b.counts.rbegin(), b.counts.rend());
  });
  return out;
}

std::vector<HistKey> enumerate_hist_keys(const std::vector<std::pair<int, int>>& population_and_d) {
  std::vector<HistKey> keys{HistKey{}};
  for (const auto& [population, d] : population_and_d) {
    const auto hists = enumerate_histograms(population, d);
    std::vector<HistKey> next;
    next.reserve(keys.size() * hists.size());
    for (const auto& k : keys) {
      for (const auto& h : hists) {
        HistKey nk = k;
        nk.push_back(h);
        next.push_back(std::move(nk));
      }
    }
    keys = std::move(next);
  }
  return keys;
}

}  // namespace lrvi
