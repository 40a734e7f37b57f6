#include "lrvi/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"

namespace lrvi {

namespace {

constexpr double kSumTolerance = 1e-9;

void check_probability_vector(const Eigen::Ref<const Eigen::VectorXd>& p, const std::string& what) {
  if (p.size() == 0) throw DomainError(what + ": empty probability vector");
  if ((p.array() < 0.0).any() || (p.array() > 1.0).any() || !p.allFinite()) {
    throw DomainError(what + ": entries must lie in [0, 1]");
  }
  if (std::abs(p.sum() - 1.0) > kSumTolerance) throw DomainError(what + ": entries must sum to 1");
}

double log_or_neg_inf(double x) { return x > 0.0 ? std::log(x) : kNegInf<double>; }

// sum_v h_v log p_v with 0 log 0 = 0.
double log_iid_term(const Histogram& h, const Eigen::Ref<const Eigen::VectorXd>& p) {
  double out = 0.0;
  for (std::size_t v = 0; v < h.counts.size(); ++v) {
    const int c = h.counts[v];
    if (c == 0) continue;
    const double pv = p(static_cast<Eigen::Index>(v));
    if (pv <= 0.0) return kNegInf<double>;
    out += c * std::log(pv);
  }
  return out;
}

}  // namespace

// --- MixtureOfIidDiscrete ----------------------------------------------------

MixtureOfIidDiscrete::MixtureOfIidDiscrete(std::vector<Atom> atoms, Eigen::VectorXd weights,
                                           std::vector<Eigen::MatrixXd> params)
    : atoms_(std::move(atoms)), weights_(std::move(weights)), params_(std::move(params)) {
  validate();
}

MixtureOfIidDiscrete MixtureOfIidDiscrete::binary(const Atom& atom, const Eigen::VectorXd& weights,
                                                  const Eigen::VectorXd& p) {
  Eigen::MatrixXd params(p.size(), 2);
  params.col(0) = (1.0 - p.array()).matrix();
  params.col(1) = p;
  return MixtureOfIidDiscrete({atom}, weights, {params});
}

int MixtureOfIidDiscrete::atom_index(const std::string& name) const {
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    if (atoms_[a].name == name) return static_cast<int>(a);
  }
  return -1;
}

void MixtureOfIidDiscrete::validate() const {
  if (weights_.size() < 1) throw DomainError("mixture needs k >= 1");
  check_probability_vector(weights_, "mixture weights");
  if (params_.size() != atoms_.size()) throw ArityError("mixture: one parameter matrix per atom required");
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    atoms_[a].validate();
    if (!atoms_[a].domain.is_discrete()) throw DomainError("discrete mixture over continuous atom " + atoms_[a].name);
    const auto& m = params_[a];
    if (m.rows() != weights_.size() || m.cols() != atoms_[a].domain.value_count()) {
      throw ArityError("mixture: parameter matrix of " + atoms_[a].name + " has the wrong shape");
    }
    for (Eigen::Index l = 0; l < m.rows(); ++l) {
      check_probability_vector(m.row(l).transpose(), "mixture parameters of " + atoms_[a].name);
    }
  }
}

double MixtureOfIidDiscrete::log_valuation_value(const HistKey& key) const {
  if (key.size() != atoms_.size()) throw ArityError("mixture: histogram tuple arity mismatch");
  Eigen::VectorXd terms(k());
  for (int l = 0; l < k(); ++l) {
    double t = weights_(l) > 0.0 ? std::log(weights_(l)) : kNegInf<double>;
    for (std::size_t a = 0; a < atoms_.size() && t > kNegInf<double>; ++a) {
      t += log_iid_term(key[a], params_[a].row(l).transpose());
    }
    terms(l) = t;
  }
  return log_sum_exp(terms);
}

double MixtureOfIidDiscrete::log_hist_mass(const HistKey& key) const {
  if (key.size() != atoms_.size()) throw ArityError("mixture: histogram tuple arity mismatch");
  double coef = 0.0;
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    validate_histogram(key[a], atoms_[a]);
    coef += log_multinomial_coefficient(key[a]);
  }
  return coef + log_valuation_value(key);
}

Eigen::VectorXd MixtureOfIidDiscrete::predictive(int atom) const {
  return params_.at(atom).transpose() * weights_;
}

// --- Kde ---------------------------------------------------------------------

Kde::Kde(Eigen::VectorXd centers, double bandwidth, Eigen::VectorXd center_weights)
    : centers_(std::move(centers)), bandwidth_(bandwidth), center_weights_(std::move(center_weights)) {
  if (center_weights_.size() > 0) {
    const double s = center_weights_.sum();
    if (s > 0.0) center_weights_ /= s;
  }
  validate();
}

Eigen::VectorXd Kde::center_weights() const {
  if (uniform()) return Eigen::VectorXd::Constant(centers_.size(), 1.0 / static_cast<double>(centers_.size()));
  return center_weights_;
}

double Kde::mean() const { return center_weights().dot(centers_); }

double Kde::variance() const {
  const double m = mean();
  return center_weights().dot((centers_.array() - m).square().matrix()) + bandwidth_ * bandwidth_;
}

void Kde::validate() const {
  if (centers_.size() < 1) throw DomainError("Kde needs at least one center");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw DomainError("Kde bandwidth must be positive");
  if (!centers_.allFinite()) throw DomainError("Kde centers must be finite");
  if (!uniform()) {
    if (center_weights_.size() != centers_.size()) throw ArityError("Kde: one weight per center required");
    check_probability_vector(center_weights_, "Kde center weights");
  }
}

bool operator==(const Kde& a, const Kde& b) {
  return a.bandwidth_ == b.bandwidth_ && a.centers_ == b.centers_ &&
         a.center_weights_.size() == b.center_weights_.size() && a.center_weights_ == b.center_weights_;
}

double kde_eval(const Kde& f, double x) {
  const double b = f.bandwidth();
  const Eigen::ArrayXd u = (x - f.centers().array()) / b;
  const Eigen::ArrayXd k = (-0.5 * u.square()).exp() / std::sqrt(2.0 * std::numbers::pi);
  if (f.uniform()) return k.mean() / b;
  return (k * f.center_weights().array()).sum() / b;
}

double kde_log_eval(const Kde& f, double x) {
  const double b = f.bandwidth();
  const Eigen::ArrayXd u = (x - f.centers().array()) / b;
  Eigen::ArrayXd terms = -0.5 * u.square() - std::log(b) - 0.5 * std::log(2.0 * std::numbers::pi);
  if (f.uniform()) {
    terms -= std::log(static_cast<double>(f.size()));
  } else {
    terms += f.center_weights().array().log();
  }
  return log_sum_exp(terms.matrix());
}

double kde_cdf(const Kde& f, double x) {
  const Eigen::VectorXd w = f.center_weights();
  double out = 0.0;
  for (int i = 0; i < f.size(); ++i) out += w(i) * normal_cdf(x, f.centers()(i), f.bandwidth() * f.bandwidth());
  return out;
}

double kde_overlap(const Kde& f, const Kde& g) {
  const double var = f.bandwidth() * f.bandwidth() + g.bandwidth() * g.bandwidth();
  const Eigen::VectorXd a = f.center_weights();
  const Eigen::VectorXd c = g.center_weights();
  double out = 0.0;
  for (int i = 0; i < f.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      out += a(i) * c(j) * normal_pdf(f.centers()(i), g.centers()(j), var);
    }
  }
  return out;
}

Eigen::VectorXd systematic_resample(const Eigen::VectorXd& points, const Eigen::VectorXd& weights, int count,
                                    Rng& rng) {
  if (points.size() == 0 || count < 1) throw DomainError("systematic_resample: empty input");
  const double total = weights.sum();
  if (!(total > 0.0)) throw ComputationError("systematic_resample: zero total weight");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return points(a) < points(b); });
  std::uniform_real_distribution<double> unif(0.0, 1.0 / count);
  double u = unif(rng);
  Eigen::VectorXd out(count);
  std::size_t i = 0;
  double cum = weights(order[0]) / total;
  for (int s = 0; s < count; ++s) {
    while (u > cum && i + 1 < order.size()) {
      ++i;
      cum += weights(order[i]) / total;
    }
    out(s) = points(order[i]);
    u += 1.0 / count;
  }
  return out;
}

KdeProduct kde_product(const Kde& f, const Kde& g, int max_centers, Rng& rng) {
  const double bf2 = f.bandwidth() * f.bandwidth();
  const double bg2 = g.bandwidth() * g.bandwidth();
  const double var = bf2 + bg2;
  const double bandwidth = std::sqrt(bf2 * bg2 / var);
  const Eigen::VectorXd a = f.center_weights();
  const Eigen::VectorXd c = g.center_weights();
  const Eigen::Index pairs = static_cast<Eigen::Index>(f.size()) * g.size();
  Eigen::VectorXd centers(pairs);
  Eigen::VectorXd log_w(pairs);
  Eigen::Index p = 0;
  for (int i = 0; i < f.size(); ++i) {
    for (int j = 0; j < g.size(); ++j, ++p) {
      const double mi = f.centers()(i);
      const double mj = g.centers()(j);
      centers(p) = (mi * bg2 + mj * bf2) / var;
      log_w(p) = std::log(a(i)) + std::log(c(j)) + log_normal_pdf(mi, mj, var);
    }
  }
  const double log_z = log_sum_exp(log_w);
  if (!std::isfinite(log_z)) throw ComputationError("kde_product: vanishing overlap");
  const Eigen::VectorXd w = (log_w.array() - log_z).exp().matrix();
  if (pairs <= max_centers) return {Kde(centers, bandwidth, w), log_z};
  return {Kde(systematic_resample(centers, w, max_centers, rng), bandwidth), log_z};
}

// --- KdeMixture --------------------------------------------------------------

KdeMixture::KdeMixture(std::vector<Atom> atoms, Eigen::VectorXd weights,
                       std::vector<std::vector<AtomFactor>> components)
    : atoms_(std::move(atoms)), weights_(std::move(weights)), components_(std::move(components)) {
  validate();
}

int KdeMixture::atom_index(const std::string& name) const {
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    if (atoms_[a].name == name) return static_cast<int>(a);
  }
  return -1;
}

bool KdeMixture::all_discrete() const {
  return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.domain.is_discrete(); });
}

void KdeMixture::validate() const {
  if (weights_.size() < 1) throw DomainError("mixture needs k >= 1");
  check_probability_vector(weights_, "mixture weights");
  if (components_.size() != static_cast<std::size_t>(weights_.size())) {
    throw ArityError("mixture: one factor list per component required");
  }
  for (const auto& comp : components_) {
    if (comp.size() != atoms_.size()) throw ArityError("mixture: one factor per atom required");
    for (std::size_t a = 0; a < atoms_.size(); ++a) {
      const Atom& atom = atoms_[a];
      if (atom.domain.is_discrete()) {
        const auto* p = std::get_if<CategoricalFactor>(&comp[a]);
        if (!p) throw DomainError("mixture: discrete atom " + atom.name + " needs a categorical factor");
        if (p->size() != atom.domain.value_count()) throw ArityError("mixture: categorical length of " + atom.name);
        check_probability_vector(*p, "mixture parameters of " + atom.name);
      } else {
        const auto* f = std::get_if<Kde>(&comp[a]);
        if (!f) throw DomainError("mixture: continuous atom " + atom.name + " needs a Kde factor");
        f->validate();
      }
    }
  }
}

double log_factor_value(const AtomFactor& f, double value) {
  if (const auto* p = std::get_if<CategoricalFactor>(&f)) {
    const auto v = static_cast<Eigen::Index>(value);
    if (v < 0 || v >= p->size() || value != std::floor(value)) throw DomainError("value outside categorical domain");
    return log_or_neg_inf((*p)(v));
  }
  return kde_log_eval(std::get<Kde>(f), value);
}

double KdeMixture::log_component_value(int l, std::span<const Eigen::VectorXd> values) const {
  if (values.size() != atoms_.size()) throw ArityError("mixture: valuation arity mismatch");
  double out = 0.0;
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    for (Eigen::Index i = 0; i < values[a].size(); ++i) {
      out += log_factor_value(components_[l][a], values[a](i));
      if (out == kNegInf<double>) return out;
    }
  }
  return out;
}

double KdeMixture::log_valuation_value(std::span<const Eigen::VectorXd> values) const {
  Eigen::VectorXd terms(k());
  for (int l = 0; l < k(); ++l) terms(l) = log_or_neg_inf(weights_(l)) + log_component_value(l, values);
  return log_sum_exp(terms);
}

KdeMixture to_kde_mixture(const MixtureOfIidDiscrete& m) {
  std::vector<std::vector<AtomFactor>> comps(m.k());
  for (int l = 0; l < m.k(); ++l) {
    for (std::size_t a = 0; a < m.atoms().size(); ++a) {
      comps[l].emplace_back(CategoricalFactor(m.params(static_cast<int>(a)).row(l).transpose()));
    }
  }
  return KdeMixture(m.atoms(), m.weights(), std::move(comps));
}

MixtureOfIidDiscrete to_discrete_mixture(const KdeMixture& m) {
  if (!m.all_discrete()) throw DomainError("mixture has continuous atoms");
  std::vector<Eigen::MatrixXd> params;
  for (std::size_t a = 0; a < m.atoms().size(); ++a) {
    Eigen::MatrixXd p(m.k(), m.atoms()[a].domain.value_count());
    for (int l = 0; l < m.k(); ++l) p.row(l) = std::get<CategoricalFactor>(m.factor(l, static_cast<int>(a))).transpose();
    params.push_back(std::move(p));
  }
  return MixtureOfIidDiscrete(m.atoms(), m.weights(), std::move(params));
}

}  // namespace lrvi
