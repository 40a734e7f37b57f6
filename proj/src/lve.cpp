#include "lrvi/lve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/random.hpp"

namespace lrvi {

LveCounters& lve_counters() {
  static thread_local LveCounters counters;
  return counters;
}

GaussianApproxComponent normal_approximation(int n, double p) { return {n * p, n * p * (1.0 - p)}; }

double normal_overlap(const GaussianApproxComponent& a, const GaussianApproxComponent& b) {
  return normal_pdf(a.mean, b.mean, a.variance + b.variance);
}

GaussianApproxComponent normal_product(const GaussianApproxComponent& a, const GaussianApproxComponent& b) {
  const double s = a.variance + b.variance;
  return {(a.mean * b.variance + b.mean * a.variance) / s, a.variance * b.variance / s};
}

VariationalPotential make_variational_potential(std::string id, const Potential& p, double log_mass) {
  if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&p)) return {std::move(id), to_kde_mixture(*m), log_mass};
  if (const auto* m = std::get_if<KdeMixture>(&p)) return {std::move(id), *m, log_mass};
  throw DomainError("potential " + id + " is not variational");
}

const Atom& VariationalModel::atom(const std::string& name) const {
  for (const Atom& a : atoms) {
    if (a.name == name) return a;
  }
  throw DomainError("undeclared atom " + name);
}

void VariationalModel::validate() const {
  std::set<std::string> names;
  for (const Atom& a : atoms) {
    a.validate();
    if (!names.insert(a.name).second) throw DomainError("duplicate atom " + a.name);
    auto it = population.find(a.name);
    if (it == population.end()) throw DomainError("no effective population for atom " + a.name);
    if (it->second < 0 || it->second > a.population) throw DomainError("effective population out of range for " + a.name);
  }
  for (const VariationalPotential& p : potentials) {
    p.mixture.validate();
    for (const Atom& a : p.atoms()) {
      const Atom& declared = atom(a.name);
      if (!(declared.domain == a.domain)) throw DomainError("potential " + p.id + ": domain mismatch on " + a.name);
    }
    if (!std::isfinite(p.log_mass)) throw DomainError("potential " + p.id + ": mass must be positive");
  }
}

VariationalModel to_variational_model(const Rhm& model) {
  VariationalModel out;
  out.atoms = model.atoms();
  for (const Atom& a : model.atoms()) out.population[a.name] = a.population;
  for (const Parfactor& g : model.parfactors()) {
    for (const AtomArg& arg : g.args) {
      if (arg.kind != ArgKind::kPopulation) throw DomainError("parfactor " + g.id + " is not over whole populations");
    }
    out.potentials.push_back(make_variational_potential(g.id, g.potential));
  }
  out.validate();
  return out;
}

int Observation::observed() const {
  int total = static_cast<int>(values.size());
  for (int c : counts) total += c;
  return total;
}

namespace {

constexpr double kClamp = 1e-9;

// Per-value observation counts of a discrete atom.
std::vector<int> observation_counts(const Observation& o, const Atom& atom) {
  std::vector<int> counts = o.counts;
  if (counts.empty()) counts.assign(atom.domain.value_count(), 0);
  if (static_cast<int>(counts.size()) != atom.domain.value_count()) {
    throw DomainError("observation of " + atom.name + ": one count per value required");
  }
  for (int c : counts) {
    if (c < 0) throw DomainError("observation of " + atom.name + ": negative count");
  }
  for (double v : o.values) {
    if (!atom.domain.contains(v)) throw DomainError("observation of " + atom.name + ": value outside domain");
    ++counts[static_cast<std::size_t>(v)];
  }
  return counts;
}

}  // namespace

double observation_log_likelihood(const AtomFactor& f, const Atom& atom, const Observation& o) {
  if (atom.domain.is_discrete()) {
    const auto counts = observation_counts(o, atom);
    const auto& p = std::get<CategoricalFactor>(f);
    double out = 0.0;
    for (std::size_t v = 0; v < counts.size(); ++v) {
      if (counts[v] == 0) continue;
      const double pv = p(static_cast<Eigen::Index>(v));
      if (pv <= 0.0) return kNegInf<double>;
      out += counts[v] * std::log(pv);
    }
    return out;
  }
  double out = 0.0;
  for (double v : o.values) out += kde_log_eval(std::get<Kde>(f), v);
  return out;
}

VariationalModel update_obs(const VariationalModel& model, const std::vector<Observation>& obs) {
  VariationalModel out = model;
  for (const Observation& o : obs) {
    const Atom& atom = out.atom(o.atom);
    if (atom.domain.is_discrete()) {
      observation_counts(o, atom);
    } else {
      if (!o.counts.empty()) throw DomainError("observation of continuous " + atom.name + " needs values");
      for (double v : o.values) {
        if (!atom.domain.contains(v)) throw DomainError("observation of " + atom.name + ": value outside domain");
      }
    }
    int& n = out.population.at(o.atom);
    if (o.observed() > n) throw DomainError("observing more rvs of " + o.atom + " than its population");
    n -= o.observed();
    for (VariationalPotential& p : out.potentials) {
      const int a = p.mixture.atom_index(o.atom);
      if (a < 0) continue;
      Eigen::VectorXd log_w(p.mixture.k());
      for (int l = 0; l < p.mixture.k(); ++l) {
        const double w = p.mixture.weights()(l);
        log_w(l) = (w > 0.0 ? std::log(w) : kNegInf<double>) + observation_log_likelihood(p.mixture.factor(l, a), atom, o);
      }
      const double total = log_sum_exp(log_w);
      if (!std::isfinite(total)) {
        throw ComputationError("observations of " + o.atom + " have zero probability under potential " + p.id);
      }
      p.mixture = KdeMixture(p.mixture.atoms(), (log_w.array() - total).exp().matrix(), p.mixture.components());
      p.log_mass += total;
    }
  }
  return out;
}

namespace {

int population_of(const Populations& population, const Atom& atom) {
  auto it = population.find(atom.name);
  return it == population.end() ? atom.population : it->second;
}

struct FactorProduct {
  AtomFactor factor;
  double log_scale = 0.0;
};

Eigen::VectorXd clamp_categorical(Eigen::VectorXd p) {
  p = p.array().max(kClamp).min(1.0 - kClamp);
  return p / p.sum();
}

// Exact sum over histograms of f_M(h; n, p) f_M(h; n, p').
FactorProduct histogram_sum_product(int n, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const auto d = static_cast<int>(p.size());
  const auto hists = enumerate_histograms(n, d);
  Eigen::VectorXd log_terms(static_cast<Eigen::Index>(hists.size()));
  for (std::size_t i = 0; i < hists.size(); ++i) {
    const Eigen::VectorXd h = hists[i].as_vector();
    log_terms(static_cast<Eigen::Index>(i)) = log_multinomial_pdf(h, p) + log_multinomial_pdf(h, q);
  }
  const double log_z = log_sum_exp(log_terms);
  if (!std::isfinite(log_z)) return {CategoricalFactor(p), kNegInf<double>};
  if (n == 0) {
    Eigen::VectorXd pq = p.cwiseProduct(q);
    return {CategoricalFactor(pq.sum() > 0.0 ? Eigen::VectorXd(pq / pq.sum()) : p), log_z};
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < hists.size(); ++i) {
    mean += std::exp(log_terms(static_cast<Eigen::Index>(i)) - log_z) * hists[i].as_vector();
  }
  return {CategoricalFactor(clamp_categorical(mean / n)), log_z};
}

FactorProduct categorical_product(int n, const Eigen::VectorXd& p, const Eigen::VectorXd& q, DiscreteProduct mode) {
  if (p.size() != q.size()) throw ArityError("categorical factors of different lengths");
  if (mode == DiscreteProduct::kExact) {
    const Eigen::VectorXd pq = p.cwiseProduct(q);
    const double c = pq.sum();
    if (!(c > 0.0)) return {CategoricalFactor(p), n == 0 ? 0.0 : kNegInf<double>};
    return {CategoricalFactor(pq / c), n * std::log(c)};
  }
  const bool gate = n >= 10 && (p.array() >= 0.05).all() && (p.array() <= 0.95).all() &&
                    (q.array() >= 0.05).all() && (q.array() <= 0.95).all();
  if (!gate) return histogram_sum_product(n, p, q);
  // Diagonal Normal approximation, one coordinate per value (the single
  // success coordinate for binary atoms).
  const Eigen::Index first = p.size() == 2 ? 1 : 0;
  Eigen::VectorXd out(p.size());
  double log_z = 0.0;
  for (Eigen::Index v = first; v < p.size(); ++v) {
    const auto a = normal_approximation(n, p(v));
    const auto b = normal_approximation(n, q(v));
    log_z += std::log(normal_overlap(a, b));
    out(v) = normal_product(a, b).mean / n;
  }
  if (p.size() == 2) {
    out(1) = std::clamp(out(1), kClamp, 1.0 - kClamp);
    out(0) = 1.0 - out(1);
  } else {
    out = clamp_categorical(out);
  }
  return {CategoricalFactor(out), log_z};
}

FactorProduct factor_product(const AtomFactor& f, const AtomFactor& g, int n, const LveOptions& options, Rng& rng) {
  ++lve_counters().factor_products;
  if (const auto* p = std::get_if<CategoricalFactor>(&f)) {
    return categorical_product(n, *p, std::get<CategoricalFactor>(g), options.discrete_product);
  }
  const KdeProduct prod = kde_product(std::get<Kde>(f), std::get<Kde>(g), options.max_centers, rng);
  return {prod.density, n * prod.log_z};
}

VariationalPotential multiply_impl(const VariationalPotential& a, const VariationalPotential& b,
                                   const Populations& population, const LveOptions& options, Rng& rng) {
  const auto& ma = a.mixture;
  const auto& mb = b.mixture;
  std::vector<Atom> atoms = ma.atoms();
  std::vector<int> b_in_a(mb.atoms().size(), -1);
  std::vector<std::size_t> b_only;
  for (std::size_t j = 0; j < mb.atoms().size(); ++j) {
    const int i = ma.atom_index(mb.atoms()[j].name);
    if (i >= 0) {
      if (!(ma.atoms()[i].domain == mb.atoms()[j].domain)) {
        throw DomainError("multiply: atom " + mb.atoms()[j].name + " has different domains");
      }
      b_in_a[j] = i;
    } else {
      b_only.push_back(j);
      atoms.push_back(mb.atoms()[j]);
    }
  }
  std::vector<int> a_in_b(ma.atoms().size(), -1);
  for (std::size_t j = 0; j < b_in_a.size(); ++j) {
    if (b_in_a[j] >= 0) a_in_b[static_cast<std::size_t>(b_in_a[j])] = static_cast<int>(j);
  }

  std::vector<double> log_w;
  std::vector<std::vector<AtomFactor>> comps;
  for (int l = 0; l < ma.k(); ++l) {
    for (int r = 0; r < mb.k(); ++r) {
      ++lve_counters().component_pairs;
      double lw = std::log(ma.weights()(l)) + std::log(mb.weights()(r));
      if (!(lw > kNegInf<double>)) continue;
      std::vector<AtomFactor> factors;
      for (std::size_t i = 0; i < ma.atoms().size() && lw > kNegInf<double>; ++i) {
        const AtomFactor& f = ma.factor(l, static_cast<int>(i));
        if (a_in_b[i] < 0) {
          factors.push_back(f);
          continue;
        }
        FactorProduct prod =
            factor_product(f, mb.factor(r, a_in_b[i]), population_of(population, ma.atoms()[i]), options, rng);
        lw += prod.log_scale;
        factors.push_back(std::move(prod.factor));
      }
      if (!(lw > kNegInf<double>)) continue;
      for (std::size_t j : b_only) factors.push_back(mb.factor(r, static_cast<int>(j)));
      log_w.push_back(lw);
      comps.push_back(std::move(factors));
    }
  }
  if (log_w.empty()) throw ComputationError("product of potentials " + a.id + " and " + b.id + " vanishes");
  const Eigen::VectorXd lw = Eigen::Map<Eigen::VectorXd>(log_w.data(), static_cast<Eigen::Index>(log_w.size()));
  const double total = log_sum_exp(lw);
  VariationalPotential out{a.id + "*" + b.id, KdeMixture(atoms, (lw.array() - total).exp().matrix(), std::move(comps)),
                           a.log_mass + b.log_mass + total};
  if (out.mixture.k() > options.k_cap) out = collapse_mixture(out, options.k_cap, population, options.max_centers);
  return out;
}

void require_shared_kind(const VariationalPotential& a, const VariationalPotential& b, bool discrete) {
  for (const Atom& x : a.atoms()) {
    if (b.has_atom(x.name) && x.domain.is_discrete() != discrete) {
      throw DomainError(std::string("multiply: shared atom ") + x.name + (discrete ? " is continuous" : " is discrete"));
    }
  }
}

}  // namespace

VariationalPotential multiply_potentials(const VariationalPotential& a, const VariationalPotential& b,
                                         const Populations& population, const LveOptions& options, Rng& rng) {
  return multiply_impl(a, b, population, options, rng);
}

VariationalPotential multiply_discrete_potentials(const VariationalPotential& a, const VariationalPotential& b,
                                                  const Populations& population, const LveOptions& options) {
  require_shared_kind(a, b, true);
  Rng rng = make_rng(derive_seed(options.seed, "multiply"));
  return multiply_impl(a, b, population, options, rng);
}

VariationalPotential multiply_continuous_potentials(const VariationalPotential& a, const VariationalPotential& b,
                                                    const Populations& population, const LveOptions& options) {
  require_shared_kind(a, b, false);
  Rng rng = make_rng(derive_seed(options.seed, "multiply"));
  return multiply_impl(a, b, population, options, rng);
}

VariationalPotential sum_out(const VariationalPotential& p, const std::string& atom) {
  const int idx = p.mixture.atom_index(atom);
  if (idx < 0) throw ArityError("sum_out: potential " + p.id + " does not mention " + atom);
  std::vector<Atom> atoms;
  for (std::size_t a = 0; a < p.atoms().size(); ++a) {
    if (static_cast<int>(a) != idx) atoms.push_back(p.atoms()[a]);
  }
  if (atoms.empty()) return {p.id, KdeMixture({}, Eigen::VectorXd::Ones(1), {{}}), p.log_mass};
  std::vector<std::vector<AtomFactor>> comps;
  for (const auto& c : p.mixture.components()) {
    std::vector<AtomFactor> f;
    for (std::size_t a = 0; a < c.size(); ++a) {
      if (static_cast<int>(a) != idx) f.push_back(c[a]);
    }
    comps.push_back(std::move(f));
  }
  return {p.id, KdeMixture(std::move(atoms), p.mixture.weights(), std::move(comps)), p.log_mass};
}

namespace {

VariationalPotential eliminate_impl(const std::vector<VariationalPotential>& potentials, const std::string& atom,
                                    const Populations& population, const LveOptions& options, Rng& rng) {
  if (potentials.empty()) throw ArityError("eliminate: no potentials mention " + atom);
  for (const auto& p : potentials) {
    if (!p.has_atom(atom)) throw ArityError("eliminate: potential " + p.id + " does not mention " + atom);
  }
  VariationalPotential acc = potentials.front();
  for (std::size_t i = 1; i < potentials.size(); ++i) acc = multiply_impl(acc, potentials[i], population, options, rng);
  return sum_out(acc, atom);
}

bool atom_is_discrete(const std::vector<VariationalPotential>& potentials, const std::string& atom) {
  for (const auto& p : potentials) {
    const int i = p.mixture.atom_index(atom);
    if (i >= 0) return p.atoms()[static_cast<std::size_t>(i)].domain.is_discrete();
  }
  throw ArityError("eliminate: no potentials mention " + atom);
}

}  // namespace

VariationalPotential eliminate_discrete_atom(const std::vector<VariationalPotential>& potentials,
                                             const std::string& atom, const Populations& population,
                                             const LveOptions& options) {
  if (!atom_is_discrete(potentials, atom)) throw DomainError("eliminate_discrete_atom: " + atom + " is continuous");
  Rng rng = make_rng(derive_seed(options.seed, "eliminate:" + atom));
  return eliminate_impl(potentials, atom, population, options, rng);
}

VariationalPotential eliminate_continuous_atom(const std::vector<VariationalPotential>& potentials,
                                               const std::string& atom, const Populations& population,
                                               const LveOptions& options) {
  if (atom_is_discrete(potentials, atom)) throw DomainError("eliminate_continuous_atom: " + atom + " is discrete");
  Rng rng = make_rng(derive_seed(options.seed, "eliminate:" + atom));
  return eliminate_impl(potentials, atom, population, options, rng);
}

// --- collapsing --------------------------------------------------------------

namespace {

double sym_kl(const AtomFactor& f, const AtomFactor& g) {
  if (const auto* p = std::get_if<CategoricalFactor>(&f)) {
    const auto& q = std::get<CategoricalFactor>(g);
    const Eigen::ArrayXd a = p->array().max(1e-300);
    const Eigen::ArrayXd b = q.array().max(1e-300);
    return ((a - b) * (a.log() - b.log())).sum();
  }
  const Kde& a = std::get<Kde>(f);
  const Kde& b = std::get<Kde>(g);
  const double va = a.variance();
  const double vb = b.variance();
  const double dm = a.mean() - b.mean();
  return 0.5 * (va / vb + vb / va - 2.0 + dm * dm * (1.0 / va + 1.0 / vb));
}

struct Comp {
  double w;
  std::vector<AtomFactor> f;
};

AtomFactor merge_factor(const AtomFactor& f, double wf, const AtomFactor& g, double wg, int max_centers, Rng& rng) {
  const double a = wf / (wf + wg);
  if (const auto* p = std::get_if<CategoricalFactor>(&f)) {
    Eigen::VectorXd m = a * *p + (1.0 - a) * std::get<CategoricalFactor>(g);
    return CategoricalFactor(m / m.sum());
  }
  const Kde& x = std::get<Kde>(f);
  const Kde& y = std::get<Kde>(g);
  Eigen::VectorXd centers(x.size() + y.size());
  centers << x.centers(), y.centers();
  Eigen::VectorXd weights(centers.size());
  weights << a * x.center_weights(), (1.0 - a) * y.center_weights();
  const double b = std::sqrt(a * x.bandwidth() * x.bandwidth() + (1.0 - a) * y.bandwidth() * y.bandwidth());
  if (centers.size() <= max_centers) return Kde(centers, b, weights);
  const double mean = weights.dot(centers) / weights.sum();
  Eigen::VectorXd kept = systematic_resample(centers, weights, max_centers, rng);
  kept.array() += mean - kept.mean();
  return Kde(kept, b);
}

}  // namespace

VariationalPotential collapse_mixture(const VariationalPotential& p, int k_target, const Populations& population,
                                      int max_centers) {
  if (k_target < 1) throw DomainError("collapse_mixture: k_target must be >= 1");
  const KdeMixture& m = p.mixture;
  if (m.k() <= k_target) return p;
  Rng rng = make_rng(derive_seed(0, "collapse_mixture"));
  std::vector<double> scale;
  for (const Atom& a : m.atoms()) scale.push_back(std::max(1, population_of(population, a)));

  std::vector<Comp> comps;
  for (int l = 0; l < m.k(); ++l) comps.push_back({m.weights()(l), m.components()[static_cast<std::size_t>(l)]});
  auto cost = [&](const Comp& x, const Comp& y) {
    ++lve_counters().merge_evaluations;
    double div = 0.0;
    for (std::size_t a = 0; a < x.f.size(); ++a) div += scale[a] * sym_kl(x.f[a], y.f[a]);
    return x.w * y.w / (x.w + y.w) * div;
  };
  auto merge = [&](const Comp& x, const Comp& y) {
    Comp out{x.w + y.w, {}};
    for (std::size_t a = 0; a < x.f.size(); ++a) out.f.push_back(merge_factor(x.f[a], x.w, y.f[a], y.w, max_centers, rng));
    return out;
  };

  // Bound the pairwise stage: fold the lightest components into their
  // nearest heavy neighbour first.
  constexpr std::size_t kPairwiseLimit = 512;
  if (comps.size() > kPairwiseLimit) {
    std::stable_sort(comps.begin(), comps.end(), [](const Comp& x, const Comp& y) { return x.w > y.w; });
    std::vector<Comp> heavy(comps.begin(), comps.begin() + kPairwiseLimit);
    for (std::size_t i = kPairwiseLimit; i < comps.size(); ++i) {
      std::size_t best = 0;
      double best_cost = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < heavy.size(); ++j) {
        const double c = cost(heavy[j], comps[i]);
        if (c < best_cost) {
          best_cost = c;
          best = j;
        }
      }
      heavy[best] = merge(heavy[best], comps[i]);
    }
    comps = std::move(heavy);
  }

  const std::size_t k = comps.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k),
                                                std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cost(comps[i], comps[j]);
  }
  std::vector<bool> alive(k, true);
  std::size_t remaining = k;
  while (remaining > static_cast<std::size_t>(k_target)) {
    Eigen::Index bi = 0;
    Eigen::Index bj = 0;
    c.minCoeff(&bi, &bj);
    const auto i = static_cast<std::size_t>(bi);
    const auto j = static_cast<std::size_t>(bj);
    comps[i] = merge(comps[i], comps[j]);
    alive[j] = false;
    --remaining;
    c.row(bj).setConstant(std::numeric_limits<double>::infinity());
    c.col(bj).setConstant(std::numeric_limits<double>::infinity());
    for (std::size_t o = 0; o < k; ++o) {
      if (!alive[o] || o == i) continue;
      const double v = cost(comps[std::min(i, o)], comps[std::max(i, o)]);
      c(static_cast<Eigen::Index>(std::min(i, o)), static_cast<Eigen::Index>(std::max(i, o))) = v;
    }
  }
  Eigen::VectorXd w(static_cast<Eigen::Index>(remaining));
  std::vector<std::vector<AtomFactor>> out;
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!alive[i]) continue;
    w(r++) = comps[i].w;
    out.push_back(std::move(comps[i].f));
  }
  w /= w.sum();
  return {p.id, KdeMixture(m.atoms(), w, std::move(out)), p.log_mass};
}

// --- elimination driver ------------------------------------------------------

QueryResult latent_variable_elimination(const VariationalModel& model, const std::vector<std::string>& query,
                                        const std::vector<Observation>& obs, const LveOptions& options) {
  model.validate();
  if (query.empty()) throw DomainError("latent_variable_elimination: empty query");
  std::set<std::string> qset;
  for (const auto& q : query) {
    model.atom(q);
    qset.insert(q);
  }
  VariationalModel m = update_obs(model, obs);
  Rng rng = make_rng(derive_seed(options.seed, "latent_variable_elimination"));

  double log_scalar = 0.0;
  std::vector<VariationalPotential> work;
  for (VariationalPotential p : m.potentials) {
    // Fully observed atoms contribute nothing further.
    for (const Atom& a : std::vector<Atom>(p.atoms())) {
      if (!qset.count(a.name) && m.population.at(a.name) == 0) p = sum_out(p, a.name);
    }
    if (p.atoms().empty()) {
      log_scalar += p.log_mass;
    } else {
      work.push_back(std::move(p));
    }
  }

  QueryResult result;
  std::size_t next_forced = 0;
  while (true) {
    std::map<std::string, int> degree;
    for (const auto& p : work) {
      for (const Atom& a : p.atoms()) {
        if (!qset.count(a.name)) ++degree[a.name];
      }
    }
    if (degree.empty()) break;
    std::string pick;
    while (next_forced < options.order.size() && !degree.count(options.order[next_forced])) ++next_forced;
    if (next_forced < options.order.size()) {
      pick = options.order[next_forced++];
    } else {
      int best = std::numeric_limits<int>::max();
      for (const auto& [name, deg] : degree) {
        if (deg < best) {
          best = deg;
          pick = name;
        }
      }
    }
    std::vector<VariationalPotential> with;
    std::vector<VariationalPotential> without;
    for (auto& p : work) (p.has_atom(pick) ? with : without).push_back(std::move(p));
    VariationalPotential reduced = eliminate_impl(with, pick, m.population, options, rng);
    result.elimination_order.push_back(pick);
    if (reduced.atoms().empty()) {
      log_scalar += reduced.log_mass;
    } else {
      without.push_back(std::move(reduced));
    }
    work = std::move(without);
  }

  // Query atoms without any potential get a uniform factor.
  for (const auto& q : query) {
    const bool covered = std::any_of(work.begin(), work.end(), [&](const auto& p) { return p.has_atom(q); });
    if (covered) continue;
    const Atom& a = m.atom(q);
    if (!a.domain.is_discrete()) throw DomainError("query atom " + q + " has no potential");
    const int d = a.domain.value_count();
    KdeMixture uniform({a}, Eigen::VectorXd::Ones(1), {{CategoricalFactor(Eigen::VectorXd::Constant(d, 1.0 / d))}});
    work.push_back({"uniform:" + q, std::move(uniform), m.population.at(q) * std::log(static_cast<double>(d))});
  }
  VariationalPotential acc = work.front();
  for (std::size_t i = 1; i < work.size(); ++i) acc = multiply_impl(acc, work[i], m.population, options, rng);
  acc.log_mass += log_scalar;
  acc.id = "marginal";
  result.marginal = std::move(acc);
  result.population = m.population;
  return result;
}

Eigen::VectorXd marginal_histogram(const QueryResult& result, const std::string& atom) {
  const KdeMixture& m = result.marginal.mixture;
  const int a = m.atom_index(atom);
  if (a < 0) throw DomainError("atom " + atom + " is not part of the query result");
  const Atom& at = m.atoms()[static_cast<std::size_t>(a)];
  if (!at.domain.is_discrete()) throw DomainError("marginal_histogram: " + atom + " is continuous");
  const int n = result.population.at(atom);
  const auto hists = enumerate_histograms(n, at.domain.value_count());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hists.size()));
  for (std::size_t i = 0; i < hists.size(); ++i) {
    const Eigen::VectorXd h = hists[i].as_vector();
    for (int l = 0; l < m.k(); ++l) {
      out(static_cast<Eigen::Index>(i)) +=
          m.weights()(l) * multinomial_pdf(h, std::get<CategoricalFactor>(m.factor(l, a)));
    }
  }
  return out / out.sum();
}

Eigen::VectorXd predictive_categorical(const QueryResult& result, const std::string& atom) {
  const KdeMixture& m = result.marginal.mixture;
  const int a = m.atom_index(atom);
  if (a < 0) throw DomainError("atom " + atom + " is not part of the query result");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.atoms()[static_cast<std::size_t>(a)].domain.value_count());
  for (int l = 0; l < m.k(); ++l) out += m.weights()(l) * std::get<CategoricalFactor>(m.factor(l, a));
  return out;
}

double predictive_density(const QueryResult& result, const std::string& atom, double x) {
  const KdeMixture& m = result.marginal.mixture;
  const int a = m.atom_index(atom);
  if (a < 0) throw DomainError("atom " + atom + " is not part of the query result");
  double out = 0.0;
  for (int l = 0; l < m.k(); ++l) out += m.weights()(l) * kde_eval(std::get<Kde>(m.factor(l, a)), x);
  return out;
}

}  // namespace lrvi
