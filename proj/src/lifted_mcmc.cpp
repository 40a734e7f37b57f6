#include "lrvi/lifted_mcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"

namespace lrvi {

StepStats& mcmc_counters() {
  static thread_local StepStats stats;
  return stats;
}

int LatentModel::potential_index(const std::string& id) const {
  for (std::size_t p = 0; p < model.potentials.size(); ++p) {
    if (model.potentials[p].id == id) return static_cast<int>(p);
  }
  return -1;
}

int LatentModel::latent_index(const std::string& name) const {
  for (std::size_t j = 0; j < latents.size(); ++j) {
    if (latents[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

void LatentModel::validate() const {
  model.validate();
  std::set<std::string> names;
  for (const auto& l : latents) {
    if (!(l.lo < l.hi)) throw DomainError("latent " + l.name + ": range needs lo < hi");
    if (!names.insert(l.name).second) throw DomainError("duplicate latent " + l.name);
  }
  std::set<int> bound;
  for (const auto& r : rates) {
    const int p = potential_index(r.potential);
    if (p < 0 || latent_index(r.latent) < 0) throw DomainError("rate binding refers to unknown names");
    const auto& m = model.potentials[static_cast<std::size_t>(p)].mixture;
    if (m.k() != 1 || m.atoms().size() != 1 || m.atoms()[0].domain.kind() != DomainKind::kBinary) {
      throw DomainError("rate binding needs a k = 1 potential over one binary atom: " + r.potential);
    }
    const auto& l = latents[static_cast<std::size_t>(latent_index(r.latent))];
    if (l.lo < 0.0 || l.hi > 1.0) throw DomainError("rate latent " + l.name + " must range within [0, 1]");
    if (!bound.insert(p).second) throw DomainError("potential " + r.potential + " bound twice");
  }
  for (const auto& w : weight_bindings) {
    const int p = potential_index(w.potential);
    if (p < 0 || latent_index(w.latent) < 0) throw DomainError("weight binding refers to unknown names");
    if (model.potentials[static_cast<std::size_t>(p)].mixture.k() != 2) {
      throw DomainError("weight binding needs a k = 2 potential: " + w.potential);
    }
    const auto& l = latents[static_cast<std::size_t>(latent_index(w.latent))];
    if (l.lo < 0.0 || l.hi > 1.0) throw DomainError("weight latent " + l.name + " must range within [0, 1]");
    if (!bound.insert(p).second) throw DomainError("potential " + w.potential + " bound twice");
  }
  for (const auto& c : gaussian_couplings) {
    if (latent_index(c.a) < 0 || latent_index(c.b) < 0) throw DomainError("coupling refers to unknown latents");
    if (!(c.var > 0.0)) throw DomainError("coupling variance must be positive");
  }
  for (const auto& c : component_couplings) {
    const int a = potential_index(c.potential_a);
    const int b = potential_index(c.potential_b);
    if (a < 0 || b < 0 || a == b) throw DomainError("component coupling refers to unknown potentials");
    if (c.table.rows() != model.potentials[static_cast<std::size_t>(a)].mixture.k() ||
        c.table.cols() != model.potentials[static_cast<std::size_t>(b)].mixture.k()) {
      throw ArityError("component coupling table has the wrong shape");
    }
    if ((c.table.array() < 0.0).any() || !(c.table.sum() > 0.0)) throw DomainError("coupling table must be >= 0");
  }
}

// --- lifted target -------------------------------------------------------------

LiftedTarget::LiftedTarget(LatentModel model, const std::vector<Observation>& obs) : model_(std::move(model)) {
  model_.validate();
  const auto& pots = model_.model.potentials;
  population_ = update_obs(model_.model, obs).population;
  rate_of_potential_.assign(pots.size(), -1);
  weight_of_potential_.assign(pots.size(), -1);
  for (const auto& r : model_.rates) rate_of_potential_[model_.potential_index(r.potential)] = model_.latent_index(r.latent);
  for (const auto& w : model_.weight_bindings) {
    weight_of_potential_[model_.potential_index(w.potential)] = model_.latent_index(w.latent);
  }
  loglik_.resize(pots.size());
  rate_counts_.assign(pots.size(), {0.0, 0.0});
  for (std::size_t p = 0; p < pots.size(); ++p) {
    const KdeMixture& m = pots[p].mixture;
    loglik_[p].assign(m.k(), 0.0);
    if (m.k() > 1) free_potentials_.push_back(static_cast<int>(p));
    for (const Observation& o : obs) {
      const int a = m.atom_index(o.atom);
      if (a < 0) continue;
      const Atom& atom = m.atoms()[static_cast<std::size_t>(a)];
      if (rate_of_potential_[p] >= 0) {
        std::vector<int> counts = o.counts;
        if (counts.empty()) counts.assign(2, 0);
        for (double v : o.values) ++counts[static_cast<std::size_t>(v)];
        rate_counts_[p].first += counts[0];
        rate_counts_[p].second += counts[1];
        continue;
      }
      for (int l = 0; l < m.k(); ++l) loglik_[p][l] += observation_log_likelihood(m.factor(l, a), atom, o);
    }
  }
}

double LiftedTarget::log_weight(int p, int l, const LatentState& s) const {
  const int j = weight_of_potential_[static_cast<std::size_t>(p)];
  if (j >= 0) {
    const double t = s.value[static_cast<std::size_t>(j)];
    const double w = l == 0 ? t : 1.0 - t;
    return w > 0.0 ? std::log(w) : kNegInf<double>;
  }
  const double w = model_.model.potentials[static_cast<std::size_t>(p)].mixture.weights()(l);
  return w > 0.0 ? std::log(w) : kNegInf<double>;
}

double LiftedTarget::log_obs_term(int p, int l, const LatentState& s) const {
  const int j = rate_of_potential_[static_cast<std::size_t>(p)];
  if (j < 0) return loglik_[static_cast<std::size_t>(p)][static_cast<std::size_t>(l)];
  const double t = s.value[static_cast<std::size_t>(j)];
  const auto [zeros, ones] = rate_counts_[static_cast<std::size_t>(p)];
  double out = 0.0;
  if (ones > 0) out += t > 0.0 ? ones * std::log(t) : kNegInf<double>;
  if (zeros > 0) out += t < 1.0 ? zeros * std::log1p(-t) : kNegInf<double>;
  return out;
}

double LiftedTarget::log_component_coupling(int p, int l, const LatentState& s) const {
  double out = 0.0;
  const std::string& id = model_.model.potentials[static_cast<std::size_t>(p)].id;
  for (const auto& c : model_.component_couplings) {
    double v = 1.0;
    if (c.potential_a == id) {
      v = c.table(l, s.component[static_cast<std::size_t>(model_.potential_index(c.potential_b))]);
    } else if (c.potential_b == id) {
      v = c.table(s.component[static_cast<std::size_t>(model_.potential_index(c.potential_a))], l);
    } else {
      continue;
    }
    out += v > 0.0 ? std::log(v) : kNegInf<double>;
  }
  return out;
}

double LiftedTarget::log_gaussian_couplings(int j, double x, const LatentState& s) const {
  const std::string& name = model_.latents[static_cast<std::size_t>(j)].name;
  double out = 0.0;
  for (const auto& c : model_.gaussian_couplings) {
    if (c.a == name) {
      const double other = c.b == name ? x : s.value[static_cast<std::size_t>(model_.latent_index(c.b))];
      out += log_normal_pdf(x - other, c.mu, c.var);
    } else if (c.b == name) {
      out += log_normal_pdf(s.value[static_cast<std::size_t>(model_.latent_index(c.a))] - x, c.mu, c.var);
    }
  }
  return out;
}

std::vector<int> LiftedTarget::rate_potentials(int j) const {
  std::vector<int> out;
  for (std::size_t p = 0; p < rate_of_potential_.size(); ++p) {
    if (rate_of_potential_[p] == j) out.push_back(static_cast<int>(p));
  }
  return out;
}

std::vector<int> LiftedTarget::weight_potentials(int j) const {
  std::vector<int> out;
  for (std::size_t p = 0; p < weight_of_potential_.size(); ++p) {
    if (weight_of_potential_[p] == j) out.push_back(static_cast<int>(p));
  }
  return out;
}

AtomFactor LiftedTarget::effective_factor(int p, int a, int l, const LatentState& s) const {
  const int j = rate_of_potential_[static_cast<std::size_t>(p)];
  if (j >= 0) {
    const double t = s.value[static_cast<std::size_t>(j)];
    return CategoricalFactor(Eigen::Vector2d(1.0 - t, t));
  }
  return model_.model.potentials[static_cast<std::size_t>(p)].mixture.factor(l, a);
}

namespace {

// Product of the per-rv factors of every potential over one atom, with the
// log of its integral (sum).
struct AtomProduct {
  AtomFactor factor;
  double log_z = 0.0;
};

AtomProduct atom_product(const std::vector<AtomFactor>& factors) {
  AtomProduct out{factors.front(), 0.0};
  Rng rng = make_rng(0);
  for (std::size_t i = 1; i < factors.size(); ++i) {
    if (const auto* p = std::get_if<CategoricalFactor>(&out.factor)) {
      const Eigen::VectorXd pq = p->cwiseProduct(std::get<CategoricalFactor>(factors[i]));
      const double c = pq.sum();
      if (!(c > 0.0)) return {out.factor, kNegInf<double>};
      out.log_z += std::log(c);
      out.factor = CategoricalFactor(pq / c);
    } else {
      const KdeProduct prod = kde_product(std::get<Kde>(out.factor), std::get<Kde>(factors[i]), 256, rng);
      out.log_z += prod.log_z;
      out.factor = prod.density;
    }
  }
  return out;
}

}  // namespace

double LiftedTarget::log_population_terms(const LatentState& s, int only) const {
  const auto& pots = model_.model.potentials;
  double out = 0.0;
  for (const Atom& atom : model_.model.atoms) {
    const int n = population_.at(atom.name);
    if (n == 0) continue;
    if (only >= 0 && !pots[static_cast<std::size_t>(only)].has_atom(atom.name)) continue;
    std::vector<AtomFactor> factors;
    for (std::size_t p = 0; p < pots.size(); ++p) {
      const int a = pots[p].mixture.atom_index(atom.name);
      if (a >= 0) factors.push_back(effective_factor(static_cast<int>(p), a, s.component[p], s));
    }
    if (factors.size() < 2) continue;
    const double lz = atom_product(factors).log_z;
    if (!(lz > kNegInf<double>)) return kNegInf<double>;
    out += n * lz;
  }
  return out;
}

Eigen::VectorXd LiftedTarget::component_conditional(int p, const LatentState& s) const {
  const int k = model_.model.potentials[static_cast<std::size_t>(p)].mixture.k();
  Eigen::VectorXd logp(k);
  LatentState t = s;
  for (int l = 0; l < k; ++l) {
    ++mcmc_counters().conditional_evaluations;
    t.component[static_cast<std::size_t>(p)] = l;
    logp(l) = log_weight(p, l, t) + log_obs_term(p, l, t) + log_component_coupling(p, l, t) + log_population_terms(t, p);
  }
  const double z = log_sum_exp(logp);
  if (!std::isfinite(z)) throw ComputationError("all conditional weights are zero; observations are inconsistent");
  return (logp.array() - z).exp().matrix();
}

double LiftedTarget::latent_log_conditional(int j, double x, const LatentState& s) const {
  ++mcmc_counters().conditional_evaluations;
  const auto& l = model_.latents[static_cast<std::size_t>(j)];
  if (x < l.lo || x > l.hi) return kNegInf<double>;
  LatentState t = s;
  t.value[static_cast<std::size_t>(j)] = x;
  double out = log_gaussian_couplings(j, x, t);
  for (int p : rate_potentials(j)) out += log_obs_term(p, 0, t) + log_population_terms(t, p);
  for (int p : weight_potentials(j)) out += log_weight(p, t.component[static_cast<std::size_t>(p)], t);
  return out;
}

LatentState LiftedTarget::initial_state() const {
  LatentState s;
  for (const auto& p : model_.model.potentials) {
    Eigen::Index best;
    p.mixture.weights().maxCoeff(&best);
    s.component.push_back(static_cast<int>(best));
  }
  for (const auto& l : model_.latents) s.value.push_back(0.5 * (l.lo + l.hi));
  for (int p : free_potentials_) {
    if (weight_of_potential_[static_cast<std::size_t>(p)] >= 0) s.component[static_cast<std::size_t>(p)] = 0;
  }
  return s;
}

namespace {

Eigen::VectorXd predictive_of(const AtomFactor& f, const ChainQuery& q) {
  if (const auto* p = std::get_if<CategoricalFactor>(&f)) return *p;
  const double c = kde_cdf(std::get<Kde>(f), q.threshold);
  return Eigen::Vector2d(c, 1.0 - c);
}

}  // namespace

Eigen::VectorXd LiftedTarget::query_estimate(const ChainQuery& q, const LatentState& s) const {
  const auto& pots = model_.model.potentials;
  std::vector<int> holders;
  for (std::size_t p = 0; p < pots.size(); ++p) {
    if (pots[p].has_atom(q.atom)) holders.push_back(static_cast<int>(p));
  }
  if (holders.empty()) {
    const Atom& a = model_.model.atom(q.atom);
    if (!a.domain.is_discrete()) throw DomainError("query atom " + q.atom + " has no potential");
    return Eigen::VectorXd::Constant(a.domain.value_count(), 1.0 / a.domain.value_count());
  }
  auto predictive = [&](const LatentState& t) {
    std::vector<AtomFactor> factors;
    for (int p : holders) {
      const int a = pots[static_cast<std::size_t>(p)].mixture.atom_index(q.atom);
      factors.push_back(effective_factor(p, a, t.component[static_cast<std::size_t>(p)], t));
    }
    return predictive_of(atom_product(factors).factor, q);
  };
  for (int p : holders) {
    if (pots[static_cast<std::size_t>(p)].mixture.k() < 2) continue;
    const Eigen::VectorXd cond = component_conditional(p, s);
    LatentState t = s;
    Eigen::VectorXd out;
    for (Eigen::Index l = 0; l < cond.size(); ++l) {
      t.component[static_cast<std::size_t>(p)] = static_cast<int>(l);
      const Eigen::VectorXd pr = predictive(t);
      out = l == 0 ? Eigen::VectorXd(cond(l) * pr) : Eigen::VectorXd(out + cond(l) * pr);
    }
    return out;
  }
  return predictive(s);
}

// --- samplers ------------------------------------------------------------------

namespace {

template <typename LogF>
double slice_sample(const LogF& logf, double x0, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double f0 = logf(x0);
  const double y = f0 + std::log(unif(rng));
  const double w = (hi - lo) / 10.0;
  double l = x0 - w * unif(rng);
  double r = l + w;
  for (int i = 0; i < 20 && l > lo && logf(l) > y; ++i) l -= w;
  for (int i = 0; i < 20 && r < hi && logf(r) > y; ++i) r += w;
  l = std::max(l, lo);
  r = std::min(r, hi);
  for (int i = 0; i < 200; ++i) {
    const double x = l + (r - l) * unif(rng);
    if (logf(x) > y) return x;
    if (x < x0) {
      l = x;
    } else {
      r = x;
    }
  }
  return x0;
}

int sample_index(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    u -= probs(i);
    if (u <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

void update_latent(const LiftedTarget& target, int which, LatentState& s, Rng& rng) {
  const auto& free = target.free_potentials();
  if (which < static_cast<int>(free.size())) {
    const int p = free[static_cast<std::size_t>(which)];
    s.component[static_cast<std::size_t>(p)] = sample_index(target.component_conditional(p, s), rng);
    return;
  }
  const int j = which - static_cast<int>(free.size());
  const auto& l = target.model().latents[static_cast<std::size_t>(j)];
  s.value[static_cast<std::size_t>(j)] = slice_sample(
      [&](double x) { return target.latent_log_conditional(j, x, s); }, s.value[static_cast<std::size_t>(j)], l.lo,
      l.hi, rng);
}

using Clock = std::chrono::steady_clock;

struct Accumulator {
  Eigen::VectorXd sum;
  Eigen::VectorXd first_half;
  Eigen::VectorXd second_half;
  int count = 0;
  int half = 0;

  void add(const Eigen::VectorXd& v) {
    if (sum.size() == 0) {
      sum = Eigen::VectorXd::Zero(v.size());
      first_half = sum;
      second_half = sum;
    }
    sum += v;
    (count < half ? first_half : second_half) += v;
    ++count;
  }
};

void finish(ChainResult& r, const Accumulator& acc, int steps, double total_us) {
  r.estimate = acc.count > 0 ? Eigen::VectorXd(acc.sum / acc.count) : Eigen::VectorXd();
  r.step_time_us = steps > 0 ? total_us / steps : 0.0;
  const int h1 = std::min(acc.half, acc.count);
  const int h2 = acc.count - h1;
  if (h1 > 0 && h2 > 0) r.split_disagreement = std::abs(acc.first_half(0) / h1 - acc.second_half(0) / h2);
}

void check_options(const McmcOptions& o) {
  if (o.steps <= o.burn_in || o.burn_in < 0) throw DomainError("mcmc: need steps > burn_in >= 0");
  if (o.record_every < 1) throw DomainError("mcmc: record_every must be >= 1");
}

}  // namespace

LatentState lifted_gibbs_step(const LiftedTarget& target, const LatentState& state, Rng& rng) {
  LatentState s = state;
  const int n = target.latent_count();
  if (n == 0) return s;
  std::uniform_int_distribution<int> pick(0, n - 1);
  update_latent(target, pick(rng), s, rng);
  return s;
}

ChainResult run_lifted_mcmc(const LatentModel& model, const ChainQuery& query, const std::vector<Observation>& obs,
                            const McmcOptions& options) {
  check_options(options);
  const LiftedTarget target(model, obs);
  target.model().model.atom(query.atom);
  Rng rng = make_rng(derive_seed(options.seed, "lifted_mcmc"));
  LatentState s = target.initial_state();
  ChainResult r;
  r.seed = options.seed;
  r.selections.assign(static_cast<std::size_t>(target.latent_count()), 0);
  Accumulator acc;
  acc.half = (options.steps - options.burn_in) / 2;
  const int n = target.latent_count();
  std::uniform_int_distribution<int> pick(0, std::max(0, n - 1));
  double total_us = 0.0;
  auto block_start = Clock::now();
  for (int t = 0; t < options.steps; ++t) {
    if (n > 0) {
      if (options.systematic) {
        for (int w = 0; w < n; ++w) {
          update_latent(target, w, s, rng);
          ++r.selections[static_cast<std::size_t>(w)];
        }
      } else {
        const int w = pick(rng);
        update_latent(target, w, s, rng);
        ++r.selections[static_cast<std::size_t>(w)];
      }
    }
    if (t >= options.burn_in) acc.add(target.query_estimate(query, s));
    if (options.keep_trace) r.trace.push_back(s);
    if ((t + 1) % options.record_every == 0 || t + 1 == options.steps) {
      const auto now = Clock::now();
      const double us = std::chrono::duration<double, std::micro>(now - block_start).count();
      const int len = (t + 1) % options.record_every == 0 ? options.record_every : (t + 1) % options.record_every;
      r.block_step_time_us.push_back(us / len);
      total_us += us;
      if (acc.count > 0) r.running_estimate.emplace_back(acc.count, acc.sum(0) / acc.count);
      block_start = Clock::now();
    }
  }
  finish(r, acc, options.steps, total_us);
  return r;
}

ChainResult run_ground_mcmc(const LatentModel& model, const ChainQuery& query, const std::vector<Observation>& obs,
                            const McmcOptions& options) {
  check_options(options);
  const LiftedTarget target(model, obs);
  const auto& vm = target.model().model;
  const auto& pots = vm.potentials;
  const Atom& qatom = vm.atom(query.atom);

  // Ground rvs: observed values (fixed) and unobserved values (sampled).
  std::map<std::string, std::vector<double>> observed;
  std::map<std::string, Eigen::VectorXd> free;
  long long total = 0;
  for (const Atom& a : vm.atoms) {
    observed[a.name];
    free[a.name] = Eigen::VectorXd::Zero(target.population().at(a.name));
    total += a.population;
  }
  if (total > options.population_cap) throw CapacityError("ground mcmc: population cap exceeded");
  for (const Observation& o : obs) {
    auto& v = observed[o.atom];
    for (std::size_t val = 0; val < o.counts.size(); ++val) v.insert(v.end(), o.counts[val], static_cast<double>(val));
    v.insert(v.end(), o.values.begin(), o.values.end());
  }
  if (free[query.atom].size() == 0) throw DomainError("ground mcmc: every rv of " + query.atom + " is observed");

  Rng rng = make_rng(derive_seed(options.seed, "ground_mcmc"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  LatentState s = target.initial_state();
  ChainResult r;
  r.seed = options.seed;
  r.selections.assign(static_cast<std::size_t>(target.latent_count()), 0);
  Accumulator acc;
  acc.half = (options.steps - options.burn_in) / 2;

  auto sample_rvs = [&](const Atom& atom) {
    Eigen::VectorXd& x = free[atom.name];
    if (x.size() == 0) return;
    std::vector<AtomFactor> factors;
    for (std::size_t p = 0; p < pots.size(); ++p) {
      const int a = pots[p].mixture.atom_index(atom.name);
      if (a >= 0) factors.push_back(target.effective_factor(static_cast<int>(p), a, s.component[p], s));
    }
    if (factors.empty()) {
      if (!atom.domain.is_discrete()) throw DomainError("ground mcmc: continuous atom " + atom.name + " has no potential");
      factors.emplace_back(CategoricalFactor(
          Eigen::VectorXd::Constant(atom.domain.value_count(), 1.0 / atom.domain.value_count())));
    }
    const AtomFactor f = atom_product(factors).factor;
    if (const auto* p = std::get_if<CategoricalFactor>(&f)) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = sample_index(*p, rng);
      return;
    }
    const Kde& kde = std::get<Kde>(f);
    const Eigen::VectorXd cw = kde.center_weights();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const int c = kde.size() == 1 ? 0 : sample_index(cw, rng);
      x(i) = kde.centers()(c) + kde.bandwidth() * gauss(rng);
    }
  };

  // Log-likelihood of the sampled rvs of atom under one factor.
  auto free_loglik = [&](const AtomFactor& f, const Eigen::VectorXd& x) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) out += log_factor_value(f, x(i));
    return out;
  };

  const auto& fp = target.free_potentials();
  double total_us = 0.0;
  auto block_start = Clock::now();
  for (int t = 0; t < options.steps; ++t) {
    for (const Atom& a : vm.atoms) sample_rvs(a);
    // Mixture indices given every ground rv.
    for (std::size_t w = 0; w < fp.size(); ++w) {
      const int p = fp[w];
      const KdeMixture& m = pots[static_cast<std::size_t>(p)].mixture;
      Eigen::VectorXd logp(m.k());
      for (int l = 0; l < m.k(); ++l) {
        ++mcmc_counters().conditional_evaluations;
        double lp = target.log_weight(p, l, s) + target.log_obs_term(p, l, s) + target.log_component_coupling(p, l, s);
        for (std::size_t a = 0; a < m.atoms().size(); ++a) {
          lp += free_loglik(m.factor(l, static_cast<int>(a)), free[m.atoms()[a].name]);
        }
        logp(l) = lp;
      }
      const double z = log_sum_exp(logp);
      if (!std::isfinite(z)) throw ComputationError("all conditional weights are zero; observations are inconsistent");
      s.component[static_cast<std::size_t>(p)] = sample_index((logp.array() - z).exp().matrix(), rng);
      ++r.selections[w];
    }
    // Continuous latents given every ground rv.
    for (std::size_t j = 0; j < target.model().latents.size(); ++j) {
      const int jj = static_cast<int>(j);
      std::vector<std::pair<double, double>> counts;  // (zeros, ones) of each rate-bound atom
      const auto rate_pots = target.rate_potentials(jj);
      for (int p : rate_pots) {
        const std::string& name = pots[static_cast<std::size_t>(p)].atoms()[0].name;
        double ones = 0.0;
        for (double v : observed[name]) ones += v;
        ones += free[name].sum();
        const double all = static_cast<double>(observed[name].size()) + static_cast<double>(free[name].size());
        counts.emplace_back(all - ones, ones);
      }
      const auto weight_pots = target.weight_potentials(jj);
      const auto& lat = target.model().latents[j];
      auto logf = [&](double x) {
        ++mcmc_counters().conditional_evaluations;
        if (x < lat.lo || x > lat.hi) return kNegInf<double>;
        double out = target.log_gaussian_couplings(jj, x, s);
        for (const auto& [zeros, ones] : counts) {
          if (ones > 0) out += x > 0.0 ? ones * std::log(x) : kNegInf<double>;
          if (zeros > 0) out += x < 1.0 ? zeros * std::log1p(-x) : kNegInf<double>;
        }
        LatentState u = s;
        u.value[j] = x;
        for (int p : weight_pots) out += target.log_weight(p, s.component[static_cast<std::size_t>(p)], u);
        return out;
      };
      s.value[j] = slice_sample(logf, s.value[j], lat.lo, lat.hi, rng);
      ++r.selections[fp.size() + j];
    }
    if (t >= options.burn_in) {
      const double x = free[query.atom](0);
      if (qatom.domain.is_discrete()) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(qatom.domain.value_count());
        e(static_cast<Eigen::Index>(x)) = 1.0;
        acc.add(e);
      } else {
        acc.add(x <= query.threshold ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0));
      }
    }
    if (options.keep_trace) r.trace.push_back(s);
    if ((t + 1) % options.record_every == 0 || t + 1 == options.steps) {
      const auto now = Clock::now();
      const double us = std::chrono::duration<double, std::micro>(now - block_start).count();
      const int len = (t + 1) % options.record_every == 0 ? options.record_every : (t + 1) % options.record_every;
      r.block_step_time_us.push_back(us / len);
      total_us += us;
      if (acc.count > 0) r.running_estimate.emplace_back(acc.count, acc.sum(0) / acc.count);
      block_start = Clock::now();
    }
  }
  finish(r, acc, options.steps, total_us);
  return r;
}

// --- job / house model ---------------------------------------------------------

LatentModel make_job_house_model(const JobHouseParams& params) {
  const Atom job{"Job", AtomDomain::binary(), params.people};
  const Atom hp{"HP", AtomDomain::continuous(), params.houses};
  LatentModel lm;
  lm.model.atoms = {job, hp};
  lm.model.population = {{"Job", params.people}, {"HP", params.houses}};
  lm.model.potentials.push_back(
      {"phi_job", to_kde_mixture(MixtureOfIidDiscrete::binary(job, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 0.5))), 0.0});
  lm.model.potentials.push_back(
      {"phi_hp",
       KdeMixture({hp}, Eigen::Vector2d(0.5, 0.5),
                  {{Kde::gaussian(params.mu_down, params.sd_down)}, {Kde::gaussian(params.mu_up, params.sd_up)}}),
       0.0});
  lm.latents = {{"p_job", 0.0, 1.0}, {"p_D", 0.0, 1.0}};
  lm.rates = {{"p_job", "phi_job"}};
  lm.weight_bindings = {{"p_D", "phi_hp"}};
  lm.gaussian_couplings = {{"p_job", "p_D", 0.0, params.sd_coupling * params.sd_coupling}};
  lm.validate();
  return lm;
}

std::vector<Observation> job_house_observations(const JobHouseParams& params) {
  std::vector<Observation> obs;
  obs.push_back({"Job", {params.observed_unemployed, params.observed_employed}, {}});
  if (!params.observed_prices.empty()) obs.push_back({"HP", {}, params.observed_prices});
  return obs;
}

}  // namespace lrvi
