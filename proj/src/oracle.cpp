#include "lrvi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lrvi/errors.hpp"

namespace lrvi {

namespace {

constexpr double kNegInfD = -std::numeric_limits<double>::infinity();

// Local arithmetic, kept apart from distributions.hpp on purpose.
double lfact(int n) { return std::lgamma(n + 1.0); }

double coef_log(const Histogram& h) {
  int n = 0;
  double out = 0.0;
  for (int c : h.counts) {
    n += c;
    out -= lfact(c);
  }
  return out + lfact(n);
}

double pow_log(double p, int c) {
  if (c == 0) return 0.0;
  if (p <= 0.0) return kNegInfD;
  return c * std::log(p);
}

double lse(const std::vector<double>& x) {
  double m = kNegInfD;
  for (double v : x) m = std::max(m, v);
  if (m == kNegInfD) return kNegInfD;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double gauss_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double gauss_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); }

std::vector<Atom> atoms_of(const Potential& p) {
  return std::visit(
      [](const auto& v) -> std::vector<Atom> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ParametricDensity>) {
          throw DomainError("oracle: parametric potentials need ground enumeration");
        } else {
          return v.atoms();
        }
      },
      p);
}

// Log of the potential on one ground valuation with histogram tuple `key`.
double valuation_log(const Potential& p, const HistKey& key) {
  if (const auto* t = std::get_if<HistTable>(&p)) {
    double v = t->log_value(key);
    if (t->measure() == TableMeasure::kHistogram) {
      for (const Histogram& h : key) v -= coef_log(h);
    }
    return v;
  }
  std::vector<double> terms;
  if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&p)) {
    for (int l = 0; l < m->k(); ++l) {
      double t = std::log(m->weights()(l));
      for (std::size_t a = 0; a < key.size(); ++a) {
        for (std::size_t v = 0; v < key[a].counts.size(); ++v) {
          t += pow_log(m->params(static_cast<int>(a))(l, static_cast<Eigen::Index>(v)), key[a].counts[v]);
        }
      }
      terms.push_back(t);
    }
    return lse(terms);
  }
  if (const auto* m = std::get_if<KdeMixture>(&p)) {
    for (int l = 0; l < m->k(); ++l) {
      double t = std::log(m->weights()(l));
      for (std::size_t a = 0; a < key.size(); ++a) {
        const auto* f = std::get_if<CategoricalFactor>(&m->factor(l, static_cast<int>(a)));
        if (f == nullptr) throw DomainError("oracle: continuous factor in a discrete computation");
        for (std::size_t v = 0; v < key[a].counts.size(); ++v) {
          t += pow_log((*f)(static_cast<Eigen::Index>(v)), key[a].counts[v]);
        }
      }
      terms.push_back(t);
    }
    return lse(terms);
  }
  throw DomainError("oracle: parametric potentials need ground enumeration");
}

// Union of atom tuples, checking that equal names mean equal atoms.
void merge_atoms(std::vector<Atom>& into, const std::vector<Atom>& atoms) {
  for (const Atom& a : atoms) {
    const auto it = std::find_if(into.begin(), into.end(), [&](const Atom& b) { return b.name == a.name; });
    if (it == into.end()) {
      into.push_back(a);
    } else if (!(*it == a)) {
      throw ArityError("oracle: atom " + a.name + " declared with two different shapes");
    }
  }
}

std::vector<int> positions(const std::vector<Atom>& sub, const std::vector<Atom>& all) {
  std::vector<int> out;
  for (const Atom& a : sub) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const Atom& b) { return b.name == a.name; });
    out.push_back(static_cast<int>(it - all.begin()));
  }
  return out;
}

HistKey project(const HistKey& key, const std::vector<int>& pos) {
  HistKey out;
  out.reserve(pos.size());
  for (int i : pos) out.push_back(key[static_cast<std::size_t>(i)]);
  return out;
}

double key_count(const std::vector<Atom>& atoms) {
  double n = 1.0;
  for (const Atom& a : atoms) {
    const int d = a.domain.value_count();
    n *= std::exp(std::lgamma(a.population + d) - std::lgamma(a.population + 1.0) - std::lgamma(d));
  }
  return n;
}

std::vector<HistKey> all_keys(const std::vector<Atom>& atoms) {
  std::vector<std::pair<int, int>> shape;
  for (const Atom& a : atoms) shape.emplace_back(a.population, a.domain.value_count());
  return enumerate_hist_keys(shape);
}

ExactTable normalized(std::vector<Atom> atoms, const std::map<HistKey, double>& log_mass) {
  std::vector<double> all;
  for (const auto& [k, v] : log_mass) all.push_back(v);
  const double z = lse(all);
  if (!std::isfinite(z)) throw ComputationError("oracle: the joint has zero mass");
  ExactTable t;
  t.atoms = std::move(atoms);
  t.log_z = z;
  for (const auto& [k, v] : log_mass) {
    if (v > kNegInfD) t.prob[k] = std::exp(v - z);
  }
  return t;
}

bool histogram_enumerable(const Rhm& model) {
  for (const Parfactor& g : model.parfactors()) {
    if (std::holds_alternative<ParametricDensity>(g.potential)) return false;
    for (const AtomArg& a : g.args) {
      if (a.kind != ArgKind::kPopulation) return false;
    }
  }
  return true;
}

ExactTable enumerate_histograms_joint(const Rhm& model, const EnumerateOptions& options) {
  const auto& atoms = model.atoms();
  if (key_count(atoms) > static_cast<double>(options.max_states)) {
    throw CapacityError("enumerate_joint: histogram state count exceeds the cap");
  }
  std::vector<std::vector<int>> pos;
  std::vector<double> reps;
  for (const Parfactor& g : model.parfactors()) {
    pos.push_back(positions(model.parfactor_atoms(g), atoms));
    double r = 1.0;
    for (const LogicalVar& v : g.params) r *= v.size();
    reps.push_back(r);
  }
  std::map<HistKey, double> mass;
  for (const HistKey& key : all_keys(atoms)) {
    double v = 0.0;
    for (const Histogram& h : key) v += coef_log(h);
    for (std::size_t g = 0; g < pos.size() && v > kNegInfD; ++g) {
      const double f = valuation_log(model.parfactors()[g].potential, project(key, pos[g]));
      v = f == kNegInfD ? kNegInfD : v + reps[g] * f;
    }
    mass[key] = v;
  }
  return normalized(atoms, mass);
}

ExactTable enumerate_ground_joint(const Rhm& model, const EnumerateOptions& options) {
  const auto& atoms = model.atoms();
  double states = 1.0;
  int rvs = 0;
  for (const Atom& a : atoms) {
    states *= std::pow(static_cast<double>(a.domain.value_count()), a.population);
    rvs += a.population;
  }
  if (states > static_cast<double>(options.max_states)) throw CapacityError("enumerate_joint: state count exceeds the cap");
  std::vector<int> digits(static_cast<std::size_t>(rvs), 0);
  std::map<HistKey, std::vector<double>> parts;
  Valuation v;
  for (const Atom& a : atoms) v.values[a.name] = Eigen::VectorXd::Zero(a.population);
  while (true) {
    int i = 0;
    HistKey key;
    for (const Atom& a : atoms) {
      Eigen::VectorXd& x = v.values[a.name];
      Histogram h{std::vector<int>(static_cast<std::size_t>(a.domain.value_count()), 0)};
      for (int r = 0; r < a.population; ++r, ++i) {
        x(r) = digits[static_cast<std::size_t>(i)];
        ++h.counts[static_cast<std::size_t>(digits[static_cast<std::size_t>(i)])];
      }
      key.push_back(std::move(h));
    }
    parts[key].push_back(log_joint_unnormalized(model, v));
    // Odometer increment.
    int pos = 0;
    i = 0;
    bool done = true;
    for (const Atom& a : atoms) {
      for (int r = 0; r < a.population; ++r, ++pos) {
        int& d = digits[static_cast<std::size_t>(pos)];
        if (++d < a.domain.value_count()) {
          done = false;
          break;
        }
        d = 0;
      }
      if (!done) break;
    }
    if (done) break;
  }
  std::map<HistKey, double> mass;
  for (const auto& [k, vals] : parts) mass[k] = lse(vals);
  return normalized(atoms, mass);
}

}  // namespace

double ExactTable::probability(const HistKey& key) const {
  const auto it = prob.find(key);
  return it == prob.end() ? 0.0 : it->second;
}

double ExactTable::total() const {
  if (is_grid()) return density.dot(volume);
  double s = 0.0;
  for (const auto& [k, p] : prob) s += p;
  return s;
}

void ExactTable::validate() const {
  if (is_grid()) {
    if ((density.array() < 0.0).any()) throw DomainError("ExactTable: negative density");
  } else {
    for (const auto& [k, p] : prob) {
      if (p < 0.0) throw DomainError("ExactTable: negative probability");
    }
  }
  if (std::abs(total() - 1.0) > 1e-9) throw DomainError("ExactTable: not normalized");
}

ExactTable enumerate_joint(const Rhm& model, const EnumerateOptions& options) {
  model.validate();
  for (const Atom& a : model.atoms()) {
    if (!a.domain.is_discrete()) throw DomainError("enumerate_joint: continuous atom " + a.name);
  }
  if (histogram_enumerable(model)) return enumerate_histograms_joint(model, options);
  return enumerate_ground_joint(model, options);
}

ExactTable exact_marginal(const ExactTable& table, const std::vector<std::string>& query) {
  if (table.is_grid()) throw DomainError("exact_marginal: grid tables are not supported");
  std::vector<Atom> keep;
  std::vector<int> pos;
  for (const std::string& q : query) {
    const auto it =
        std::find_if(table.atoms.begin(), table.atoms.end(), [&](const Atom& a) { return a.name == q; });
    if (it == table.atoms.end()) throw DomainError("exact_marginal: unknown atom " + q);
    keep.push_back(*it);
    pos.push_back(static_cast<int>(it - table.atoms.begin()));
  }
  ExactTable out;
  out.atoms = keep;
  out.log_z = table.log_z;
  for (const auto& [k, p] : table.prob) out.prob[project(k, pos)] += p;
  return out;
}

Eigen::VectorXd marginal_vector(const ExactTable& table, const std::string& atom) {
  const ExactTable m = exact_marginal(table, {atom});
  const Atom& a = m.atoms.front();
  const auto hists = enumerate_histograms(a.population, a.domain.value_count());
  Eigen::VectorXd out(static_cast<Eigen::Index>(hists.size()));
  for (std::size_t i = 0; i < hists.size(); ++i) out(static_cast<Eigen::Index>(i)) = m.probability({hists[i]});
  return out;
}

HistTable exact_eliminate_histogram(const std::vector<Potential>& potentials, const std::string& atom,
                                    EliminationRule rule, const EnumerateOptions& options) {
  std::vector<Atom> all;
  std::vector<std::vector<Atom>> pot_atoms;
  for (const Potential& p : potentials) {
    pot_atoms.push_back(atoms_of(p));
    merge_atoms(all, pot_atoms.back());
  }
  const auto it = std::find_if(all.begin(), all.end(), [&](const Atom& a) { return a.name == atom; });
  if (it == all.end()) throw DomainError("exact_eliminate_histogram: no potential mentions " + atom);
  const Atom target = *it;
  if (!target.domain.is_discrete()) throw DomainError("exact_eliminate_histogram: continuous atom " + atom);
  all.erase(it);
  std::vector<Atom> rest = all;
  all.push_back(target);
  if (key_count(all) > static_cast<double>(options.max_states)) {
    throw CapacityError("exact_eliminate_histogram: state count exceeds the cap");
  }
  std::vector<std::vector<int>> pos;
  for (const auto& a : pot_atoms) pos.push_back(positions(a, all));

  const auto hy = enumerate_histograms(target.population, target.domain.value_count());
  HistTable out(rest, rule == EliminationRule::kGround ? TableMeasure::kValuation : TableMeasure::kHistogram);
  std::vector<double> terms;
  for (const HistKey& rkey : all_keys(rest)) {
    terms.clear();
    HistKey key = rkey;
    key.push_back(Histogram{});
    for (const Histogram& h : hy) {
      key.back() = h;
      double t = rule == EliminationRule::kGround ? coef_log(h) : 0.0;
      for (std::size_t g = 0; g < potentials.size() && t > kNegInfD; ++g) {
        const HistKey sub = project(key, pos[g]);
        double f = valuation_log(potentials[g], sub);
        if (rule == EliminationRule::kPointwise && f > kNegInfD) {
          for (const Histogram& s : sub) f += coef_log(s);
        }
        t = f == kNegInfD ? kNegInfD : t + f;
      }
      terms.push_back(t);
    }
    const double v = lse(terms);
    if (v > kNegInfD) out.set_log(rkey, v);
  }
  return out;
}

ExactTable exact_histogram_marginal(const std::vector<Potential>& potentials, const std::vector<std::string>& query,
                                    EliminationRule rule, const EnumerateOptions& options) {
  std::vector<Potential> pots = potentials;
  std::vector<Atom> all;
  for (const Potential& p : pots) merge_atoms(all, atoms_of(p));
  for (const std::string& q : query) {
    if (std::none_of(all.begin(), all.end(), [&](const Atom& a) { return a.name == q; })) {
      throw DomainError("exact_histogram_marginal: unknown atom " + q);
    }
  }
  std::vector<Atom> pending;
  for (const Atom& a : all) {
    if (std::find(query.begin(), query.end(), a.name) == query.end()) pending.push_back(a);
  }
  // Greedy order: next eliminate the atom whose combined table is smallest.
  const auto scope_size = [&](const Atom& a) {
    std::vector<Atom> scope;
    for (const Potential& p : pots) {
      const auto pa = atoms_of(p);
      if (std::any_of(pa.begin(), pa.end(), [&](const Atom& b) { return b.name == a.name; })) merge_atoms(scope, pa);
    }
    return key_count(scope);
  };
  while (!pending.empty()) {
    const auto next = std::min_element(pending.begin(), pending.end(), [&](const Atom& l, const Atom& r) {
      return scope_size(l) < scope_size(r);
    });
    const Atom a = *next;
    pending.erase(next);
    std::vector<Potential> with;
    std::vector<Potential> without;
    for (Potential& p : pots) {
      const auto pa = atoms_of(p);
      const bool has = std::any_of(pa.begin(), pa.end(), [&](const Atom& b) { return b.name == a.name; });
      (has ? with : without).push_back(std::move(p));
    }
    without.emplace_back(exact_eliminate_histogram(with, a.name, rule, options));
    pots = std::move(without);
  }
  // Multiply what is left over the query atoms.
  std::vector<Atom> qatoms;
  for (const std::string& q : query) {
    qatoms.push_back(*std::find_if(all.begin(), all.end(), [&](const Atom& a) { return a.name == q; }));
  }
  if (key_count(qatoms) > static_cast<double>(options.max_states)) {
    throw CapacityError("exact_histogram_marginal: state count exceeds the cap");
  }
  std::map<HistKey, double> mass;
  for (const HistKey& key : all_keys(qatoms)) {
    double v = 0.0;
    if (rule == EliminationRule::kGround) {
      for (const Histogram& h : key) v += coef_log(h);
    }
    for (const Potential& p : pots) {
      if (v == kNegInfD) break;
      const auto pa = atoms_of(p);
      const HistKey sub = project(key, positions(pa, qatoms));
      double f = valuation_log(p, sub);
      if (rule == EliminationRule::kPointwise && f > kNegInfD) {
        for (const Histogram& s : sub) f += coef_log(s);
      }
      v = f == kNegInfD ? kNegInfD : v + f;
    }
    mass[key] = v;
  }
  return normalized(qatoms, mass);
}

ExactTable normalize_table(const HistTable& table) {
  std::map<HistKey, double> mass;
  for (const auto& [k, v] : table.log_entries()) {
    double m = v;
    if (table.measure() == TableMeasure::kValuation) {
      for (const Histogram& h : k) m += coef_log(h);
    }
    mass[k] = m;
  }
  return normalized(table.atoms(), mass);
}

namespace {

ExactTable quadrature_at(const GridFunction& f, const std::vector<Interval>& ranges, int points) {
  ExactTable t;
  for (const Interval& r : ranges) t.axes.push_back(Eigen::VectorXd::LinSpaced(points, r.lo, r.hi));
  std::vector<Eigen::VectorXd> w;
  for (const Interval& r : ranges) {
    Eigen::VectorXd wi = Eigen::VectorXd::Constant(points, (r.hi - r.lo) / (points - 1));
    wi(0) *= 0.5;
    wi(points - 1) *= 0.5;
    w.push_back(wi);
  }
  const Eigen::Index n1 = ranges.size() == 2 ? points : 1;
  t.density.resize(points * n1);
  t.volume.resize(points * n1);
  double x[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < points; ++i) {
    x[0] = t.axes[0](i);
    for (Eigen::Index j = 0; j < n1; ++j) {
      if (n1 > 1) x[1] = t.axes[1](j);
      const double v = f(std::span<const double>(x, ranges.size()));
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("grid_quadrature: integrand must be finite and >= 0");
      t.density(i * n1 + j) = v;
      t.volume(i * n1 + j) = w[0](i) * (n1 > 1 ? w[1](j) : 1.0);
    }
  }
  const double z = t.density.dot(t.volume);
  if (!(z > 0.0)) throw ComputationError("grid_quadrature: integral is zero");
  t.log_z = std::log(z);
  t.density /= z;
  return t;
}

}  // namespace

ExactTable grid_quadrature(const GridFunction& f, const GridSpec& spec) {
  if (spec.ranges.empty() || spec.ranges.size() > 2) throw CapacityError("grid_quadrature: needs 1 or 2 rvs");
  for (const Interval& r : spec.ranges) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.lo < r.hi)) {
      throw DomainError("grid_quadrature: every rv needs a bounded interval");
    }
  }
  if (spec.points < 2) throw DomainError("grid_quadrature: need at least 2 points per axis");
  ExactTable t = quadrature_at(f, spec.ranges, spec.points);
  if (!spec.check_refinement) return t;
  int points = spec.points;
  while (true) {
    const int finer = 2 * points - 1;
    if (finer > spec.max_points) throw ComputationError("grid_quadrature: refinement did not converge");
    ExactTable u = quadrature_at(f, spec.ranges, finer);
    const double change = std::abs(std::exp(u.log_z - t.log_z) - 1.0);
    if (change < spec.refinement_tol) return u;
    t = std::move(u);
    points = finer;
  }
}

double grid_density(const ExactTable& table, std::span<const double> x) {
  if (!table.is_grid() || x.size() != table.axes.size()) throw DomainError("grid_density: dimension mismatch");
  auto locate = [](const Eigen::VectorXd& ax, double v, Eigen::Index& i, double& frac) {
    const Eigen::Index n = ax.size();
    if (v < ax(0) || v > ax(n - 1)) return false;
    const double step = (ax(n - 1) - ax(0)) / static_cast<double>(n - 1);
    i = std::min<Eigen::Index>(static_cast<Eigen::Index>((v - ax(0)) / step), n - 2);
    frac = (v - ax(i)) / step;
    return true;
  };
  Eigen::Index i = 0;
  double fi = 0.0;
  if (!locate(table.axes[0], x[0], i, fi)) return 0.0;
  if (x.size() == 1) return (1.0 - fi) * table.density(i) + fi * table.density(i + 1);
  Eigen::Index j = 0;
  double fj = 0.0;
  if (!locate(table.axes[1], x[1], j, fj)) return 0.0;
  const Eigen::Index n1 = table.axes[1].size();
  auto at = [&](Eigen::Index a, Eigen::Index b) { return table.density(a * n1 + b); };
  return (1 - fi) * (1 - fj) * at(i, j) + fi * (1 - fj) * at(i + 1, j) + (1 - fi) * fj * at(i, j + 1) +
         fi * fj * at(i + 1, j + 1);
}

JobHouseReference job_house_exact(const JobHouseParams& params, int grid_points) {
  // Latents t (employment rate) and d (weight of the "down" component), both
  // uniform on [0, 1], tied by f_N(t - d; 0, sd^2). Employment counts enter as
  // t^e (1 - t)^u; the shared price component L picks d or 1 - d.
  const int e = params.observed_employed;
  const int u = params.observed_unemployed;
  const double sc = params.sd_coupling;
  auto base_log = [&](double t, double d) {
    const double diff = (t - d) / sc;
    double v = -0.5 * diff * diff;
    v += e > 0 ? (t > 0.0 ? e * std::log(t) : kNegInfD) : 0.0;
    v += u > 0 ? (t < 1.0 ? u * std::log1p(-t) : kNegInfD) : 0.0;
    return v;
  };
  // Shift the log integrand by its maximum on the grid for stability.
  double shift = kNegInfD;
  for (int i = 0; i < grid_points; ++i) {
    for (int j = 0; j < grid_points; ++j) {
      shift = std::max(shift, base_log(i / (grid_points - 1.0), j / (grid_points - 1.0)));
    }
  }
  GridSpec spec;
  spec.ranges = {{0.0, 1.0}, {0.0, 1.0}};
  spec.points = grid_points;
  spec.check_refinement = false;
  const double down_w =
      std::exp(grid_quadrature([&](std::span<const double> x) { return std::exp(base_log(x[0], x[1]) - shift) * x[1]; },
                               spec)
                   .log_z);
  const double up_w = std::exp(
      grid_quadrature([&](std::span<const double> x) { return std::exp(base_log(x[0], x[1]) - shift) * (1.0 - x[1]); },
                      spec)
          .log_z);
  double lik_down = 1.0;
  double lik_up = 1.0;
  for (double x : params.observed_prices) {
    lik_down *= gauss_pdf(x, params.mu_down, params.sd_down);
    lik_up *= gauss_pdf(x, params.mu_up, params.sd_up);
  }
  JobHouseReference r;
  r.p_down = down_w * lik_down / (down_w * lik_down + up_w * lik_up);
  r.p_query = r.p_down * gauss_cdf(0.0, params.mu_down, params.sd_down) +
              (1.0 - r.p_down) * gauss_cdf(0.0, params.mu_up, params.sd_up);
  return r;
}

}  // namespace lrvi
