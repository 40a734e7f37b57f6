#include "lrvi/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"

namespace lrvi {

// --- HistTable ---------------------------------------------------------------

HistTable::HistTable(std::vector<Atom> atoms, TableMeasure measure) : atoms_(std::move(atoms)), measure_(measure) {
  for (const Atom& a : atoms_) {
    a.validate();
    if (!a.domain.is_discrete()) throw DomainError("HistTable over continuous atom " + a.name);
  }
}

void HistTable::check_key(const HistKey& key) const {
  if (key.size() != atoms_.size()) throw ArityError("HistTable: key arity does not match atom tuple");
  for (std::size_t a = 0; a < atoms_.size(); ++a) validate_histogram(key[a], atoms_[a]);
}

void HistTable::set(const HistKey& key, double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError("HistTable values must be finite and >= 0");
  set_log(key, value > 0.0 ? std::log(value) : kNegInf<double>);
}

void HistTable::set_log(const HistKey& key, double log_value) {
  check_key(key);
  if (std::isnan(log_value) || log_value == std::numeric_limits<double>::infinity()) {
    throw DomainError("HistTable log value must be finite or -inf");
  }
  entries_[key] = log_value;
}

double HistTable::log_value(const HistKey& key) const {
  check_key(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? kNegInf<double> : it->second;
}

double HistTable::value(const HistKey& key) const { return std::exp(log_value(key)); }

double HistTable::log_valuation_value(const HistKey& key) const {
  const double v = log_value(key);
  if (measure_ == TableMeasure::kValuation || v == kNegInf<double>) return v;
  double coef = 0.0;
  for (const Histogram& h : key) coef += log_multinomial_coefficient(h);
  return v - coef;
}

double HistTable::log_hist_mass(const HistKey& key) const {
  const double v = log_value(key);
  if (measure_ == TableMeasure::kHistogram || v == kNegInf<double>) return v;
  double coef = 0.0;
  for (const Histogram& h : key) coef += log_multinomial_coefficient(h);
  return v + coef;
}

void HistTable::validate() const {
  if (atoms_.empty()) throw DomainError("HistTable needs at least one atom");
  const bool any_positive =
      std::any_of(entries_.begin(), entries_.end(), [](const auto& e) { return e.second > kNegInf<double>; });
  if (!any_positive) throw DomainError("HistTable values are all zero");
}

// --- ParametricDensity -------------------------------------------------------

ParametricDensity::ParametricDensity(std::string form, Params params, std::vector<int> dims, std::vector<double> table)
    : form_(std::move(form)), params_(std::move(params)), dims_(std::move(dims)), table_(std::move(table)) {
  auto require = [&](std::initializer_list<const char*> names) {
    for (const char* n : names) param(n);
  };
  if (form_ == "gaussian") {
    require({"mean", "var"});
    if (!(param("var") > 0.0)) throw DomainError("gaussian: var must be positive");
  } else if (form_ == "linear_gaussian") {
    require({"mu", "var"});
    if (!(param("var") > 0.0)) throw DomainError("linear_gaussian: var must be positive");
  } else if (form_ == "ground_table") {
    if (dims_.empty()) throw ArityError("ground_table needs at least one dimension");
    std::size_t size = 1;
    for (int d : dims_) {
      if (d < 2) throw DomainError("ground_table dimensions must be >= 2");
      size *= static_cast<std::size_t>(d);
    }
    if (table_.size() != size) throw ArityError("ground_table: value count does not match dimensions");
    for (double v : table_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("ground_table values must be finite and >= 0");
    }
  } else if (form_ == "iid_gaussian_mixture") {
    require({"w", "mu1", "var1", "mu2", "var2"});
    const double w = param("w");
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("iid_gaussian_mixture: w must lie in [0, 1]");
    if (!(param("var1") > 0.0) || !(param("var2") > 0.0)) throw DomainError("iid_gaussian_mixture: variances must be positive");
  } else {
    throw DomainError("unknown parametric form '" + form_ + "'");
  }
}

ParametricDensity ParametricDensity::gaussian(double mean, double var) {
  return ParametricDensity("gaussian", {{"mean", mean}, {"var", var}});
}

ParametricDensity ParametricDensity::linear_gaussian(double mu, double var) {
  return ParametricDensity("linear_gaussian", {{"mu", mu}, {"var", var}});
}

ParametricDensity ParametricDensity::ground_table(std::vector<int> dims, std::vector<double> values) {
  return ParametricDensity("ground_table", {}, std::move(dims), std::move(values));
}

ParametricDensity ParametricDensity::iid_gaussian_mixture(double w, double mu1, double var1, double mu2, double var2) {
  return ParametricDensity("iid_gaussian_mixture",
                           {{"w", w}, {"mu1", mu1}, {"var1", var1}, {"mu2", mu2}, {"var2", var2}});
}

double ParametricDensity::param(std::string_view name) const {
  for (const auto& [k, v] : params_) {
    if (k == name) return v;
  }
  throw DomainError("parametric form '" + form_ + "' is missing parameter '" + std::string(name) + "'");
}

int ParametricDensity::arity() const {
  if (form_ == "linear_gaussian") return 2;
  if (form_ == "ground_table") return static_cast<int>(dims_.size());
  return -1;
}

double ParametricDensity::log_factor(std::span<const Eigen::VectorXd> args) const {
  if (arity() >= 0 && static_cast<int>(args.size()) != arity()) {
    throw ArityError("parametric form '" + form_ + "' expects " + std::to_string(arity()) + " arguments");
  }
  if (form_ == "gaussian") {
    const double mean = param("mean");
    const double var = param("var");
    double out = 0.0;
    for (const auto& a : args) {
      for (Eigen::Index i = 0; i < a.size(); ++i) out += log_normal_pdf(a(i), mean, var);
    }
    return out;
  }
  if (form_ == "linear_gaussian") {
    const double mu = param("mu");
    const double var = param("var");
    double out = 0.0;
    for (Eigen::Index i = 0; i < args[0].size(); ++i) {
      for (Eigen::Index j = 0; j < args[1].size(); ++j) out += log_normal_pdf(args[0](i) - args[1](j), mu, var);
    }
    return out;
  }
  if (form_ == "ground_table") {
    // Cartesian product over the values bound to each argument.
    std::vector<Eigen::Index> pos(args.size(), 0);
    for (const auto& a : args) {
      if (a.size() == 0) return 0.0;
    }
    double out = 0.0;
    while (true) {
      std::size_t flat = 0;
      for (std::size_t a = 0; a < args.size(); ++a) {
        const double x = args[a](pos[a]);
        if (x != std::floor(x) || x < 0 || x >= dims_[a]) throw DomainError("ground_table: value outside table");
        flat = flat * static_cast<std::size_t>(dims_[a]) + static_cast<std::size_t>(x);
      }
      const double v = table_[flat];
      if (v <= 0.0) return kNegInf<double>;
      out += std::log(v);
      std::size_t a = args.size();
      while (a > 0) {
        --a;
        if (++pos[a] < args[a].size()) break;
        pos[a] = 0;
        if (a == 0) return out;
      }
    }
  }
  // iid_gaussian_mixture
  double l1 = std::log(param("w"));
  double l2 = std::log1p(-param("w"));
  for (const auto& a : args) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      l1 += log_normal_pdf(a(i), param("mu1"), param("var1"));
      l2 += log_normal_pdf(a(i), param("mu2"), param("var2"));
    }
  }
  return log_add(l1, l2);
}

bool is_variational(const Potential& p) {
  return std::holds_alternative<MixtureOfIidDiscrete>(p) || std::holds_alternative<KdeMixture>(p);
}

// --- model structure ---------------------------------------------------------

LogicalVar LogicalVar::sized(std::string name, int n) {
  LogicalVar v{std::move(name), {}};
  for (int i = 0; i < n; ++i) v.constants.push_back(v.name + "_" + std::to_string(i));
  return v;
}

const Eigen::VectorXd& Valuation::at(const std::string& atom) const {
  auto it = values.find(atom);
  if (it == values.end()) throw DomainError("valuation does not cover atom " + atom);
  return it->second;
}

Rhm::Rhm(std::vector<Atom> atoms, std::vector<Parfactor> parfactors)
    : atoms_(std::move(atoms)), parfactors_(std::move(parfactors)) {
  validate();
}

const Atom& Rhm::atom(const std::string& name) const {
  for (const Atom& a : atoms_) {
    if (a.name == name) return a;
  }
  throw DomainError("undeclared atom " + name);
}

bool Rhm::has_atom(const std::string& name) const {
  return std::any_of(atoms_.begin(), atoms_.end(), [&](const Atom& a) { return a.name == name; });
}

const Parfactor& Rhm::parfactor(const std::string& id) const {
  for (const Parfactor& g : parfactors_) {
    if (g.id == id) return g;
  }
  throw DomainError("unknown parfactor " + id);
}

std::vector<Atom> Rhm::parfactor_atoms(const Parfactor& g) const {
  std::vector<Atom> out;
  for (const AtomArg& arg : g.args) {
    if (std::none_of(out.begin(), out.end(), [&](const Atom& a) { return a.name == arg.atom; })) {
      out.push_back(atom(arg.atom));
    }
  }
  return out;
}

namespace {

const LogicalVar* find_var(const Parfactor& g, const std::string& name) {
  for (const LogicalVar& v : g.params) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

// Atoms of a histogram-keyed or variational potential.
const std::vector<Atom>* potential_atoms(const Potential& p) {
  if (const auto* t = std::get_if<HistTable>(&p)) return &t->atoms();
  if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&p)) return &m->atoms();
  if (const auto* m = std::get_if<KdeMixture>(&p)) return &m->atoms();
  return nullptr;
}

void validate_parfactor(const Parfactor& g, const Rhm& model) {
  const std::string where = "parfactor " + g.id + ": ";
  if (g.args.empty()) throw ArityError(where + "needs at least one atom");
  std::set<std::string> names;
  for (const LogicalVar& v : g.params) {
    if (v.size() < 1) throw DomainError(where + "logical variable " + v.name + " has an empty domain");
    if (!names.insert(v.name).second) throw DomainError(where + "duplicate logical variable " + v.name);
  }
  std::set<std::string> used;
  for (const AtomArg& arg : g.args) {
    const Atom& atom = model.atom(arg.atom);
    if (arg.kind == ArgKind::kVariable) {
      const LogicalVar* v = find_var(g, arg.var);
      if (!v) throw DomainError(where + "unbound logical variable " + arg.var);
      if (v->size() != atom.population) {
        throw DomainError(where + "domain of " + arg.var + " does not match the population of " + atom.name);
      }
      used.insert(arg.var);
    } else if (arg.kind == ArgKind::kIndex) {
      if (arg.index < 0 || arg.index >= atom.population) throw DomainError(where + "index outside " + atom.name);
    }
  }
  for (const LogicalVar& v : g.params) {
    if (!used.count(v.name)) throw DomainError(where + "logical variable " + v.name + " appears in no atom");
  }

  if (const auto* pd = std::get_if<ParametricDensity>(&g.potential)) {
    if (pd->arity() >= 0 && pd->arity() != static_cast<int>(g.args.size())) {
      throw ArityError(where + "potential arity does not match the atom tuple");
    }
    if (pd->discrete_only()) {
      for (std::size_t a = 0; a < g.args.size(); ++a) {
        const Atom& atom = model.atom(g.args[a].atom);
        if (!atom.domain.is_discrete() || atom.domain.value_count() != pd->dims()[a]) {
          throw DomainError(where + "ground_table dimension does not match the domain of " + atom.name);
        }
      }
    }
    return;
  }
  // Histogram-keyed and variational potentials see whole populations.
  const std::vector<Atom>& patoms = *potential_atoms(g.potential);
  if (patoms.size() != g.args.size()) throw ArityError(where + "potential arity does not match the atom tuple");
  for (std::size_t a = 0; a < g.args.size(); ++a) {
    if (g.args[a].kind != ArgKind::kPopulation) {
      throw DomainError(where + "histogram and mixture potentials take whole-population arguments");
    }
    if (!(patoms[a] == model.atom(g.args[a].atom))) {
      throw DomainError(where + "potential atom " + patoms[a].name + " does not match the declared atom");
    }
  }
  if (const auto* t = std::get_if<HistTable>(&g.potential)) t->validate();
}

}  // namespace

void Rhm::validate() const {
  std::set<std::string> names;
  for (const Atom& a : atoms_) {
    a.validate();
    if (!names.insert(a.name).second) throw DomainError("duplicate atom name " + a.name);
  }
  std::set<std::string> ids;
  for (const Parfactor& g : parfactors_) {
    if (!ids.insert(g.id).second) throw DomainError("duplicate parfactor id " + g.id);
    validate_parfactor(g, *this);
  }
}

// --- operations --------------------------------------------------------------

Histogram histogram_of(const Valuation& valuation, const Atom& atom) {
  if (!atom.domain.is_discrete()) throw DomainError("histogram_of: atom " + atom.name + " is continuous");
  const Eigen::VectorXd& values = valuation.at(atom.name);
  if (values.size() != atom.population) throw DomainError("valuation length does not match population of " + atom.name);
  return histogram_of(values, atom);
}

double log_eval_potential(const Potential& p, const HistKey& key) {
  if (const auto* t = std::get_if<HistTable>(&p)) return t->log_value(key);
  if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&p)) return m->log_hist_mass(key);
  if (const auto* m = std::get_if<KdeMixture>(&p)) return to_discrete_mixture(*m).log_hist_mass(key);
  throw DomainError("parametric densities are evaluated on ground valuations, not histograms");
}

double eval_potential(const Potential& p, const HistKey& key) { return std::exp(log_eval_potential(p, key)); }

namespace {

HistKey key_of(const std::vector<Atom>& atoms, std::span<const Eigen::VectorXd> args) {
  if (atoms.size() != args.size()) throw ArityError("potential arity does not match the arguments");
  HistKey key;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (args[a].size() != atoms[a].population) {
      throw DomainError("argument length does not match population of " + atoms[a].name);
    }
    key.push_back(histogram_of(args[a], atoms[a]));
  }
  return key;
}

}  // namespace

double log_eval_potential(const Potential& p, std::span<const Eigen::VectorXd> args) {
  if (const auto* pd = std::get_if<ParametricDensity>(&p)) return pd->log_factor(args);
  if (const auto* t = std::get_if<HistTable>(&p)) return t->log_valuation_value(key_of(t->atoms(), args));
  if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&p)) return m->log_valuation_value(key_of(m->atoms(), args));
  const auto& km = std::get<KdeMixture>(p);
  if (km.atoms().size() != args.size()) throw ArityError("potential arity does not match the arguments");
  for (std::size_t a = 0; a < args.size(); ++a) {
    for (Eigen::Index i = 0; i < args[a].size(); ++i) {
      if (!km.atoms()[a].domain.contains(args[a](i))) throw DomainError("value outside domain of " + km.atoms()[a].name);
    }
  }
  return km.log_valuation_value(args);
}

double eval_potential(const Potential& p, std::span<const Eigen::VectorXd> args) {
  return std::exp(log_eval_potential(p, args));
}

std::vector<GroundFactor> ground(const Parfactor& g, const Rhm& model) {
  for (const AtomArg& arg : g.args) {
    if (arg.kind == ArgKind::kVariable && !find_var(g, arg.var)) {
      throw DomainError("parfactor " + g.id + ": unbound logical variable " + arg.var);
    }
  }
  std::vector<GroundFactor> out;
  std::vector<int> pos(g.params.size(), 0);
  while (true) {
    GroundFactor f;
    for (std::size_t v = 0; v < g.params.size(); ++v) f.substitution.push_back(g.params[v].constants[pos[v]]);
    for (const AtomArg& arg : g.args) {
      std::vector<int> idx;
      if (arg.kind == ArgKind::kPopulation) {
        idx.resize(model.atom(arg.atom).population);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
      } else if (arg.kind == ArgKind::kIndex) {
        idx.push_back(arg.index);
      } else {
        for (std::size_t v = 0; v < g.params.size(); ++v) {
          if (g.params[v].name == arg.var) idx.push_back(pos[v]);
        }
      }
      f.rv_indices.push_back(std::move(idx));
    }
    out.push_back(std::move(f));
    std::size_t v = g.params.size();
    bool done = true;
    while (v > 0) {
      --v;
      if (++pos[v] < g.params[v].size()) {
        done = false;
        break;
      }
      pos[v] = 0;
    }
    if (done) return out;
  }
}

std::vector<Eigen::VectorXd> factor_arguments(const Parfactor& g, const GroundFactor& f, const Valuation& v) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t a = 0; a < g.args.size(); ++a) {
    const Eigen::VectorXd& values = v.at(g.args[a].atom);
    Eigen::VectorXd x(f.rv_indices[a].size());
    for (std::size_t i = 0; i < f.rv_indices[a].size(); ++i) {
      const int idx = f.rv_indices[a][i];
      if (idx >= values.size()) throw DomainError("valuation too short for atom " + g.args[a].atom);
      x(static_cast<Eigen::Index>(i)) = values(idx);
    }
    out.push_back(std::move(x));
  }
  return out;
}

double log_parfactor_value(const Parfactor& g, const Rhm& model, const Valuation& v) {
  double out = 0.0;
  for (const GroundFactor& f : ground(g, model)) {
    const auto args = factor_arguments(g, f, v);
    out += log_eval_potential(g.potential, args);
    if (out == kNegInf<double>) return out;
  }
  return out;
}

double log_joint_unnormalized(const Rhm& model, const Valuation& v) {
  for (const Atom& a : model.atoms()) {
    const Eigen::VectorXd& x = v.at(a.name);
    if (x.size() != a.population) throw DomainError("valuation length does not match population of " + a.name);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!a.domain.contains(x(i))) throw DomainError("value outside domain of " + a.name);
    }
  }
  double out = 0.0;
  for (const Parfactor& g : model.parfactors()) {
    out += log_parfactor_value(g, model, v);
    if (out == kNegInf<double>) return out;
  }
  return out;
}

HistTable ground_product_table(const Parfactor& g, const Rhm& model) {
  // Exchangeability within each atom holds unless a logical variable ties
  // rvs of two different atoms together or a fixed index singles one out.
  std::map<std::string, std::string> var_atom;
  for (const AtomArg& arg : g.args) {
    if (arg.kind == ArgKind::kIndex) throw DomainError("ground_product_table: parfactor " + g.id + " has a fixed index");
    if (arg.kind != ArgKind::kVariable) continue;
    auto [it, inserted] = var_atom.emplace(arg.var, arg.atom);
    if (!inserted && it->second != arg.atom) {
      throw DomainError("ground_product_table: logical variable " + arg.var + " is shared between atoms of parfactor " +
                        g.id);
    }
  }
  const std::vector<Atom> atoms = model.parfactor_atoms(g);
  std::vector<std::pair<int, int>> shape;
  for (const Atom& a : atoms) {
    if (!a.domain.is_discrete()) throw DomainError("ground_product_table: atom " + a.name + " is continuous");
    shape.emplace_back(a.population, a.domain.value_count());
  }
  const std::vector<GroundFactor> factors = ground(g, model);
  HistTable table(atoms, TableMeasure::kValuation);
  for (const HistKey& key : enumerate_hist_keys(shape)) {
    // Any valuation with this histogram tuple is representative.
    Valuation v;
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      Eigen::VectorXd x(atoms[a].population);
      Eigen::Index i = 0;
      for (std::size_t val = 0; val < key[a].counts.size(); ++val) {
        for (int c = 0; c < key[a].counts[val]; ++c) x(i++) = static_cast<double>(val);
      }
      v.values[atoms[a].name] = std::move(x);
    }
    double lv = 0.0;
    for (const GroundFactor& f : factors) {
      lv += log_eval_potential(g.potential, factor_arguments(g, f, v));
      if (lv == kNegInf<double>) break;
    }
    table.set_log(key, lv);
  }
  return table;
}

std::string singleton_name(const std::string& atom, int index) { return atom + "#" + std::to_string(index); }

namespace {

Atom singleton_atom(const Atom& a, int i) { return Atom{singleton_name(a.name, i), a.domain, 1}; }

// Expand a whole-population potential over `atom` (argument position `pos`)
// into one over its singletons, placed at the same position.
Potential expand_population_potential(const Potential& p, std::size_t pos, const Atom& atom) {
  const int n = atom.population;
  if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&p)) {
    std::vector<Atom> atoms;
    std::vector<Eigen::MatrixXd> params;
    for (std::size_t a = 0; a < m->atoms().size(); ++a) {
      if (a == pos) {
        for (int i = 0; i < n; ++i) {
          atoms.push_back(singleton_atom(atom, i));
          params.push_back(m->params(static_cast<int>(a)));
        }
      } else {
        atoms.push_back(m->atoms()[a]);
        params.push_back(m->params(static_cast<int>(a)));
      }
    }
    return MixtureOfIidDiscrete(std::move(atoms), m->weights(), std::move(params));
  }
  if (const auto* m = std::get_if<KdeMixture>(&p)) {
    std::vector<Atom> atoms;
    for (std::size_t a = 0; a < m->atoms().size(); ++a) {
      if (a == pos) {
        for (int i = 0; i < n; ++i) atoms.push_back(singleton_atom(atom, i));
      } else {
        atoms.push_back(m->atoms()[a]);
      }
    }
    std::vector<std::vector<AtomFactor>> comps(m->k());
    for (int l = 0; l < m->k(); ++l) {
      for (std::size_t a = 0; a < m->atoms().size(); ++a) {
        const int copies = a == pos ? n : 1;
        for (int i = 0; i < copies; ++i) comps[l].push_back(m->factor(l, static_cast<int>(a)));
      }
    }
    return KdeMixture(std::move(atoms), m->weights(), std::move(comps));
  }
  const auto& t = std::get<HistTable>(p);
  std::vector<Atom> atoms;
  std::vector<std::pair<int, int>> shape;
  for (std::size_t a = 0; a < t.atoms().size(); ++a) {
    if (a == pos) {
      for (int i = 0; i < n; ++i) {
        atoms.push_back(singleton_atom(atom, i));
        shape.emplace_back(1, atom.domain.value_count());
      }
    } else {
      atoms.push_back(t.atoms()[a]);
      shape.emplace_back(t.atoms()[a].population, t.atoms()[a].domain.value_count());
    }
  }
  HistTable out(atoms, TableMeasure::kValuation);
  const int d = atom.domain.value_count();
  for (const HistKey& key : enumerate_hist_keys(shape)) {
    HistKey original;
    for (std::size_t a = 0; a < pos; ++a) original.push_back(key[a]);
    Histogram merged{std::vector<int>(d, 0)};
    for (int i = 0; i < n; ++i) {
      for (int v = 0; v < d; ++v) merged.counts[v] += key[pos + i].counts[v];
    }
    original.push_back(merged);
    for (std::size_t a = pos + n; a < key.size(); ++a) original.push_back(key[a]);
    const double lv = t.log_valuation_value(original);
    if (lv > kNegInf<double>) out.set_log(key, lv);
  }
  return out;
}

}  // namespace

Rhm shatter_non_exchangeable(const Rhm& model, const std::string& atom_name) {
  const Atom& target = model.atom(atom_name);
  const int n = target.population;
  std::vector<Atom> atoms;
  for (const Atom& a : model.atoms()) {
    if (a.name != atom_name) {
      atoms.push_back(a);
      continue;
    }
    for (int i = 0; i < n; ++i) atoms.push_back(singleton_atom(a, i));
  }

  std::vector<Parfactor> parfactors;
  for (const Parfactor& g : model.parfactors()) {
    const bool touches =
        std::any_of(g.args.begin(), g.args.end(), [&](const AtomArg& a) { return a.atom == atom_name; });
    if (!touches) {
      parfactors.push_back(g);
      continue;
    }
    if (std::holds_alternative<ParametricDensity>(g.potential)) {
      for (const AtomArg& arg : g.args) {
        if (arg.atom == atom_name && arg.kind == ArgKind::kPopulation) {
          throw DomainError("shatter: parfactor " + g.id + " applies a parametric form to the whole population of " +
                            atom_name);
        }
      }
      // Substitute every logical variable bound to the atom by each constant.
      std::vector<std::string> bound;
      for (const AtomArg& arg : g.args) {
        if (arg.atom == atom_name && arg.kind == ArgKind::kVariable &&
            std::find(bound.begin(), bound.end(), arg.var) == bound.end()) {
          bound.push_back(arg.var);
        }
      }
      std::vector<int> pos(bound.size(), 0);
      while (true) {
        Parfactor h{g.id, {}, {}, g.potential};
        for (const LogicalVar& v : g.params) {
          if (std::find(bound.begin(), bound.end(), v.name) == bound.end()) h.params.push_back(v);
        }
        for (std::size_t b = 0; b < bound.size(); ++b) h.id += "#" + std::to_string(pos[b]);
        for (const AtomArg& arg : g.args) {
          auto it = std::find(bound.begin(), bound.end(), arg.var);
          const bool is_bound = arg.kind == ArgKind::kVariable && it != bound.end();
          const int idx = is_bound ? pos[static_cast<std::size_t>(it - bound.begin())] : arg.index;
          if (arg.atom == atom_name) {
            h.args.push_back(AtomArg::population(singleton_name(atom_name, idx)));
          } else if (is_bound) {
            h.args.push_back(AtomArg::at(arg.atom, idx));
          } else {
            h.args.push_back(arg);
          }
        }
        parfactors.push_back(std::move(h));
        std::size_t b = bound.size();
        bool done = true;
        while (b > 0) {
          --b;
          if (++pos[b] < n) {
            done = false;
            break;
          }
          pos[b] = 0;
        }
        if (done) break;
      }
      continue;
    }
    // Whole-population potentials: replace the atom argument by n singletons.
    Potential p = g.potential;
    std::vector<AtomArg> args;
    for (std::size_t a = 0; a < g.args.size(); ++a) {
      if (g.args[a].atom != atom_name) {
        args.push_back(g.args[a]);
        continue;
      }
      p = expand_population_potential(p, args.size(), target);
      for (int i = 0; i < n; ++i) args.push_back(AtomArg::population(singleton_name(atom_name, i)));
    }
    parfactors.push_back(Parfactor{g.id, g.params, std::move(args), std::move(p)});
  }
  return Rhm(std::move(atoms), std::move(parfactors));
}

}  // namespace lrvi
