#include "lrvi/model_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "lrvi/errors.hpp"

namespace lrvi {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

bool LatentSpec::empty() const {
  return latents.empty() && rates.empty() && weight_bindings.empty() && gaussian_couplings.empty() &&
         component_couplings.empty();
}

namespace {

// --- tokenizing ----------------------------------------------------------------

struct Line {
  int number = 0;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    Line line{number, {}};
    std::string tok;
    while (ls >> tok) line.tokens.push_back(tok);
    if (!line.tokens.empty()) out.push_back(std::move(line));
  }
  return out;
}

[[noreturn]] void fail(const Line& line, const std::string& what) {
  throw ParseError("line " + std::to_string(line.number) + ": " + what);
}

double to_double(const std::string& s, const Line& line) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) fail(line, "not a number: " + s);
  return v;
}

int to_int(const std::string& s, const Line& line) {
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || v < std::numeric_limits<int>::min() ||
      v > std::numeric_limits<int>::max()) {
    fail(line, "not an integer: " + s);
  }
  return static_cast<int>(v);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Eigen::VectorXd to_vector(const std::string& s, const Line& line) {
  const auto parts = split(s, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_double(parts[i], line);
  return v;
}

std::string join(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v(i));
  return out;
}

Histogram to_histogram(const std::string& s, const Line& line) {
  Histogram h;
  for (const auto& p : split(s, ',')) h.counts.push_back(to_int(p, line));
  return h;
}

std::string join(const Histogram& h) {
  std::string out;
  for (std::size_t i = 0; i < h.counts.size(); ++i) out += (i ? "," : "") + std::to_string(h.counts[i]);
  return out;
}

AtomFactor to_factor(const std::string& s, const Line& line) {
  const auto parts = split(s, ':');
  if (parts[0] == "cat" && parts.size() == 2) return CategoricalFactor(to_vector(parts[1], line));
  if (parts[0] == "kde" && (parts.size() == 3 || parts.size() == 4)) {
    return Kde(to_vector(parts[2], line), to_double(parts[1], line),
               parts.size() == 4 ? to_vector(parts[3], line) : Eigen::VectorXd());
  }
  fail(line, "bad factor " + s + " (expected cat:... or kde:...)");
}

std::string factor_text(const AtomFactor& f) {
  if (const auto* c = std::get_if<CategoricalFactor>(&f)) return "cat:" + join(*c);
  const Kde& k = std::get<Kde>(f);
  std::string out = "kde:" + format_double(k.bandwidth()) + ":" + join(k.centers());
  if (!k.uniform()) out += ":" + join(k.center_weights());
  return out;
}

AtomArg to_arg(const std::string& s, const Line& line) {
  if (const auto p = s.find('('); p != std::string::npos) {
    if (s.back() != ')') fail(line, "bad argument " + s);
    return AtomArg::variable(s.substr(0, p), s.substr(p + 1, s.size() - p - 2));
  }
  if (const auto p = s.find('['); p != std::string::npos) {
    if (s.back() != ']') fail(line, "bad argument " + s);
    return AtomArg::at(s.substr(0, p), to_int(s.substr(p + 1, s.size() - p - 2), line));
  }
  return AtomArg::population(s);
}

std::string arg_text(const AtomArg& a) {
  switch (a.kind) {
    case ArgKind::kPopulation:
      return a.atom;
    case ArgKind::kVariable:
      return a.atom + "(" + a.var + ")";
    case ArgKind::kIndex:
      return a.atom + "[" + std::to_string(a.index) + "]";
  }
  return a.atom;
}

const Atom& find_atom(const std::vector<Atom>& atoms, const std::string& name, const Line& line) {
  for (const Atom& a : atoms) {
    if (a.name == name) return a;
  }
  fail(line, "unknown atom " + name);
}

// --- parfactor under construction ------------------------------------------------

struct PendingParfactor {
  Line header;
  std::string id;
  std::vector<LogicalVar> params;
  std::vector<AtomArg> args;
  std::string kind;  // table, parametric, mixture, kde_mixture
  TableMeasure measure = TableMeasure::kValuation;
  std::vector<std::pair<HistKey, double>> log_entries;
  std::string form;
  ParametricDensity::Params form_params;
  std::vector<int> dims;
  std::vector<double> table;
  std::vector<Line> components;
};

std::vector<Atom> tuple_atoms(const PendingParfactor& p, const std::vector<Atom>& atoms) {
  std::vector<Atom> out;
  for (const AtomArg& a : p.args) {
    if (std::none_of(out.begin(), out.end(), [&](const Atom& b) { return b.name == a.atom; })) {
      out.push_back(find_atom(atoms, a.atom, p.header));
    }
  }
  return out;
}

// Validates parfactor by parfactor so a bad one is reported by id.
Rhm build_model(const std::vector<Atom>& atoms, const std::vector<Parfactor>& parfactors) {
  const Rhm bare(atoms, {});
  for (const Parfactor& g : parfactors) {
    try {
      Rhm(atoms, {g});
    } catch (const Error& e) {
      throw StageError("model", g.id, e.what(), false);
    }
  }
  return Rhm(atoms, parfactors);
}

Parfactor finish(const PendingParfactor& p, const std::vector<Atom>& atoms) {
  if (p.args.empty()) fail(p.header, "parfactor " + p.id + " has no args line");
  const std::vector<Atom> tuple = tuple_atoms(p, atoms);
  Parfactor g{p.id, p.params, p.args, {}};
  if (p.kind == "table") {
    HistTable t(tuple, p.measure);
    for (const auto& [key, v] : p.log_entries) t.set_log(key, v);
    g.potential = std::move(t);
  } else if (p.kind == "parametric") {
    g.potential = ParametricDensity(p.form, p.form_params, p.dims, p.table);
  } else if (p.kind == "mixture") {
    if (p.components.empty()) fail(p.header, "mixture without components");
    const int k = static_cast<int>(p.components.size());
    Eigen::VectorXd w(k);
    std::vector<Eigen::MatrixXd> params(tuple.size());
    for (std::size_t a = 0; a < tuple.size(); ++a) params[a].resize(k, tuple[a].domain.value_count());
    for (int l = 0; l < k; ++l) {
      const Line& line = p.components[static_cast<std::size_t>(l)];
      if (line.tokens.size() != tuple.size() + 2) fail(line, "component needs a weight and one vector per atom");
      w(l) = to_double(line.tokens[1], line);
      for (std::size_t a = 0; a < tuple.size(); ++a) {
        const Eigen::VectorXd v = to_vector(line.tokens[a + 2], line);
        if (v.size() != params[a].cols()) fail(line, "categorical length does not match atom " + tuple[a].name);
        params[a].row(l) = v.transpose();
      }
    }
    g.potential = MixtureOfIidDiscrete(tuple, w, params);
  } else if (p.kind == "kde_mixture") {
    if (p.components.empty()) fail(p.header, "kde_mixture without components");
    const int k = static_cast<int>(p.components.size());
    Eigen::VectorXd w(k);
    std::vector<std::vector<AtomFactor>> comps(static_cast<std::size_t>(k));
    for (int l = 0; l < k; ++l) {
      const Line& line = p.components[static_cast<std::size_t>(l)];
      if (line.tokens.size() != tuple.size() + 2) fail(line, "component needs a weight and one factor per atom");
      w(l) = to_double(line.tokens[1], line);
      for (std::size_t a = 0; a < tuple.size(); ++a) comps[static_cast<std::size_t>(l)].push_back(to_factor(line.tokens[a + 2], line));
    }
    g.potential = KdeMixture(tuple, w, comps);
  } else {
    fail(p.header, "parfactor " + p.id + " has no potential");
  }
  return g;
}

LogicalVar to_logvar(const Line& line) {
  if (line.tokens.size() != 3) fail(line, "logvar needs a name and a size or {constants}");
  const std::string& spec = line.tokens[2];
  if (spec.front() == '{') {
    if (spec.back() != '}' || spec.size() < 3) fail(line, "bad constant list " + spec);
    return LogicalVar{line.tokens[1], split(spec.substr(1, spec.size() - 2), ',')};
  }
  return LogicalVar::sized(line.tokens[1], to_int(spec, line));
}

std::string logvar_text(const LogicalVar& v) {
  if (v == LogicalVar::sized(v.name, v.size())) return v.name + " " + std::to_string(v.size());
  std::string out = v.name + " {";
  for (std::size_t i = 0; i < v.constants.size(); ++i) out += (i ? "," : "") + v.constants[i];
  return out + "}";
}

}  // namespace

ModelDocument parse_model_text(std::string_view text) {
  enum class Section { kNone, kAtoms, kParfactors, kLatent, kExtend };
  Section section = Section::kNone;
  std::vector<Atom> atoms;
  std::vector<PendingParfactor> pending;
  ModelDocument doc;
  std::vector<std::pair<Line, std::string>> extends;
  for (const Line& line : tokenize(text)) {
    const auto& t = line.tokens;
    const std::string& head = t[0];
    if (t.size() == 1 && (head == "ATOMS" || head == "PARFACTORS" || head == "LATENT-COUPLINGS" || head == "EXTENDIBILITY")) {
      section = head == "ATOMS"              ? Section::kAtoms
                : head == "PARFACTORS"       ? Section::kParfactors
                : head == "LATENT-COUPLINGS" ? Section::kLatent
                                             : Section::kExtend;
      continue;
    }
    switch (section) {
      case Section::kNone:
        fail(line, "content before any section header");
      case Section::kAtoms: {
        if (head != "atom" || t.size() < 4) fail(line, "expected: atom <name> <domain> ...");
        Atom a;
        a.name = t[1];
        std::size_t next = 3;
        if (t[2] == "binary") {
          a.domain = AtomDomain::binary();
        } else if (t[2] == "categorical") {
          if (t.size() < 5) fail(line, "categorical atoms need a value count");
          a.domain = AtomDomain::categorical(to_int(t[3], line));
          next = 4;
        } else if (t[2] == "continuous") {
          a.domain = AtomDomain::continuous();
        } else {
          fail(line, "unknown domain " + t[2]);
        }
        a.population = to_int(t[next], line);
        ++next;
        if (next < t.size()) {
          if (t[next] != "support" || t.size() != next + 3 || a.domain.is_discrete()) fail(line, "trailing tokens");
          a.domain = AtomDomain::continuous(Interval{to_double(t[next + 1], line), to_double(t[next + 2], line)});
        }
        a.validate();
        atoms.push_back(a);
        break;
      }
      case Section::kParfactors: {
        if (head == "parfactor") {
          if (t.size() != 2) fail(line, "expected: parfactor <id>");
          pending.push_back({line, t[1], {}, {}, {}, TableMeasure::kValuation, {}, {}, {}, {}, {}, {}});
          break;
        }
        if (pending.empty()) fail(line, head + " outside a parfactor");
        PendingParfactor& p = pending.back();
        if (head == "logvar") {
          p.params.push_back(to_logvar(line));
        } else if (head == "args") {
          for (std::size_t i = 1; i < t.size(); ++i) p.args.push_back(to_arg(t[i], line));
        } else if (head == "table") {
          if (t.size() != 2 || (t[1] != "valuation" && t[1] != "histogram")) fail(line, "expected: table valuation|histogram");
          p.kind = "table";
          p.measure = t[1] == "valuation" ? TableMeasure::kValuation : TableMeasure::kHistogram;
        } else if (head == "entry" || head == "value") {
          if (p.kind != "table" || t.size() < 3) fail(line, head + " outside a table");
          HistKey key;
          for (std::size_t i = 1; i + 1 < t.size(); ++i) key.push_back(to_histogram(t[i], line));
          const double v = to_double(t.back(), line);
          if (head == "value" && !(v >= 0.0)) fail(line, "table values must be >= 0");
          p.log_entries.emplace_back(key, head == "entry" ? v : (v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity()));
        } else if (head == "parametric") {
          if (t.size() < 2) fail(line, "expected: parametric <form> name=value ...");
          p.kind = "parametric";
          p.form = t[1];
          for (std::size_t i = 2; i < t.size(); ++i) {
            const auto eq = t[i].find('=');
            if (eq == std::string::npos) fail(line, "expected name=value, got " + t[i]);
            const std::string name = t[i].substr(0, eq);
            const std::string val = t[i].substr(eq + 1);
            if (name == "dims") {
              for (const auto& d : split(val, ',')) p.dims.push_back(to_int(d, line));
            } else if (name == "values") {
              const Eigen::VectorXd v = to_vector(val, line);
              p.table.assign(v.data(), v.data() + v.size());
            } else {
              p.form_params.emplace_back(name, to_double(val, line));
            }
          }
        } else if (head == "mixture" || head == "kde_mixture") {
          if (t.size() != 1) fail(line, "trailing tokens");
          p.kind = head;
        } else if (head == "component") {
          if (p.kind != "mixture" && p.kind != "kde_mixture") fail(line, "component outside a mixture");
          p.components.push_back(line);
        } else {
          fail(line, "unknown keyword " + head);
        }
        break;
      }
      case Section::kLatent: {
        auto& l = doc.latent;
        if (head == "latent" && t.size() == 4) {
          l.latents.push_back({t[1], to_double(t[2], line), to_double(t[3], line)});
        } else if (head == "rate" && t.size() == 3) {
          l.rates.push_back({t[1], t[2]});
        } else if (head == "weight" && t.size() == 3) {
          l.weight_bindings.push_back({t[1], t[2]});
        } else if (head == "gaussian" && t.size() == 5) {
          l.gaussian_couplings.push_back({t[1], t[2], to_double(t[3], line), to_double(t[4], line)});
        } else if (head == "component_table" && t.size() == 6) {
          const int r = to_int(t[3], line);
          const int c = to_int(t[4], line);
          const Eigen::VectorXd v = to_vector(t[5], line);
          if (r < 1 || c < 1 || v.size() != static_cast<Eigen::Index>(r) * c) fail(line, "table size mismatch");
          Eigen::MatrixXd m(r, c);
          for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) m(i, j) = v(i * c + j);
          }
          l.component_couplings.push_back({t[1], t[2], m});
        } else {
          fail(line, "bad latent-coupling line");
        }
        break;
      }
      case Section::kExtend: {
        if (head != "extend" || t.size() != 3) fail(line, "expected: extend <atom> <n_bar|inf>");
        extends.emplace_back(line, t[1]);
        break;
      }
    }
  }
  std::vector<Parfactor> parfactors;
  for (const auto& p : pending) parfactors.push_back(finish(p, atoms));
  doc.model = build_model(atoms, parfactors);
  for (const auto& [line, name] : extends) {
    const Atom& a = find_atom(atoms, name, line);
    AtomExtension e;
    e.n_bar = to_double(line.tokens[2], line);
    e.continuous = !a.domain.is_discrete();
    e.d = a.domain.is_discrete() ? a.domain.value_count() : 0;
    if (!(e.n_bar >= a.population)) fail(line, "n_bar must be >= the population of " + name);
    doc.extendibility[name] = e;
  }
  return doc;
}

std::string serialize_model_text(const ModelDocument& doc) {
  std::ostringstream out;
  out << "ATOMS\n";
  for (const Atom& a : doc.model.atoms()) {
    out << "atom " << a.name << ' ';
    switch (a.domain.kind()) {
      case DomainKind::kBinary:
        out << "binary";
        break;
      case DomainKind::kCategorical:
        out << "categorical " << a.domain.value_count();
        break;
      case DomainKind::kContinuous:
        out << "continuous";
        break;
    }
    out << ' ' << a.population;
    if (a.domain.support()) {
      out << " support " << format_double(a.domain.support()->lo) << ' ' << format_double(a.domain.support()->hi);
    }
    out << '\n';
  }
  out << "\nPARFACTORS\n";
  for (const Parfactor& g : doc.model.parfactors()) {
    out << "parfactor " << g.id << '\n';
    for (const LogicalVar& v : g.params) out << "  logvar " << logvar_text(v) << '\n';
    out << "  args";
    for (const AtomArg& a : g.args) out << ' ' << arg_text(a);
    out << '\n';
    if (const auto* t = std::get_if<HistTable>(&g.potential)) {
      out << "  table " << (t->measure() == TableMeasure::kValuation ? "valuation" : "histogram") << '\n';
      for (const auto& [key, v] : t->log_entries()) {
        out << "  entry";
        for (const Histogram& h : key) out << ' ' << join(h);
        out << ' ' << format_double(v) << '\n';
      }
    } else if (const auto* d = std::get_if<ParametricDensity>(&g.potential)) {
      out << "  parametric " << d->form();
      for (const auto& [name, v] : d->params()) out << ' ' << name << '=' << format_double(v);
      if (!d->dims().empty()) {
        out << " dims=";
        for (std::size_t i = 0; i < d->dims().size(); ++i) out << (i ? "," : "") << d->dims()[i];
      }
      if (!d->table().empty()) {
        out << " values=";
        for (std::size_t i = 0; i < d->table().size(); ++i) out << (i ? "," : "") << format_double(d->table()[i]);
      }
      out << '\n';
    } else if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&g.potential)) {
      out << "  mixture\n";
      for (int l = 0; l < m->k(); ++l) {
        out << "  component " << format_double(m->weights()(l));
        for (std::size_t a = 0; a < m->atoms().size(); ++a) {
          out << ' ' << join(Eigen::VectorXd(m->params(static_cast<int>(a)).row(l).transpose()));
        }
        out << '\n';
      }
    } else {
      const auto& km = std::get<KdeMixture>(g.potential);
      out << "  kde_mixture\n";
      for (int l = 0; l < km.k(); ++l) {
        out << "  component " << format_double(km.weights()(l));
        for (std::size_t a = 0; a < km.atoms().size(); ++a) out << ' ' << factor_text(km.factor(l, static_cast<int>(a)));
        out << '\n';
      }
    }
  }
  if (!doc.latent.empty()) {
    out << "\nLATENT-COUPLINGS\n";
    for (const auto& l : doc.latent.latents) {
      out << "latent " << l.name << ' ' << format_double(l.lo) << ' ' << format_double(l.hi) << '\n';
    }
    for (const auto& r : doc.latent.rates) out << "rate " << r.latent << ' ' << r.potential << '\n';
    for (const auto& w : doc.latent.weight_bindings) out << "weight " << w.latent << ' ' << w.potential << '\n';
    for (const auto& c : doc.latent.gaussian_couplings) {
      out << "gaussian " << c.a << ' ' << c.b << ' ' << format_double(c.mu) << ' ' << format_double(c.var) << '\n';
    }
    for (const auto& c : doc.latent.component_couplings) {
      out << "component_table " << c.potential_a << ' ' << c.potential_b << ' ' << c.table.rows() << ' '
          << c.table.cols() << ' ';
      for (Eigen::Index i = 0; i < c.table.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.table.cols(); ++j) out << (i + j ? "," : "") << format_double(c.table(i, j));
      }
      out << '\n';
    }
  }
  if (!doc.extendibility.empty()) {
    out << "\nEXTENDIBILITY\n";
    for (const auto& [name, e] : doc.extendibility) out << "extend " << name << ' ' << format_double(e.n_bar) << '\n';
  }
  return out.str();
}

// --- JSON ------------------------------------------------------------------------

namespace {

json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double num_from(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParseError("bad number " + s);
  }
  return j.get<double>();
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Eigen::VectorXd vec_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num_from(j[i]);
  return v;
}

json factor_json(const AtomFactor& f) {
  if (const auto* c = std::get_if<CategoricalFactor>(&f)) return {{"categorical", vec_json(*c)}};
  const Kde& k = std::get<Kde>(f);
  json o = {{"bandwidth", num(k.bandwidth())}, {"centers", vec_json(k.centers())}};
  if (!k.uniform()) o["center_weights"] = vec_json(k.center_weights());
  return o;
}

AtomFactor factor_from(const json& j) {
  if (j.contains("categorical")) return CategoricalFactor(vec_from(j.at("categorical")));
  return Kde(vec_from(j.at("centers")), num_from(j.at("bandwidth")),
             j.contains("center_weights") ? vec_from(j.at("center_weights")) : Eigen::VectorXd());
}

json atom_json(const Atom& a) {
  json o = {{"name", a.name}, {"population", a.population}};
  switch (a.domain.kind()) {
    case DomainKind::kBinary:
      o["domain"] = "binary";
      break;
    case DomainKind::kCategorical:
      o["domain"] = "categorical";
      o["values"] = a.domain.value_count();
      break;
    case DomainKind::kContinuous:
      o["domain"] = "continuous";
      if (a.domain.support()) o["support"] = {num(a.domain.support()->lo), num(a.domain.support()->hi)};
      break;
  }
  return o;
}

Atom atom_from(const json& j) {
  Atom a;
  a.name = j.at("name").get<std::string>();
  a.population = j.at("population").get<int>();
  const std::string d = j.at("domain").get<std::string>();
  if (d == "binary") {
    a.domain = AtomDomain::binary();
  } else if (d == "categorical") {
    a.domain = AtomDomain::categorical(j.at("values").get<int>());
  } else if (d == "continuous") {
    a.domain = j.contains("support")
                   ? AtomDomain::continuous(Interval{num_from(j.at("support")[0]), num_from(j.at("support")[1])})
                   : AtomDomain::continuous();
  } else {
    throw ParseError("unknown domain " + d);
  }
  a.validate();
  return a;
}

std::vector<Atom> atoms_named(const json& names, const std::vector<Atom>& atoms) {
  std::vector<Atom> out;
  for (const auto& n : names) {
    const std::string name = n.get<std::string>();
    const auto it = std::find_if(atoms.begin(), atoms.end(), [&](const Atom& a) { return a.name == name; });
    if (it == atoms.end()) throw ParseError("unknown atom " + name);
    out.push_back(*it);
  }
  return out;
}

json atom_names(const std::vector<Atom>& atoms) {
  json a = json::array();
  for (const Atom& at : atoms) a.push_back(at.name);
  return a;
}

}  // namespace

json potential_to_json(const Potential& p) {
  if (const auto* t = std::get_if<HistTable>(&p)) {
    json entries = json::array();
    for (const auto& [key, v] : t->log_entries()) {
      json k = json::array();
      for (const Histogram& h : key) k.push_back(h.counts);
      entries.push_back({{"key", k}, {"log_value", num(v)}});
    }
    return {{"type", "table"},
            {"atoms", atom_names(t->atoms())},
            {"measure", t->measure() == TableMeasure::kValuation ? "valuation" : "histogram"},
            {"entries", entries}};
  }
  if (const auto* d = std::get_if<ParametricDensity>(&p)) {
    json params = json::array();
    for (const auto& [name, v] : d->params()) params.push_back({name, num(v)});
    return {{"type", "parametric"}, {"form", d->form()}, {"params", params}, {"dims", d->dims()}, {"values", d->table()}};
  }
  if (const auto* m = std::get_if<MixtureOfIidDiscrete>(&p)) {
    json comps = json::array();
    for (int l = 0; l < m->k(); ++l) {
      json per = json::array();
      for (std::size_t a = 0; a < m->atoms().size(); ++a) {
        per.push_back(vec_json(m->params(static_cast<int>(a)).row(l).transpose()));
      }
      comps.push_back({{"weight", num(m->weights()(l))}, {"params", per}});
    }
    return {{"type", "mixture"}, {"atoms", atom_names(m->atoms())}, {"components", comps}};
  }
  const auto& km = std::get<KdeMixture>(p);
  json comps = json::array();
  for (int l = 0; l < km.k(); ++l) {
    json per = json::array();
    for (std::size_t a = 0; a < km.atoms().size(); ++a) per.push_back(factor_json(km.factor(l, static_cast<int>(a))));
    comps.push_back({{"weight", num(km.weights()(l))}, {"factors", per}});
  }
  return {{"type", "kde_mixture"}, {"atoms", atom_names(km.atoms())}, {"components", comps}};
}

Potential potential_from_json(const json& j, const std::vector<Atom>& atoms) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "table") {
    HistTable t(atoms_named(j.at("atoms"), atoms),
                j.at("measure").get<std::string>() == "valuation" ? TableMeasure::kValuation : TableMeasure::kHistogram);
    for (const auto& e : j.at("entries")) {
      HistKey key;
      for (const auto& h : e.at("key")) key.push_back(Histogram{h.get<std::vector<int>>()});
      t.set_log(key, num_from(e.at("log_value")));
    }
    return t;
  }
  if (type == "parametric") {
    ParametricDensity::Params params;
    for (const auto& p : j.at("params")) params.emplace_back(p[0].get<std::string>(), num_from(p[1]));
    return ParametricDensity(j.at("form").get<std::string>(), params, j.value("dims", std::vector<int>{}),
                             j.value("values", std::vector<double>{}));
  }
  const std::vector<Atom> tuple = atoms_named(j.at("atoms"), atoms);
  const auto& comps = j.at("components");
  const int k = static_cast<int>(comps.size());
  Eigen::VectorXd w(k);
  if (type == "mixture") {
    std::vector<Eigen::MatrixXd> params(tuple.size());
    for (std::size_t a = 0; a < tuple.size(); ++a) params[a].resize(k, tuple[a].domain.value_count());
    for (int l = 0; l < k; ++l) {
      w(l) = num_from(comps[static_cast<std::size_t>(l)].at("weight"));
      const auto& per = comps[static_cast<std::size_t>(l)].at("params");
      if (per.size() != tuple.size()) throw ParseError("mixture component arity mismatch");
      for (std::size_t a = 0; a < tuple.size(); ++a) {
        const Eigen::VectorXd v = vec_from(per[a]);
        if (v.size() != params[a].cols()) throw ParseError("categorical length mismatch");
        params[a].row(l) = v.transpose();
      }
    }
    return MixtureOfIidDiscrete(tuple, w, params);
  }
  if (type == "kde_mixture") {
    std::vector<std::vector<AtomFactor>> fs(static_cast<std::size_t>(k));
    for (int l = 0; l < k; ++l) {
      w(l) = num_from(comps[static_cast<std::size_t>(l)].at("weight"));
      for (const auto& f : comps[static_cast<std::size_t>(l)].at("factors")) fs[static_cast<std::size_t>(l)].push_back(factor_from(f));
    }
    return KdeMixture(tuple, w, fs);
  }
  throw ParseError("unknown potential type " + type);
}

json variational_potential_to_json(const VariationalPotential& p) {
  json j = potential_to_json(p.mixture);
  j["id"] = p.id;
  j["log_mass"] = num(p.log_mass);
  return j;
}

json model_to_json(const ModelDocument& doc) {
  json atoms = json::array();
  for (const Atom& a : doc.model.atoms()) atoms.push_back(atom_json(a));
  json parfactors = json::array();
  for (const Parfactor& g : doc.model.parfactors()) {
    json vars = json::array();
    for (const LogicalVar& v : g.params) vars.push_back({{"name", v.name}, {"constants", v.constants}});
    json args = json::array();
    for (const AtomArg& a : g.args) args.push_back(arg_text(a));
    parfactors.push_back({{"id", g.id}, {"logvars", vars}, {"args", args}, {"potential", potential_to_json(g.potential)}});
  }
  json j = {{"atoms", atoms}, {"parfactors", parfactors}};
  if (!doc.latent.empty()) {
    json l = json::object();
    l["latents"] = json::array();
    for (const auto& v : doc.latent.latents) l["latents"].push_back({{"name", v.name}, {"lo", num(v.lo)}, {"hi", num(v.hi)}});
    l["rates"] = json::array();
    for (const auto& r : doc.latent.rates) l["rates"].push_back({{"latent", r.latent}, {"potential", r.potential}});
    l["weights"] = json::array();
    for (const auto& w : doc.latent.weight_bindings) l["weights"].push_back({{"latent", w.latent}, {"potential", w.potential}});
    l["gaussian"] = json::array();
    for (const auto& c : doc.latent.gaussian_couplings) {
      l["gaussian"].push_back({{"a", c.a}, {"b", c.b}, {"mu", num(c.mu)}, {"var", num(c.var)}});
    }
    l["component_tables"] = json::array();
    for (const auto& c : doc.latent.component_couplings) {
      json rows = json::array();
      for (Eigen::Index i = 0; i < c.table.rows(); ++i) rows.push_back(vec_json(c.table.row(i).transpose()));
      l["component_tables"].push_back({{"a", c.potential_a}, {"b", c.potential_b}, {"table", rows}});
    }
    j["latent_couplings"] = l;
  }
  if (!doc.extendibility.empty()) {
    json e = json::object();
    for (const auto& [name, x] : doc.extendibility) e[name] = num(x.n_bar);
    j["extendibility"] = e;
  }
  return j;
}

ModelDocument model_from_json(const json& j) {
  try {
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) atoms.push_back(atom_from(a));
    std::vector<Parfactor> parfactors;
    const Line none{0, {}};
    for (const auto& g : j.at("parfactors")) {
      Parfactor p;
      p.id = g.at("id").get<std::string>();
      for (const auto& v : g.value("logvars", json::array())) {
        p.params.push_back({v.at("name").get<std::string>(), v.at("constants").get<std::vector<std::string>>()});
      }
      for (const auto& a : g.at("args")) p.args.push_back(to_arg(a.get<std::string>(), none));
      p.potential = potential_from_json(g.at("potential"), atoms);
      parfactors.push_back(std::move(p));
    }
    ModelDocument doc;
    doc.model = build_model(atoms, parfactors);
    if (j.contains("latent_couplings")) {
      const auto& l = j.at("latent_couplings");
      for (const auto& v : l.value("latents", json::array())) {
        doc.latent.latents.push_back({v.at("name").get<std::string>(), num_from(v.at("lo")), num_from(v.at("hi"))});
      }
      for (const auto& r : l.value("rates", json::array())) {
        doc.latent.rates.push_back({r.at("latent").get<std::string>(), r.at("potential").get<std::string>()});
      }
      for (const auto& w : l.value("weights", json::array())) {
        doc.latent.weight_bindings.push_back({w.at("latent").get<std::string>(), w.at("potential").get<std::string>()});
      }
      for (const auto& c : l.value("gaussian", json::array())) {
        doc.latent.gaussian_couplings.push_back(
            {c.at("a").get<std::string>(), c.at("b").get<std::string>(), num_from(c.at("mu")), num_from(c.at("var"))});
      }
      for (const auto& c : l.value("component_tables", json::array())) {
        const auto& rows = c.at("table");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = vec_from(rows[i]).transpose();
        doc.latent.component_couplings.push_back({c.at("a").get<std::string>(), c.at("b").get<std::string>(), m});
      }
    }
    if (j.contains("extendibility")) {
      for (const auto& [name, v] : j.at("extendibility").items()) {
        const Atom& a = doc.model.atom(name);
        AtomExtension e;
        e.n_bar = num_from(v);
        e.continuous = !a.domain.is_discrete();
        e.d = a.domain.is_discrete() ? a.domain.value_count() : 0;
        if (!(e.n_bar >= a.population)) throw ParseError("n_bar must be >= the population of " + name);
        doc.extendibility[name] = e;
      }
    }
    return doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
}

ModelDocument load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".json") {
    try {
      return model_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("model json: ") + e.what());
    }
  }
  return parse_model_text(text);
}

LatentModel latent_model(const ModelDocument& doc) {
  LatentModel lm;
  lm.model = to_variational_model(doc.model);
  lm.latents = doc.latent.latents;
  lm.rates = doc.latent.rates;
  lm.weight_bindings = doc.latent.weight_bindings;
  lm.gaussian_couplings = doc.latent.gaussian_couplings;
  lm.component_couplings = doc.latent.component_couplings;
  lm.validate();
  return lm;
}

// --- observations --------------------------------------------------------------

std::vector<Observation> parse_observations_text(std::string_view text) {
  std::vector<Observation> out;
  for (const Line& line : tokenize(text)) {
    const auto& t = line.tokens;
    if (t[0] != "observe" || t.size() < 3 || (t[2] != "counts" && t[2] != "values")) {
      fail(line, "expected: observe <atom> counts|values ...");
    }
    Observation o{t[1], {}, {}};
    for (std::size_t i = 3; i < t.size(); ++i) {
      if (t[2] == "counts") {
        o.counts.push_back(to_int(t[i], line));
      } else {
        o.values.push_back(to_double(t[i], line));
      }
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::string serialize_observations_text(const std::vector<Observation>& obs) {
  std::ostringstream out;
  for (const Observation& o : obs) {
    if (!o.counts.empty()) {
      out << "observe " << o.atom << " counts";
      for (int c : o.counts) out << ' ' << c;
      out << '\n';
    }
    if (!o.values.empty()) {
      out << "observe " << o.atom << " values";
      for (double v : o.values) out << ' ' << format_double(v);
      out << '\n';
    }
  }
  return out.str();
}

json observations_to_json(const std::vector<Observation>& obs) {
  json a = json::array();
  for (const Observation& o : obs) {
    json e = {{"atom", o.atom}};
    if (!o.counts.empty()) e["counts"] = o.counts;
    if (!o.values.empty()) e["values"] = o.values;
    a.push_back(e);
  }
  return a;
}

std::vector<Observation> observations_from_json(const json& j) {
  try {
    std::vector<Observation> out;
    for (const auto& e : j) {
      out.push_back({e.at("atom").get<std::string>(), e.value("counts", std::vector<int>{}),
                     e.value("values", std::vector<double>{})});
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("observation json: ") + e.what());
  }
}

std::vector<Observation> load_observations(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".json") {
    try {
      return observations_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("observation json: ") + e.what());
    }
  }
  return parse_observations_text(text);
}

void check_observations(const Rhm& model, const std::vector<Observation>& obs) {
  std::map<std::string, int> seen;
  for (const Observation& o : obs) {
    if (!model.has_atom(o.atom)) throw DomainError("observation of unknown atom " + o.atom);
    const Atom& a = model.atom(o.atom);
    if (!o.counts.empty()) {
      if (!a.domain.is_discrete()) throw DomainError("counts observed for continuous atom " + o.atom);
      if (static_cast<int>(o.counts.size()) != a.domain.value_count()) {
        throw DomainError("observation of " + o.atom + " needs one count per value");
      }
      for (int c : o.counts) {
        if (c < 0) throw DomainError("negative count for " + o.atom);
      }
    }
    for (double v : o.values) {
      if (!a.domain.contains(v)) throw DomainError("observed value outside the domain of " + o.atom);
    }
    seen[o.atom] += o.observed();
    if (seen[o.atom] > a.population) throw DomainError("more observations than rvs for " + o.atom);
  }
}

// --- CSV -------------------------------------------------------------------------

CsvMatrix parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  CsvMatrix m;
  std::vector<std::vector<double>> rows;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    const auto cells = split(raw, ',');
    const Line line{number, {}};
    if (m.ids.empty()) {
      m.ids = cells;
      continue;
    }
    if (cells.size() != m.ids.size()) fail(line, "row width does not match the header");
    std::vector<double> row;
    for (const auto& c : cells) {
      row.push_back(c.empty() ? std::numeric_limits<double>::quiet_NaN() : to_double(c, line));
    }
    rows.push_back(std::move(row));
  }
  if (m.ids.empty()) throw ParseError("csv: missing header row");
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.ids.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < m.ids.size(); ++c) m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

std::string write_csv(const CsvMatrix& m) {
  std::ostringstream out;
  for (std::size_t c = 0; c < m.ids.size(); ++c) out << (c ? "," : "") << m.ids[c];
  out << '\n';
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      if (c) out << ',';
      if (!std::isnan(m.values(r, c))) out << format_double(m.values(r, c));
    }
    out << '\n';
  }
  return out.str();
}

CsvMatrix load_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

}  // namespace lrvi
