#include "lrvi/bounds.hpp"

#include <cmath>
#include <limits>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/lp.hpp"

namespace lrvi {

namespace {

void check_extension(double n, const AtomExtension& ext) {
  if (!(ext.n_bar >= n)) throw DomainError("extension size n_bar must be >= n");
  if (!ext.continuous && ext.d < 2) throw DomainError("discrete extension needs d >= 2");
}

BoundValue make_bound(double v, std::string branch) { return {v, v > 1.0, std::move(branch)}; }

}  // namespace

BoundValue lemma1_bound(int n, const AtomExtension& ext) {
  if (n < 0) throw DomainError("lemma1_bound: negative population");
  check_extension(n, ext);
  if (std::isinf(ext.n_bar)) return make_bound(0.0, ext.continuous ? "continuous" : "discrete");
  if (ext.continuous) return make_bound(n * (n - 1.0) / ext.n_bar, "continuous");
  return make_bound(2.0 * ext.d * n / ext.n_bar, "discrete");
}

BoundValue lemma3_bound(int n, int m, const AtomExtension& ext_x, const AtomExtension& ext_y) {
  const BoundValue x = lemma1_bound(n, ext_x);
  const BoundValue y = lemma1_bound(m, ext_y);
  return make_bound(x.value + y.value, x.branch + "+" + y.branch);
}

Theorem4Bound theorem4_bound(const std::vector<double>& eps, std::optional<double> z) {
  double s = 0.0;
  for (double e : eps) {
    if (!(e >= 0.0)) throw DomainError("theorem4_bound: negative parfactor error");
    s += e;
  }
  Theorem4Bound out;
  if (z) {
    if (!(*z > 0.0)) throw DomainError("theorem4_bound: normalizer must be positive");
    s /= *z;
    out.normalized = true;
  }
  out.bound = make_bound(s, out.normalized ? "sum/z" : "sum");
  return out;
}

BoundReport bound_report(const Rhm& model, const ExtendibilitySpec& spec, std::optional<double> z) {
  BoundReport r;
  std::vector<double> eps;
  for (const Parfactor& g : model.parfactors()) {
    const auto atoms = model.parfactor_atoms(g);
    bool covered = !atoms.empty();
    for (const Atom& a : atoms) covered = covered && spec.count(a.name) > 0;
    if (!covered) continue;
    BoundValue b;
    if (atoms.size() == 2) {
      b = lemma3_bound(atoms[0].population, atoms[1].population, spec.at(atoms[0].name), spec.at(atoms[1].name));
    } else {
      double v = 0.0;
      std::string branch;
      for (const Atom& a : atoms) {
        const BoundValue one = lemma1_bound(a.population, spec.at(a.name));
        v += one.value;
        branch += (branch.empty() ? "" : "+") + one.branch;
      }
      b = make_bound(v, branch);
    }
    r.parfactors.emplace_back(g.id, b);
    eps.push_back(b.value);
  }
  r.model = theorem4_bound(eps, z);
  return r;
}

Eigen::MatrixXd hypergeometric_matrix(int n, int n_bar) {
  if (n < 0 || n_bar < n) throw DomainError("hypergeometric_matrix: need 0 <= n <= n_bar");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n_bar + 1);
  const double denom = log_binomial_coefficient<double>(n_bar, n);
  for (int big = 0; big <= n_bar; ++big) {
    for (int h = std::max(0, n - (n_bar - big)); h <= std::min(n, big); ++h) {
      m(h, big) = std::exp(log_binomial_coefficient<double>(big, h) +
                           log_binomial_coefficient<double>(n_bar - big, n - h) - denom);
    }
  }
  return m;
}

ExtendibilityResult check_extendibility(const Eigen::VectorXd& probs, int n_bar, const ExtendibilityOptions& options) {
  const int n = static_cast<int>(probs.size()) - 1;
  if (n < 1 || n > options.max_n) throw CapacityError("check_extendibility: n outside [1, max_n]");
  if (n_bar > options.max_n_bar) throw CapacityError("check_extendibility: n_bar exceeds max_n_bar");
  if (n_bar < n) throw DomainError("check_extendibility: n_bar must be >= n");
  if ((probs.array() < 0.0).any() || std::abs(probs.sum() - 1.0) > 1e-9) {
    throw DomainError("check_extendibility: input is not a probability vector");
  }
  const Eigen::MatrixXd m = hypergeometric_matrix(n, n_bar);
  LpOptions lp;
  lp.tol = options.tol;
  const LpResult res = solve_lp(m, probs, Eigen::VectorXd::Zero(n_bar + 1), lp);
  ExtendibilityResult out;
  out.infeasibility = res.infeasibility;
  if (res.status != LpStatus::kOptimal) return out;
  out.max_residual = (m * res.x - probs).cwiseAbs().maxCoeff();
  out.feasible = out.max_residual <= options.tol;
  if (out.feasible) out.witness = res.x / res.x.sum();
  return out;
}

ExtendibilityResult check_extendibility(const HistTable& table, int n_bar, const ExtendibilityOptions& options) {
  if (table.atoms().size() != 1 || table.atoms()[0].domain.kind() != DomainKind::kBinary) {
    throw DomainError("check_extendibility: needs a table over one binary atom");
  }
  const Atom& a = table.atoms()[0];
  if (a.population > options.max_n) throw CapacityError("check_extendibility: n exceeds max_n");
  Eigen::VectorXd logm = Eigen::VectorXd::Constant(a.population + 1, kNegInf<double>);
  for (const auto& [key, v] : table.log_entries()) logm(key[0].ones()) = table.log_hist_mass(key);
  const double z = log_sum_exp(logm);
  if (!std::isfinite(z)) throw DomainError("check_extendibility: table has zero mass");
  return check_extendibility(Eigen::VectorXd((logm.array() - z).exp()), n_bar, options);
}

}  // namespace lrvi
