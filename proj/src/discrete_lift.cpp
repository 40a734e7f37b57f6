#include "lrvi/discrete_lift.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/random.hpp"

namespace lrvi {

HistDistribution normalize_hist_table(const HistTable& table) {
  HistDistribution out;
  out.atoms = table.atoms();
  Eigen::VectorXd log_mass(static_cast<Eigen::Index>(table.size()));
  Eigen::Index i = 0;
  for (const auto& [key, lv] : table.log_entries()) {
    out.keys.push_back(key);
    log_mass(i++) = table.log_hist_mass(key);
  }
  const double log_z = log_sum_exp(log_mass);
  if (!std::isfinite(log_z)) throw DomainError("normalize_hist_table: table has zero total mass");
  out.prob = (log_mass.array() - log_z).exp().matrix();
  return out;
}

Eigen::VectorXd mixture_hist_probabilities(const MixtureOfIidDiscrete& m, const std::vector<HistKey>& keys) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(keys.size()));
  for (std::size_t i = 0; i < keys.size(); ++i) out(static_cast<Eigen::Index>(i)) = std::exp(m.log_hist_mass(keys[i]));
  return out;
}

double mixture_total_variation(const HistDistribution& dist, const MixtureOfIidDiscrete& m) {
  const Eigen::VectorXd q = mixture_hist_probabilities(m, dist.keys);
  // The mixture sums to one over the full space, so the mass it puts
  // outside dist.keys is 1 - sum(q).
  const double outside = std::max(0.0, 1.0 - q.sum());
  return std::min(1.0, 0.5 * ((dist.prob - q).cwiseAbs().sum() + outside));
}

namespace {

// Weighted histogram data in matrix form, restricted to keys with mass.
struct EmData {
  std::vector<Eigen::MatrixXd> counts;  // per atom, rows = keys
  std::vector<int> population;
  Eigen::VectorXd log_coef;
  Eigen::VectorXd weight;
};

EmData make_em_data(const HistDistribution& dist) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < dist.prob.size(); ++i) {
    if (dist.prob(i) > 0.0) rows.push_back(i);
  }
  const auto K = static_cast<Eigen::Index>(rows.size());
  EmData data;
  data.log_coef = Eigen::VectorXd::Zero(K);
  data.weight.resize(K);
  for (const Atom& a : dist.atoms) {
    data.counts.emplace_back(K, a.domain.value_count());
    data.population.push_back(a.population);
  }
  for (Eigen::Index r = 0; r < K; ++r) {
    const HistKey& key = dist.keys[static_cast<std::size_t>(rows[r])];
    data.weight(r) = dist.prob(rows[r]);
    for (std::size_t a = 0; a < dist.atoms.size(); ++a) {
      data.counts[a].row(r) = key[a].as_vector().transpose();
      data.log_coef(r) += log_multinomial_coefficient(key[a]);
    }
  }
  return data;
}

// Per-key, per-component log joint log(w_l) + log f_l(key).
Eigen::MatrixXd component_log_terms(const EmData& data, const Eigen::VectorXd& w,
                                    const std::vector<Eigen::MatrixXd>& params) {
  // 0 log 0 = 0: a tiny floor keeps zero counts at zero and makes positive
  // counts on zero-probability values effectively impossible.
  constexpr double kFloor = 1e-300;
  Eigen::MatrixXd terms = data.log_coef.replicate(1, w.size());
  for (std::size_t a = 0; a < params.size(); ++a) {
    const Eigen::MatrixXd log_p = params[a].array().max(kFloor).log().matrix();
    terms.noalias() += data.counts[a] * log_p.transpose();
  }
  const Eigen::RowVectorXd log_w = w.array().max(kFloor).log().matrix().transpose();
  terms.rowwise() += log_w;
  return terms;
}

MixtureOfIidDiscrete prune(const MixtureOfIidDiscrete& m, double min_weight) {
  std::vector<int> keep;
  for (int l = 0; l < m.k(); ++l) {
    if (m.weights()(l) >= min_weight) keep.push_back(l);
  }
  if (keep.empty() || static_cast<int>(keep.size()) == m.k()) return m;
  Eigen::VectorXd w(static_cast<Eigen::Index>(keep.size()));
  std::vector<Eigen::MatrixXd> params;
  for (const auto& p : m.params()) params.emplace_back(static_cast<Eigen::Index>(keep.size()), p.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    w(r) = m.weights()(keep[i]);
    for (std::size_t a = 0; a < params.size(); ++a) params[a].row(r) = m.params()[a].row(keep[i]);
  }
  w /= w.sum();
  return MixtureOfIidDiscrete(m.atoms(), w, std::move(params));
}

// Interior starting point for a component centered on one histogram tuple.
std::vector<Eigen::MatrixXd> params_at_key(const HistKey& key) {
  std::vector<Eigen::MatrixXd> out;
  for (const Histogram& h : key) {
    const Eigen::VectorXd c = h.as_vector();
    Eigen::VectorXd p = (c.array() + 0.5) / (h.population() + 0.5 * static_cast<double>(c.size()));
    out.emplace_back(p.transpose());
  }
  return out;
}

MixtureOfIidDiscrete add_component(const MixtureOfIidDiscrete& m, const HistKey& key) {
  const int k = m.k();
  Eigen::VectorXd w(k + 1);
  w.head(k) = m.weights() * (static_cast<double>(k) / (k + 1));
  w(k) = 1.0 / (k + 1);
  const auto fresh = params_at_key(key);
  std::vector<Eigen::MatrixXd> params;
  for (std::size_t a = 0; a < m.params().size(); ++a) {
    Eigen::MatrixXd p(k + 1, m.params()[a].cols());
    p.topRows(k) = m.params()[a];
    p.row(k) = fresh[a];
    params.push_back(std::move(p));
  }
  return MixtureOfIidDiscrete(m.atoms(), w, std::move(params));
}

void check_options(const HistTable& table, const DiscreteFitOptions& o) {
  if (!(o.tol > 0.0)) throw DomainError("fit: tol must be positive");
  if (o.k_max < 1) throw DomainError("fit: k_max must be >= 1");
  if (table.size() == 0) throw DomainError("fit: empty table");
  for (const Atom& a : table.atoms()) {
    if (!a.domain.is_discrete()) throw DomainError("fit: atom " + a.name + " is continuous");
  }
}

struct EmState {
  Eigen::VectorXd w;
  std::vector<Eigen::MatrixXd> params;
};

// One EM update from `in` into `out`; returns the log-likelihood of `in`.
double em_step(const EmData& data, const EmState& in, EmState& out) {
  const Eigen::MatrixXd terms = component_log_terms(data, in.w, in.params);
  Eigen::VectorXd row_lse(terms.rows());
  for (Eigen::Index r = 0; r < terms.rows(); ++r) row_lse(r) = log_sum_exp(terms.row(r));
  // E-step responsibilities scaled by the data weight.
  Eigen::MatrixXd resp = (terms.colwise() - row_lse).array().exp().matrix();
  resp.array().colwise() *= data.weight.array();
  const Eigen::VectorXd mass = resp.colwise().sum().transpose();
  out.w = mass / mass.sum();
  out.params = in.params;
  for (std::size_t a = 0; a < in.params.size(); ++a) {
    const Eigen::MatrixXd expected = resp.transpose() * data.counts[a];
    for (Eigen::Index l = 0; l < out.w.size(); ++l) {
      if (mass(l) <= 1e-300) continue;
      out.params[a].row(l) = expected.row(l) / (mass(l) * data.population[a]);
      out.params[a].row(l) /= out.params[a].row(l).sum();
    }
  }
  return data.weight.dot(row_lse);
}

// x0 - 2 alpha r + alpha^2 v with r = x1 - x0, v = x2 - 2 x1 + x0.
Eigen::MatrixXd extrapolate(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                            double alpha) {
  return x0 - 2.0 * alpha * (x1 - x0) + alpha * alpha * (x2 - 2.0 * x1 + x0);
}

// Squared-extrapolation step (SQUAREM, steplength -|r|/|v|), shrunk toward
// the plain double EM step until it stays on the simplex.
std::optional<EmState> squarem_point(const EmState& s0, const EmState& s1, const EmState& s2) {
  double rr = (s1.w - s0.w).squaredNorm(), vv = (s2.w - 2.0 * s1.w + s0.w).squaredNorm();
  for (std::size_t a = 0; a < s0.params.size(); ++a) {
    rr += (s1.params[a] - s0.params[a]).squaredNorm();
    vv += (s2.params[a] - 2.0 * s1.params[a] + s0.params[a]).squaredNorm();
  }
  if (!(vv > 0.0)) return std::nullopt;
  double alpha = std::min(-1.0, -std::sqrt(rr / vv));
  for (int tries = 0; tries < 20 && alpha < -1.0 - 1e-3; ++tries, alpha = (alpha - 1.0) / 2.0) {
    EmState out{extrapolate(s0.w, s1.w, s2.w, alpha), {}};
    bool ok = out.w.minCoeff() >= 0.0;
    for (std::size_t a = 0; ok && a < s0.params.size(); ++a) {
      out.params.push_back(extrapolate(s0.params[a], s1.params[a], s2.params[a], alpha));
      ok = out.params.back().minCoeff() >= 0.0;
    }
    if (!ok) continue;
    out.w /= out.w.sum();
    for (Eigen::MatrixXd& p : out.params) p.array().colwise() /= p.rowwise().sum().array();
    return out;
  }
  return std::nullopt;
}

}  // namespace

// EM with safeguarded squared extrapolation: an extrapolated point is kept
// (after one EM step from it) only when its log-likelihood is at least that
// of the plain EM path, so the recorded trace never decreases.
MixtureOfIidDiscrete run_discrete_em(const HistDistribution& dist, MixtureOfIidDiscrete init,
                                     const DiscreteFitOptions& options, FitReport& report) {
  const EmData data = make_em_data(dist);
  const int k = init.k();
  EmState s0{init.weights(), init.params()}, s1, s2, s3;
  int spent = 0;
  const auto record = [&](double ll) {
    report.log_likelihood_trace.push_back(ll);
    report.trace_k.push_back(k);
  };
  const auto converged = [&](double prev, double ll) {
    return std::abs(ll - prev) <= options.em_relative_tol * std::max(1.0, std::abs(prev));
  };
  while (true) {
    const double ll0 = em_step(data, s0, s1);
    record(ll0);
    if (spent >= options.max_em_iterations) break;
    const double ll1 = em_step(data, s1, s2);
    spent += 2;
    record(ll1);
    if (converged(ll0, ll1) || spent >= options.max_em_iterations) {
      s0 = std::move(s2);
      break;
    }
    const std::optional<EmState> jump = squarem_point(s0, s1, s2);
    if (jump) {
      const double ll_jump = em_step(data, *jump, s3);
      ++spent;
      if (ll_jump >= ll1) {
        s0 = std::move(s3);
        continue;
      }
    }
    s0 = std::move(s2);
  }
  report.em_iterations += spent;
  return MixtureOfIidDiscrete(init.atoms(), s0.w, std::move(s0.params));
}

DiscreteFit fit_mixture_discrete(const HistTable& table, const DiscreteFitOptions& options) {
  check_options(table, options);
  const HistDistribution dist = normalize_hist_table(table);
  Rng rng = make_rng(derive_seed(options.seed, "fit_mixture_discrete"));

  int k_limit = options.k_max;
  int max_pop = 1;
  for (const Atom& a : table.atoms()) max_pop = std::max(max_pop, a.population);
  k_limit = std::min(k_limit, max_pop);

  FitReport report;
  // k = 1 from the weighted mean frequencies.
  std::vector<Eigen::MatrixXd> mean_params;
  for (std::size_t a = 0; a < dist.atoms.size(); ++a) {
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(dist.atoms[a].domain.value_count());
    for (std::size_t i = 0; i < dist.keys.size(); ++i) {
      freq += dist.prob(static_cast<Eigen::Index>(i)) * dist.keys[i][a].as_vector();
    }
    freq /= freq.sum();
    mean_params.emplace_back(freq.transpose());
  }
  MixtureOfIidDiscrete best = run_discrete_em(
      dist, MixtureOfIidDiscrete(dist.atoms, Eigen::VectorXd::Ones(1), std::move(mean_params)), options, report);
  double best_tv = mixture_total_variation(dist, best);
  report.tv_by_k.push_back(best_tv);

  while (best.k() < k_limit && best_tv > options.tol) {
    // Candidate seeds for the new component: the largest under-fitted cells
    // and one cell drawn at random from the target.
    const Eigen::VectorXd q = mixture_hist_probabilities(best, dist.keys);
    const Eigen::VectorXd residual = dist.prob - q;
    std::vector<std::size_t> order(dist.keys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return residual(static_cast<Eigen::Index>(a)) > residual(static_cast<Eigen::Index>(b));
    });
    std::vector<std::size_t> candidates;
    const int top = std::max(1, options.init_candidates - 1);
    for (std::size_t i = 0; i < order.size() && static_cast<int>(candidates.size()) < top; ++i) {
      candidates.push_back(order[i]);
    }
    if (options.init_candidates > 1) {
      std::discrete_distribution<std::size_t> pick(dist.prob.data(), dist.prob.data() + dist.prob.size());
      candidates.push_back(pick(rng));
    }

    MixtureOfIidDiscrete next;
    double next_tv = 2.0;
    FitReport next_report;
    int spent = 0;
    for (std::size_t c : candidates) {
      FitReport trial_report;
      MixtureOfIidDiscrete trial = prune(
          run_discrete_em(dist, add_component(best, dist.keys[c]), options, trial_report), options.prune_weight);
      spent += trial_report.em_iterations;
      const double tv = mixture_total_variation(dist, trial);
      if (tv < next_tv) {
        next_tv = tv;
        next = std::move(trial);
        next_report = std::move(trial_report);
      }
    }
    report.em_iterations += spent;
    report.log_likelihood_trace.insert(report.log_likelihood_trace.end(), next_report.log_likelihood_trace.begin(),
                                       next_report.log_likelihood_trace.end());
    report.trace_k.insert(report.trace_k.end(), next_report.trace_k.begin(), next_report.trace_k.end());
    if (best_tv - next_tv < options.tol / 10.0 || next.k() <= best.k()) break;
    best = std::move(next);
    best_tv = next_tv;
    report.tv_by_k.push_back(best_tv);
  }
  report.achieved_tv = best_tv;
  report.k_used = best.k();
  return {std::move(best), std::move(report)};
}

DiscreteFit fit_joint_mixture_discrete(const HistTable& table, const DiscreteFitOptions& options) {
  if (table.atoms().size() != 2) throw ArityError("fit_joint_mixture_discrete needs a table over two atoms");
  return fit_mixture_discrete(table, options);
}

}  // namespace lrvi
