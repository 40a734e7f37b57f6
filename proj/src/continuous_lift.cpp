#include "lrvi/continuous_lift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/random.hpp"

namespace lrvi {

int SampleSet::offset(std::size_t atom) const {
  int off = 0;
  for (std::size_t a = 0; a < atom; ++a) off += atoms[a].population;
  return off;
}

std::vector<Eigen::VectorXd> SampleSet::row_values(int t) const {
  std::vector<Eigen::VectorXd> out;
  int off = 0;
  for (const Atom& a : atoms) {
    out.emplace_back(rows.row(t).segment(off, a.population).transpose());
    off += a.population;
  }
  return out;
}

namespace {

std::vector<Eigen::VectorXd> split_row(const std::vector<Atom>& atoms, const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> out;
  Eigen::Index off = 0;
  for (const Atom& a : atoms) {
    out.push_back(x.segment(off, a.population));
    off += a.population;
  }
  return out;
}

// Effective sample size of one column from its autocorrelation, summed up to
// the first negative lag.
double column_ess(const Eigen::VectorXd& x) {
  const auto n = x.size();
  if (n < 4) return static_cast<double>(n);
  const Eigen::VectorXd c = x.array() - x.mean();
  const double var = c.squaredNorm() / static_cast<double>(n);
  if (var <= 0.0) return static_cast<double>(n);
  double tau = 1.0;
  const Eigen::Index max_lag = std::min<Eigen::Index>(n / 2, 1000);
  for (Eigen::Index lag = 1; lag < max_lag; ++lag) {
    const double rho = c.head(n - lag).dot(c.tail(n - lag)) / (static_cast<double>(n) * var);
    if (rho < 0.0) break;
    tau += 2.0 * rho;
  }
  return static_cast<double>(n) / tau;
}

SampleSet sample_chain(const std::vector<Atom>& atoms, const LogDensity& log_density, int n, std::uint64_t seed,
                       const SamplerOptions& options) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<const Atom*> col_atom;
  for (const Atom& a : atoms) {
    for (int i = 0; i < a.population; ++i) col_atom.push_back(&a);
  }
  const auto dim = static_cast<Eigen::Index>(col_atom.size());
  auto eval = [&](const Eigen::VectorXd& x) { return log_density(split_row(atoms, x)); };

  // Starting point: the support midpoint / zero, then random restarts.
  Eigen::VectorXd x(dim);
  double lp = kNegInf<double>;
  for (int attempt = 0; attempt <= options.max_restarts && !(lp > kNegInf<double>); ++attempt) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const AtomDomain& dom = col_atom[j]->domain;
      if (dom.is_discrete()) {
        x(j) = attempt == 0 ? 0.0 : std::floor(unif(rng) * dom.value_count());
      } else if (dom.support()) {
        const Interval s = *dom.support();
        x(j) = attempt == 0 ? 0.5 * (s.lo + s.hi) : s.lo + (s.hi - s.lo) * unif(rng);
      } else {
        x(j) = attempt == 0 ? 0.0 : gauss(rng) * std::ldexp(1.0, std::min(attempt / 10, 20));
      }
    }
    lp = eval(x);
    if (std::isnan(lp)) lp = kNegInf<double>;
  }
  if (!(lp > kNegInf<double>)) throw ComputationError("sampler: zero-density start after all restarts");

  Eigen::VectorXd step(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const auto& s = col_atom[j]->domain.support();
    step(j) = s ? (s->hi - s->lo) / 4.0 : 1.0;
  }
  Eigen::VectorXd window_accept = Eigen::VectorXd::Zero(dim);
  long long proposals = 0;
  long long accepted = 0;

  auto sweep = [&](bool adapting) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const AtomDomain& dom = col_atom[j]->domain;
      const double old = x(j);
      double proposal;
      if (dom.is_discrete()) {
        const int d = dom.value_count();
        const int shift = 1 + static_cast<int>(unif(rng) * (d - 1));
        proposal = static_cast<double>((static_cast<int>(old) + std::min(shift, d - 1)) % d);
      } else {
        proposal = old + step(j) * gauss(rng);
      }
      const double u = unif(rng);
      bool accept = false;
      if (dom.contains(proposal)) {
        x(j) = proposal;
        const double lp_new = eval(x);
        if (!std::isnan(lp_new) && lp_new > kNegInf<double> && std::log(u) < lp_new - lp) {
          accept = true;
          lp = lp_new;
        } else {
          x(j) = old;
        }
      }
      if (adapting) {
        window_accept(j) += accept ? 1.0 : 0.0;
      } else {
        ++proposals;
        accepted += accept ? 1 : 0;
      }
    }
  };

  for (int s = 1; s <= options.burn_in_sweeps; ++s) {
    sweep(true);
    if (s % options.adapt_every == 0) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        if (col_atom[j]->domain.is_discrete()) continue;
        const double rate = window_accept(j) / options.adapt_every;
        if (rate < 0.23) step(j) *= 0.7;
        if (rate > 0.44) step(j) *= 1.3;
      }
      window_accept.setZero();
    }
  }

  SampleSet out;
  out.atoms = atoms;
  out.seed = seed;
  out.rows.resize(n, dim);
  out.log_target.resize(n);
  for (int t = 0; t < n; ++t) {
    for (int s = 0; s < std::max(1, options.thin); ++s) sweep(false);
    out.rows.row(t) = x.transpose();
    out.log_target(t) = lp;
  }
  out.acceptance_rate = proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  return out;
}

}  // namespace

SampleSet sample_density(const std::vector<Atom>& atoms, const LogDensity& log_density, int n, std::uint64_t seed,
                         const SamplerOptions& options) {
  if (n < 1) throw DomainError("sampler: N must be >= 1");
  if (atoms.empty()) throw DomainError("sampler: no atoms");
  for (const Atom& a : atoms) a.validate();
  const int chains = std::clamp(options.chains, 1, n);
  SampleSet out;
  out.atoms = atoms;
  out.seed = seed;
  double accept = 0.0;
  int done = 0;
  for (int c = 0; c < chains; ++c) {
    const int len = n / chains + (c < n % chains ? 1 : 0);
    SampleSet part = sample_chain(atoms, log_density, len, derive_seed(seed, static_cast<std::uint64_t>(c)), options);
    if (c == 0) {
      out.rows.resize(n, part.rows.cols());
      out.log_target.resize(n);
    }
    out.rows.middleRows(done, len) = part.rows;
    out.log_target.segment(done, len) = part.log_target;
    accept += part.acceptance_rate * len;
    done += len;
  }
  out.acceptance_rate = accept / n;
  double ess = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < out.rows.cols(); ++j) ess = std::min(ess, column_ess(out.rows.col(j)));
  out.ess = std::isfinite(ess) ? ess : static_cast<double>(n);
  return out;
}

SampleSet sample_potential(const Potential& p, const std::vector<Atom>& atoms, int n, std::uint64_t seed,
                           const SamplerOptions& options) {
  return sample_density(
      atoms, [&p](std::span<const Eigen::VectorXd> args) { return log_eval_potential(p, args); }, n, seed, options);
}

SampleSet sample_parfactor(const Parfactor& g, const Rhm& model, int n, std::uint64_t seed,
                           const SamplerOptions& options) {
  const std::vector<Atom> atoms = model.parfactor_atoms(g);
  return sample_density(
      atoms,
      [&](std::span<const Eigen::VectorXd> args) {
        Valuation v;
        for (std::size_t a = 0; a < atoms.size(); ++a) v.values[atoms[a].name] = args[a];
        return log_parfactor_value(g, model, v);
      },
      n, seed, options);
}

double bandwidth_select(const Eigen::VectorXd& points, const Eigen::VectorXd& weights) {
  constexpr double kFloor = 1e-6;
  if (points.size() == 0) throw DomainError("bandwidth_select: no points");
  Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(points.size()) : weights;
  if (w.size() != points.size()) throw ArityError("bandwidth_select: one weight per point required");
  const double total = w.sum();
  if (!(total > 0.0)) return kFloor;
  w /= total;
  const double mean = w.dot(points);
  const double var = w.dot((points.array() - mean).square().matrix());
  const double n_eff = 1.0 / w.squaredNorm();
  const double b = 1.06 * std::sqrt(std::max(var, 0.0)) * std::pow(n_eff, -0.2);
  return std::max(b, kFloor);
}

double kde_mixture_log_density(const KdeMixture& m, std::span<const Eigen::VectorXd> values) {
  return m.log_valuation_value(values);
}

double estimate_total_variation(const SampleSet& samples, const KdeMixture& m, const std::vector<int>& rows) {
  if (samples.log_target.size() != samples.size() || rows.empty()) return 1.0;
  // log(q / phi) per row; 1/Z = E_target[q / phi].
  Eigen::VectorXd log_ratio(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto vals = samples.row_values(rows[i]);
    log_ratio(static_cast<Eigen::Index>(i)) = m.log_valuation_value(vals) - samples.log_target(rows[i]);
  }
  const double log_inv_z = log_sum_exp(log_ratio) - std::log(static_cast<double>(rows.size()));
  double tv = 0.0;
  for (Eigen::Index i = 0; i < log_ratio.size(); ++i) tv += std::max(0.0, 1.0 - std::exp(log_ratio(i) - log_inv_z));
  return std::clamp(tv / static_cast<double>(rows.size()), 0.0, 1.0);
}

namespace {

struct KdeEmState {
  const SampleSet& samples;
  std::vector<int> train;
  std::vector<std::vector<Eigen::VectorXd>> values;  // per row, per atom
};

// Per-row, per-component log joint log(w_l) + log f_l(row).
Eigen::MatrixXd kde_log_terms(const KdeEmState& s, const std::vector<int>& rows, const KdeMixture& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.k());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int l = 0; l < m.k(); ++l) {
      const double lw = m.weights()(l) > 0.0 ? std::log(m.weights()(l)) : kNegInf<double>;
      out(static_cast<Eigen::Index>(i), l) = lw + m.log_component_value(l, s.values[rows[i]]);
    }
  }
  return out;
}

double mean_log_likelihood(const Eigen::MatrixXd& terms) {
  if (terms.rows() == 0) return 0.0;
  double ll = 0.0;
  for (Eigen::Index r = 0; r < terms.rows(); ++r) ll += log_sum_exp(terms.row(r));
  return ll / static_cast<double>(terms.rows());
}

// M-step: rebuild every component from responsibilities (rows = s.train).
KdeMixture kde_m_step(const KdeEmState& s, const Eigen::MatrixXd& resp, const KdeFitOptions& options, Rng& rng) {
  const auto& atoms = s.samples.atoms;
  const int k = static_cast<int>(resp.cols());
  Eigen::VectorXd mass = resp.colwise().sum().transpose();
  Eigen::VectorXd w = mass / mass.sum();
  std::vector<std::vector<AtomFactor>> comps(k);
  for (int l = 0; l < k; ++l) {
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      const int pop = atoms[a].population;
      const auto total = static_cast<Eigen::Index>(s.train.size()) * pop;
      if (atoms[a].domain.is_discrete()) {
        Eigen::VectorXd freq = Eigen::VectorXd::Zero(atoms[a].domain.value_count());
        for (std::size_t i = 0; i < s.train.size(); ++i) {
          const Eigen::VectorXd& x = s.values[s.train[i]][a];
          for (Eigen::Index j = 0; j < x.size(); ++j) freq(static_cast<Eigen::Index>(x(j))) += resp(static_cast<Eigen::Index>(i), l);
        }
        freq = freq.array().max(1e-12 * std::max(freq.sum(), 1e-300));
        comps[l].emplace_back(CategoricalFactor(freq / freq.sum()));
        continue;
      }
      Eigen::VectorXd points(total);
      Eigen::VectorXd pw(total);
      Eigen::Index p = 0;
      for (std::size_t i = 0; i < s.train.size(); ++i) {
        const Eigen::VectorXd& x = s.values[s.train[i]][a];
        for (Eigen::Index j = 0; j < x.size(); ++j, ++p) {
          points(p) = x(j);
          pw(p) = resp(static_cast<Eigen::Index>(i), l);
        }
      }
      if (!(pw.sum() > 0.0)) pw.setOnes();
      const double b = bandwidth_select(points, pw);
      std::vector<Eigen::Index> live;
      for (Eigen::Index q = 0; q < total; ++q) {
        if (pw(q) > 0.0) live.push_back(q);
      }
      if (static_cast<int>(live.size()) <= options.max_centers) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(live.size()));
        Eigen::VectorXd cw(static_cast<Eigen::Index>(live.size()));
        for (std::size_t q = 0; q < live.size(); ++q) {
          c(static_cast<Eigen::Index>(q)) = points(live[q]);
          cw(static_cast<Eigen::Index>(q)) = pw(live[q]);
        }
        comps[l].emplace_back(Kde(c, b, cw));
      } else {
        comps[l].emplace_back(Kde(systematic_resample(points, pw, options.max_centers, rng), b));
      }
    }
  }
  return KdeMixture(atoms, w, std::move(comps));
}

Eigen::MatrixXd responsibilities(const Eigen::MatrixXd& terms) {
  Eigen::MatrixXd r(terms.rows(), terms.cols());
  for (Eigen::Index i = 0; i < terms.rows(); ++i) {
    const double lse = log_sum_exp(terms.row(i));
    r.row(i) = (terms.row(i).array() - lse).exp().matrix();
  }
  return r;
}

KdeMixture run_kde_em(const KdeEmState& s, KdeMixture m, const KdeFitOptions& options, Rng& rng, FitReport& report) {
  Eigen::MatrixXd terms = kde_log_terms(s, s.train, m);
  double ll = mean_log_likelihood(terms);
  report.log_likelihood_trace.push_back(ll);
  report.trace_k.push_back(m.k());
  for (int it = 0; it < options.max_em_iterations; ++it) {
    KdeMixture next = kde_m_step(s, responsibilities(terms), options, rng);
    Eigen::MatrixXd next_terms = kde_log_terms(s, s.train, next);
    const double next_ll = mean_log_likelihood(next_terms);
    ++report.em_iterations;
    if (!(next_ll >= ll)) break;  // reject a step that lowers the likelihood
    const bool converged = next_ll - ll <= options.em_relative_tol * std::max(1.0, std::abs(ll));
    m = std::move(next);
    terms = std::move(next_terms);
    ll = next_ll;
    report.log_likelihood_trace.push_back(ll);
    report.trace_k.push_back(m.k());
    if (converged) break;
  }
  return m;
}

// Per-coordinate mean of one component, used to seed hard splits.
Eigen::VectorXd component_mean(const KdeMixture& m, int l) {
  std::vector<double> out;
  for (std::size_t a = 0; a < m.atoms().size(); ++a) {
    const AtomFactor& f = m.factor(l, static_cast<int>(a));
    double mean;
    if (const auto* p = std::get_if<CategoricalFactor>(&f)) {
      mean = Eigen::VectorXd::LinSpaced(p->size(), 0.0, static_cast<double>(p->size() - 1)).dot(*p);
    } else {
      mean = std::get<Kde>(f).mean();
    }
    for (int i = 0; i < m.atoms()[a].population; ++i) out.push_back(mean);
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

int distinct_rows(const Eigen::MatrixXd& rows) {
  std::vector<std::vector<double>> v;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(rows.cols()));
    for (Eigen::Index j = 0; j < rows.cols(); ++j) r[static_cast<std::size_t>(j)] = rows(i, j);
    v.push_back(std::move(r));
  }
  std::sort(v.begin(), v.end());
  return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

KdeFit fit_kde_mixture(const SampleSet& samples, const KdeFitOptions& options) {
  if (samples.size() < 1) throw DomainError("fit_kde_mixture: no samples");
  if (options.k_max < 1) throw DomainError("fit_kde_mixture: k_max must be >= 1");
  if (std::none_of(samples.atoms.begin(), samples.atoms.end(), [](const Atom& a) { return !a.domain.is_discrete(); })) {
    throw DomainError("fit_kde_mixture: needs at least one continuous atom");
  }
  const int distinct = distinct_rows(samples.rows);
  if (options.k_max > distinct) {
    throw ComputationError("fit_kde_mixture: k_max = " + std::to_string(options.k_max) + " exceeds the " +
                           std::to_string(distinct) + " distinct samples");
  }
  Rng rng = make_rng(derive_seed(options.seed, "fit_kde_mixture"));

  KdeEmState s{samples, {}, {}};
  std::vector<int> holdout;
  for (int t = 0; t < samples.size(); ++t) {
    s.values.push_back(samples.row_values(t));
    if (samples.size() >= 10 && t % options.holdout_stride == options.holdout_stride - 1) {
      holdout.push_back(t);
    } else {
      s.train.push_back(t);
    }
  }
  const std::vector<int>& scored = holdout.empty() ? s.train : holdout;

  FitReport report;
  report.tv_estimated = true;
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(s.train.size()), 1);
  KdeMixture best = run_kde_em(s, kde_m_step(s, ones, options, rng), options, rng, report);
  double best_score = mean_log_likelihood(kde_log_terms(s, scored, best));
  report.tv_by_k.push_back(estimate_total_variation(samples, best, scored));

  std::uniform_int_distribution<std::size_t> pick(0, s.train.size() - 1);
  while (best.k() < options.k_max) {
    // Seed rows: the training row the current fit explains worst relative to
    // the target (or in absolute terms without a target), plus random rows.
    const Eigen::MatrixXd terms = kde_log_terms(s, s.train, best);
    std::size_t worst = 0;
    double worst_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.train.size(); ++i) {
      double gap = log_sum_exp(terms.row(static_cast<Eigen::Index>(i)));
      if (samples.log_target.size() == samples.size()) gap -= samples.log_target(s.train[i]);
      if (gap < worst_gap) {
        worst_gap = gap;
        worst = i;
      }
    }
    std::vector<std::size_t> seeds{worst};
    for (int c = 1; c < options.init_candidates; ++c) seeds.push_back(pick(rng));

    const Eigen::MatrixXd resp = responsibilities(terms);
    std::vector<Eigen::VectorXd> means;
    for (int l = 0; l < best.k(); ++l) means.push_back(component_mean(best, l));

    KdeMixture next;
    double next_score = kNegInf<double>;
    FitReport next_report;
    for (std::size_t seed_row : seeds) {
      const Eigen::VectorXd anchor = samples.rows.row(s.train[seed_row]).transpose();
      Eigen::MatrixXd split = Eigen::MatrixXd::Zero(resp.rows(), best.k() + 1);
      split.leftCols(best.k()) = resp;
      for (Eigen::Index i = 0; i < resp.rows(); ++i) {
        const Eigen::VectorXd row = samples.rows.row(s.train[static_cast<std::size_t>(i)]).transpose();
        Eigen::Index l_max;
        resp.row(i).maxCoeff(&l_max);
        if ((row - anchor).squaredNorm() < (row - means[static_cast<std::size_t>(l_max)]).squaredNorm()) {
          split.row(i).setZero();
          split(i, best.k()) = 1.0;
        }
      }
      if (split.col(best.k()).sum() <= 0.0) continue;
      FitReport trial_report;
      KdeMixture trial = run_kde_em(s, kde_m_step(s, split, options, rng), options, rng, trial_report);
      report.em_iterations += trial_report.em_iterations;
      const double score = mean_log_likelihood(kde_log_terms(s, scored, trial));
      if (score > next_score) {
        next_score = score;
        next = std::move(trial);
        next_report = std::move(trial_report);
      }
    }
    if (next.k() == 0) break;
    report.log_likelihood_trace.insert(report.log_likelihood_trace.end(), next_report.log_likelihood_trace.begin(),
                                       next_report.log_likelihood_trace.end());
    report.trace_k.insert(report.trace_k.end(), next_report.trace_k.begin(), next_report.trace_k.end());
    if (next_score - best_score < options.min_gain) break;
    best = std::move(next);
    best_score = next_score;
    report.tv_by_k.push_back(estimate_total_variation(samples, best, scored));
  }
  report.k_used = best.k();
  report.achieved_tv = report.tv_by_k.back();
  report.diagnostics.push_back("achieved_tv is an importance-weighted estimate on " + std::to_string(scored.size()) +
                               " rows");
  return {std::move(best), std::move(report)};
}

}  // namespace lrvi
