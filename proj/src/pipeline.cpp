#include "lrvi/pipeline.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>

#include "lrvi/bounds.hpp"
#include "lrvi/distributions.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/oracle.hpp"

namespace lrvi {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

bool is_computation(const std::exception& e) {
  return dynamic_cast<const ComputationError*>(&e) != nullptr || dynamic_cast<const CapacityError*>(&e) != nullptr;
}

// Runs f, re-raising library errors tagged with the stage and parfactor.
template <typename F>
auto staged(const std::string& stage, const std::string& parfactor, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, parfactor, e.what(), is_computation(e));
  }
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json fit_options_json(const LiftConfig& c) {
  const auto& d = c.discrete;
  const auto& k = c.continuous;
  const auto& s = c.sampler;
  return {{"discrete", {d.tol, d.k_max, d.max_em_iterations, d.em_relative_tol, d.prune_weight, d.init_candidates}},
          {"continuous",
           {k.k_max, k.max_centers, k.max_em_iterations, k.em_relative_tol, k.min_gain, k.holdout_stride,
            k.init_candidates}},
          {"sampler", {s.burn_in_sweeps, s.thin, s.adapt_every, s.max_restarts, s.chains}},
          {"samples", c.samples}};
}

FitReport fit_report_from(const json& j) {
  FitReport r;
  r.achieved_tv = j.at("achieved_tv").get<double>();
  r.tv_estimated = j.at("tv_estimated").get<bool>();
  r.k_used = j.at("k_used").get<int>();
  r.em_iterations = j.at("em_iterations").get<int>();
  r.log_likelihood_trace = j.at("log_likelihood_trace").get<std::vector<double>>();
  r.trace_k = j.at("trace_k").get<std::vector<int>>();
  r.tv_by_k = j.at("tv_by_k").get<std::vector<double>>();
  r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return r;
}

json load_cache(const std::filesystem::path& path) {
  if (path.empty() || !std::filesystem::exists(path)) return json::object();
  try {
    json j = json::parse(read_file(path));
    if (j.is_object() && j.contains("entries")) return j.at("entries");
  } catch (const std::exception&) {
    // An unreadable cache is rebuilt from scratch.
  }
  return json::object();
}

std::vector<AtomArg> population_args(const std::vector<Atom>& atoms) {
  std::vector<AtomArg> out;
  for (const Atom& a : atoms) out.push_back(AtomArg::population(a.name));
  return out;
}

bool whole_populations(const Parfactor& g) {
  return std::all_of(g.args.begin(), g.args.end(), [](const AtomArg& a) { return a.kind == ArgKind::kPopulation; });
}

}  // namespace

std::uint64_t content_hash(std::string_view text) { return hash_label(text); }

std::filesystem::path cache_path_for(const std::filesystem::path& model_path) {
  std::filesystem::path p = model_path;
  p += ".lrvi-cache.json";
  return p;
}

json fit_report_json(const FitReport& r) {
  return {{"achieved_tv", r.achieved_tv},     {"tv_estimated", r.tv_estimated},
          {"k_used", r.k_used},               {"em_iterations", r.em_iterations},
          {"log_likelihood_trace", r.log_likelihood_trace}, {"trace_k", r.trace_k},
          {"tv_by_k", r.tv_by_k},             {"diagnostics", r.diagnostics}};
}

LiftResult find_variational_rhm(const Rhm& model, const LiftConfig& config) {
  staged("lift", "", [&] {
    model.validate();
    return 0;
  });
  json cache = load_cache(config.cache_path);
  bool dirty = false;
  LiftResult result;
  std::vector<Parfactor> out;
  const json options = fit_options_json(config);
  for (const Parfactor& g : model.parfactors()) {
    ParfactorFit fit;
    fit.id = g.id;
    if (is_variational(g.potential) && whole_populations(g)) {
      fit.route = "unchanged";
      out.push_back(g);
      result.fits.push_back(fit);
      continue;
    }
    const std::vector<Atom> atoms = model.parfactor_atoms(g);
    const bool discrete =
        std::all_of(atoms.begin(), atoms.end(), [](const Atom& a) { return a.domain.is_discrete(); });
    fit.route = discrete ? "discrete" : "continuous";
    const std::uint64_t seed = derive_seed(config.seed, g.id);
    json atoms_json = json::array();
    for (const Atom& a : atoms) atoms_json.push_back({a.name, a.population, a.domain.value_count()});
    json vars = json::array();
    for (const LogicalVar& v : g.params) vars.push_back({v.name, v.constants});
    json args = json::array();
    for (const AtomArg& a : g.args) args.push_back({a.atom, static_cast<int>(a.kind), a.var, a.index});
    const json identity = {{"potential", potential_to_json(g.potential)}, {"atoms", atoms_json}, {"logvars", vars},
                           {"args", args}, {"options", options}, {"seed", seed}, {"route", fit.route}};
    const std::string key = hex(content_hash(identity.dump()));

    const auto start = Clock::now();
    Potential fitted;
    if (cache.contains(key)) {
      fitted = staged("lift", g.id, [&] { return potential_from_json(cache.at(key).at("potential"), atoms); });
      fit.report = fit_report_from(cache.at(key).at("report"));
      fit.cache_hit = true;
      ++result.cache_hits;
    } else if (discrete) {
      const DiscreteFit df = staged("lift", g.id, [&] {
        const HistTable table = std::holds_alternative<HistTable>(g.potential) && whole_populations(g)
                                    ? std::get<HistTable>(g.potential)
                                    : ground_product_table(g, model);
        DiscreteFitOptions o = config.discrete;
        o.seed = seed;
        return atoms.size() == 2 ? fit_joint_mixture_discrete(table, o) : fit_mixture_discrete(table, o);
      });
      fitted = df.mixture;
      fit.report = df.report;
    } else {
      const KdeFit kf = staged("lift", g.id, [&] {
        const SampleSet samples = sample_parfactor(g, model, config.samples, derive_seed(seed, "samples"), config.sampler);
        KdeFitOptions o = config.continuous;
        o.seed = derive_seed(seed, "fit");
        return fit_kde_mixture(samples, o);
      });
      fitted = kf.mixture;
      fit.report = kf.report;
    }
    if (!fit.cache_hit && !config.cache_path.empty()) {
      cache[key] = {{"id", g.id}, {"potential", potential_to_json(fitted)}, {"report", fit_report_json(fit.report)}};
      dirty = true;
    }
    fit.seconds = seconds_since(start);
    out.push_back({g.id, {}, population_args(atoms), fitted});
    result.fits.push_back(fit);
  }
  if (dirty) {
    staged("cache", "", [&] {
      write_file_atomic(config.cache_path, json{{"version", 1}, {"entries", cache}}.dump(1));
      return 0;
    });
  }
  result.model = staged("lift", "", [&] { return Rhm(model.atoms(), out); });
  return result;
}

// --- query answering -----------------------------------------------------------

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json ve_marginal(const QueryResult& qr, const VariationalModel& vm, const QuerySpec& q) {
  json m;
  m["mixture"] = variational_potential_to_json(qr.marginal);
  m["elimination_order"] = qr.elimination_order;
  m["effective_population"] = qr.population.at(q.atom);
  const Atom& atom = vm.atom(q.atom);
  if (atom.domain.is_discrete()) {
    m["histogram"] = vec_json(marginal_histogram(qr, q.atom));
    m["predictive"] = vec_json(predictive_categorical(qr, q.atom));
    return m;
  }
  if (qr.population.at(q.atom) == 0) throw DomainError("every rv of " + q.atom + " is observed");
  const KdeMixture& mix = qr.marginal.mixture;
  const int a = mix.atom_index(q.atom);
  std::vector<double> grid = q.grid;
  double below = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int l = 0; l < mix.k(); ++l) {
    const Kde& f = std::get<Kde>(mix.factor(l, a));
    below += mix.weights()(l) * kde_cdf(f, q.threshold);
    lo = std::min(lo, f.mean() - 4.0 * std::sqrt(f.variance()));
    hi = std::max(hi, f.mean() + 4.0 * std::sqrt(f.variance()));
  }
  if (grid.empty()) {
    for (int i = 0; i < 11; ++i) grid.push_back(lo + (hi - lo) * i / 10.0);
  }
  std::vector<double> density;
  for (double x : grid) density.push_back(predictive_density(qr, q.atom, x));
  m["grid"] = grid;
  m["density"] = density;
  m["threshold"] = q.threshold;
  m["p_below_threshold"] = below;
  return m;
}

}  // namespace

json run_pipeline(const ModelDocument& doc, const std::vector<Observation>& obs, const QuerySpec& query,
                  const PipelineConfig& config) {
  staged("observations", "", [&] {
    check_observations(doc.model, obs);
    if (!doc.model.has_atom(query.atom)) throw DomainError("unknown query atom " + query.atom);
    return 0;
  });
  json result;
  json run;
  const auto t_lift = Clock::now();
  const LiftResult lift = find_variational_rhm(doc.model, config.lift);
  run["timings"]["lift_s"] = seconds_since(t_lift);
  json fits = json::array();
  json fit_run = json::array();
  for (const ParfactorFit& f : lift.fits) {
    json e = {{"id", f.id}, {"route", f.route}};
    if (f.route != "unchanged") e["report"] = fit_report_json(f.report);
    fits.push_back(e);
    fit_run.push_back({{"id", f.id}, {"seconds", f.seconds}, {"cache_hit", f.cache_hit}});
  }
  result["fits"] = fits;
  run["fits"] = fit_run;
  run["cache_hits"] = lift.cache_hits;
  result["query"] = {{"atom", query.atom}, {"threshold", query.threshold}};

  const ModelDocument lifted{lift.model, doc.latent, doc.extendibility};
  const auto t_infer = Clock::now();
  if (config.method == Method::kVe) {
    result["method"] = "ve";
    result["marginal"] = staged("infer", "", [&] {
      const VariationalModel vm = to_variational_model(lift.model);
      const QueryResult qr = latent_variable_elimination(vm, {query.atom}, obs, config.lve);
      return ve_marginal(qr, vm, query);
    });
  } else {
    result["method"] = "mcmc";
    const ChainResult r = staged("mcmc", "", [&] {
      return run_lifted_mcmc(latent_model(lifted), ChainQuery{query.atom, query.threshold}, obs, config.mcmc);
    });
    json running = json::array();
    for (const auto& [n, v] : r.running_estimate) running.push_back({n, v});
    result["marginal"] = {{"estimate", vec_json(r.estimate)},
                          {"running_estimate", running},
                          {"split_disagreement", r.split_disagreement},
                          {"selections", r.selections},
                          {"seed", r.seed}};
    run["timings"]["step_time_us"] = r.step_time_us;
    run["timings"]["block_step_time_us"] = r.block_step_time_us;
  }
  run["timings"]["infer_s"] = seconds_since(t_infer);
  if (!doc.extendibility.empty()) result["bounds"] = staged("bounds", "", [&] { return bound_report_json(doc); });
  result["run"] = run;
  return result;
}

json bound_report_json(const ModelDocument& doc) {
  std::optional<double> z;
  const Rhm& model = doc.model;
  const bool discrete = std::all_of(model.atoms().begin(), model.atoms().end(),
                                    [](const Atom& a) { return a.domain.is_discrete(); });
  if (discrete) {
    try {
      double log_z = enumerate_joint(model).log_z;
      std::set<std::string> covered;
      for (const Parfactor& g : model.parfactors()) {
        const auto atoms = model.parfactor_atoms(g);
        for (const Atom& a : atoms) covered.insert(a.name);
        log_z -= enumerate_joint(Rhm(atoms, {g})).log_z;
      }
      for (const Atom& a : model.atoms()) {
        if (!covered.count(a.name)) log_z -= a.population * std::log(static_cast<double>(a.domain.value_count()));
      }
      z = std::exp(log_z);
    } catch (const CapacityError&) {
      z.reset();
    }
  }
  const BoundReport r = bound_report(model, doc.extendibility, z);
  json per = json::array();
  for (const auto& [id, b] : r.parfactors) {
    per.push_back({{"id", id}, {"bound", b.value}, {"vacuous", b.vacuous}, {"branch", b.branch}});
  }
  json out = {{"parfactors", per},
              {"model", {{"bound", r.model.bound.value}, {"vacuous", r.model.bound.vacuous},
                         {"normalized", r.model.normalized}}}};
  if (z) out["model"]["z"] = *z;
  return out;
}

// --- clustering ----------------------------------------------------------------

ClusterResult cluster_columns(const CsvMatrix& matrix, int k, std::uint64_t seed) {
  const Eigen::Index cols = matrix.values.cols();
  if (k < 1) throw DomainError("cluster_columns: k must be >= 1");
  if (cols < k) throw DomainError("cluster_columns: fewer columns than clusters");
  ClusterResult r;
  r.features.resize(cols, 2);
  for (Eigen::Index c = 0; c < cols; ++c) {
    double s = 0.0;
    double s2 = 0.0;
    int n = 0;
    for (Eigen::Index t = 0; t < matrix.values.rows(); ++t) {
      const double v = matrix.values(t, c);
      if (std::isnan(v)) continue;
      s += v;
      s2 += v * v;
      ++n;
    }
    if (n == 0) throw DomainError("cluster_columns: column " + matrix.ids[static_cast<std::size_t>(c)] + " has no observation");
    const double mean = s / n;
    r.features(c, 0) = mean;
    r.features(c, 1) = std::max(0.0, s2 / n - mean * mean);
  }
  {
    std::set<std::pair<double, double>> distinct;
    for (Eigen::Index c = 0; c < cols; ++c) distinct.insert({r.features(c, 0), r.features(c, 1)});
    if (static_cast<int>(distinct.size()) < k) throw DomainError("cluster_columns: k exceeds distinct feature points");
  }
  const Eigen::RowVector2d mu = r.features.colwise().mean();
  Eigen::RowVector2d sd = ((r.features.rowwise() - mu).array().square().colwise().mean()).sqrt();
  for (int i = 0; i < 2; ++i) {
    if (!(sd(i) > 0.0)) sd(i) = 1.0;
  }
  const Eigen::MatrixXd x = (r.features.rowwise() - mu).array().rowwise() / sd.array();

  // k-means++ seeding.
  Rng rng = make_rng(derive_seed(seed, "kmeans"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd centers(k, 2);
  centers.row(0) = x.row(std::uniform_int_distribution<Eigen::Index>(0, cols - 1)(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = unif(rng) * total;
      for (pick = 0; pick < cols - 1; ++pick) {
        u -= d2(pick);
        if (u <= 0.0) break;
      }
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  r.labels.assign(static_cast<std::size_t>(cols), -1);
  for (r.iterations = 1; r.iterations <= 300; ++r.iterations) {
    bool changed = false;
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::Index best = 0;
      (centers.rowwise() - x.row(c)).rowwise().squaredNorm().minCoeff(&best);
      if (r.labels[static_cast<std::size_t>(c)] != static_cast<int>(best)) {
        r.labels[static_cast<std::size_t>(c)] = static_cast<int>(best);
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, 2);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index c = 0; c < cols; ++c) {
      sums.row(r.labels[static_cast<std::size_t>(c)]) += x.row(c);
      counts(r.labels[static_cast<std::size_t>(c)]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
    }
    if (!changed) break;
  }
  r.iterations = std::min(r.iterations, 300);
  r.sizes.assign(static_cast<std::size_t>(k), 0);
  r.centroids = Eigen::MatrixXd::Zero(k, 2);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const int l = r.labels[static_cast<std::size_t>(c)];
    ++r.sizes[static_cast<std::size_t>(l)];
    r.centroids.row(l) += r.features.row(c);
  }
  for (int c = 0; c < k; ++c) {
    if (r.sizes[static_cast<std::size_t>(c)] > 0) r.centroids.row(c) /= r.sizes[static_cast<std::size_t>(c)];
  }
  return r;
}

// --- benchmarks ----------------------------------------------------------------

std::vector<BenchRow> bench(const BenchSpec& spec) {
  if (spec.family != "job_house") throw DomainError("bench: unknown model family " + spec.family);
  std::vector<BenchRow> rows;
  for (int size : spec.sizes) {
    JobHouseParams params;
    params.houses = size;
    const LatentModel lm = make_job_house_model(params);
    const auto obs = job_house_observations(params);
    const double exact = job_house_exact(params).p_query;
    for (std::uint64_t seed : spec.seeds) {
      McmcOptions o;
      o.steps = spec.steps;
      o.burn_in = spec.burn_in;
      o.seed = seed;
      o.keep_trace = false;
      o.record_every = std::max(1, spec.steps / 10);
      const ChainQuery q{"HP", 0.0};
      const ChainResult lifted = run_lifted_mcmc(lm, q, obs, o);
      rows.push_back({"lifted", size, seed, std::abs(lifted.estimate(0) - exact) / exact, lifted.step_time_us});
      const ChainResult ground = run_ground_mcmc(lm, q, obs, o);
      rows.push_back({"ground", size, seed, std::abs(ground.estimate(0) - exact) / exact, ground.step_time_us});
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "method,size,seed,error,step_time_us\n";
  for (const BenchRow& r : rows) {
    out << r.method << ',' << r.size << ',' << r.seed << ',' << format_double(r.error) << ','
        << format_double(r.step_time_us) << '\n';
  }
  return out.str();
}

// --- synthetic well network ------------------------------------------------------

GroundwaterData make_synthetic_groundwater(const GroundwaterOptions& o) {
  const int clusters = static_cast<int>(o.regimes.size());
  if (clusters < 1 || o.wells < clusters || o.months < 2 || !(o.observed_fraction > 0.0 && o.observed_fraction <= 1.0)) {
    throw DomainError("make_synthetic_groundwater: bad options");
  }
  Rng rng = make_rng(derive_seed(o.seed, "groundwater"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Cluster sizes from random shares, at least one well each.
  Eigen::VectorXd share(clusters);
  for (int c = 0; c < clusters; ++c) share(c) = 1.0 + unif(rng);
  share /= share.sum();
  std::vector<int> sizes(static_cast<std::size_t>(clusters), 1);
  int left = o.wells - clusters;
  for (int c = 0; c < clusters; ++c) {
    const int extra = c + 1 == clusters ? left : static_cast<int>(std::floor(share(c) * (o.wells - clusters)));
    sizes[static_cast<std::size_t>(c)] += extra;
    left -= extra;
  }
  GroundwaterData d;
  for (int c = 0; c < clusters; ++c) d.cluster_of_well.insert(d.cluster_of_well.end(), sizes[static_cast<std::size_t>(c)], c);
  std::shuffle(d.cluster_of_well.begin(), d.cluster_of_well.end(), rng);

  // Per-cluster base level, regime offsets, regime weights and noise.
  std::vector<double> base(static_cast<std::size_t>(clusters));
  std::vector<double> noise(static_cast<std::size_t>(clusters));
  std::vector<Eigen::VectorXd> offsets;
  std::vector<Eigen::VectorXd> weights;
  for (int c = 0; c < clusters; ++c) {
    base[static_cast<std::size_t>(c)] = 10.0 * c + 2.0 * unif(rng);
    noise[static_cast<std::size_t>(c)] = 0.3 + 0.2 * (c % 4);
    const int k = o.regimes[static_cast<std::size_t>(c)];
    Eigen::VectorXd off(k);
    for (int r = 0; r < k; ++r) off(r) = (1.0 + 0.5 * (c % 3)) * (r - 0.5 * (k - 1)) / std::sqrt(static_cast<double>(k));
    offsets.push_back(off);
    Eigen::VectorXd w(k);
    for (int r = 0; r < k; ++r) w(r) = 0.5 + unif(rng);
    weights.push_back(w / w.sum());
  }
  d.truth.resize(o.months, o.wells);
  d.matrix.values.resize(o.months, o.wells);
  for (int j = 0; j < o.wells; ++j) d.matrix.ids.push_back("w" + std::to_string(j));
  for (int t = 0; t < o.months; ++t) {
    std::vector<double> level(static_cast<std::size_t>(clusters));
    for (int c = 0; c < clusters; ++c) {
      double u = unif(rng);
      int r = 0;
      const Eigen::VectorXd& w = weights[static_cast<std::size_t>(c)];
      for (; r < w.size() - 1; ++r) {
        u -= w(r);
        if (u <= 0.0) break;
      }
      level[static_cast<std::size_t>(c)] = base[static_cast<std::size_t>(c)] + offsets[static_cast<std::size_t>(c)](r);
    }
    for (int j = 0; j < o.wells; ++j) {
      const int c = d.cluster_of_well[static_cast<std::size_t>(j)];
      const double v = level[static_cast<std::size_t>(c)] + noise[static_cast<std::size_t>(c)] * gauss(rng);
      d.truth(t, j) = v;
      d.matrix.values(t, j) = unif(rng) < o.observed_fraction ? v : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return d;
}

namespace {

struct MonthStats {
  double n = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
};

struct ClusterMog {
  Eigen::VectorXd weight;
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

// EM over months for a mixture whose component l makes every observed well
// of the cluster iid N(mean_l, var_l) within a month.
ClusterMog fit_cluster_mog(const std::vector<MonthStats>& months, int k) {
  std::vector<double> month_means;
  for (const auto& m : months) {
    if (m.n > 0) month_means.push_back(m.s1 / m.n);
  }
  if (month_means.empty()) throw ComputationError("fit_cluster_mog: cluster has no observations");
  std::sort(month_means.begin(), month_means.end());
  ClusterMog g{Eigen::VectorXd::Constant(k, 1.0 / k), Eigen::VectorXd(k), Eigen::VectorXd(k)};
  double pooled = 0.0;
  double count = 0.0;
  for (const auto& m : months) {
    pooled += m.s2 - (m.n > 0 ? m.s1 * m.s1 / m.n : 0.0);
    count += m.n;
  }
  for (int l = 0; l < k; ++l) {
    g.mean(l) = month_means[static_cast<std::size_t>((l + 0.5) / k * month_means.size())];
    g.var(l) = std::max(1e-6, pooled / std::max(1.0, count));
  }
  const int t_count = static_cast<int>(months.size());
  Eigen::MatrixXd resp(t_count, k);
  double last = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < 500; ++it) {
    double ll = 0.0;
    for (int t = 0; t < t_count; ++t) {
      const MonthStats& m = months[static_cast<std::size_t>(t)];
      for (int l = 0; l < k; ++l) {
        const double ss = m.s2 - 2.0 * g.mean(l) * m.s1 + m.n * g.mean(l) * g.mean(l);
        resp(t, l) = std::log(g.weight(l)) - 0.5 * m.n * std::log(2.0 * std::numbers::pi * g.var(l)) - ss / (2.0 * g.var(l));
      }
      const double z = log_sum_exp(resp.row(t));
      ll += z;
      resp.row(t) = (resp.row(t).array() - z).exp();
    }
    for (int l = 0; l < k; ++l) {
      double rn = 0.0;
      double rs1 = 0.0;
      double rt = 0.0;
      for (int t = 0; t < t_count; ++t) {
        rt += resp(t, l);
        rn += resp(t, l) * months[static_cast<std::size_t>(t)].n;
        rs1 += resp(t, l) * months[static_cast<std::size_t>(t)].s1;
      }
      g.weight(l) = std::max(rt / t_count, 1e-12);
      if (rn <= 0.0) continue;
      g.mean(l) = rs1 / rn;
      double ss = 0.0;
      for (int t = 0; t < t_count; ++t) {
        const MonthStats& m = months[static_cast<std::size_t>(t)];
        ss += resp(t, l) * (m.s2 - 2.0 * g.mean(l) * m.s1 + m.n * g.mean(l) * g.mean(l));
      }
      g.var(l) = std::max(1e-6, ss / rn);
    }
    g.weight /= g.weight.sum();
    if (std::abs(ll - last) <= 1e-10 * std::abs(ll)) break;
    last = ll;
  }
  return g;
}

}  // namespace

GroundwaterComparison compare_groundwater_inference(const GroundwaterData& data, const GroundwaterOptions& options) {
  const Eigen::MatrixXd& x = data.matrix.values;
  const int months = static_cast<int>(x.rows());
  const int wells = static_cast<int>(x.cols());
  const int clusters = static_cast<int>(options.regimes.size());
  const int train = months - options.test_months;
  if (options.test_months < 1 || train < 2) throw DomainError("compare_groundwater_inference: bad test split");
  GroundwaterComparison out;

  // Column grouping on the training months.
  CsvMatrix training{data.matrix.ids, x.topRows(train)};
  const ClusterResult cl = cluster_columns(training, clusters, derive_seed(options.seed, "cluster"));
  std::vector<int> regimes(static_cast<std::size_t>(clusters), 1);
  {
    Eigen::MatrixXi overlap = Eigen::MatrixXi::Zero(clusters, clusters);
    for (int j = 0; j < wells; ++j) ++overlap(cl.labels[static_cast<std::size_t>(j)], data.cluster_of_well[static_cast<std::size_t>(j)]);
    int agree = 0;
    for (int c = 0; c < clusters; ++c) {
      Eigen::Index best = 0;
      agree += overlap.row(c).maxCoeff(&best);
      regimes[static_cast<std::size_t>(c)] = options.regimes[static_cast<std::size_t>(best)];
    }
    out.cluster_agreement = static_cast<double>(agree) / wells;
  }

  // The months x components reduction: one mixture per cluster.
  std::vector<ClusterMog> mogs;
  for (int c = 0; c < clusters; ++c) {
    std::vector<MonthStats> stats(static_cast<std::size_t>(train));
    for (int t = 0; t < train; ++t) {
      for (int j = 0; j < wells; ++j) {
        if (cl.labels[static_cast<std::size_t>(j)] != c || std::isnan(x(t, j))) continue;
        auto& s = stats[static_cast<std::size_t>(t)];
        s.n += 1.0;
        s.s1 += x(t, j);
        s.s2 += x(t, j) * x(t, j);
      }
    }
    mogs.push_back(fit_cluster_mog(stats, regimes[static_cast<std::size_t>(c)]));
    out.reduced_columns += regimes[static_cast<std::size_t>(c)];
  }

  // Ground model: per-well mean and covariance from the training months.
  Eigen::VectorXd mu(wells);
  Eigen::MatrixXd centered(train, wells);
  for (int j = 0; j < wells; ++j) {
    double s = 0.0;
    int n = 0;
    for (int t = 0; t < train; ++t) {
      if (!std::isnan(x(t, j))) {
        s += x(t, j);
        ++n;
      }
    }
    mu(j) = n > 0 ? s / n : 0.0;
    for (int t = 0; t < train; ++t) centered(t, j) = std::isnan(x(t, j)) ? 0.0 : x(t, j) - mu(j);
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(wells, wells);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / (train - 1));
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  const double ridge = 1e-3 * cov.diagonal().mean();
  cov.diagonal().array() += ridge;

  double lifted_err = 0.0;
  double ground_err = 0.0;
  for (int t = train; t < months; ++t) {
    std::vector<int> obs_idx;
    std::vector<int> mis_idx;
    for (int j = 0; j < wells; ++j) (std::isnan(x(t, j)) ? mis_idx : obs_idx).push_back(j);
    out.queries += static_cast<int>(mis_idx.size());

    // Lifted: latent-variable elimination per cluster.
    auto start = Clock::now();
    std::vector<double> cluster_pred(static_cast<std::size_t>(clusters));
    for (int c = 0; c < clusters; ++c) {
      const ClusterMog& g = mogs[static_cast<std::size_t>(c)];
      const Atom atom{"W" + std::to_string(c), AtomDomain::continuous(), cl.sizes[static_cast<std::size_t>(c)]};
      std::vector<std::vector<AtomFactor>> comps;
      for (Eigen::Index l = 0; l < g.weight.size(); ++l) comps.push_back({Kde::gaussian(g.mean(l), std::sqrt(g.var(l)))});
      VariationalModel vm;
      vm.atoms = {atom};
      vm.population[atom.name] = atom.population;
      vm.potentials.push_back({"mog" + std::to_string(c), KdeMixture({atom}, g.weight, comps), 0.0});
      Observation o{atom.name, {}, {}};
      for (int j : obs_idx) {
        if (cl.labels[static_cast<std::size_t>(j)] == c) o.values.push_back(x(t, j));
      }
      if (o.observed() >= atom.population) continue;
      const QueryResult qr = latent_variable_elimination(vm, {atom.name}, {o});
      const KdeMixture& m = qr.marginal.mixture;
      double mean = 0.0;
      for (int l = 0; l < m.k(); ++l) mean += m.weights()(l) * std::get<Kde>(m.factor(l, 0)).mean();
      cluster_pred[static_cast<std::size_t>(c)] = mean;
    }
    for (int j : mis_idx) {
      lifted_err += std::abs(cluster_pred[static_cast<std::size_t>(cl.labels[static_cast<std::size_t>(j)])] - data.truth(t, j));
    }
    out.lifted_seconds += seconds_since(start);

    // Ground: Gaussian elimination of the observed wells.
    start = Clock::now();
    const Eigen::Index no = static_cast<Eigen::Index>(obs_idx.size());
    const Eigen::Index nm = static_cast<Eigen::Index>(mis_idx.size());
    Eigen::MatrixXd s_oo(no, no);
    Eigen::MatrixXd s_om(no, nm);
    Eigen::VectorXd r(no);
    for (Eigen::Index a = 0; a < no; ++a) {
      const int ja = obs_idx[static_cast<std::size_t>(a)];
      r(a) = x(t, ja) - mu(ja);
      for (Eigen::Index b = 0; b < no; ++b) s_oo(a, b) = cov(ja, obs_idx[static_cast<std::size_t>(b)]);
      for (Eigen::Index b = 0; b < nm; ++b) s_om(a, b) = cov(ja, mis_idx[static_cast<std::size_t>(b)]);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
    if (llt.info() != Eigen::Success) throw ComputationError("ground elimination: covariance not positive definite");
    const Eigen::VectorXd alpha = llt.solve(r);
    const Eigen::MatrixXd half = llt.matrixL().solve(s_om);
    const Eigen::VectorXd pred = s_om.transpose() * alpha;
    const Eigen::VectorXd reduction = half.colwise().squaredNorm().transpose();
    for (Eigen::Index b = 0; b < nm; ++b) {
      const int j = mis_idx[static_cast<std::size_t>(b)];
      if (!(cov(j, j) - reduction(b) > -1e-6 * cov(j, j))) throw ComputationError("ground elimination: negative variance");
      ground_err += std::abs(mu(j) + pred(b) - data.truth(t, j));
    }
    out.ground_seconds += seconds_since(start);
  }
  out.lifted_mae = lifted_err / std::max(1, out.queries);
  out.ground_mae = ground_err / std::max(1, out.queries);
  return out;
}

}  // namespace lrvi
