// Command-line front end.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lrvi/bounds.hpp"
#include "lrvi/discrete_lift.hpp"
#include "lrvi/errors.hpp"
#include "lrvi/model_io.hpp"
#include "lrvi/oracle.hpp"
#include "lrvi/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace lrvi;

struct Globals {
  std::uint64_t seed = 0;
  bool no_cache = false;
  int k_cap = 64;
  int k_max = 8;
  double tol = 1e-4;
  std::string out;
};

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << '\n';
    return;
  }
  write_file_atomic(g.out, text);
}

void emit(const Globals& g, const json& j) { emit(g, j.dump(2) + "\n"); }

PipelineConfig make_config(const Globals& g, const std::string& model_path) {
  PipelineConfig c;
  c.lift.seed = derive_seed(g.seed, "lift");
  c.lift.discrete.tol = g.tol;
  c.lift.discrete.k_max = g.k_max;
  if (!g.no_cache) c.lift.cache_path = cache_path_for(model_path);
  c.lve.k_cap = g.k_cap;
  c.lve.seed = derive_seed(g.seed, "lve");
  c.mcmc.seed = derive_seed(g.seed, "mcmc");
  return c;
}

std::vector<Observation> observations_or_empty(const std::string& path) {
  return path.empty() ? std::vector<Observation>{} : load_observations(path);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty()) throw ParseError("not a number list: " + s);
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int error_document(const Globals& g, const std::string& stage, const std::string& parfactor, const std::string& msg,
                   int code) {
  json e = {{"error", {{"stage", stage}, {"parfactor", parfactor}, {"message", msg}}}};
  try {
    emit(g, e);
  } catch (const std::exception&) {
    std::cout << e.dump(2) << '\n';
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifted relational variational inference"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Top-level seed");
  app.add_flag("--no-cache", g.no_cache, "Refit every parfactor, ignoring the fit cache");
  app.add_option("--k-cap", g.k_cap, "Component cap during elimination")->check(CLI::PositiveNumber);
  app.add_option("--k-max", g.k_max, "Largest mixture size tried by discrete fits")->check(CLI::PositiveNumber);
  app.add_option("--tol", g.tol, "Target total variation of discrete fits")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Write the result here instead of stdout");

  std::string model_path;
  std::string obs_path;
  std::string query;
  double threshold = 0.0;
  std::string grid;

  auto* lift = app.add_subcommand("lift", "Fit a variational model and print it with the fit reports");
  lift->add_option("model", model_path, "Model file")->required();

  auto* infer = app.add_subcommand("infer", "Answer a query by latent-variable elimination");
  infer->add_option("model", model_path, "Model file")->required();
  infer->add_option("--obs", obs_path, "Observation file");
  infer->add_option("--query", query, "Query atom")->required();
  infer->add_option("--threshold", threshold, "Report P(X <= threshold) for continuous queries");
  infer->add_option("--grid", grid, "Comma-separated density evaluation points");

  int steps = 10000;
  int burn_in = 1000;
  bool systematic = false;
  auto* mcmc = app.add_subcommand("mcmc", "Answer a query by lifted MCMC over latent variables");
  mcmc->add_option("model", model_path, "Model file")->required();
  mcmc->add_option("--obs", obs_path, "Observation file");
  mcmc->add_option("--query", query, "Query atom")->required();
  mcmc->add_option("--threshold", threshold, "Report P(X <= threshold) for continuous queries");
  mcmc->add_option("--steps", steps, "Chain length")->check(CLI::PositiveNumber);
  mcmc->add_option("--burn-in", burn_in, "Discarded steps")->check(CLI::NonNegativeNumber);
  mcmc->add_flag("--systematic", systematic, "Update every latent each step instead of one at random");

  auto* verify = app.add_subcommand("verify", "Compare elimination with exact enumeration on a small discrete model");
  verify->add_option("model", model_path, "Model file")->required();
  verify->add_option("--query", query, "Query atom")->required();

  auto* bound = app.add_subcommand("bound", "Error bounds from the declared extendibility");
  bound->add_option("model", model_path, "Model file")->required();

  std::string parfactor;
  int n_bar = 0;
  std::string probs;
  auto* extend = app.add_subcommand("extend-check", "Is a one-atom binary table n_bar-extendible?");
  extend->add_option("model", model_path, "Model file");
  extend->add_option("--parfactor", parfactor, "Parfactor holding the table");
  extend->add_option("--probs", probs, "Comma-separated probabilities of 0..n ones instead of a model");
  extend->add_option("--n-bar", n_bar, "Extension size")->required();

  std::string csv_path;
  int k = 2;
  auto* cluster = app.add_subcommand("cluster", "k-means grouping of CSV columns by (mean, variance)");
  cluster->add_option("csv", csv_path, "Observation matrix")->required();
  cluster->add_option("--k", k, "Number of groups")->check(CLI::PositiveNumber);

  std::string family = "job_house";
  std::string sizes;
  std::string seeds;
  auto* benchc = app.add_subcommand("bench", "Lifted vs ground chains over a size sweep (CSV)");
  benchc->add_option("--family", family, "Model family");
  benchc->add_option("--sizes", sizes, "Comma-separated sizes");
  benchc->add_option("--seeds", seeds, "Comma-separated seeds");
  benchc->add_option("--steps", steps, "Chain length")->check(CLI::PositiveNumber);
  benchc->add_option("--burn-in", burn_in, "Discarded steps")->check(CLI::NonNegativeNumber);

  std::string format = "json";
  auto* convert = app.add_subcommand("convert", "Rewrite a model file in canonical text or JSON form");
  convert->add_option("model", model_path, "Model file")->required();
  convert->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return error_document(g, "usage", "", e.what(), 1);
  }

  try {
    if (*lift) {
      const ModelDocument doc = load_model(model_path);
      const LiftResult r = find_variational_rhm(doc.model, make_config(g, model_path).lift);
      json fits = json::array();
      for (const auto& f : r.fits) {
        json e = {{"id", f.id}, {"route", f.route}};
        if (f.route != "unchanged") e["report"] = fit_report_json(f.report);
        fits.push_back(e);
      }
      json run = json::array();
      for (const auto& f : r.fits) run.push_back({{"id", f.id}, {"seconds", f.seconds}, {"cache_hit", f.cache_hit}});
      emit(g, json{{"model", model_to_json({r.model, doc.latent, doc.extendibility})},
                   {"fits", fits},
                   {"run", {{"fits", run}, {"cache_hits", r.cache_hits}}}});
    } else if (*infer || *mcmc) {
      const ModelDocument doc = load_model(model_path);
      PipelineConfig c = make_config(g, model_path);
      c.method = *infer ? Method::kVe : Method::kMcmc;
      c.mcmc.steps = steps;
      c.mcmc.burn_in = burn_in;
      c.mcmc.systematic = systematic;
      c.mcmc.keep_trace = false;
      c.mcmc.record_every = std::max(1, steps / 10);
      emit(g, run_pipeline(doc, observations_or_empty(obs_path), QuerySpec{query, threshold, parse_list(grid)}, c));
    } else if (*verify) {
      const ModelDocument doc = load_model(model_path);
      PipelineConfig c = make_config(g, model_path);
      const json lifted = run_pipeline(doc, {}, QuerySpec{query, 0.0, {}}, c);
      const ExactTable exact = enumerate_joint(doc.model);
      const Eigen::VectorXd ref = marginal_vector(exact, query);
      const auto hist = lifted.at("marginal").at("histogram").get<std::vector<double>>();
      const Eigen::VectorXd got = Eigen::Map<const Eigen::VectorXd>(hist.data(), static_cast<Eigen::Index>(hist.size()));
      emit(g, json{{"query", query},
                   {"exact", std::vector<double>(ref.data(), ref.data() + ref.size())},
                   {"lifted", hist},
                   {"tv", 0.5 * (got - ref).cwiseAbs().sum()},
                   {"log_z", exact.log_z}});
    } else if (*bound) {
      const ModelDocument doc = load_model(model_path);
      if (doc.extendibility.empty()) throw DomainError("model declares no EXTENDIBILITY section");
      emit(g, bound_report_json(doc));
    } else if (*extend) {
      ExtendibilityResult r;
      if (!probs.empty()) {
        const auto p = parse_list(probs);
        r = check_extendibility(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())), n_bar);
      } else {
        if (model_path.empty() || parfactor.empty()) throw DomainError("extend-check needs a model and --parfactor, or --probs");
        const ModelDocument doc = load_model(model_path);
        const Parfactor& pf = doc.model.parfactor(parfactor);
        const HistTable table = std::holds_alternative<HistTable>(pf.potential)
                                    ? std::get<HistTable>(pf.potential)
                                    : ground_product_table(pf, doc.model);
        r = check_extendibility(table, n_bar);
      }
      json j = {{"n_bar", n_bar}, {"feasible", r.feasible}, {"max_residual", r.max_residual},
                {"infeasibility", r.infeasibility}};
      if (r.feasible) j["witness"] = std::vector<double>(r.witness.data(), r.witness.data() + r.witness.size());
      emit(g, j);
    } else if (*cluster) {
      const ClusterResult r = cluster_columns(load_csv(csv_path), k, derive_seed(g.seed, "cluster"));
      json centroids = json::array();
      for (Eigen::Index c = 0; c < r.centroids.rows(); ++c) centroids.push_back({r.centroids(c, 0), r.centroids(c, 1)});
      emit(g, json{{"k", k}, {"labels", r.labels}, {"sizes", r.sizes}, {"centroids", centroids},
                   {"iterations", r.iterations}});
    } else if (*benchc) {
      BenchSpec spec;
      spec.family = family;
      for (double v : parse_list(sizes)) spec.sizes.push_back(static_cast<int>(v));
      for (double v : parse_list(seeds)) spec.seeds.push_back(static_cast<std::uint64_t>(v));
      spec.steps = steps;
      spec.burn_in = burn_in;
      emit(g, bench_csv(bench(spec)));
    } else if (*convert) {
      const ModelDocument doc = load_model(model_path);
      emit(g, format == "json" ? model_to_json(doc).dump(2) + "\n" : serialize_model_text(doc));
    }
  } catch (const StageError& e) {
    return error_document(g, e.stage(), e.parfactor(), e.what(), e.computation() ? 2 : 1);
  } catch (const ComputationError& e) {
    return error_document(g, "compute", "", e.what(), 2);
  } catch (const CapacityError& e) {
    return error_document(g, "compute", "", e.what(), 2);
  } catch (const ParseError& e) {
    return error_document(g, "parse", "", e.what(), 1);
  } catch (const Error& e) {
    return error_document(g, "input", "", e.what(), 1);
  } catch (const std::exception& e) {
    return error_document(g, "internal", "", e.what(), 2);
  }
  return 0;
}
