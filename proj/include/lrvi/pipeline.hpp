#pragma once

// End-to-end orchestration: variational learning with an on-disk fit cache,
// query answering by latent-variable elimination or lifted MCMC, column
// clustering for observation matrices, benchmarks, and the synthetic
// well-network comparison.

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrvi/continuous_lift.hpp"
#include "lrvi/discrete_lift.hpp"
#include "lrvi/lifted_mcmc.hpp"
#include "lrvi/lve.hpp"
#include "lrvi/model_io.hpp"

namespace lrvi {

struct LiftConfig {
  DiscreteFitOptions discrete;
  KdeFitOptions continuous;
  SamplerOptions sampler;
  int samples = 2000;
  std::uint64_t seed = 0;
  // Empty path disables caching.
  std::filesystem::path cache_path;
};

struct ParfactorFit {
  std::string id;
  std::string route;  // unchanged, discrete or continuous
  FitReport report;
  bool cache_hit = false;
  double seconds = 0.0;
};

struct LiftResult {
  Rhm model;
  std::vector<ParfactorFit> fits;
  int cache_hits = 0;
};

// Replaces every non-variational parfactor by a fitted mixture over whole
// populations. Fits are cached by a content hash of the parfactor, its atoms,
// the fit options and the derived seed.
LiftResult find_variational_rhm(const Rhm& model, const LiftConfig& config);

std::filesystem::path cache_path_for(const std::filesystem::path& model_path);
std::uint64_t content_hash(std::string_view text);

nlohmann::json fit_report_json(const FitReport& r);

struct QuerySpec {
  std::string atom;
  // P(X <= threshold) is reported for continuous query atoms.
  double threshold = 0.0;
  // Density evaluation points; empty picks 11 points spanning the mixture.
  std::vector<double> grid;
};

enum class Method { kVe, kMcmc };

struct PipelineConfig {
  LiftConfig lift;
  LveOptions lve;
  McmcOptions mcmc;
  Method method = Method::kVe;
};

// Result document. Everything outside the "run" section (timings, cache
// hits) is a deterministic function of the inputs and seeds.
nlohmann::json run_pipeline(const ModelDocument& doc, const std::vector<Observation>& obs, const QuerySpec& query,
                            const PipelineConfig& config);

// Bound report of a document with declared extensions; the normalizer of
// the product of normalized parfactor distributions is supplied when the
// model is small enough to enumerate.
nlohmann::json bound_report_json(const ModelDocument& doc);

struct ClusterResult {
  std::vector<int> labels;
  std::vector<int> sizes;
  // k x 2 centroids in (mean, variance) units.
  Eigen::MatrixXd centroids;
  // columns x 2 (mean, variance) features.
  Eigen::MatrixXd features;
  int iterations = 0;
};

// k-means on standardized per-column (mean, variance) features, k-means++
// initialization. Deterministic given the seed.
ClusterResult cluster_columns(const CsvMatrix& matrix, int k, std::uint64_t seed);

struct BenchSpec {
  std::string family = "job_house";
  std::vector<int> sizes;
  std::vector<std::uint64_t> seeds;
  int steps = 20000;
  int burn_in = 1000;
};

struct BenchRow {
  std::string method;
  int size = 0;
  std::uint64_t seed = 0;
  double error = 0.0;
  double step_time_us = 0.0;
};

// One lifted and one ground chain per (size, seed) on the job/house model
// with `size` houses; error is relative to the exact posterior.
std::vector<BenchRow> bench(const BenchSpec& spec);
std::string bench_csv(const std::vector<BenchRow>& rows);

// Synthetic well network: wells in a few exchangeable clusters; every month
// each cluster sits in one of K_c regimes and its wells read regime level plus
// noise; a fraction of cells is missing.
struct GroundwaterOptions {
  int months = 480;
  int wells = 3420;
  std::vector<int> regimes = {6, 7, 8, 9, 9, 9, 10, 10, 10, 14};
  double observed_fraction = 0.5;
  int test_months = 3;
  std::uint64_t seed = 0;
};

struct GroundwaterData {
  CsvMatrix matrix;  // months x wells with missing cells
  Eigen::MatrixXd truth;
  std::vector<int> cluster_of_well;
};

GroundwaterData make_synthetic_groundwater(const GroundwaterOptions& options);

struct GroundwaterComparison {
  int reduced_columns = 0;  // total mixture components across clusters
  int queries = 0;          // predicted cells
  double lifted_seconds = 0.0;
  double ground_seconds = 0.0;
  double lifted_mae = 0.0;
  double ground_mae = 0.0;
  double cluster_agreement = 0.0;
};

// Clusters the columns, learns one Gaussian mixture per cluster over month
// regimes (the months x components reduction) and answers every missing cell
// of the last test months twice: by latent-variable elimination on the
// variational model, and by exact Gaussian elimination on a ground model with
// one rv per well (mean and covariance estimated from the training months).
// Timings cover query answering only.
GroundwaterComparison compare_groundwater_inference(const GroundwaterData& data, const GroundwaterOptions& options);

}  // namespace lrvi
