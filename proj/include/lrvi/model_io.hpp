#pragma once

// Model, observation and CSV file formats.
//
// Text model files are line oriented with four optional sections:
//
//   ATOMS
//   atom attends binary 50
//   atom color categorical 3 10
//   atom HP continuous 64 support -5 5
//
//   PARFACTORS
//   parfactor phi1
//     logvar W 5                     generated constants W_0 .. W_4
//     logvar P {a,b,c}               explicit constants
//     args attends hot(W) Z[3]       whole population, per-substitution, fixed rv
//     table valuation                or: table histogram
//     entry 3,2 1,4 -0.6931          one histogram per atom, then the log value
//     value 2,3 0,5 0.25             same with a plain value
//   parfactor phi2
//     args HP
//     parametric gaussian mean=0 var=1
//   parfactor phi3
//     args X Y
//     parametric ground_table dims=2,2 values=1,2,3,4
//   parfactor phi4
//     args Job
//     mixture
//     component 0.5 0.3,0.7          weight, then one categorical per atom
//   parfactor phi5
//     args HP Job
//     kde_mixture
//     component 0.5 kde:0.2:-0.3,0.1 cat:0.3,0.7
//                                    kde:<bandwidth>:<centers>[:<center weights>]
//
//   LATENT-COUPLINGS
//   latent p_job 0 1
//   rate p_job phi_job
//   weight p_D phi_hp
//   gaussian p_job p_D 0 0.04        f_N(a - b; mu, var)
//   component_table phiA phiB 2 2 1,0.5,0.5,1
//
//   EXTENDIBILITY
//   extend attends 100               n_bar, or inf
//
// '#' starts a comment. Serialization writes the canonical form, with every
// number printed to round-trip exactly.

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lrvi/bounds.hpp"
#include "lrvi/lifted_mcmc.hpp"
#include "lrvi/lve.hpp"
#include "lrvi/model.hpp"

namespace lrvi {

struct LatentSpec {
  std::vector<ContinuousLatent> latents;
  std::vector<RateBinding> rates;
  std::vector<WeightBinding> weight_bindings;
  std::vector<GaussianDifferenceCoupling> gaussian_couplings;
  std::vector<ComponentCoupling> component_couplings;

  bool empty() const;
};

struct ModelDocument {
  Rhm model;
  LatentSpec latent;
  ExtendibilitySpec extendibility;
};

ModelDocument parse_model_text(std::string_view text);
std::string serialize_model_text(const ModelDocument& doc);

nlohmann::json model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const nlohmann::json& j);

// Chooses the format from the extension (.json or anything else for text).
ModelDocument load_model(const std::filesystem::path& path);

// Requires every parfactor to carry a variational potential.
LatentModel latent_model(const ModelDocument& doc);

nlohmann::json potential_to_json(const Potential& p);
Potential potential_from_json(const nlohmann::json& j, const std::vector<Atom>& atoms);
nlohmann::json variational_potential_to_json(const VariationalPotential& p);

// Observation files:
//   observe Job counts 70 30
//   observe HP values -0.1 0.05
std::vector<Observation> parse_observations_text(std::string_view text);
std::string serialize_observations_text(const std::vector<Observation>& obs);
nlohmann::json observations_to_json(const std::vector<Observation>& obs);
std::vector<Observation> observations_from_json(const nlohmann::json& j);
std::vector<Observation> load_observations(const std::filesystem::path& path);
// Throws DomainError when counts exceed populations or values leave domains.
void check_observations(const Rhm& model, const std::vector<Observation>& obs);

// Header row of column ids, then one row per record; empty cells are missing
// (NaN).
struct CsvMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;
};

CsvMatrix parse_csv(std::string_view text);
std::string write_csv(const CsvMatrix& m);
CsvMatrix load_csv(const std::filesystem::path& path);

std::string format_double(double v);
std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace lrvi
