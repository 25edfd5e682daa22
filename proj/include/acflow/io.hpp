#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acflow/analysis.hpp"
#include "acflow/flow.hpp"
#include "acflow/mdp.hpp"

namespace acflow {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes);
// Hash of the canonical (sorted-key, fixed-format) dump of a JSON document.
std::string config_hash(const json& doc);

// MDP description document: n_states, n_actions, transition, cost, gamma,
// tau, mu, beta, features. The loader names the first violated invariant.
json mdp_to_json(const FiniteMdp& mdp, const FeatureMap& features);
SampledMdp mdp_from_json(const json& doc);
SampledMdp load_mdp_file(const std::string& path);
void save_mdp_file(const std::string& path, const FiniteMdp& mdp,
                   const FeatureMap& features, const std::string& hash);

enum class RunMode { Flow, TwoTimescale };

struct GeneratorSpec {
  std::uint64_t seed = 0;
  int n_states = 2;
  int n_actions = 2;
  double gamma = 0.5;
  double tau = 1.0;
  MdpStructure structure = MdpStructure::TabularOnehot;
  int n_features = 0;
};

struct ExperimentConfig {
  json raw;  // the parsed document, for hashing and provenance
  std::string hash;

  std::optional<std::string> mdp_file;
  std::optional<GeneratorSpec> generator;

  TimescaleSchedule schedule;
  // eta0 given either directly or as a multiple of max(tau,1)/Gamma.
  std::optional<double> eta0_times_threshold;

  std::string theta_mode = "zero";   // zero | best | explicit
  VectorXd theta_explicit;
  std::string policy_mode = "uniform";  // uniform | optimal | logits | seeded-logits
  MatrixXd policy_logits;
  std::uint64_t policy_seed = 0;
  double policy_logit_scale = 1.0;

  RunMode mode = RunMode::Flow;
  Integrator method = Integrator::ExponentialEuler;
  std::optional<double> dt;  // default 1e-3 * min(1, 1/eta(t_end))
  double t_end = 10.0;
  double output_t_min = 0.1;
  int output_count = 200;
  std::vector<double> output_times;  // explicit grid wins over count
  bool policy_uses_updated_critic = true;
  double theta_guard = 1e6;
  double kl_guard = 1e4;

  std::vector<std::string> certificates;  // empty means all
  std::string out_dir = ".";
  std::string prefix = "run";
};

ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config_file(const std::string& path);

// Trajectory CSV: header comment with the config hash, then
// t, theta_norm, K_t, V_rho, gap, theta_err, msbe, drift_lhs, drift_rhs.
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory,
                          const std::string& hash);

json constants_to_json(const BoundConstants& constants);
json certificates_to_json(const CertificateReport& report,
                          const BoundConstants& constants);

// Doubles formatted with %.17g so reruns are byte-identical.
std::string format_double(double value);

}  // namespace acflow
