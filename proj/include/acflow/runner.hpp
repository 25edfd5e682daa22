#pragma once

#include <optional>
#include <string>

#include "acflow/io.hpp"

namespace acflow {

// Exit codes: 0 success, 1 configuration/validation error, 2 a certificate
// with satisfied hypotheses failed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitCertificate = 2;

struct RunArtifacts {
  Trajectory trajectory;
  BoundConstants constants;
  CertificateReport report;
  FiniteMdp mdp;
  FeatureMap features;
  int exit_code = kExitOk;
};

// Resolves the config (generator or file, schedule thresholds, initial
// state), runs the flow or the discrete scheme, evaluates the enabled
// certificates and writes trajectory/constants/certificate artifacts
// into out_dir.
RunArtifacts run_experiment(const ExperimentConfig& config,
                            const std::string& out_dir,
                            std::optional<std::uint64_t> seed_override = {});

int run_command(const std::string& config_path,
                const std::optional<std::string>& out_dir, int threads,
                std::optional<std::uint64_t> seed_override);
int sweep_command(const std::string& config_path,
                  const std::optional<std::string>& out_dir, int threads,
                  std::optional<std::uint64_t> seed_override);
int validate_command(const std::string& config_path);
int gen_mdp_command(const std::string& spec_path, const std::string& out_path);

}  // namespace acflow
