#include "acflow/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace acflow {

namespace {

namespace fs = std::filesystem;

const char* kCertificateCatalogue[] = {
    "lyapunov-drift",  "gronwall-integral",    "gronwall-envelope",
    "uniform-kl",      "uniform-theta",        "theta-growth",
    "flow-tangent-l1", "advantage-sup",        "q-pi-sup",
    "log-density-sup", "gap-envelope",         "gap-exponential-rate",
    "gap-rate-fit",    "gap-tail-slope",       "gap-envelope-eta",
};

void set_threads(int threads) {
  if (threads > 0) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif
  }
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error in '" + path + "': " + e.what());
  }
}

struct ResolvedRun {
  SampledMdp sampled;
  TimescaleSchedule schedule;
  VectorXd theta0;
  Policy pi0;
  double dt;
  std::vector<double> output_times;
  std::uint64_t seed_used = 0;
};

ResolvedRun resolve(const ExperimentConfig& config,
                    std::optional<std::uint64_t> seed_override) {
  ResolvedRun r;
  if (config.mdp_file) {
    r.sampled = load_mdp_file(*config.mdp_file);
  } else {
    GeneratorSpec g = *config.generator;
    r.seed_used = seed_override.value_or(g.seed);
    r.sampled = sample_random_mdp(r.seed_used, g.n_states, g.n_actions,
                                  g.gamma, g.tau, g.structure, g.n_features);
  }
  const FiniteMdp& mdp = r.sampled.mdp;

  r.schedule = config.schedule;
  if (config.eta0_times_threshold) {
    const double g2 = gram_data(mdp, r.sampled.features).gamma_const;
    const double eta0 =
        *config.eta0_times_threshold * std::max(mdp.tau, 1.0) / g2;
    r.schedule = make_schedule(config.schedule.kind, eta0, config.schedule.k1,
                               config.schedule.p);
  }

  if (config.policy_mode == "uniform") {
    r.pi0 = uniform_policy(mdp.n_states, mdp.n_actions);
  } else if (config.policy_mode == "optimal") {
    r.pi0 = solve_optimal(mdp).pi_star;
  } else if (config.policy_mode == "logits") {
    if (config.policy_logits.rows() != mdp.n_states ||
        config.policy_logits.cols() != mdp.n_actions)
      throw ConfigError("config: initial.policy.logits dimension mismatch");
    r.pi0 = policy_from_logits(config.policy_logits, mdp.mu);
  } else {  // seeded-logits
    std::mt19937_64 rng(config.policy_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd logits(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a)
        logits(s, a) = config.policy_logit_scale * normal(rng);
    r.pi0 = policy_from_logits(logits, mdp.mu);
  }

  if (config.theta_mode == "zero") {
    r.theta0 = VectorXd::Zero(r.sampled.features.dim);
  } else if (config.theta_mode == "best") {
    r.theta0 = best_parameters(r.pi0, mdp, r.sampled.features).theta_pi;
  } else {
    if (config.theta_explicit.size() != r.sampled.features.dim)
      throw ConfigError("config: initial.theta has dimension " +
                        std::to_string(config.theta_explicit.size()) +
                        ", features have " +
                        std::to_string(r.sampled.features.dim));
    r.theta0 = config.theta_explicit;
  }

  r.dt = config.dt.value_or(
      1e-3 * std::min(1.0, 1.0 / r.schedule.eta(config.t_end)));
  if (!config.output_times.empty()) {
    r.output_times = config.output_times;
  } else {
    r.output_times.push_back(0.0);
    for (double t : linear_output_grid(config.output_t_min, config.t_end,
                                       config.output_count))
      r.output_times.push_back(t);
  }
  return r;
}

CertificateReport filter_certificates(CertificateReport report,
                                      const std::vector<std::string>& enabled) {
  if (enabled.empty()) return report;
  for (const std::string& name : enabled) {
    const bool known =
        std::any_of(std::begin(kCertificateCatalogue),
                    std::end(kCertificateCatalogue),
                    [&](const char* c) { return name == c; });
    if (!known) throw ConfigError("config: unknown certificate '" + name + "'");
  }
  CertificateReport out;
  for (CertificateEntry& e : report.entries)
    if (std::find(enabled.begin(), enabled.end(), e.name) != enabled.end())
      out.entries.push_back(std::move(e));
  return out;
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << doc.dump(2) << "\n";
}

std::string sanitize_csv(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config,
                            const std::string& out_dir,
                            std::optional<std::uint64_t> seed_override) {
  ResolvedRun r = resolve(config, seed_override);
  const FiniteMdp& mdp = r.sampled.mdp;
  const FeatureMap& features = r.sampled.features;

  RunArtifacts artifacts;
  artifacts.mdp = mdp;
  artifacts.features = features;

  if (config.mode == RunMode::Flow) {
    FlowOptions opt;
    opt.method = config.method;
    opt.dt = r.dt;
    opt.t_end = config.t_end;
    opt.output_times = r.output_times;
    opt.theta_guard = config.theta_guard;
    opt.kl_guard = config.kl_guard;
    artifacts.trajectory =
        integrate(FlowState{0.0, r.theta0, r.pi0}, mdp, features, r.schedule,
                  opt);
  } else {
    TwoTimescaleOptions opt;
    opt.dt = r.dt;
    opt.t_end = config.t_end;
    opt.output_times = r.output_times;
    opt.policy_uses_updated_critic = config.policy_uses_updated_critic;
    opt.theta_guard = config.theta_guard;
    opt.kl_guard = config.kl_guard;
    artifacts.trajectory = run_two_timescale(r.theta0, r.pi0, mdp, features,
                                             r.schedule, opt);
  }

  artifacts.constants =
      compute_constants_lenient(mdp, features, r.theta0, r.pi0, r.schedule);

  CertificateReport report;
  report.entries.push_back(
      check_lyapunov_drift(artifacts.trajectory, artifacts.constants));
  for (auto& e : check_gronwall_kl(artifacts.trajectory, artifacts.constants))
    report.entries.push_back(std::move(e));
  for (auto& e :
       check_uniform_bounds(artifacts.trajectory, artifacts.constants))
    report.entries.push_back(std::move(e));
  report.entries.push_back(
      check_theta_growth(artifacts.trajectory, artifacts.constants));
  for (auto& e : check_bounds_along_flow(artifacts.trajectory,
                                         artifacts.constants, mdp, features))
    report.entries.push_back(std::move(e));
  for (auto& e : check_convergence_envelopes(artifacts.trajectory,
                                             artifacts.constants, mdp,
                                             features, r.schedule,
                                             config.output_t_min))
    report.entries.push_back(std::move(e));
  artifacts.report = filter_certificates(std::move(report), config.certificates);
  artifacts.exit_code =
      artifacts.report.any_failed() ? kExitCertificate : kExitOk;

  fs::create_directories(out_dir);
  const std::string base = (fs::path(out_dir) / config.prefix).string();
  write_trajectory_csv(base + "_trajectory.csv", artifacts.trajectory,
                       config.hash);

  json sidecar;
  sidecar["config_hash"] = config.hash;
  sidecar["config"] = config.raw;
  sidecar["constants"] = constants_to_json(artifacts.constants);
  json resolved;
  resolved["dt"] = r.dt;
  resolved["eta0"] = r.schedule.eta(0.0);
  resolved["seed"] = r.seed_used;
  sidecar["resolved"] = std::move(resolved);
  write_json_file(base + "_constants.json", sidecar);

  json certs = certificates_to_json(artifacts.report, artifacts.constants);
  certs["config_hash"] = config.hash;
  write_json_file(base + "_certificates.json", certs);
  return artifacts;
}

namespace {

void print_report(const RunArtifacts& artifacts) {
  const BoundConstants& c = artifacts.constants;
  std::printf(
      "constants: Gamma=%g lambda_beta=%g a1=%g a2=%g eta0=%g "
      "small_gamma=%s eta0_admissible=%s\n",
      c.gamma_const, c.lambda_beta, c.a1, c.a2, c.eta0,
      c.small_gamma_flag ? "yes" : "no", c.eta0_admissible ? "yes" : "no");
  for (const CertificateEntry& e : artifacts.report.entries) {
    if (e.status == CheckStatus::NotApplicable)
      std::printf("%-22s %-14s %s\n", e.name.c_str(),
                  to_string(e.status).c_str(), e.note.c_str());
    else
      std::printf("%-22s %-14s margin=% .6e t_worst=%g\n", e.name.c_str(),
                  to_string(e.status).c_str(), e.margin, e.t_worst);
  }
}

}  // namespace

int run_command(const std::string& config_path,
                const std::optional<std::string>& out_dir, int threads,
                std::optional<std::uint64_t> seed_override) {
  set_threads(threads);
  try {
    ExperimentConfig cfg = load_config_file(config_path);
    const std::string dir = out_dir.value_or(cfg.out_dir);
    RunArtifacts artifacts = run_experiment(cfg, dir, seed_override);
    print_report(artifacts);
    std::printf("artifacts in %s (prefix %s)\n", dir.c_str(),
                cfg.prefix.c_str());
    return artifacts.exit_code;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

int sweep_command(const std::string& config_path,
                  const std::optional<std::string>& out_dir, int threads,
                  std::optional<std::uint64_t> seed_override) {
  set_threads(threads);
  try {
    const json doc = read_json_file(config_path);
    if (!doc.contains("sweep") || !doc["sweep"].contains("grid"))
      throw ConfigError("config: sweep requires a 'sweep.grid' array");
    const json& grid = doc["sweep"]["grid"];
    if (!grid.is_array() || grid.empty())
      throw ConfigError("config: sweep.grid must be a non-empty array");

    std::vector<std::string> paths;
    std::vector<std::vector<json>> values;
    size_t n_points = 1;
    for (const json& axis : grid) {
      if (!axis.contains("path") || !axis["path"].is_string())
        throw ConfigError("config: sweep axis needs a 'path' JSON pointer");
      if (!axis.contains("values") || !axis["values"].is_array() ||
          axis["values"].empty())
        throw ConfigError("config: sweep axis needs non-empty 'values'");
      paths.push_back(axis["path"].get<std::string>());
      values.push_back(
          std::vector<json>(axis["values"].begin(), axis["values"].end()));
      n_points *= values.back().size();
    }

    json base = doc;
    base.erase("sweep");
    const std::string sweep_hash = config_hash(doc);
    ExperimentConfig base_cfg = parse_config(base);  // validates shared fields
    const std::string dir = out_dir.value_or(base_cfg.out_dir);
    fs::create_directories(dir);

    struct PointResult {
      std::vector<json> coords;
      double final_gap = 0.0;
      double k_max = 0.0;
      int pass = 0, fail = 0, na = 0, rep = 0;
      bool small_gamma = false;
      bool eta0_admissible = false;
      int exit_code = kExitOk;
      std::string error;
    };
    std::vector<PointResult> results(n_points);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long long idx = 0; idx < static_cast<long long>(n_points); ++idx) {
      PointResult& res = results[idx];
      try {
        json point = base;
        size_t rem = idx;
        for (size_t ax = 0; ax < paths.size(); ++ax) {
          const size_t vi = rem % values[ax].size();
          rem /= values[ax].size();
          point[json::json_pointer(paths[ax])] = values[ax][vi];
          res.coords.push_back(values[ax][vi]);
        }
        ExperimentConfig cfg = parse_config(point);
        char sub[32];
        std::snprintf(sub, sizeof sub, "point_%03lld", idx);
        RunArtifacts artifacts =
            run_experiment(cfg, (fs::path(dir) / sub).string(), seed_override);
        res.exit_code = artifacts.exit_code;
        if (!artifacts.trajectory.snapshots.empty()) {
          res.final_gap = artifacts.trajectory.snapshots.back().diag.gap;
          for (const Snapshot& s : artifacts.trajectory.snapshots)
            res.k_max = std::max(res.k_max, s.diag.k_t);
        }
        res.small_gamma = artifacts.constants.small_gamma_flag;
        res.eta0_admissible = artifacts.constants.eta0_admissible;
        for (const CertificateEntry& e : artifacts.report.entries) {
          switch (e.status) {
            case CheckStatus::Pass:
              ++res.pass;
              break;
            case CheckStatus::Fail:
              ++res.fail;
              break;
            case CheckStatus::NotApplicable:
              ++res.na;
              break;
            case CheckStatus::Report:
              ++res.rep;
              break;
          }
        }
      } catch (const std::exception& e) {
        res.exit_code = kExitConfig;
        res.error = e.what();
      }
    }

    const std::string summary_path =
        (fs::path(dir) / "sweep_summary.csv").string();
    std::ofstream f(summary_path);
    if (!f) throw ConfigError("cannot write '" + summary_path + "'");
    f << "# config_hash=" << sweep_hash << "\n";
    f << "point";
    for (const std::string& p : paths) f << ',' << p;
    f << ",final_gap,k_max,pass,fail,not_applicable,report,"
         "small_gamma_flag,eta0_admissible,exit_code,error\n";
    for (size_t i = 0; i < results.size(); ++i) {
      const PointResult& res = results[i];
      f << i;
      for (const json& v : res.coords)
        f << ',' << sanitize_csv(v.dump());
      if (res.coords.empty())
        for (size_t ax = 0; ax < paths.size(); ++ax) f << ',';
      f << ',' << format_double(res.final_gap) << ','
        << format_double(res.k_max) << ',' << res.pass << ',' << res.fail
        << ',' << res.na << ',' << res.rep << ','
        << (res.small_gamma ? 1 : 0) << ',' << (res.eta0_admissible ? 1 : 0)
        << ',' << res.exit_code << ',' << sanitize_csv(res.error) << "\n";
    }
    f.close();
    std::printf("sweep of %zu point(s); summary in %s\n", n_points,
                summary_path.c_str());

    bool any_error = false, any_cert_fail = false;
    for (const PointResult& res : results) {
      if (res.exit_code == kExitConfig) any_error = true;
      if (res.exit_code == kExitCertificate) any_cert_fail = true;
    }
    if (any_error) return kExitConfig;
    if (any_cert_fail) return kExitCertificate;
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

int validate_command(const std::string& config_path) {
  try {
    ExperimentConfig cfg = load_config_file(config_path);
    ResolvedRun r = resolve(cfg, std::nullopt);
    const BoundConstants constants = compute_constants_lenient(
        r.sampled.mdp, r.sampled.features, r.theta0, r.pi0, r.schedule);
    std::printf("ok: config_hash=%s\n", cfg.hash.c_str());
    std::printf(
        "resolved: |S|=%d |A|=%d N=%d dt=%g t_end=%g eta0=%g "
        "Gamma=%g eta0_admissible=%s small_gamma=%s\n",
        r.sampled.mdp.n_states, r.sampled.mdp.n_actions,
        r.sampled.features.dim, r.dt, cfg.t_end, r.schedule.eta(0.0),
        constants.gamma_const, constants.eta0_admissible ? "yes" : "no",
        constants.small_gamma_flag ? "yes" : "no");
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

int gen_mdp_command(const std::string& spec_path, const std::string& out_path) {
  try {
    const json doc = read_json_file(spec_path);
    json wrapper;
    wrapper["mdp"] = json{{"generator", doc}};
    // reuse the config parser for field validation
    wrapper["schedule"] = json{{"kind", "constant"}, {"eta0", 1.0}};
    wrapper["initial"] = json{{"theta", "zero"}, {"policy", "uniform"}};
    wrapper["integrator"] = json{{"mode", "flow"}, {"t_end", 1.0}};
    ExperimentConfig cfg = parse_config(wrapper);
    const GeneratorSpec& g = *cfg.generator;
    SampledMdp sampled = sample_random_mdp(g.seed, g.n_states, g.n_actions,
                                           g.gamma, g.tau, g.structure,
                                           g.n_features);
    if (const auto parent = fs::path(out_path).parent_path(); !parent.empty())
      fs::create_directories(parent);
    save_mdp_file(out_path, sampled.mdp, sampled.features, config_hash(doc));
    std::printf("wrote %s\n", out_path.c_str());
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

}  // namespace acflow
