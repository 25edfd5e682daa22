#include "acflow/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace acflow {

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

MatrixXd matrix_from_json(const json& a, const std::string& what) {
  if (!a.is_array() || a.empty() || !a.front().is_array())
    throw ConfigError(what + ": expected a 2d array");
  const size_t rows = a.size(), cols = a.front().size();
  MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (!a[i].is_array() || a[i].size() != cols)
      throw ConfigError(what + ": ragged rows");
    for (size_t j = 0; j < cols; ++j) {
      if (!a[i][j].is_number())
        throw ConfigError(what + ": non-numeric entry");
      m(i, j) = a[i][j].get<double>();
    }
  }
  return m;
}

VectorXd vector_from_json(const json& a, const std::string& what) {
  if (!a.is_array()) throw ConfigError(what + ": expected an array");
  VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ConfigError(what + ": non-numeric entry");
    v(i) = a[i].get<double>();
  }
  return v;
}

std::string structure_name(MdpStructure s) {
  switch (s) {
    case MdpStructure::TabularOnehot:
      return "tabular-onehot";
    case MdpStructure::LinearMdp:
      return "linear-mdp";
    case MdpStructure::DenseRandom:
      return "dense-random";
  }
  return "tabular-onehot";
}

const json& require(const json& doc, const char* key, const char* ctx) {
  auto it = doc.find(key);
  if (it == doc.end())
    throw ConfigError(std::string(ctx) + ": missing field '" + key + "'");
  return *it;
}

double require_num(const json& doc, const char* key, const char* ctx) {
  const json& v = require(doc, key, ctx);
  if (!v.is_number())
    throw ConfigError(std::string(ctx) + ": field '" + key +
                      "' must be a number");
  return v.get<double>();
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

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const json& doc) {
  // json objects keep keys sorted, so dump() is canonical.
  const std::string bytes = doc.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(bytes));
  return buf;
}

json mdp_to_json(const FiniteMdp& mdp, const FeatureMap& features) {
  json doc;
  doc["n_states"] = mdp.n_states;
  doc["n_actions"] = mdp.n_actions;
  json transition = json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    json per_action = json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      json row = json::array();
      for (int sp = 0; sp < mdp.n_states; ++sp)
        row.push_back(mdp.transition(mdp.sa(s, a), sp));
      per_action.push_back(std::move(row));
    }
    transition.push_back(std::move(per_action));
  }
  doc["transition"] = std::move(transition);
  doc["cost"] = matrix_to_json(mdp.cost);
  doc["gamma"] = mdp.gamma;
  doc["tau"] = mdp.tau;
  doc["mu"] = vector_to_json(mdp.mu);
  doc["beta"] = matrix_to_json(mdp.beta);
  doc["features"] = matrix_to_json(features.phi);
  return doc;
}

SampledMdp mdp_from_json(const json& doc) {
  const char* ctx = "mdp";
  const int n_states = static_cast<int>(require_num(doc, "n_states", ctx));
  const int n_actions = static_cast<int>(require_num(doc, "n_actions", ctx));
  if (n_states <= 0 || n_actions <= 0)
    throw ConfigError("mdp: n_states and n_actions must be positive");

  const json& tj = require(doc, "transition", ctx);
  if (!tj.is_array() || static_cast<int>(tj.size()) != n_states)
    throw ConfigError("mdp: transition must have n_states outer entries");
  MatrixXd transition(n_states * n_actions, n_states);
  for (int s = 0; s < n_states; ++s) {
    if (!tj[s].is_array() || static_cast<int>(tj[s].size()) != n_actions)
      throw ConfigError("mdp: transition[" + std::to_string(s) +
                        "] must have n_actions rows");
    for (int a = 0; a < n_actions; ++a) {
      const VectorXd row =
          vector_from_json(tj[s][a], "mdp: transition row");
      if (row.size() != n_states)
        throw ConfigError("mdp: transition row length mismatch");
      transition.row(s * n_actions + a) = row.transpose();
    }
  }
  const MatrixXd cost = matrix_from_json(require(doc, "cost", ctx), "mdp: cost");
  const double gamma = require_num(doc, "gamma", ctx);
  const double tau = require_num(doc, "tau", ctx);
  const VectorXd mu = vector_from_json(require(doc, "mu", ctx), "mdp: mu");
  const MatrixXd beta = matrix_from_json(require(doc, "beta", ctx), "mdp: beta");
  const MatrixXd phi =
      matrix_from_json(require(doc, "features", ctx), "mdp: features");
  if (cost.rows() != n_states || cost.cols() != n_actions)
    throw ConfigError("mdp: cost must be n_states x n_actions");
  if (static_cast<int>(phi.rows()) != n_states * n_actions)
    throw ConfigError("mdp: features must have n_states*n_actions rows");

  SampledMdp out;
  out.mdp = build_mdp(transition, cost, gamma, tau, mu, beta);
  out.features = build_features(phi, out.mdp);
  return out;
}

SampledMdp load_mdp_file(const std::string& path) {
  return mdp_from_json(read_json_file(path));
}

void save_mdp_file(const std::string& path, const FiniteMdp& mdp,
                   const FeatureMap& features, const std::string& hash) {
  json doc = mdp_to_json(mdp, features);
  doc["config_hash"] = hash;
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << doc.dump(2) << "\n";
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.raw = doc;
  cfg.hash = config_hash(doc);

  const json& mdp_spec = require(doc, "mdp", "config");
  if (mdp_spec.contains("file")) {
    if (!mdp_spec["file"].is_string())
      throw ConfigError("config: mdp.file must be a string path");
    cfg.mdp_file = mdp_spec["file"].get<std::string>();
  } else if (mdp_spec.contains("generator")) {
    const json& g = mdp_spec["generator"];
    GeneratorSpec spec;
    const json& seed = require(g, "seed", "config: mdp.generator");
    if (!seed.is_number_unsigned())
      throw ConfigError("config: mdp.generator.seed must be unsigned");
    spec.seed = seed.get<std::uint64_t>();
    spec.n_states =
        static_cast<int>(require_num(g, "n_states", "config: mdp.generator"));
    spec.n_actions =
        static_cast<int>(require_num(g, "n_actions", "config: mdp.generator"));
    spec.gamma = require_num(g, "gamma", "config: mdp.generator");
    spec.tau = require_num(g, "tau", "config: mdp.generator");
    const json& st = require(g, "structure", "config: mdp.generator");
    if (!st.is_string())
      throw ConfigError("config: mdp.generator.structure must be a string");
    spec.structure = parse_structure(st.get<std::string>());
    if (g.contains("n_features"))
      spec.n_features = static_cast<int>(
          require_num(g, "n_features", "config: mdp.generator"));
    cfg.generator = spec;
  } else {
    throw ConfigError("config: mdp needs either 'file' or 'generator'");
  }

  const json& sched = require(doc, "schedule", "config");
  const json& kind = require(sched, "kind", "config: schedule");
  if (!kind.is_string())
    throw ConfigError("config: schedule.kind must be a string");
  const ScheduleKind sk = parse_schedule_kind(kind.get<std::string>());
  double eta0 = 1.0;
  if (sched.contains("eta0_times_threshold")) {
    cfg.eta0_times_threshold =
        require_num(sched, "eta0_times_threshold", "config: schedule");
    if (!(*cfg.eta0_times_threshold > 0.0))
      throw ConfigError("config: schedule.eta0_times_threshold must be > 0");
  } else {
    eta0 = require_num(sched, "eta0", "config: schedule");
  }
  double k1 = 0.0, p = 0.5;
  if (sk == ScheduleKind::Exponential)
    k1 = require_num(sched, "k1", "config: schedule");
  if (sk == ScheduleKind::Polynomial && sched.contains("p"))
    p = require_num(sched, "p", "config: schedule");
  // Deferred: when eta0 comes from the threshold multiple, the runner
  // rebuilds the schedule once Gamma is known.
  cfg.schedule = cfg.eta0_times_threshold
                     ? TimescaleSchedule{sk, 1.0, k1, p}
                     : make_schedule(sk, eta0, k1, p);

  const json& init = require(doc, "initial", "config");
  const json& theta = require(init, "theta", "config: initial");
  if (theta.is_string()) {
    cfg.theta_mode = theta.get<std::string>();
    if (cfg.theta_mode != "zero" && cfg.theta_mode != "best")
      throw ConfigError("config: initial.theta must be 'zero', 'best' or an array");
  } else if (theta.is_array()) {
    cfg.theta_mode = "explicit";
    cfg.theta_explicit = vector_from_json(theta, "config: initial.theta");
  } else {
    throw ConfigError("config: initial.theta must be 'zero', 'best' or an array");
  }
  const json& pol = require(init, "policy", "config: initial");
  if (pol.is_string()) {
    cfg.policy_mode = pol.get<std::string>();
    if (cfg.policy_mode != "uniform" && cfg.policy_mode != "optimal")
      throw ConfigError(
          "config: initial.policy must be 'uniform', 'optimal', "
          "{'logits': ...} or {'seeded-logits': ...}");
  } else if (pol.is_object() && pol.contains("logits")) {
    cfg.policy_mode = "logits";
    cfg.policy_logits =
        matrix_from_json(pol["logits"], "config: initial.policy.logits");
  } else if (pol.is_object() && pol.contains("seeded-logits")) {
    const json& sl = pol["seeded-logits"];
    cfg.policy_mode = "seeded-logits";
    const json& seed = require(sl, "seed", "config: initial.policy.seeded-logits");
    if (!seed.is_number_unsigned())
      throw ConfigError("config: seeded-logits.seed must be unsigned");
    cfg.policy_seed = seed.get<std::uint64_t>();
    if (sl.contains("scale"))
      cfg.policy_logit_scale =
          require_num(sl, "scale", "config: initial.policy.seeded-logits");
  } else {
    throw ConfigError("config: unrecognised initial.policy");
  }

  const json& integ = require(doc, "integrator", "config");
  const json& mode = require(integ, "mode", "config: integrator");
  if (!mode.is_string())
    throw ConfigError("config: integrator.mode must be a string");
  const std::string mode_s = mode.get<std::string>();
  if (mode_s == "flow")
    cfg.mode = RunMode::Flow;
  else if (mode_s == "two-timescale")
    cfg.mode = RunMode::TwoTimescale;
  else
    throw ConfigError("config: integrator.mode must be 'flow' or 'two-timescale'");
  if (integ.contains("method")) {
    const json& m = integ["method"];
    if (!m.is_string())
      throw ConfigError("config: integrator.method must be a string");
    cfg.method = parse_integrator(m.get<std::string>());
  }
  cfg.t_end = require_num(integ, "t_end", "config: integrator");
  if (!(cfg.t_end > 0.0))
    throw ConfigError("config: integrator.t_end must be > 0");
  if (integ.contains("dt")) {
    cfg.dt = require_num(integ, "dt", "config: integrator");
    if (!(*cfg.dt > 0.0))
      throw ConfigError("config: integrator.dt must be > 0");
  }
  if (integ.contains("output")) {
    const json& o = integ["output"];
    if (o.contains("times")) {
      const VectorXd times =
          vector_from_json(o["times"], "config: integrator.output.times");
      cfg.output_times.assign(times.data(), times.data() + times.size());
    } else {
      if (o.contains("t_min"))
        cfg.output_t_min = require_num(o, "t_min", "config: integrator.output");
      if (o.contains("count")) {
        cfg.output_count =
            static_cast<int>(require_num(o, "count", "config: integrator.output"));
        if (cfg.output_count < 1)
          throw ConfigError("config: integrator.output.count must be >= 1");
      }
    }
  }
  if (integ.contains("policy_uses_updated_critic")) {
    const json& b = integ["policy_uses_updated_critic"];
    if (!b.is_boolean())
      throw ConfigError(
          "config: integrator.policy_uses_updated_critic must be a boolean");
    cfg.policy_uses_updated_critic = b.get<bool>();
  }
  if (integ.contains("theta_guard"))
    cfg.theta_guard = require_num(integ, "theta_guard", "config: integrator");
  if (integ.contains("kl_guard"))
    cfg.kl_guard = require_num(integ, "kl_guard", "config: integrator");

  if (doc.contains("certificates")) {
    const json& certs = doc["certificates"];
    if (!certs.is_array())
      throw ConfigError("config: certificates must be an array of names");
    for (const json& c : certs) {
      if (!c.is_string())
        throw ConfigError("config: certificates entries must be strings");
      cfg.certificates.push_back(c.get<std::string>());
    }
  }
  if (doc.contains("out_dir")) {
    if (!doc["out_dir"].is_string())
      throw ConfigError("config: out_dir must be a string");
    cfg.out_dir = doc["out_dir"].get<std::string>();
  }
  if (doc.contains("prefix")) {
    if (!doc["prefix"].is_string())
      throw ConfigError("config: prefix must be a string");
    cfg.prefix = doc["prefix"].get<std::string>();
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config(read_json_file(path));
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory,
                          const std::string& hash) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << "# config_hash=" << hash << "\n";
  f << "t,theta_norm,K_t,V_rho,gap,theta_err,msbe,drift_lhs,drift_rhs\n";
  for (const Snapshot& s : trajectory.snapshots) {
    f << format_double(s.t) << ',' << format_double(s.diag.theta_norm) << ','
      << format_double(s.diag.k_t) << ',' << format_double(s.diag.v_rho) << ','
      << format_double(s.diag.gap) << ',' << format_double(s.diag.theta_err)
      << ',' << format_double(s.diag.msbe) << ','
      << format_double(s.diag.drift_lhs) << ','
      << format_double(s.diag.drift_rhs) << "\n";
  }
}

json constants_to_json(const BoundConstants& c) {
  json doc;
  doc["gamma_const"] = c.gamma_const;
  doc["lambda_beta"] = c.lambda_beta;
  doc["c_inf"] = c.c_inf;
  doc["c1"] = c.c1;
  doc["sigma1"] = c.sigma1;
  doc["sigma2"] = c.sigma2;
  doc["a1"] = c.a1;
  doc["a2"] = c.a2;
  doc["small_gamma_flag"] = c.small_gamma_flag;
  doc["eta0_admissible"] = c.eta0_admissible;
  doc["eta0_admissible_conv"] = c.eta0_admissible_conv;
  doc["gamma"] = c.gamma;
  doc["tau"] = c.tau;
  doc["eta0"] = c.eta0;
  doc["theta0_norm"] = c.theta0_norm;
  doc["k_sq_bound"] = c.k_sq_bound;
  doc["theta_bound"] = c.theta_bound;
  if (c.alpha)
    doc["alpha"] = *c.alpha;
  else
    doc["alpha"] = nullptr;
  doc["r1"] = c.r1;
  doc["r2"] = c.r2;
  doc["b1"] = c.b1;
  doc["b2"] = c.b2;
  return doc;
}

json certificates_to_json(const CertificateReport& report,
                          const BoundConstants& constants) {
  const json constants_doc = constants_to_json(constants);
  json checks = json::array();
  for (const CertificateEntry& e : report.entries) {
    json entry;
    entry["name"] = e.name;
    entry["status"] = to_string(e.status);
    entry["margin"] = std::isfinite(e.margin)
                          ? e.margin
                          : std::copysign(1e300, e.margin);
    entry["t_worst"] = e.t_worst;
    entry["note"] = e.note;
    entry["constants_used"] = constants_doc;
    checks.push_back(std::move(entry));
  }
  json doc;
  doc["checks"] = std::move(checks);
  return doc;
}

}  // namespace acflow
