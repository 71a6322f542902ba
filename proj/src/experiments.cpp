#include "isasc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "isasc/validation.hpp"

namespace isasc::exp {

namespace {

using Clock = std::chrono::steady_clock;
using ojson = nlohmann::ordered_json;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double to_db(double x) { return 10.0 * std::log10(x); }

std::string fmt_int(long long x) { return std::to_string(x); }
std::string fmt_bool(bool b) { return b ? "true" : "false"; }
std::string fmt_opt(bool has, double x) { return has ? fmt_num(x) : std::string(); }

// ---------------------------------------------------------------------------
// YAML ingestion

void check_keys(const YAML::Node& n, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!n) return;
  if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
void read(const YAML::Node& n, const char* key, T& out) {
  if (n && n[key]) out = n[key].as<T>();
}

void read_dbm(const YAML::Node& n, const char* key, double& watts) {
  if (n && n[key]) watts = model::dbm_to_watt(n[key].as<double>());
}

model::Point2 read_point(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence() || n.size() != 2) throw ConfigError(where + ": expected [x, y]");
  return {n[0].as<double>(), n[1].as<double>()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void parse_system(const YAML::Node& n, model::SystemConfig& c) {
  check_keys(n,
             {"m_t", "m_r", "n_irs", "k_users", "segment_length", "kappa", "bandwidth_hz", "semantic_info",
              "p_max_dbm", "sigma_s2_dbm", "sigma_c2_dbm", "sigma_e2_dbm", "spacing_ratio"},
             "system");
  read(n, "m_t", c.m_t);
  read(n, "m_r", c.m_r);
  read(n, "n_irs", c.n_irs);
  read(n, "k_users", c.k_users);
  read(n, "segment_length", c.segment_length);
  read(n, "kappa", c.kappa);
  read(n, "bandwidth_hz", c.bandwidth_hz);
  read(n, "semantic_info", c.semantic_info);
  read_dbm(n, "p_max_dbm", c.p_max);
  read_dbm(n, "sigma_s2_dbm", c.sigma_s2);
  read_dbm(n, "sigma_c2_dbm", c.sigma_c2);
  read_dbm(n, "sigma_e2_dbm", c.sigma_e2);
  read(n, "spacing_ratio", c.spacing_ratio);
}

void parse_layout(const YAML::Node& n, model::SceneLayout& l) {
  check_keys(n, {"bs", "irs", "users", "eve", "target"}, "layout");
  if (!n) return;
  if (n["bs"]) l.bs = read_point(n["bs"], "layout.bs");
  if (n["irs"]) l.irs = read_point(n["irs"], "layout.irs");
  if (n["eve"]) l.eve = read_point(n["eve"], "layout.eve");
  if (n["target"]) l.target = read_point(n["target"], "layout.target");
  if (n["users"]) {
    if (!n["users"].IsSequence()) throw ConfigError("layout.users: expected a list of [x, y]");
    l.users.clear();
    for (const auto& u : n["users"]) l.users.push_back(read_point(u, "layout.users"));
  }
}

void parse_pathloss(const YAML::Node& n, model::PathLossModel& p) {
  check_keys(n, {"k0_db", "d0", "zeta_irs", "zeta_direct", "rician_beta_bi", "rician_beta_ic", "rician_beta_ie"},
             "pathloss");
  if (n && n["k0_db"]) p.k0 = model::db_to_linear(n["k0_db"].as<double>());
  read(n, "d0", p.d0);
  read(n, "zeta_irs", p.zeta_irs);
  read(n, "zeta_direct", p.zeta_direct);
  read(n, "rician_beta_bi", p.rician_beta_bi);
  read(n, "rician_beta_ic", p.rician_beta_ic);
  read(n, "rician_beta_ie", p.rician_beta_ie);
}

void parse_solver(const YAML::Node& n, conic::SolverSettings& s) {
  check_keys(n,
             {"feas_tol", "gap_tol", "max_iterations", "grm_trials", "delta_ao", "delta_gss", "n_sca",
              "max_ao_iterations", "ao_restarts", "psd_dim_cap", "real_embedding"},
             "solver");
  read(n, "feas_tol", s.feas_tol);
  read(n, "gap_tol", s.gap_tol);
  read(n, "max_iterations", s.max_iterations);
  read(n, "grm_trials", s.grm_trials);
  read(n, "delta_ao", s.delta_ao);
  read(n, "delta_gss", s.delta_gss);
  read(n, "n_sca", s.n_sca);
  read(n, "max_ao_iterations", s.max_ao_iterations);
  read(n, "ao_restarts", s.ao_restarts);
  read(n, "psd_dim_cap", s.psd_dim_cap);
  read(n, "real_embedding", s.real_embedding);
}

void parse_bc(const YAML::Node& n, metrics::BcModel& bc, const std::string& base_dir) {
  check_keys(n, {"mu", "cqi_table_file", "cqi_table"}, "bc");
  if (!n) return;
  read(n, "mu", bc.mu);
  if (n["cqi_table_file"] && n["cqi_table"]) throw ConfigError("bc: give either cqi_table_file or cqi_table");
  if (n["cqi_table_file"]) {
    std::filesystem::path p = n["cqi_table_file"].as<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    bc = metrics::BcModel::from_csv_text(read_file(p.string()), bc.mu);
  } else if (n["cqi_table"]) {
    bc.cqi_table.clear();
    for (const auto& row : n["cqi_table"]) {
      if (!row.IsSequence() || row.size() != 2) throw ConfigError("bc.cqi_table: expected [threshold_db, efficiency]");
      bc.cqi_table.emplace_back(row[0].as<double>(), row[1].as<double>());
    }
  }
}

void parse_experiment(const YAML::Node& n, ExperimentSpec& s) {
  check_keys(n,
             {"seed", "realizations", "threads", "out_dir", "baselines", "eps_points", "eps_grid", "epsilon", "r_th",
              "p_max_dbm", "n_list", "elements_p_dbm", "cases", "kappa_list", "bc_p_dbm", "bc_eps_points",
              "crb_cap_db"},
             "experiment");
  if (!n) return;
  read(n, "seed", s.seed);
  read(n, "realizations", s.realizations);
  read(n, "threads", s.threads);
  read(n, "out_dir", s.out_dir);
  if (n["baselines"]) {
    s.baselines.clear();
    for (const auto& b : n["baselines"]) {
      for (auto x : parse_baselines(b.as<std::string>())) s.baselines.push_back(x);
    }
  }
  read(n, "eps_points", s.eps_points);
  read(n, "eps_grid", s.eps_grid);
  read(n, "epsilon", s.epsilon);
  if (n["r_th"] && !n["r_th"].IsNull()) s.r_th = n["r_th"].as<double>();
  read(n, "p_max_dbm", s.p_max_dbm);
  read(n, "n_list", s.n_list);
  read(n, "elements_p_dbm", s.elements_p_dbm);
  if (n["cases"]) {
    s.cases.clear();
    for (const auto& c : n["cases"]) {
      if (!c.IsSequence() || c.size() != 2) throw ConfigError("experiment.cases: expected [M, N] pairs");
      s.cases.emplace_back(c[0].as<int>(), c[1].as<int>());
    }
  }
  read(n, "kappa_list", s.kappa_list);
  read(n, "bc_p_dbm", s.bc_p_dbm);
  read(n, "bc_eps_points", s.bc_eps_points);
  if (n["crb_cap_db"]) {
    if (n["crb_cap_db"].IsNull()) {
      s.crb_cap_db.reset();
    } else {
      s.crb_cap_db = n["crb_cap_db"].as<double>();
    }
  }
}

// ---------------------------------------------------------------------------
// orchestration

// Runs f(0..n-1) on up to `threads` workers; results are stored by index,
// so the output does not depend on scheduling.
template <class T, class F>
std::vector<T> parallel_map(int n, int threads, F&& f, const Progress& progress) {
  std::vector<T> out(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  int done = 0;
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const int i = next++;
      if (i >= n) return;
      try {
        out[static_cast<std::size_t>(i)] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
      std::lock_guard<std::mutex> lock(mu);
      ++done;
      if (progress) progress(done, n);
    }
  };
  const int t = std::clamp(threads, 1, std::max(n, 1));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::uint64_t channel_seed(const ExperimentSpec& s, int r) { return derive_seed(s.seed, static_cast<std::uint64_t>(r)); }

model::PhaseProfile initial_profile(const ExperimentSpec& s, int r, int n) {
  return model::PhaseProfile::random(n, derive_seed(s.seed, 0x10000ULL + static_cast<std::uint64_t>(r)));
}

conic::SolverSettings settings_for(const ExperimentSpec& s, int r) {
  auto st = s.solver;
  st.seed = derive_seed(s.seed, 0x20000ULL + static_cast<std::uint64_t>(r));
  return st;
}

opt::Scenario scenario_for(const ExperimentSpec& s, const model::SystemConfig& c, int r) {
  return {c, model::synthesize_channels(c, s.layout, s.pathloss, channel_seed(s, r)), s.semantic(c)};
}

std::vector<opt::Scheme> schemes(const ExperimentSpec& s) {
  std::vector<opt::Scheme> out{opt::Scheme::proposed};
  for (auto b : s.baselines) {
    if (std::find(out.begin(), out.end(), b) == out.end()) out.push_back(b);
  }
  return out;
}

bool is_failure(opt::Status st) { return st == opt::Status::solver_failure || st == opt::Status::grm_failure; }

ojson stats(std::vector<double> xs) {
  ojson j;
  j["n"] = xs.size();
  if (xs.empty()) return j;
  j["median"] = quantile(xs, 0.5);
  j["q1"] = quantile(xs, 0.25);
  j["q3"] = quantile(xs, 0.75);
  return j;
}

ojson header_json(const ExperimentSpec& s) {
  ojson j;
  j["kind"] = to_string(s.kind);
  j["config_hash"] = s.hash();
  j["csv_schema"] = kCsvSchemaVersion;
  j["seed"] = s.seed;
  j["realizations"] = s.realizations;
  return j;
}

// One golden-section search result flattened for the sweep tables.
struct SweepCell {
  opt::Status status = opt::Status::infeasible;
  bool feasible = false;
  double r_th = 0.0, crb = 0.0, ssr = 0.0;
  int ao_iterations = 0, evaluations = 0;
  bool fallback = false;
  double seconds = 0.0;
  std::string error;
};

SweepCell gss_cell(const opt::Scenario& sc, double eps, const conic::SolverSettings& st,
                   const model::PhaseProfile& v0, opt::Scheme scheme) {
  SweepCell c;
  const auto t0 = Clock::now();
  try {
    const auto g = opt::golden_section_rth(sc, eps, st, v0, scheme);
    c.feasible = g.feasible;
    c.status = g.feasible ? opt::Status::ok : g.best.status;
    c.evaluations = g.evaluations;
    c.fallback = g.fallback_used;
    if (g.feasible) {
      c.r_th = g.r_th_opt;
      c.crb = g.best.crb;
      c.ssr = g.best.ssr;
      c.ao_iterations = g.best.iterations;
    }
  } catch (const std::exception& e) {
    c.status = opt::Status::solver_failure;
    c.error = e.what();
  }
  c.seconds = seconds_since(t0);
  return c;
}

const std::vector<std::string> kSweepTail{"feasible",         "r_th_opt_suts_per_sec", "crb_rad2",
                                          "crb_db",           "ssr_suts_per_sec",      "ao_iterations",
                                          "gss_evaluations",  "gss_fallback",          "status",
                                          "error"};

void append_cell(std::vector<std::string>& row, const SweepCell& c) {
  row.push_back(fmt_bool(c.feasible));
  row.push_back(fmt_opt(c.feasible, c.r_th));
  row.push_back(fmt_opt(c.feasible, c.crb));
  row.push_back(fmt_opt(c.feasible, to_db(c.crb)));
  row.push_back(fmt_opt(c.feasible, c.ssr));
  row.push_back(fmt_int(c.ao_iterations));
  row.push_back(fmt_int(c.evaluations));
  row.push_back(fmt_bool(c.fallback));
  row.push_back(c.error.empty() ? opt::to_string(c.status) : "error");
  row.push_back(c.error);
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Kind k) {
  switch (k) {
    case Kind::pareto: return "pareto";
    case Kind::converge: return "converge";
    case Kind::power_sweep: return "power-sweep";
    case Kind::elements_sweep: return "elements-sweep";
    case Kind::bc_compare: return "bc-compare";
    case Kind::validate: return "validate";
  }
  return "?";
}

std::optional<Kind> kind_from_string(const std::string& name) {
  for (auto k : {Kind::pareto, Kind::converge, Kind::power_sweep, Kind::elements_sweep, Kind::bc_compare,
                 Kind::validate}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::vector<opt::Scheme> parse_baselines(const std::string& list) {
  std::vector<opt::Scheme> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty() || item == "none") continue;
    std::string lower = item;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    const auto s = opt::scheme_from_string(lower);
    if (!s || *s == opt::Scheme::proposed) throw ConfigError("unknown baseline '" + item + "'");
    out.push_back(*s);
  }
  return out;
}

void ExperimentSpec::validate() const {
  try {
    system.validate();
    pathloss.validate();
    layout.validate(system.k_users, pathloss.d0);
    semantic(system).validate();
    solver.validate();
    bc.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(a1 < a2, "semantic: a1 must be below a2");
  require(realizations >= 1, "realizations must be >= 1");
  require(threads >= 1, "threads must be >= 1");
  require(eps_points >= 2 || !eps_grid.empty(), "eps_points must be >= 2");
  require(std::all_of(eps_grid.begin(), eps_grid.end(), [](double e) { return e >= 0; }), "eps_grid must be >= 0");
  require(epsilon >= 0, "epsilon must be >= 0");
  require(!p_max_dbm.empty(), "p_max_dbm must be non-empty");
  require(!n_list.empty() && std::all_of(n_list.begin(), n_list.end(), [](int n) { return n >= 1; }),
          "n_list must be non-empty with N >= 1");
  require(!cases.empty() && std::all_of(cases.begin(), cases.end(),
                                        [](const auto& c) { return c.first >= 1 && c.second >= 1; }),
          "cases must be non-empty (M, N >= 1)");
  require(!kappa_list.empty() && std::all_of(kappa_list.begin(), kappa_list.end(), [](int k) { return k >= 1; }),
          "kappa_list must be non-empty with kappa >= 1");
  require(!bc_p_dbm.empty(), "bc_p_dbm must be non-empty");
  require(bc_eps_points >= 2, "bc_eps_points must be >= 2");
  if (r_th) {
    const auto [lo, hi] = opt::rth_interval(semantic(system), epsilon);
    require(*r_th > lo && *r_th < hi, "r_th must lie inside the leakage interval for epsilon");
  }
}

metrics::SemanticModel ExperimentSpec::semantic(const model::SystemConfig& c) const {
  auto m = metrics::SemanticModel::from_config(c);
  m.a1 = a1;
  m.a2 = a2;
  m.c1 = c1;
  m.c2 = c2;
  return m;
}

std::string ExperimentSpec::canonical() const {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  auto point = [&](const model::Point2& p) { e << YAML::Flow << YAML::BeginSeq << p.x << p.y << YAML::EndSeq; };
  e << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << to_string(kind);
  e << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "m_t" << YAML::Value << system.m_t << YAML::Key << "m_r" << YAML::Value << system.m_r;
  e << YAML::Key << "n_irs" << YAML::Value << system.n_irs << YAML::Key << "k_users" << YAML::Value
    << system.k_users;
  e << YAML::Key << "segment_length" << YAML::Value << system.segment_length << YAML::Key << "kappa"
    << YAML::Value << system.kappa;
  e << YAML::Key << "bandwidth_hz" << YAML::Value << system.bandwidth_hz << YAML::Key << "semantic_info"
    << YAML::Value << system.semantic_info;
  e << YAML::Key << "p_max_w" << YAML::Value << system.p_max << YAML::Key << "sigma_s2_w" << YAML::Value
    << system.sigma_s2;
  e << YAML::Key << "sigma_c2_w" << YAML::Value << system.sigma_c2 << YAML::Key << "sigma_e2_w" << YAML::Value
    << system.sigma_e2;
  e << YAML::Key << "spacing_ratio" << YAML::Value << system.spacing_ratio << YAML::EndMap;

  e << YAML::Key << "layout" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "bs" << YAML::Value;
  point(layout.bs);
  e << YAML::Key << "irs" << YAML::Value;
  point(layout.irs);
  e << YAML::Key << "users" << YAML::Value << YAML::BeginSeq;
  for (const auto& u : layout.users) point(u);
  e << YAML::EndSeq << YAML::Key << "eve" << YAML::Value;
  point(layout.eve);
  e << YAML::Key << "target" << YAML::Value;
  point(layout.target);
  e << YAML::EndMap;

  e << YAML::Key << "pathloss" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "k0" << YAML::Value << pathloss.k0 << YAML::Key << "d0" << YAML::Value << pathloss.d0;
  e << YAML::Key << "zeta_irs" << YAML::Value << pathloss.zeta_irs << YAML::Key << "zeta_direct" << YAML::Value
    << pathloss.zeta_direct;
  e << YAML::Key << "rician_beta_bi" << YAML::Value << pathloss.rician_beta_bi;
  e << YAML::Key << "rician_beta_ic" << YAML::Value << pathloss.rician_beta_ic;
  e << YAML::Key << "rician_beta_ie" << YAML::Value << pathloss.rician_beta_ie << YAML::EndMap;

  e << YAML::Key << "semantic" << YAML::Value << YAML::BeginMap << YAML::Key << "a1" << YAML::Value << a1
    << YAML::Key << "a2" << YAML::Value << a2 << YAML::Key << "c1" << YAML::Value << c1 << YAML::Key << "c2"
    << YAML::Value << c2 << YAML::EndMap;

  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "feas_tol" << YAML::Value << solver.feas_tol << YAML::Key << "gap_tol" << YAML::Value
    << solver.gap_tol;
  e << YAML::Key << "max_iterations" << YAML::Value << solver.max_iterations << YAML::Key << "grm_trials"
    << YAML::Value << solver.grm_trials;
  e << YAML::Key << "delta_ao" << YAML::Value << solver.delta_ao << YAML::Key << "delta_gss" << YAML::Value
    << solver.delta_gss;
  e << YAML::Key << "n_sca" << YAML::Value << solver.n_sca << YAML::Key << "max_ao_iterations" << YAML::Value
    << solver.max_ao_iterations;
  e << YAML::Key << "ao_restarts" << YAML::Value << solver.ao_restarts << YAML::Key << "psd_dim_cap"
    << YAML::Value << solver.psd_dim_cap;
  e << YAML::Key << "real_embedding" << YAML::Value << solver.real_embedding << YAML::EndMap;

  e << YAML::Key << "bc" << YAML::Value << YAML::BeginMap << YAML::Key << "mu" << YAML::Value << bc.mu;
  e << YAML::Key << "cqi_table" << YAML::Value << YAML::BeginSeq;
  for (const auto& [th, eff] : bc.cqi_table) e << YAML::Flow << YAML::BeginSeq << th << eff << YAML::EndSeq;
  e << YAML::EndSeq << YAML::EndMap;

  e << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << seed << YAML::Key << "realizations" << YAML::Value << realizations;
  e << YAML::Key << "baselines" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto b : baselines) e << opt::to_string(b);
  e << YAML::EndSeq;
  e << YAML::Key << "eps_points" << YAML::Value << eps_points;
  e << YAML::Key << "eps_grid" << YAML::Value << YAML::Flow << eps_grid;
  e << YAML::Key << "epsilon" << YAML::Value << epsilon;
  e << YAML::Key << "r_th" << YAML::Value;
  if (r_th) {
    e << *r_th;
  } else {
    e << YAML::Null;
  }
  e << YAML::Key << "p_max_dbm" << YAML::Value << YAML::Flow << p_max_dbm;
  e << YAML::Key << "n_list" << YAML::Value << YAML::Flow << n_list;
  e << YAML::Key << "elements_p_dbm" << YAML::Value << elements_p_dbm;
  e << YAML::Key << "cases" << YAML::Value << YAML::BeginSeq;
  for (const auto& [m, n] : cases) e << YAML::Flow << YAML::BeginSeq << m << n << YAML::EndSeq;
  e << YAML::EndSeq;
  e << YAML::Key << "kappa_list" << YAML::Value << YAML::Flow << kappa_list;
  e << YAML::Key << "bc_p_dbm" << YAML::Value << YAML::Flow << bc_p_dbm;
  e << YAML::Key << "bc_eps_points" << YAML::Value << bc_eps_points;
  e << YAML::Key << "crb_cap_db" << YAML::Value;
  if (crb_cap_db) {
    e << *crb_cap_db;
  } else {
    e << YAML::Null;
  }
  e << YAML::EndMap << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

std::string ExperimentSpec::hash() const { return git_blob_sha1(canonical()); }

ExperimentSpec spec_from_yaml(const std::string& text, Kind kind, const std::string& base_dir) {
  ExperimentSpec s;
  s.kind = kind;
  try {
    const YAML::Node root = YAML::Load(text);
    if (root && !root.IsNull()) {
      check_keys(root, {"kind", "system", "layout", "pathloss", "semantic", "solver", "bc", "experiment"}, "config");
      if (root["kind"] && root["kind"].as<std::string>() != to_string(kind)) {
        throw ConfigError("config: kind '" + root["kind"].as<std::string>() + "' does not match " + to_string(kind));
      }
      parse_system(root["system"], s.system);
      s.layout = model::SceneLayout::default_layout(s.system.k_users);
      parse_layout(root["layout"], s.layout);
      parse_pathloss(root["pathloss"], s.pathloss);
      const auto sem = root["semantic"];
      check_keys(sem, {"a1", "a2", "c1", "c2"}, "semantic");
      read(sem, "a1", s.a1);
      read(sem, "a2", s.a2);
      read(sem, "c1", s.c1);
      read(sem, "c2", s.c2);
      parse_solver(root["solver"], s.solver);
      parse_bc(root["bc"], s.bc, base_dir);
      parse_experiment(root["experiment"], s);
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

ExperimentSpec load_spec(const std::string& path, Kind kind) {
  const auto dir = std::filesystem::path(path).parent_path();
  return spec_from_yaml(read_file(path), kind, dir.empty() ? "." : dir.string());
}

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

std::string to_csv(const Table& t) {
  auto field = [](const std::string& f) {
    if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += field(r[i]);
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_slope needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// experiments

RunOutput run_pareto(const ExperimentSpec& spec, const Progress& progress) {
  const auto sch = schemes(spec);
  const auto semantic = spec.semantic(spec.system);
  const auto grid = spec.eps_grid.empty() ? opt::default_eps_grid(semantic, spec.eps_points) : spec.eps_grid;
  const int n_tasks = spec.realizations * static_cast<int>(sch.size());

  struct Task {
    std::vector<opt::ParetoPoint> points;
    std::string error;
    double seconds = 0.0;
  };
  auto results = parallel_map<Task>(
      n_tasks, spec.threads,
      [&](int i) {
        const int r = i / static_cast<int>(sch.size());
        const auto scheme = sch[static_cast<std::size_t>(i) % sch.size()];
        Task t;
        const auto t0 = Clock::now();
        try {
          const auto sc = scenario_for(spec, spec.system, r);
          t.points = opt::pareto_sweep(sc, grid, settings_for(spec, r), initial_profile(spec, r, spec.system.n_irs),
                                       scheme);
        } catch (const std::exception& e) {
          t.error = e.what();
        }
        t.seconds = seconds_since(t0);
        return t;
      },
      progress);

  RunOutput out;
  const auto hash = spec.hash();
  out.rows.header = {"config_hash",      "scheme",   "realization", "seed",     "epsilon_suts_per_sec",
                     "feasible",         "carried",  "r_th_opt_suts_per_sec",   "crb_rad2",
                     "crb_db",           "ssr_suts_per_sec",        "ao_iterations", "gss_evaluations",
                     "gss_fallback",     "status",   "error"};
  out.timing.header = {"scheme", "realization", "wall_s"};
  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());

  // crb_db[scheme][eps index] over realizations
  std::vector<std::vector<std::vector<double>>> crb(sch.size(), std::vector<std::vector<double>>(sorted_grid.size()));
  std::vector<std::vector<std::vector<double>>> ssr = crb;
  double ssr_max = 0.0;
  for (int i = 0; i < n_tasks; ++i) {
    const int r = i / static_cast<int>(sch.size());
    const auto si = static_cast<std::size_t>(i) % sch.size();
    const auto& t = results[static_cast<std::size_t>(i)];
    out.timing.rows.push_back({opt::to_string(sch[si]), fmt_int(r), fmt_num(t.seconds)});
    for (std::size_t e = 0; e < sorted_grid.size(); ++e) {
      ++out.attempted;
      std::vector<std::string> row{hash, opt::to_string(sch[si]), fmt_int(r),
                                   std::to_string(channel_seed(spec, r)), fmt_num(sorted_grid[e])};
      if (!t.error.empty()) {
        ++out.solver_failures;
        for (const char* f : {"false", "false", "", "", "", "", "0", "0", "false", "error"}) row.emplace_back(f);
        row.push_back(t.error);
        out.rows.rows.push_back(row);
        continue;
      }
      const auto& p = t.points[e];
      if (is_failure(p.status)) ++out.solver_failures;
      row.push_back(fmt_bool(p.feasible));
      row.push_back(fmt_bool(p.carried));
      row.push_back(fmt_opt(p.feasible, p.r_th_opt));
      row.push_back(fmt_opt(p.feasible, p.crb));
      row.push_back(fmt_opt(p.feasible, to_db(p.crb)));
      row.push_back(fmt_opt(p.feasible, p.ssr));
      row.push_back(fmt_int(p.ao_iterations));
      row.push_back(fmt_int(p.evaluations));
      row.push_back(fmt_bool(p.fallback_used));
      row.push_back(opt::to_string(p.status));
      row.emplace_back();
      out.rows.rows.push_back(row);
      if (p.feasible) {
        crb[si][e].push_back(to_db(p.crb));
        ssr[si][e].push_back(p.ssr);
        ssr_max = std::max(ssr_max, p.ssr);
      }
    }
  }

  auto j = header_json(spec);
  j["eps_grid_suts_per_sec"] = sorted_grid;
  j["ssr_ceiling_suts_per_sec"] = semantic.ssr_ceiling();
  j["ssr_max_suts_per_sec"] = ssr_max;
  j["ssr_within_ceiling"] = ssr_max <= semantic.ssr_ceiling() * (1 + 1e-12);
  for (std::size_t si = 0; si < sch.size(); ++si) {
    ojson pts = ojson::array();
    bool monotone = true;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < sorted_grid.size(); ++e) {
      ojson p;
      p["epsilon_suts_per_sec"] = sorted_grid[e];
      p["feasible"] = crb[si][e].size();
      p["crb_db"] = stats(crb[si][e]);
      p["ssr_suts_per_sec"] = stats(ssr[si][e]);
      if (!crb[si][e].empty()) {
        const double m = quantile(crb[si][e], 0.5);
        if (m < prev - 1e-9) monotone = false;
        prev = m;
      }
      pts.push_back(p);
    }
    j["schemes"][opt::to_string(sch[si])]["points"] = pts;
    j["schemes"][opt::to_string(sch[si])]["median_crb_nondecreasing"] = monotone;
  }
  out.summary = j;
  return out;
}

RunOutput run_convergence(const ExperimentSpec& spec, const Progress& progress) {
  const int n_cases = static_cast<int>(spec.cases.size());
  const int n_tasks = n_cases * spec.realizations;
  struct Task {
    opt::AoResult ao;
    std::string error;
    double seconds = 0.0;
    double r_th = 0.0;
  };
  auto results = parallel_map<Task>(
      n_tasks, spec.threads,
      [&](int i) {
        const auto [m, n] = spec.cases[static_cast<std::size_t>(i / spec.realizations)];
        const int r = i % spec.realizations;
        Task t;
        const auto t0 = Clock::now();
        try {
          auto c = spec.system;
          c.m_t = c.m_r = m;
          c.n_irs = n;
          const auto sc = scenario_for(spec, c, r);
          const auto [lo, hi] = opt::rth_interval(sc.semantic, spec.epsilon);
          t.r_th = spec.r_th.value_or(0.5 * (lo + hi));
          const auto th = metrics::sinr_thresholds(sc.semantic, t.r_th, spec.epsilon);
          t.ao = opt::alternating_optimize(sc, th, settings_for(spec, r), initial_profile(spec, r, n));
        } catch (const std::exception& e) {
          t.error = e.what();
        }
        t.seconds = seconds_since(t0);
        return t;
      },
      progress);

  RunOutput out;
  const auto hash = spec.hash();
  out.rows.header = {"config_hash", "m_t",    "n_irs",  "realization", "seed", "r_th_suts_per_sec",
                     "iteration",   "crb_rad2", "crb_db", "status",      "error"};
  out.timing.header = {"m_t", "n_irs", "realization", "wall_s"};
  auto j = header_json(spec);
  j["epsilon_suts_per_sec"] = spec.epsilon;
  bool all_monotone = true;
  int worst_iters = 0;
  for (int ci = 0; ci < n_cases; ++ci) {
    const auto [m, n] = spec.cases[static_cast<std::size_t>(ci)];
    std::vector<double> iters, final_db;
    int monotone_runs = 0, feasible_runs = 0;
    std::vector<std::vector<double>> per_iter;
    for (int r = 0; r < spec.realizations; ++r) {
      const auto& t = results[static_cast<std::size_t>(ci * spec.realizations + r)];
      ++out.attempted;
      out.timing.rows.push_back({fmt_int(m), fmt_int(n), fmt_int(r), fmt_num(t.seconds)});
      const std::vector<std::string> lead{hash, fmt_int(m), fmt_int(n), fmt_int(r), std::to_string(channel_seed(spec, r)),
                                          fmt_num(t.r_th)};
      if (!t.error.empty() || !t.ao.feasible()) {
        const bool err = !t.error.empty();
        if (err || is_failure(t.ao.status)) ++out.solver_failures;
        out.rows.rows.push_back(concat(lead, {"0", "", "", err ? "error" : opt::to_string(t.ao.status), t.error}));
        continue;
      }
      ++feasible_runs;
      const auto& tr = t.ao.crb_trace;
      bool mono = true;
      // the final step may be the one that triggered the stop
      for (std::size_t k = 1; k + 1 < tr.size(); ++k) mono = mono && tr[k] <= tr[k - 1];
      monotone_runs += mono ? 1 : 0;
      all_monotone = all_monotone && mono;
      worst_iters = std::max(worst_iters, t.ao.iterations);
      iters.push_back(t.ao.iterations);
      final_db.push_back(to_db(t.ao.crb));
      for (std::size_t k = 0; k < tr.size(); ++k) {
        if (per_iter.size() <= k) per_iter.emplace_back();
        per_iter[k].push_back(to_db(tr[k]));
        out.rows.rows.push_back(
            concat(lead, {fmt_int(static_cast<long long>(k) + 1), fmt_num(tr[k]), fmt_num(to_db(tr[k])), "ok", ""}));
      }
    }
    ojson c;
    c["m_t"] = m;
    c["n_irs"] = n;
    c["feasible_runs"] = feasible_runs;
    c["monotone_runs"] = monotone_runs;
    c["iterations"] = stats(iters);
    c["max_iterations"] = iters.empty() ? 0 : *std::max_element(iters.begin(), iters.end());
    c["best_crb_db"] = stats(final_db);
    ojson trace = ojson::array();
    for (const auto& it : per_iter) trace.push_back(quantile(it, 0.5));
    c["median_trace_crb_db"] = trace;
    j["cases"].push_back(c);
  }
  j["all_traces_monotone"] = all_monotone;
  j["max_iterations"] = worst_iters;
  out.summary = j;
  return out;
}

namespace {

// Shared driver for the power and element sweeps: one golden-section search
// per (realization, sweep point, scheme).
struct SweepPoint {
  std::string label;
  double value = 0.0;
  model::SystemConfig config;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // [realization][point][scheme]
  std::size_t n_points = 0, n_schemes = 0;

  [[nodiscard]] const SweepCell& at(int r, std::size_t p, std::size_t s) const {
    return cells[(static_cast<std::size_t>(r) * n_points + p) * n_schemes + s];
  }
};

SweepResult run_sweep(const ExperimentSpec& spec, const std::vector<SweepPoint>& pts,
                      const std::vector<opt::Scheme>& sch, const Progress& progress) {
  SweepResult res;
  res.n_points = pts.size();
  res.n_schemes = sch.size();
  const int n_tasks = spec.realizations * static_cast<int>(pts.size() * sch.size());
  res.cells = parallel_map<SweepCell>(
      n_tasks, spec.threads,
      [&](int i) {
        const auto s = static_cast<std::size_t>(i) % sch.size();
        const auto p = (static_cast<std::size_t>(i) / sch.size()) % pts.size();
        const int r = i / static_cast<int>(pts.size() * sch.size());
        const auto& cfg = pts[p].config;
        try {
          const auto sc = scenario_for(spec, cfg, r);
          return gss_cell(sc, spec.epsilon, settings_for(spec, r), initial_profile(spec, r, cfg.n_irs), sch[s]);
        } catch (const std::exception& e) {
          SweepCell c;
          c.status = opt::Status::solver_failure;
          c.error = e.what();
          return c;
        }
      },
      progress);
  return res;
}

void sweep_tables(const ExperimentSpec& spec, const std::vector<SweepPoint>& pts, const std::vector<opt::Scheme>& sch,
                  const SweepResult& res, RunOutput& out) {
  const auto hash = spec.hash();
  const std::string col = pts.front().label;
  out.rows.header = concat({"config_hash", "scheme", "realization", "seed", col}, kSweepTail);
  out.timing.header = {"scheme", "realization", col, "wall_s"};
  for (int r = 0; r < spec.realizations; ++r) {
    for (std::size_t p = 0; p < pts.size(); ++p) {
      for (std::size_t s = 0; s < sch.size(); ++s) {
        const auto& c = res.at(r, p, s);
        ++out.attempted;
        if (!c.error.empty() || is_failure(c.status)) ++out.solver_failures;
        std::vector<std::string> row{hash, opt::to_string(sch[s]), fmt_int(r), std::to_string(channel_seed(spec, r)),
                                     fmt_num(pts[p].value)};
        append_cell(row, c);
        out.rows.rows.push_back(row);
        out.timing.rows.push_back({opt::to_string(sch[s]), fmt_int(r), fmt_num(pts[p].value), fmt_num(c.seconds)});
      }
    }
  }
}

// Median CRB (dB) per point for one scheme, NaN where nothing was feasible.
std::vector<double> median_curve(const ExperimentSpec& spec, const SweepResult& res, std::size_t s) {
  std::vector<double> out;
  for (std::size_t p = 0; p < res.n_points; ++p) {
    std::vector<double> xs;
    for (int r = 0; r < spec.realizations; ++r) {
      const auto& c = res.at(r, p, s);
      if (c.feasible) xs.push_back(to_db(c.crb));
    }
    out.push_back(xs.empty() ? std::nan("") : quantile(xs, 0.5));
  }
  return out;
}

ojson curve_json(const ExperimentSpec& spec, const std::vector<SweepPoint>& pts, const SweepResult& res,
                 std::size_t s) {
  ojson arr = ojson::array();
  for (std::size_t p = 0; p < pts.size(); ++p) {
    std::vector<double> xs, ss;
    for (int r = 0; r < spec.realizations; ++r) {
      const auto& c = res.at(r, p, s);
      if (!c.feasible) continue;
      xs.push_back(to_db(c.crb));
      ss.push_back(c.ssr);
    }
    ojson o;
    o[pts.front().label] = pts[p].value;
    o["crb_db"] = stats(xs);
    o["ssr_suts_per_sec"] = stats(ss);
    arr.push_back(o);
  }
  return arr;
}

// Median over realizations of baseline minus proposed CRB (dB) per point;
// an infeasible baseline with a feasible proposed design counts as +inf.
std::vector<double> paired_gap(const ExperimentSpec& spec, const SweepResult& res, std::size_t s) {
  std::vector<double> out;
  for (std::size_t p = 0; p < res.n_points; ++p) {
    std::vector<double> g;
    for (int r = 0; r < spec.realizations; ++r) {
      const auto& a = res.at(r, p, 0);
      const auto& b = res.at(r, p, s);
      if (!a.feasible) continue;
      g.push_back(b.feasible ? to_db(b.crb) - to_db(a.crb) : std::numeric_limits<double>::infinity());
    }
    out.push_back(g.empty() ? std::nan("") : quantile(g, 0.5));
  }
  return out;
}

ojson nan_safe(const std::vector<double>& xs) {
  ojson a = ojson::array();
  for (double x : xs) {
    if (std::isfinite(x)) {
      a.push_back(x);
    } else {
      a.push_back(std::isnan(x) ? ojson() : ojson(x > 0 ? "inf" : "-inf"));
    }
  }
  return a;
}

}  // namespace

RunOutput run_power_sweep(const ExperimentSpec& spec, const Progress& progress) {
  const auto sch = schemes(spec);
  std::vector<SweepPoint> pts;
  for (double p : spec.p_max_dbm) {
    auto c = spec.system;
    c.p_max = model::dbm_to_watt(p);
    pts.push_back({"p_max_dbm", p, c});
  }
  const auto res = run_sweep(spec, pts, sch, progress);
  RunOutput out;
  sweep_tables(spec, pts, sch, res, out);

  auto j = header_json(spec);
  j["epsilon_suts_per_sec"] = spec.epsilon;
  for (std::size_t s = 0; s < sch.size(); ++s) {
    auto& node = j["schemes"][opt::to_string(sch[s])];
    node["points"] = curve_json(spec, pts, res, s);
    const auto med = median_curve(spec, res, s);
    std::vector<double> x, y;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      if (std::isfinite(med[p])) {
        x.push_back(pts[p].value);
        y.push_back(med[p]);
      }
    }
    node["slope_db_per_dbm"] = x.size() >= 2 ? ojson(fit_slope(x, y)) : ojson();
    // per-realization slopes
    std::vector<double> slopes;
    for (int r = 0; r < spec.realizations; ++r) {
      std::vector<double> xr, yr;
      for (std::size_t p = 0; p < pts.size(); ++p) {
        const auto& c = res.at(r, p, s);
        if (c.feasible) {
          xr.push_back(pts[p].value);
          yr.push_back(to_db(c.crb));
        }
      }
      if (xr.size() >= 2) slopes.push_back(fit_slope(xr, yr));
    }
    node["realization_slopes"] = stats(slopes);
    if (s > 0) {
      const auto gap = paired_gap(spec, res, s);
      node["median_gap_db"] = nan_safe(gap);
      node["above_proposed_everywhere"] =
          std::all_of(gap.begin(), gap.end(), [](double g) { return std::isnan(g) || g >= 0.0; });
    }
  }
  out.summary = j;
  return out;
}

RunOutput run_elements_sweep(const ExperimentSpec& spec, const Progress& progress) {
  const auto sch = schemes(spec);
  std::vector<SweepPoint> pts;
  for (int n : spec.n_list) {
    auto c = spec.system;
    c.n_irs = n;
    c.p_max = model::dbm_to_watt(spec.elements_p_dbm);
    pts.push_back({"n_irs", static_cast<double>(n), c});
  }
  const auto res = run_sweep(spec, pts, sch, progress);
  RunOutput out;
  sweep_tables(spec, pts, sch, res, out);

  auto j = header_json(spec);
  j["epsilon_suts_per_sec"] = spec.epsilon;
  j["p_max_dbm"] = spec.elements_p_dbm;
  for (std::size_t s = 0; s < sch.size(); ++s) {
    auto& node = j["schemes"][opt::to_string(sch[s])];
    node["points"] = curve_json(spec, pts, res, s);
    const auto med = median_curve(spec, res, s);
    bool decreasing = true;
    for (std::size_t p = 1; p < med.size(); ++p) decreasing = decreasing && med[p] < med[p - 1];
    node["median_crb_strictly_decreasing"] = decreasing;
    node["reduction_db_first_to_last"] = std::isfinite(med.front() - med.back()) ? ojson(med.front() - med.back()) : ojson();
    if (s > 0) {
      const auto gap = paired_gap(spec, res, s);
      node["median_gap_db"] = nan_safe(gap);
      bool widening = true;
      for (std::size_t p = 1; p < gap.size(); ++p) widening = widening && gap[p] >= gap[p - 1];
      node["gap_widens_with_n"] = widening;
    }
  }
  out.summary = j;
  return out;
}

RunOutput run_bc_compare(const ExperimentSpec& spec, const Progress& progress) {
  const std::size_t n_p = spec.bc_p_dbm.size(), n_k = spec.kappa_list.size();
  const int n_tasks = spec.realizations * static_cast<int>(n_p * n_k);
  struct Task {
    bool feasible = false, pinned = false;
    double epsilon = 0.0, crb = 0.0, ssr_sc = 0.0, ssr_bc = 0.0;
    opt::Status status = opt::Status::infeasible;
    std::string error;
    double seconds = 0.0;
  };
  auto results = parallel_map<Task>(
      n_tasks, spec.threads,
      [&](int i) {
        const auto k = static_cast<std::size_t>(i) % n_k;
        const auto p = (static_cast<std::size_t>(i) / n_k) % n_p;
        const int r = i / static_cast<int>(n_p * n_k);
        Task t;
        const auto t0 = Clock::now();
        try {
          auto c = spec.system;
          c.kappa = spec.kappa_list[k];
          c.p_max = model::dbm_to_watt(spec.bc_p_dbm[p]);
          const auto sc = scenario_for(spec, c, r);
          const auto grid = opt::default_eps_grid(sc.semantic, spec.bc_eps_points);
          const auto pts = opt::pareto_sweep(sc, grid, settings_for(spec, r), initial_profile(spec, r, c.n_irs));
          // largest secrecy rate among designs meeting the CRB cap, else
          // among all feasible designs
          const opt::ParetoPoint* best = nullptr;
          for (int pass = 0; pass < 2 && !best; ++pass) {
            for (const auto& pt : pts) {
              if (!pt.feasible) continue;
              if (pass == 0 && (!spec.crb_cap_db || to_db(pt.crb) > *spec.crb_cap_db)) continue;
              if (!best || pt.ssr > best->ssr) best = &pt;
            }
            t.pinned = best != nullptr && pass == 0;
          }
          if (best) {
            t.feasible = true;
            t.status = opt::Status::ok;
            t.epsilon = best->epsilon;
            t.crb = best->crb;
            t.ssr_sc = best->ssr;
            t.ssr_bc = metrics::bc_secrecy(spec.bc, c, sc.channels, best->v, best->cov);
          } else if (!pts.empty()) {
            t.status = pts.front().status;
          }
        } catch (const std::exception& e) {
          t.status = opt::Status::solver_failure;
          t.error = e.what();
        }
        t.seconds = seconds_since(t0);
        return t;
      },
      progress);

  std::string table_text;
  for (const auto& [th, eff] : spec.bc.cqi_table) table_text += fmt_num(th) + "," + fmt_num(eff) + "\n";
  const auto cqi_hash = git_blob_sha1(table_text);

  RunOutput out;
  const auto hash = spec.hash();
  out.rows.header = {"config_hash", "cqi_table_hash", "realization",  "seed",     "p_max_dbm",
                     "kappa",       "feasible",       "crb_pinned",   "epsilon_suts_per_sec",
                     "crb_rad2",    "crb_db",         "ssr_sc_suts_per_sec",    "ssr_bc_suts_per_sec",
                     "status",      "error"};
  out.timing.header = {"realization", "p_max_dbm", "kappa", "wall_s"};
  std::vector<std::vector<std::vector<double>>> sc_vals(n_k, std::vector<std::vector<double>>(n_p));
  auto bc_vals = sc_vals;
  for (int r = 0; r < spec.realizations; ++r) {
    for (std::size_t p = 0; p < n_p; ++p) {
      for (std::size_t k = 0; k < n_k; ++k) {
        const auto& t = results[(static_cast<std::size_t>(r) * n_p + p) * n_k + k];
        ++out.attempted;
        if (!t.error.empty() || is_failure(t.status)) ++out.solver_failures;
        out.rows.rows.push_back({hash, cqi_hash, fmt_int(r), std::to_string(channel_seed(spec, r)),
                                 fmt_num(spec.bc_p_dbm[p]), fmt_int(spec.kappa_list[k]), fmt_bool(t.feasible),
                                 fmt_bool(t.pinned), fmt_opt(t.feasible, t.epsilon), fmt_opt(t.feasible, t.crb),
                                 fmt_opt(t.feasible, to_db(t.crb)), fmt_opt(t.feasible, t.ssr_sc),
                                 fmt_opt(t.feasible, t.ssr_bc), t.error.empty() ? opt::to_string(t.status) : "error",
                                 t.error});
        out.timing.rows.push_back(
            {fmt_int(r), fmt_num(spec.bc_p_dbm[p]), fmt_int(spec.kappa_list[k]), fmt_num(t.seconds)});
        if (t.feasible) {
          sc_vals[k][p].push_back(t.ssr_sc);
          bc_vals[k][p].push_back(t.ssr_bc);
        }
      }
    }
  }

  auto j = header_json(spec);
  j["cqi_table_hash"] = cqi_hash;
  j["mu"] = spec.bc.mu;
  j["crb_cap_db"] = spec.crb_cap_db ? ojson(*spec.crb_cap_db) : ojson();
  j["p_max_dbm"] = spec.bc_p_dbm;
  bool decreasing_in_kappa = true;
  for (std::size_t k = 0; k < n_k; ++k) {
    ojson sc_curve = ojson::array(), bc_curve = ojson::array();
    for (std::size_t p = 0; p < n_p; ++p) {
      sc_curve.push_back(stats(sc_vals[k][p]));
      bc_curve.push_back(stats(bc_vals[k][p]));
      if (k > 0 && !sc_vals[k][p].empty() && !sc_vals[k - 1][p].empty() &&
          spec.kappa_list[k] > spec.kappa_list[k - 1]) {
        decreasing_in_kappa = decreasing_in_kappa && quantile(sc_vals[k][p], 0.5) < quantile(sc_vals[k - 1][p], 0.5);
      }
    }
    const auto key = "kappa_" + std::to_string(spec.kappa_list[k]);
    j["semantic"][key] = sc_curve;
    j["bit_oriented_on_same_designs"][key] = bc_curve;
  }
  j["ssr_decreases_with_kappa"] = decreasing_in_kappa;
  out.summary = j;
  return out;
}

RunOutput run_validation_suite(const ExperimentSpec& spec, const Progress& progress) {
  const auto results = validation::run_all(spec.seed);
  if (progress) progress(1, 1);
  RunOutput out;
  out.rows.header = {"oracle", "observed", "comparison", "tolerance", "pass", "note"};
  out.timing.header = {"oracle", "wall_s"};
  auto j = header_json(spec);
  bool all = true;
  for (const auto& r : results) {
    ++out.attempted;
    all = all && r.pass;
    out.rows.rows.push_back({r.name, fmt_num(r.observed), r.at_least ? ">=" : "<=", fmt_num(r.tolerance),
                             fmt_bool(r.pass), r.note});
    out.timing.rows.push_back({r.name, fmt_num(r.seconds)});
    ojson o;
    o["name"] = r.name;
    o["observed"] = std::isfinite(r.observed) ? ojson(r.observed) : ojson(fmt_num(r.observed));
    o["tolerance"] = r.tolerance;
    o["pass"] = r.pass;
    j["oracles"].push_back(o);
  }
  j["pass"] = all;
  out.summary = j;
  return out;
}

RunOutput run(const ExperimentSpec& spec, const Progress& progress) {
  switch (spec.kind) {
    case Kind::pareto: return run_pareto(spec, progress);
    case Kind::converge: return run_convergence(spec, progress);
    case Kind::power_sweep: return run_power_sweep(spec, progress);
    case Kind::elements_sweep: return run_elements_sweep(spec, progress);
    case Kind::bc_compare: return run_bc_compare(spec, progress);
    case Kind::validate: return run_validation_suite(spec, progress);
  }
  throw std::logic_error("unknown experiment kind");
}

void write_outputs(const ExperimentSpec& spec, const RunOutput& out) {
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);
  const std::string base = (fs::path(spec.out_dir) / to_string(spec.kind)).string();
  auto write = [](const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
  };
  write(base + ".csv", to_csv(out.rows));
  write(base + "_timing.csv", to_csv(out.timing));
  write(base + "_summary.json", out.summary.dump(2) + "\n");
}

}  // namespace isasc::exp
