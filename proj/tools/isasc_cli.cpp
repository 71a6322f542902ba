// Command-line front end for the experiment runners.
//
// Exit codes: 0 success, 1 validation failure, 2 configuration error,
// 3 more than half of the solver runs failed.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "isasc/experiments.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> realizations;
  std::optional<std::string> out_dir;
  std::optional<std::string> baselines;
  std::optional<int> eps_points;
  std::optional<int> threads;
  bool quiet = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "YAML experiment configuration")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--realizations", f.realizations, "Channel realizations");
  sub->add_option("--out-dir", f.out_dir, "Output directory");
  sub->add_option("--baselines", f.baselines, "Comma-separated baselines (bl1,bl2,bl3,bl4) or none");
  sub->add_option("--eps-points", f.eps_points, "Points in the default epsilon grid");
  sub->add_option("--threads", f.threads, "Worker threads");
  sub->add_flag("--quiet", f.quiet, "No progress output");
}

int execute(isasc::exp::Kind kind, const Flags& f) {
  using namespace isasc::exp;
  ExperimentSpec spec;
  try {
    spec = f.config.empty() ? spec_from_yaml("", kind) : load_spec(f.config, kind);
    if (f.seed) spec.seed = *f.seed;
    if (f.realizations) spec.realizations = *f.realizations;
    if (f.out_dir) spec.out_dir = *f.out_dir;
    if (f.baselines) spec.baselines = parse_baselines(*f.baselines);
    if (f.eps_points) spec.eps_points = *f.eps_points;
    if (f.threads) spec.threads = *f.threads;
    spec.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  Progress progress;
  if (!f.quiet) {
    progress = [&](int done, int total) {
      std::cerr << "\r" << to_string(kind) << " " << done << "/" << total << std::flush;
      if (done == total) std::cerr << "\n";
    };
  }
  RunOutput out;
  try {
    out = run(spec, progress);
    write_outputs(spec, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }

  std::cout << "config " << spec.hash() << "\n";
  std::cout << "rows " << out.rows.rows.size() << ", solver failures " << out.solver_failures << "/" << out.attempted
            << "\n";
  std::cout << "wrote " << spec.out_dir << "/" << to_string(kind) << ".csv\n";
  if (kind == Kind::validate) {
    for (const auto& r : out.rows.rows) {
      std::cout << (r[4] == "true" ? "PASS " : "FAIL ") << r[0] << " observed " << r[1] << " " << r[2] << " " << r[3]
                << "\n";
    }
    if (!out.summary.value("pass", false)) return 1;
  }
  if (out.failure_rate() > 0.5) {
    std::cerr << "solver failure rate " << out.failure_rate() << " exceeds 50%\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  using isasc::exp::Kind;
  CLI::App app{"IRS-assisted sensing and semantic secrecy experiments"};
  app.require_subcommand(1);
  Flags flags;
  const std::pair<Kind, const char*> commands[] = {
      {Kind::pareto, "CRB / secrecy-rate trade-off over an epsilon grid"},
      {Kind::converge, "Alternating-optimization CRB traces"},
      {Kind::power_sweep, "CRB versus transmit power"},
      {Kind::elements_sweep, "CRB versus number of IRS elements"},
      {Kind::bc_compare, "Semantic versus bit-oriented secrecy rate"},
      {Kind::validate, "Run the oracle suite"},
  };
  std::optional<Kind> chosen;
  for (const auto& [kind, help] : commands) {
    auto* sub = app.add_subcommand(isasc::exp::to_string(kind), help);
    add_common(sub, flags);
    sub->callback([&chosen, k = kind] { chosen = k; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return execute(*chosen, flags);
}
