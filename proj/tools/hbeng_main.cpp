// hbeng: semi-analytical solver suite for periodically driven nonlinear
// oscillators. Subcommands run one experiment each from a config file and
// write CSV datasets plus a JSON run manifest.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hbeng/config.hpp"
#include "hbeng/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  bool paper_parity = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file")->required();
  cmd->add_option("--out", args.out_dir, "output directory (default: [output] dir, $HBENG_OUT, or '.')");
  cmd->add_flag("--paper-parity", args.paper_parity,
                "reproduction mode: 15x15 sampling grid with aliased columns dropped");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmonic-balance engineering of driven nonlinear oscillators"};
  app.require_subcommand(1);

  const std::vector<std::string> experiments = {"forward", "engineer", "sweep", "compare-magnus",
                                                "verify"};
  std::map<std::string, CommonArgs> args;
  for (const auto& name : experiments) {
    auto* cmd = app.add_subcommand(name, name + " experiment");
    add_common(cmd, args[name]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hbeng::kExitConfig;  // usage errors count as config errors
  }

  const std::string chosen = app.get_subcommands().front()->get_name();
  const CommonArgs& a = args[chosen];

  hbeng::RunConfig cfg;
  try {
    cfg = hbeng::parse_config_file(a.config_path);
    if (cfg.experiment != chosen)
      throw hbeng::ConfigError("config experiment '" + cfg.experiment +
                               "' does not match subcommand '" + chosen + "'");
  } catch (const hbeng::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return hbeng::kExitConfig;
  }
  if (a.paper_parity) cfg.paper_parity = true;

  std::string out = a.out_dir;
  if (out.empty()) out = cfg.out_dir;
  if (out.empty()) {
    if (const char* env = std::getenv("HBENG_OUT")) out = env;
  }
  if (out.empty()) out = ".";

  const int code = hbeng::run_experiment(cfg, out);
  if (code != hbeng::kExitOk) std::cerr << "run finished with exit code " << code << "\n";
  return code;
}
