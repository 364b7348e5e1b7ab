#pragma once

// Run-configuration parsing. The format is line oriented (format v1, see
// docs/config-format.md): '#' comments, [section] headers, key = value
// assignments with typed scalars and whitespace-separated lists. Unknown
// sections or keys are rejected before any computation.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hbeng/types.hpp"

namespace hbeng {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string experiment;  // forward | engineer | sweep | compare-magnus | verify

  // [model]
  std::string model_name;
  std::map<std::string, Real> model_params;
  std::vector<std::string> controls;

  // [basis]
  int M = 7;
  int K = 8;
  bool k0 = false;
  int grid_xi = 0;    // 0: 2K+1
  int grid_zeta = 0;  // 0: 2M+1
  bool paper_parity = false;

  // [initial]
  Real a01 = 0.0;
  std::vector<Real> blocks;  // collocation amplitudes; empty: log ladder
  Real theta = 0.0;

  // [target]
  std::map<int, Real> target_c;    // keys 4, 6, 8
  std::map<int, Real> target_eps;  // keys 2, 4, 6
  std::vector<Real> verify_amplitudes;

  // [sweep]
  std::string sweep_param;
  Real sweep_from = 0.0;
  Real sweep_to = 0.0;
  int sweep_steps = 0;

  // [output]
  std::string out_dir;
  std::string prefix;
  Real xi_max = 200.0;
  int trajectory_samples = 4000;
  Real dev_a01 = 0.0;  // sweep deviation amplitude; 0: largest block

  std::string raw_text;  // verbatim config echo for the manifest
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

}  // namespace hbeng
