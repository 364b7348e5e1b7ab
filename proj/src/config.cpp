#include "hbeng/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace hbeng {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Real parse_real(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const Real x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a real number, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream iss(v);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

std::vector<Real> parse_real_list(const std::string& key, const std::string& v) {
  std::vector<Real> out;
  for (const auto& tok : split_list(v)) out.push_back(parse_real(key, tok));
  return out;
}

const std::set<std::string> kExperiments = {"forward", "engineer", "sweep", "compare-magnus",
                                            "verify"};
const std::set<std::string> kSections = {"", "model", "basis", "initial", "target", "sweep",
                                         "output"};
const std::set<std::string> kBasisKeys = {"M", "K", "k0", "grid_xi", "grid_zeta", "paper_parity"};
const std::set<std::string> kInitialKeys = {"a01", "blocks", "theta"};
const std::set<std::string> kTargetKeys = {"c4",   "c6",   "c8",  "eps2",
                                           "eps4", "eps6", "verify_amplitudes"};
const std::set<std::string> kSweepKeys = {"param", "from", "to", "steps"};
const std::set<std::string> kOutputKeys = {"dir", "prefix", "xi_max", "samples", "dev_a01"};
const std::set<std::string> kModelParamKeys = {"q",         "a",         "alpha4_ac", "alpha6_ac",
                                               "alpha8_ac", "alpha4_dc", "alpha6_dc", "alpha8_dc",
                                               "v0",        "lam"};

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  cfg.raw_text = text;

  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(section))
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section +
                          "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");

    if (section.empty()) {
      if (key == "experiment") {
        if (!kExperiments.count(value))
          throw ConfigError("unknown experiment '" + value + "'");
        cfg.experiment = value;
      } else {
        throw ConfigError("unknown top-level key '" + key + "'");
      }
    } else if (section == "model") {
      if (key == "name") {
        cfg.model_name = value;
      } else if (key == "controls") {
        cfg.controls = split_list(value);
      } else if (kModelParamKeys.count(key)) {
        cfg.model_params[key] = parse_real(key, value);
      } else {
        throw ConfigError("unknown [model] key '" + key + "'");
      }
    } else if (section == "basis") {
      if (!kBasisKeys.count(key)) throw ConfigError("unknown [basis] key '" + key + "'");
      if (key == "M") cfg.M = parse_int(key, value);
      if (key == "K") cfg.K = parse_int(key, value);
      if (key == "k0") cfg.k0 = parse_bool(key, value);
      if (key == "grid_xi") cfg.grid_xi = parse_int(key, value);
      if (key == "grid_zeta") cfg.grid_zeta = parse_int(key, value);
      if (key == "paper_parity") cfg.paper_parity = parse_bool(key, value);
    } else if (section == "initial") {
      if (!kInitialKeys.count(key)) throw ConfigError("unknown [initial] key '" + key + "'");
      if (key == "a01") cfg.a01 = parse_real(key, value);
      if (key == "blocks") cfg.blocks = parse_real_list(key, value);
      if (key == "theta") cfg.theta = parse_real(key, value);
    } else if (section == "target") {
      if (!kTargetKeys.count(key)) throw ConfigError("unknown [target] key '" + key + "'");
      if (key == "c4") cfg.target_c[4] = parse_real(key, value);
      if (key == "c6") cfg.target_c[6] = parse_real(key, value);
      if (key == "c8") cfg.target_c[8] = parse_real(key, value);
      if (key == "eps2") cfg.target_eps[2] = parse_real(key, value);
      if (key == "eps4") cfg.target_eps[4] = parse_real(key, value);
      if (key == "eps6") cfg.target_eps[6] = parse_real(key, value);
      if (key == "verify_amplitudes") cfg.verify_amplitudes = parse_real_list(key, value);
    } else if (section == "sweep") {
      if (!kSweepKeys.count(key)) throw ConfigError("unknown [sweep] key '" + key + "'");
      if (key == "param") cfg.sweep_param = value;
      if (key == "from") cfg.sweep_from = parse_real(key, value);
      if (key == "to") cfg.sweep_to = parse_real(key, value);
      if (key == "steps") cfg.sweep_steps = parse_int(key, value);
    } else if (section == "output") {
      if (!kOutputKeys.count(key)) throw ConfigError("unknown [output] key '" + key + "'");
      if (key == "dir") cfg.out_dir = value;
      if (key == "prefix") cfg.prefix = value;
      if (key == "xi_max") cfg.xi_max = parse_real(key, value);
      if (key == "samples") cfg.trajectory_samples = parse_int(key, value);
      if (key == "dev_a01") cfg.dev_a01 = parse_real(key, value);
    }
  }

  // Cross-field validation.
  if (cfg.experiment.empty()) throw ConfigError("missing required key 'experiment'");
  if (cfg.model_name.empty()) throw ConfigError("missing [model] name");
  if (cfg.M < 0 || cfg.K < 1) throw ConfigError("[basis] requires M >= 0 and K >= 1");
  if (!cfg.target_c.empty() && !cfg.target_eps.empty())
    throw ConfigError("[target] must specify either c_k or eps_k coefficients, not both");
  for (const auto& [key, value] : cfg.model_params)
    if (!std::isfinite(value)) throw ConfigError("non-finite model parameter '" + key + "'");
  if (cfg.experiment == "sweep") {
    if (cfg.sweep_param.empty()) throw ConfigError("[sweep] param is required");
    if (cfg.sweep_steps < 1) throw ConfigError("[sweep] steps must be >= 1");
    if (cfg.sweep_steps > 1 && cfg.sweep_to == cfg.sweep_from)
      throw ConfigError("[sweep] range is empty");
  }
  if (cfg.experiment == "forward" && cfg.a01 <= 0)
    throw ConfigError("forward experiment requires [initial] a01 > 0");
  if (cfg.trajectory_samples < 1) throw ConfigError("[output] samples must be >= 1");
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace hbeng
