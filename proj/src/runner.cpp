#include "hbeng/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <optional>
#include <thread>

#include "hbeng/forward.hpp"
#include "hbeng/inverse.hpp"
#include "hbeng/magnus.hpp"
#include "hbeng/manifest.hpp"
#include "hbeng/models.hpp"
#include "hbeng/oracles.hpp"

namespace hbeng {

namespace {

using Clock = std::chrono::steady_clock;

Real elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<Real, std::milli>(Clock::now() - t0).count();
}

struct Setup {
  std::shared_ptr<DriveModel> model;
  HarmonicIndexSet set;
  SamplingGrid grid;
  AmplitudeFrequencyTarget target;
  std::vector<Real> blocks;
};

SolveRecord record_of(const std::string& label, const HbSolution& sol) {
  return {label, sol.iterations, sol.residual_norm, sol.converged, sol.residual_trace};
}

SolveRecord record_of(const std::string& label, const InverseSolution& sol) {
  return {label, sol.iterations, sol.residual_norm, sol.converged, sol.residual_trace};
}

std::vector<Real> log_ladder(Real lo, Real hi, int n) {
  std::vector<Real> out;
  if (n == 1) {
    out.push_back(lo);
    return out;
  }
  for (int i = 0; i < n; ++i)
    out.push_back(lo * std::pow(hi / lo, static_cast<Real>(i) / (n - 1)));
  return out;
}

Setup build_setup(const RunConfig& cfg) {
  Setup s;
  s.model = make_model(cfg.model_name, cfg.model_params);
  for (const auto& c : cfg.controls) s.model->designate_control(c);

  s.set = HarmonicIndexSet::build(cfg.M, cfg.K, cfg.k0, cfg.theta);
  int gx = cfg.grid_xi > 0 ? cfg.grid_xi : 2 * cfg.K + 1;
  int gz = cfg.grid_zeta > 0 ? cfg.grid_zeta : 2 * cfg.M + 1;
  if (cfg.paper_parity) {
    // Reproduction mode: the 15x15 grid of the reference experiments. Aliased
    // high-k columns are dropped instead of carrying a singular operator.
    gx = cfg.grid_xi > 0 ? cfg.grid_xi : 15;
    gz = cfg.grid_zeta > 0 ? cfg.grid_zeta : 15;
    s.grid = SamplingGrid::make(gx, gz, true);
    s.set = drop_aliased(s.set, s.grid, cfg.theta);
  } else {
    s.grid = SamplingGrid::make(gx, gz, false);
  }

  if (!cfg.target_eps.empty()) {
    for (const auto& [k, e] : cfg.target_eps) s.target.eps[k] = e;
  } else if (!cfg.target_c.empty()) {
    TargetPotential pot;
    for (const auto& [k, c] : cfg.target_c)
      if (c != 0.0) pot.c_coeffs[k] = c;
    s.target = eps_from_anharmonicity(pot);
  }

  const int n_c = static_cast<int>(cfg.controls.size());
  s.blocks = cfg.blocks.empty() ? log_ladder(1e-5, 1e-2, std::max(n_c + 1, 1)) : cfg.blocks;
  return s;
}

ForwardProblem forward_problem(const Setup& s, const RunConfig& cfg, Real a01) {
  ForwardProblem fp;
  fp.model = std::shared_ptr<const DriveModel>(s.model->clone().release());
  fp.set = s.set;
  fp.grid = s.grid;
  fp.a01 = a01;
  fp.theta = cfg.theta;
  return fp;
}

StackedInverseProblem stacked_problem(const Setup& s, const RunConfig& cfg) {
  StackedInverseProblem ip;
  ip.model = std::shared_ptr<const DriveModel>(s.model->clone().release());
  ip.controls = cfg.controls;
  ip.block_a01 = s.blocks;
  ip.theta = cfg.theta;
  ip.set = s.set;
  ip.grid = s.grid;
  ip.target = s.target;
  return ip;
}

std::filesystem::path artifact_path(const std::filesystem::path& dir, const RunConfig& cfg,
                                    const std::string& name) {
  return dir / (cfg.prefix.empty() ? name : cfg.prefix + name);
}

/// The verification amplitude grid: log-spaced over the collocation range
/// with off-collocation points in between, plus any user-requested values.
std::vector<Real> verification_grid(const RunConfig& cfg, const std::vector<Real>& blocks) {
  std::vector<Real> grid = cfg.verify_amplitudes;
  if (grid.empty()) grid = log_ladder(blocks.front(), blocks.back(), 13);
  return grid;
}

/// Bounded worker pool; tasks indexed 0..n-1, results independent per index.
void parallel_for(int n, const std::function<void(int)>& task) {
  const int workers =
      std::max(1, std::min<int>(static_cast<int>(std::thread::hardware_concurrency()), 8));
  if (workers == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) task(i);
    });
  for (auto& t : pool) t.join();
}

int single_target_order(const AmplitudeFrequencyTarget& target) {
  // eps_k corresponds to C_{k+2} at first order.
  int order = 0;
  for (const auto& [k, e] : target.eps)
    if (e != 0.0) {
      if (order != 0) throw ConfigError("FM comparison requires a single-order target");
      order = k + 2;
    }
  if (order == 0) order = 4;
  return order;
}

Real target_value_of(const AmplitudeFrequencyTarget& target, int order) {
  auto it = target.eps.find(order - 2);
  if (it == target.eps.end()) return 0.0;
  const TargetPotential pot = anharmonicity_from_eps({{{order - 2, it->second}}});
  return pot.c_coeffs.at(order);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

int run_forward_experiment(const RunConfig& cfg, const Setup& s,
                           const std::filesystem::path& dir, RunManifest& manifest) {
  const auto t0 = Clock::now();

  ForwardProblem nefs_problem = forward_problem(s, cfg, cfg.a01);
  const HbSolution nefs = solve_forward_continued(nefs_problem);
  manifest.solves.push_back(record_of("nefs", nefs));

  // Single-k counterpart: k = 1 only (plus the k0 row when enabled).
  Setup s_ofs = s;
  s_ofs.set = HarmonicIndexSet::build(cfg.M, 1, cfg.k0, cfg.theta);
  if (cfg.paper_parity) s_ofs.set = drop_aliased(s_ofs.set, s.grid, cfg.theta);
  ForwardProblem ofs_problem = forward_problem(s_ofs, cfg, cfg.a01);
  const HbSolution ofs = solve_forward_continued(ofs_problem);
  manifest.solves.push_back(record_of("ofs", ofs));

  manifest.timings_ms.emplace_back("hb_ms", elapsed_ms(t0));
  if (!nefs.converged || !ofs.converged) {
    manifest.failures.push_back("forward solve did not converge");
    return kExitSolver;
  }

  const auto t1 = Clock::now();
  const auto [u0, v0] = initial_state_from_solution(nefs);
  const Trajectory rk = integrate(*nefs_problem.model, u0, v0, 0.0, cfg.xi_max);
  manifest.timings_ms.emplace_back("rk_ms", elapsed_ms(t1));

  {
    CsvWriter csv(artifact_path(dir, cfg, "trajectory.csv"));
    csv.header({"xi", "u_rk", "u_nefs", "u_ofs", "dev_nefs", "dev_ofs"});
    for (int i = 1; i <= cfg.trajectory_samples; ++i) {
      const Real xi = cfg.xi_max * i / cfg.trajectory_samples;
      const Real ur = rk.u(xi);
      const Real un = reconstruct_at(nefs, xi);
      const Real uo = reconstruct_at(ofs, xi);
      csv.field(xi);
      csv.field(ur);
      csv.field(un);
      csv.field(uo);
      csv.field(std::abs((ur - un) / u0));
      csv.field(std::abs((ur - uo) / u0));
      csv.end_row();
    }
  }
  manifest.artifacts.push_back(artifact_path(dir, cfg, "trajectory.csv").filename().string());

  {
    CsvWriter csv(artifact_path(dir, cfg, "solution.csv"));
    csv.header({"quantity", "m", "k", "value"});
    const auto& set = nefs.coeffs.set;
    for (int i = 0; i < set.size(); ++i) {
      csv.field(std::string("amplitude"));
      csv.field(static_cast<Real>(set.entry(i).m));
      csv.field(static_cast<Real>(set.entry(i).k));
      csv.field(nefs.coeffs.amplitudes[i]);
      csv.end_row();
    }
    auto scalar = [&](const std::string& name, Real v) {
      csv.field(name);
      csv.empty_field();
      csv.empty_field();
      csv.field(v);
      csv.end_row();
    };
    scalar("omega", nefs.omega);
    scalar("beta", nefs.beta);
    scalar("residual_norm", nefs.residual_norm);
  }
  manifest.artifacts.push_back(artifact_path(dir, cfg, "solution.csv").filename().string());
  return kExitOk;
}

int run_engineer_experiment(const RunConfig& cfg, const Setup& s,
                            const std::filesystem::path& dir, RunManifest& manifest) {
  if (cfg.controls.empty()) throw ConfigError("engineer experiment requires [model] controls");
  if (s.blocks.size() != cfg.controls.size() + 1)
    throw ConfigError("engineer experiment requires block count = control count + 1");

  const auto t0 = Clock::now();
  StackedInverseProblem problem = stacked_problem(s, cfg);
  const InverseSolution sol = solve_inverse(problem);
  manifest.solves.push_back(record_of("inverse", sol));
  manifest.timings_ms.emplace_back("inverse_ms", elapsed_ms(t0));
  if (!sol.converged) {
    manifest.failures.push_back("inverse solve did not converge");
    return kExitSolver;
  }

  {
    CsvWriter csv(artifact_path(dir, cfg, "controls.csv"));
    csv.header({"name", "value"});
    for (size_t i = 0; i < cfg.controls.size(); ++i) {
      csv.field(cfg.controls[i]);
      csv.field(sol.alpha[static_cast<int>(i)]);
      csv.end_row();
      manifest.results.emplace_back(cfg.controls[i], sol.alpha[static_cast<int>(i)]);
    }
    csv.field(std::string("omega0"));
    csv.field(sol.omega0);
    csv.end_row();
    manifest.results.emplace_back("omega0", sol.omega0);
    for (size_t j = 0; j < sol.blocks.size(); ++j) {
      csv.field("beta_block_" + std::to_string(j));
      csv.field(sol.blocks[j].beta);
      csv.end_row();
      manifest.results.emplace_back("beta_block_" + std::to_string(j), sol.blocks[j].beta);
    }
  }
  manifest.artifacts.push_back(artifact_path(dir, cfg, "controls.csv").filename().string());

  const auto t1 = Clock::now();
  const auto rows = verify_target(sol, problem, verification_grid(cfg, s.blocks));
  manifest.timings_ms.emplace_back("verify_ms", elapsed_ms(t1));
  {
    CsvWriter csv(artifact_path(dir, cfg, "verification.csv"));
    csv.header({"A", "target_shift", "achieved_shift", "rel_error"});
    for (const auto& r : rows) {
      csv.field(r.a01);
      csv.field(r.target_shift);
      csv.field(r.achieved_shift);
      csv.field(r.rel_error);
      csv.end_row();
    }
  }
  manifest.artifacts.push_back(artifact_path(dir, cfg, "verification.csv").filename().string());
  return kExitOk;
}

int run_sweep_experiment(const RunConfig& cfg, const Setup& s, const std::filesystem::path& dir,
                         RunManifest& manifest) {
  if (cfg.controls.size() != 1)
    throw ConfigError("sweep experiment requires exactly one control");
  if (s.blocks.size() != 2) throw ConfigError("sweep experiment requires two collocation blocks");
  const int order = single_target_order(s.target);
  const Real target_ck = target_value_of(s.target, order);

  std::vector<Real> values(static_cast<size_t>(cfg.sweep_steps));
  for (int i = 0; i < cfg.sweep_steps; ++i)
    values[static_cast<size_t>(i)] =
        cfg.sweep_steps == 1
            ? cfg.sweep_from
            : cfg.sweep_from + (cfg.sweep_to - cfg.sweep_from) * i / (cfg.sweep_steps - 1);

  struct Point {
    bool hb_ok = false;
    Real control_hb = 0, beta_hb = 0;
    bool fm_ok = false;
    Real control_fm = 0, beta_fm = 0;
    bool dev_ok = false;
    Real max_dev = 0;
    InverseSolution sol;
  };
  std::vector<Point> points(values.size());

  // Sequential warm-started inverse pass.
  const auto t0 = Clock::now();
  std::optional<InverseSeeds> seeds;
  for (size_t i = 0; i < values.size(); ++i) {
    StackedInverseProblem problem = stacked_problem(s, cfg);
    auto model = problem.model->clone();
    model->set_param(cfg.sweep_param, values[i]);
    problem.model = std::shared_ptr<const DriveModel>(model.release());
    problem.seeds = seeds;
    Point& pt = points[i];
    try {
      pt.sol = solve_inverse(problem);
    } catch (const Error& e) {
      manifest.failures.push_back("sweep point " + std::to_string(i) + ": " + e.what());
      seeds.reset();
      continue;
    }
    manifest.solves.push_back(
        record_of("inverse@" + CsvWriter::format(values[i]), pt.sol));
    if (pt.sol.converged) {
      pt.hb_ok = true;
      pt.control_hb = pt.sol.alpha[0];
      pt.beta_hb = 2.0 * pt.sol.omega0 / problem.Omega;
      seeds = InverseSeeds{pt.sol.alpha, pt.sol.omega0, {}};
      for (const auto& b : pt.sol.blocks) seeds->blocks.push_back(b.coeffs);
    } else {
      seeds.reset();
    }
  }
  manifest.timings_ms.emplace_back("inverse_ms", elapsed_ms(t0));

  // Per-point comparator and oracle deviation on a worker pool.
  const auto t1 = Clock::now();
  std::vector<std::string> point_errors(values.size());
  parallel_for(static_cast<int>(values.size()), [&](int i) {
    Point& pt = points[static_cast<size_t>(i)];
    auto model = s.model->clone();
    model->set_param(cfg.sweep_param, values[static_cast<size_t>(i)]);
    try {
      const auto fm = predict_control(*model, cfg.controls[0], order, target_ck);
      pt.control_fm = fm.control;
      pt.beta_fm = fm.beta_fm;
      pt.fm_ok = true;
    } catch (const Error& e) {
      point_errors[static_cast<size_t>(i)] = e.what();
    }
    if (!pt.hb_ok) return;
    try {
      model->set_param(cfg.controls[0], pt.control_hb);
      ForwardProblem fp;
      fp.model = std::shared_ptr<const DriveModel>(model->clone().release());
      fp.set = s.set;
      fp.grid = s.grid;
      fp.a01 = s.blocks.back();
      fp.theta = cfg.theta;
      fp.coeff_guess = pt.sol.blocks.back().coeffs;
      fp.omega_guess = pt.sol.blocks.back().omega;
      NewtonOptions opts;
      opts.polish = true;
      HbSolution fs = solve_forward(fp, opts);
      if (!fs.converged) return;
      if (cfg.dev_a01 > fp.a01) {
        // Deviation requested at a larger amplitude: continue the solved
        // block up the amplitude ladder.
        const int n_steps =
            std::max(2, static_cast<int>(std::ceil((cfg.dev_a01 - fp.a01) / 0.025)));
        std::vector<Real> ladder;
        for (int k = 1; k <= n_steps; ++k)
          ladder.push_back(fp.a01 + (cfg.dev_a01 - fp.a01) * k / n_steps);
        fp.coeff_guess = fs.coeffs;
        fp.omega_guess = fs.omega;
        auto chain = continue_in_parameter(fp, "a01", ladder, opts);
        if (!chain.back().converged) return;
        fs = chain.back();
      }
      const auto [u0, v0] = initial_state_from_solution(fs);
      const Trajectory rk = integrate(*fp.model, u0, v0, 0.0, cfg.xi_max);
      const auto rep = deviation([&](Real xi) { return xi == 0.0 ? u0 : rk.u(xi); },
                                 [&](Real xi) { return reconstruct_at(fs, xi); }, cfg.xi_max,
                                 cfg.trajectory_samples);
      pt.max_dev = rep.max_dev;
      pt.dev_ok = true;
    } catch (const Error& e) {
      point_errors[static_cast<size_t>(i)] = e.what();
    }
  });
  manifest.timings_ms.emplace_back("compare_ms", elapsed_ms(t1));
  for (size_t i = 0; i < point_errors.size(); ++i)
    if (!point_errors[i].empty())
      manifest.failures.push_back("sweep point " + std::to_string(i) + ": " + point_errors[i]);

  int n_ok = 0;
  {
    CsvWriter csv(artifact_path(dir, cfg, "sweep.csv"));
    csv.header({"param", "control_hb", "beta_hb", "control_fm", "beta_fm", "max_dev"});
    for (size_t i = 0; i < values.size(); ++i) {
      const Point& pt = points[i];
      csv.field(values[i]);
      if (pt.hb_ok) {
        csv.field(pt.control_hb);
        csv.field(pt.beta_hb);
        ++n_ok;
      } else {
        csv.empty_field();
        csv.empty_field();
      }
      if (pt.fm_ok) {
        csv.field(pt.control_fm);
        csv.field(pt.beta_fm);
      } else {
        csv.empty_field();
        csv.empty_field();
      }
      if (pt.dev_ok)
        csv.field(pt.max_dev);
      else
        csv.empty_field();
      csv.end_row();
    }
  }
  manifest.artifacts.push_back(artifact_path(dir, cfg, "sweep.csv").filename().string());
  return n_ok > 0 ? kExitOk : kExitSolver;
}

int run_compare_experiment(const RunConfig& cfg, const Setup& s, const std::filesystem::path& dir,
                           RunManifest& manifest) {
  if (cfg.controls.size() != 1)
    throw ConfigError("compare-magnus experiment requires exactly one control");
  const int order = single_target_order(s.target);
  const Real target_ck = target_value_of(s.target, order);

  Setup s2 = s;
  if (cfg.blocks.empty()) s2.blocks = {1e-5, 1e-2};
  StackedInverseProblem problem = stacked_problem(s2, cfg);
  const InverseSolution sol = solve_inverse(problem);
  manifest.solves.push_back(record_of("inverse", sol));
  if (!sol.converged) {
    manifest.failures.push_back("inverse solve did not converge");
    return kExitSolver;
  }
  const auto fm = predict_control(*s.model, cfg.controls[0], order, target_ck);

  auto model_hb = s.model->clone();
  model_hb->set_param(cfg.controls[0], sol.alpha[0]);
  const auto eff_hb = effective_force_of(*model_hb);
  const auto ck_fm_at_hb = eff_hb.anharmonicities();

  {
    CsvWriter csv(artifact_path(dir, cfg, "compare.csv"));
    csv.header({"quantity", "hb", "fm", "rel_gap"});
    auto row = [&](const std::string& name, Real hb, Real fmv) {
      csv.field(name);
      csv.field(hb);
      csv.field(fmv);
      csv.field(std::abs(hb - fmv) / std::max({std::abs(hb), std::abs(fmv), 1e-300}));
      csv.end_row();
    };
    row("control", sol.alpha[0], fm.control);
    row("beta", sol.omega0, fm.beta_fm);
    for (int k : {4, 6, 8}) {
      const Real tgt = (k == order) ? target_ck : 0.0;
      row("C" + std::to_string(k), tgt, ck_fm_at_hb.at(k));
    }
  }
  manifest.artifacts.push_back(artifact_path(dir, cfg, "compare.csv").filename().string());
  return kExitOk;
}

int run_verify_experiment(const RunConfig& cfg, const Setup& s, const std::filesystem::path& dir,
                          RunManifest& manifest) {
  // Forward verification of explicitly supplied control values against the
  // target relation; the base frequency is measured at the smallest block.
  const std::vector<Real> amplitudes = verification_grid(cfg, s.blocks);
  NewtonOptions opts;
  opts.polish = true;
  opts.max_polish_iterations = 20;

  // Base frequency anchored at the largest block (least frequency noise).
  ForwardProblem base = forward_problem(s, cfg, s.blocks.back());
  const HbSolution ref = solve_forward(base, opts);
  manifest.solves.push_back(record_of("base", ref));
  if (!ref.converged) {
    manifest.failures.push_back("base forward solve did not converge");
    return kExitSolver;
  }
  const Real omega0 = ref.omega / s.target.kappa(s.blocks.back());

  CsvWriter csv(artifact_path(dir, cfg, "verification.csv"));
  csv.header({"A", "target_shift", "achieved_shift", "rel_error"});
  HbSolution prev;  // ascending chain, cold start at the smallest amplitude
  for (const Real a01 : amplitudes) {
    ForwardProblem fp = forward_problem(s, cfg, a01);
    if (prev.converged) {
      CoefficientTable guess = prev.coeffs;
      guess.amplitudes[guess.set.secular_index()] = a01;
      fp.coeff_guess = std::move(guess);
      fp.omega_guess = prev.omega;
    }
    const HbSolution fs = solve_forward(fp, opts);
    manifest.solves.push_back(record_of("verify@" + CsvWriter::format(a01), fs));
    csv.field(a01);
    const Real target_shift = s.target.kappa(a01) - 1.0;
    csv.field(target_shift);
    if (fs.converged) {
      const Real achieved = fs.omega / omega0 - 1.0;
      csv.field(achieved);
      csv.field(std::abs(achieved - target_shift) / std::max(std::abs(target_shift), 1e-300));
      prev = fs;
    } else {
      csv.empty_field();
      csv.empty_field();
    }
    csv.end_row();
  }
  manifest.artifacts.push_back(artifact_path(dir, cfg, "verification.csv").filename().string());
  return kExitOk;
}

}  // namespace

int run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  const auto t_total = Clock::now();
  RunManifest manifest;
  manifest.experiment = cfg.experiment;
  manifest.config_echo = cfg.raw_text;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) return kExitIo;

  int code = kExitOk;
  try {
    const Setup s = build_setup(cfg);
    if (cfg.experiment == "forward")
      code = run_forward_experiment(cfg, s, out_dir, manifest);
    else if (cfg.experiment == "engineer")
      code = run_engineer_experiment(cfg, s, out_dir, manifest);
    else if (cfg.experiment == "sweep")
      code = run_sweep_experiment(cfg, s, out_dir, manifest);
    else if (cfg.experiment == "compare-magnus")
      code = run_compare_experiment(cfg, s, out_dir, manifest);
    else if (cfg.experiment == "verify")
      code = run_verify_experiment(cfg, s, out_dir, manifest);
    else
      throw ConfigError("unknown experiment: " + cfg.experiment);
  } catch (const ConfigError& e) {
    manifest.failures.push_back(e.what());
    code = kExitConfig;
  } catch (const InvalidArgument& e) {
    manifest.failures.push_back(e.what());
    code = kExitConfig;
  } catch (const IoError& e) {
    manifest.failures.push_back(e.what());
    code = kExitIo;
  } catch (const Error& e) {
    manifest.failures.push_back(e.what());
    code = kExitSolver;
  }

  manifest.timings_ms.emplace_back("total_ms", elapsed_ms(t_total));
  try {
    manifest.write(out_dir / (cfg.prefix.empty() ? "manifest.json" : cfg.prefix + "manifest.json"));
  } catch (const Error&) {
    return kExitIo;
  }
  return code;
}

}  // namespace hbeng
