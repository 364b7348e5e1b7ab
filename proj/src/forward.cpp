#include "hbeng/forward.hpp"

#include <algorithm>
#include <cmath>

namespace hbeng {

ForwardSystem::ForwardSystem(const ForwardProblem& problem)
    : problem_(problem),
      op_(problem.set, problem.grid,
          FrequencyPair{problem.omega_guess > 0 ? problem.omega_guess : 1.0, problem.Omega},
          problem.theta) {
  if (!problem_.model) throw InvalidArgument("ForwardProblem: model is required");
  if (problem_.a01 < 0) throw InvalidArgument("ForwardProblem: a01 must be >= 0");
  const int sec = problem_.set.secular_index();
  free_indices_.reserve(static_cast<size_t>(problem_.set.size() - 1));
  for (int i = 0; i < problem_.set.size(); ++i)
    if (i != sec) free_indices_.push_back(i);
}

Vector ForwardSystem::full_amplitudes(const Vector& unknowns) const {
  const int n = op_.index_set().size();
  if (unknowns.size() != n) throw DimensionError("forward unknown vector has wrong length");
  Vector amps(n);
  amps[problem_.set.secular_index()] = problem_.a01;
  for (size_t i = 0; i < free_indices_.size(); ++i)
    amps[free_indices_[i]] = unknowns[static_cast<int>(i)];
  return amps;
}

Vector ForwardSystem::residual(const Vector& unknowns) const {
  const int n = op_.index_set().size();
  const Real omega = unknowns[n - 1];
  const Vector amps = full_amplitudes(unknowns);
  const Vector u_hat = op_.s_matrix() * amps;
  const Vector& phases = op_.grid().drive_phases();
  Vector f_hat(u_hat.size());
  const DriveModel& model = *problem_.model;
  for (int i = 0; i < u_hat.size(); ++i) {
    f_hat[i] = model.accel(u_hat[i], phases[i]);
    if (!std::isfinite(f_hat[i])) throw NonFiniteError("model returned non-finite acceleration");
  }
  const Vector d2 = op_.d2_multipliers({omega, problem_.Omega});
  return d2.cwiseProduct(amps) - op_.projector() * f_hat;
}

Matrix ForwardSystem::jacobian(const Vector& unknowns) const {
  const int n = op_.index_set().size();
  const Real omega = unknowns[n - 1];
  const Vector amps = full_amplitudes(unknowns);
  const Vector u_hat = op_.s_matrix() * amps;
  const Vector& phases = op_.grid().drive_phases();
  Vector df(u_hat.size());
  const DriveModel& model = *problem_.model;
  for (int i = 0; i < u_hat.size(); ++i) df[i] = model.accel_du(u_hat[i], phases[i]);

  // d(residual)/d(amplitudes) = diag(d2) - P * diag(accel_du) * S
  const Matrix j_amp =
      Matrix(op_.d2_multipliers({omega, problem_.Omega}).asDiagonal()) -
      op_.projector() * df.asDiagonal() * op_.s_matrix();

  Matrix jac(n, n);
  for (size_t c = 0; c < free_indices_.size(); ++c)
    jac.col(static_cast<int>(c)) = j_amp.col(free_indices_[c]);
  // d(residual)/d(omega) = diag(-2 (k w + m W) k) * amplitudes
  const auto& set = op_.index_set();
  for (int i = 0; i < n; ++i) {
    const auto& e = set.entry(i);
    jac(i, n - 1) = -2.0 * (e.k * omega + e.m * problem_.Omega) * e.k * amps[i];
  }
  return jac;
}

Vector ForwardSystem::pack(const CoefficientTable& coeffs, Real omega) const {
  const int n = op_.index_set().size();
  Vector x(n);
  for (size_t i = 0; i < free_indices_.size(); ++i)
    x[static_cast<int>(i)] = coeffs.amplitudes[free_indices_[i]];
  x[n - 1] = omega;
  return x;
}

std::pair<CoefficientTable, Real> ForwardSystem::unpack(const Vector& unknowns) const {
  CoefficientTable table(op_.index_set(), problem_.theta);
  table.amplitudes = full_amplitudes(unknowns);
  return {table, unknowns[op_.index_set().size() - 1]};
}

Vector ForwardSystem::initial_guess() const {
  if (problem_.coeff_guess) {
    if (!(problem_.coeff_guess->set == op_.index_set()))
      throw DimensionError("coeff_guess index set does not match the problem");
    const Real w0 =
        problem_.omega_guess > 0 ? problem_.omega_guess : problem_.model->omega_seed(problem_.a01);
    return pack(*problem_.coeff_guess, w0);
  }
  CoefficientTable seed(op_.index_set(), problem_.theta);
  seed.amplitudes[problem_.set.secular_index()] = problem_.a01;
  problem_.model->seed_coefficients(seed);
  const Real w0 =
      problem_.omega_guess > 0 ? problem_.omega_guess : problem_.model->omega_seed(problem_.a01);
  return pack(seed, w0);
}

Vector assemble_residual(const ForwardProblem& problem, const Vector& unknowns) {
  return ForwardSystem(problem).residual(unknowns);
}

Matrix jacobian(const ForwardProblem& problem, const Vector& unknowns) {
  return ForwardSystem(problem).jacobian(unknowns);
}

namespace {

Real max_norm(const Vector& r) { return r.cwiseAbs().maxCoeff(); }

struct NewtonState {
  Vector x;
  Vector r;
  Real norm = std::numeric_limits<Real>::infinity();
};

/// Damped Newton with step-halving line search. The linear solve and the
/// line-search norm are row equilibrated: residual rows span several orders
/// of magnitude (forced-response rows vs the small secular rows), and the
/// raw max-norm would stop iterating while low-sensitivity rows still
/// improve. Convergence is still gated on the raw max-norm.
/// Returns (iterations, trace).
template <typename ResidualFn, typename JacobianFn>
std::pair<int, std::vector<Real>> newton_iterate(NewtonState& st, const ResidualFn& residual,
                                                 const JacobianFn& jacobian,
                                                 const NewtonOptions& opts) {
  std::vector<Real> trace{st.norm};
  int it = 0;
  int polish_left = opts.max_polish_iterations;
  while (it < opts.max_iterations) {
    const bool below_tol = st.norm <= opts.tol;
    if (below_tol && !opts.polish) break;
    if (below_tol && polish_left-- <= 0) break;
    ++it;
    const Matrix jac = jacobian(st.x);
    const Vector row_scale = jac.cwiseAbs().rowwise().maxCoeff().cwiseMax(1e-300).cwiseInverse();
    const Matrix jac_s = row_scale.asDiagonal() * jac;
    const Vector step = jac_s.partialPivLu().solve(-row_scale.cwiseProduct(st.r));
    if (!step.allFinite()) break;
    const Real scaled_norm = max_norm(row_scale.cwiseProduct(st.r));
    Real lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      const Vector x_new = st.x + lambda * step;
      Vector r_new;
      try {
        r_new = residual(x_new);
      } catch (const NonFiniteError&) {
        lambda *= 0.5;
        continue;
      }
      const Real n_scaled = max_norm(row_scale.cwiseProduct(r_new));
      if (std::isfinite(n_scaled) && n_scaled < scaled_norm) {
        st.x = x_new;
        st.r = std::move(r_new);
        st.norm = max_norm(st.r);
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;  // stagnated: keep best iterate
    trace.push_back(st.norm);
  }
  return {it, std::move(trace)};
}

}  // namespace

HbSolution solve_forward(const ForwardProblem& problem, const NewtonOptions& options) {
  ForwardSystem sys(problem);
  NewtonState st;
  st.x = sys.initial_guess();
  st.r = sys.residual(st.x);
  st.norm = max_norm(st.r);

  auto [iters, trace] = newton_iterate(
      st, [&](const Vector& x) { return sys.residual(x); },
      [&](const Vector& x) { return sys.jacobian(x); }, options);

  HbSolution sol;
  auto [coeffs, omega] = sys.unpack(st.x);
  sol.coeffs = std::move(coeffs);
  sol.omega = omega;
  sol.Omega = problem.Omega;
  sol.beta = 2.0 * omega / problem.Omega;
  sol.residual_norm = st.norm;
  sol.iterations = iters;
  sol.converged = st.norm <= options.tol;
  sol.residual_trace = std::move(trace);
  return sol;
}

std::vector<HbSolution> continue_in_parameter(const ForwardProblem& problem,
                                              const std::string& param_name,
                                              const std::vector<Real>& values,
                                              const NewtonOptions& options) {
  if (values.size() > 1) {
    const bool asc = values.back() > values.front();
    for (size_t i = 1; i < values.size(); ++i)
      if ((asc && values[i] <= values[i - 1]) || (!asc && values[i] >= values[i - 1]))
        throw InvalidArgument("continue_in_parameter: values must be strictly monotone");
  }

  std::vector<HbSolution> out;
  out.reserve(values.size());
  ForwardProblem p = problem;
  std::optional<HbSolution> last_good;
  for (const Real v : values) {
    if (param_name == "a01") {
      p.a01 = v;
    } else {
      auto m = problem.model->clone();
      m->set_param(param_name, v);
      p.model = std::move(m);
    }
    if (last_good) {
      CoefficientTable warm = last_good->coeffs;
      warm.amplitudes[warm.set.secular_index()] = p.a01;
      p.coeff_guess = warm;
      p.omega_guess = last_good->omega;
    }
    HbSolution sol = solve_forward(p, options);
    if (sol.converged) last_good = sol;
    out.push_back(std::move(sol));
  }
  return out;
}

HbSolution solve_forward_continued(const ForwardProblem& problem, Real a01_step,
                                   const NewtonOptions& options) {
  if (problem.a01 <= a01_step || problem.coeff_guess) return solve_forward(problem, options);
  const int n_steps = std::max(2, static_cast<int>(std::ceil(problem.a01 / a01_step)));
  std::vector<Real> ladder(static_cast<size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i)
    ladder[static_cast<size_t>(i)] = problem.a01 * (i + 1) / n_steps;
  auto sols = continue_in_parameter(problem, "a01", ladder, options);
  return sols.back();
}

Real reconstruct_at(const HbSolution& sol, Real xi) {
  Real u = 0.0;
  const auto& set = sol.coeffs.set;
  for (int i = 0; i < set.size(); ++i) {
    const auto& e = set.entry(i);
    u += sol.coeffs.amplitudes[i] *
         std::cos((e.k * sol.omega + e.m * sol.Omega) * xi + sol.coeffs.theta);
  }
  return u;
}

std::vector<Real> reconstruct_trajectory(const HbSolution& sol, const std::vector<Real>& xi) {
  std::vector<Real> u(xi.size());
  for (size_t i = 0; i < xi.size(); ++i) u[i] = reconstruct_at(sol, xi[i]);
  return u;
}

bool same_branch(const HbSolution& a, const HbSolution& b, Real ctol, Real wtol) {
  if (!(a.coeffs.set == b.coeffs.set)) return false;
  return (a.coeffs.amplitudes - b.coeffs.amplitudes).cwiseAbs().maxCoeff() <= ctol &&
         std::abs(a.omega - b.omega) <= wtol;
}

}  // namespace hbeng
