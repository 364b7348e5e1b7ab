#include "hbeng/models.hpp"

#include <algorithm>
#include <cmath>

namespace hbeng {

// ---------------------------------------------------------------------------
// DriveModel parameter registry
// ---------------------------------------------------------------------------

int DriveModel::add_param(std::string name, Real value, bool control) {
  params_.push_back({std::move(name), value, control});
  return static_cast<int>(params_.size()) - 1;
}

int DriveModel::find(std::string_view name) const {
  for (size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

bool DriveModel::has_param(std::string_view name) const { return find(name) >= 0; }

Real DriveModel::param(std::string_view name) const {
  const int i = find(name);
  if (i < 0) throw InvalidArgument("unknown model parameter: " + std::string(name));
  return params_[static_cast<size_t>(i)].value;
}

void DriveModel::set_param(std::string_view name, Real value) {
  const int i = find(name);
  if (i < 0) throw InvalidArgument("unknown model parameter: " + std::string(name));
  params_[static_cast<size_t>(i)].value = value;
  on_param_changed();
}

void DriveModel::designate_control(std::string_view name, bool on) {
  const int i = find(name);
  if (i < 0) throw InvalidArgument("unknown model parameter: " + std::string(name));
  params_[static_cast<size_t>(i)].control = on;
}

std::vector<std::string> DriveModel::control_names() const {
  std::vector<std::string> out;
  for (const auto& p : params_)
    if (p.control) out.push_back(p.name);
  return out;
}

Real DriveModel::accel_dparam(std::string_view param, Real u, Real phase) const {
  const Real v = this->param(param);
  const Real h = 1e-6 * std::max(1.0, std::abs(v));
  auto hi = clone();
  auto lo = clone();
  hi->set_param(param, v + h);
  lo->set_param(param, v - h);
  return (hi->accel(u, phase) - lo->accel(u, phase)) / (2 * h);
}

std::pair<Real, Real> DriveModel::control_scan_range(std::string_view) const {
  return {-20.0, 20.0};
}

void DriveModel::seed_coefficients(CoefficientTable&) const {}

// ---------------------------------------------------------------------------
// MathieuModel
// ---------------------------------------------------------------------------

MathieuModel::MathieuModel(Real q, Real a, const std::map<int, Real>& alpha_ac,
                           const std::map<int, Real>& alpha_dc_tilde) {
  auto pick = [](const std::map<int, Real>& m, int k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  };
  for (const auto& [k, v] : alpha_ac)
    if (k != 4 && k != 6 && k != 8)
      throw InvalidArgument("MathieuModel: AC anharmonic orders are limited to {4,6,8}");
  for (const auto& [k, v] : alpha_dc_tilde)
    if (k != 4 && k != 6 && k != 8)
      throw InvalidArgument("MathieuModel: DC anharmonic orders are limited to {4,6,8}");
  iq_ = add_param("q", q);
  ia_ = add_param("a", a);
  iac_[0] = add_param("alpha4_ac", pick(alpha_ac, 4));
  iac_[1] = add_param("alpha6_ac", pick(alpha_ac, 6));
  iac_[2] = add_param("alpha8_ac", pick(alpha_ac, 8));
  idc_[0] = add_param("alpha4_dc", pick(alpha_dc_tilde, 4));
  idc_[1] = add_param("alpha6_dc", pick(alpha_dc_tilde, 6));
  idc_[2] = add_param("alpha8_dc", pick(alpha_dc_tilde, 8));
}

Real MathieuModel::accel(Real u, Real phase) const {
  const Real u2 = u * u;
  const Real u3 = u2 * u, u5 = u3 * u2, u7 = u5 * u2;
  const Real gac = u + 2.0 * p(iac_[0]) * u3 + 3.0 * p(iac_[1]) * u5 + 4.0 * p(iac_[2]) * u7;
  const Real hdc = p(ia_) * u + 2.0 * p(idc_[0]) * u3 + 3.0 * p(idc_[1]) * u5 + 4.0 * p(idc_[2]) * u7;
  return 2.0 * p(iq_) * std::cos(phase) * gac - hdc;
}

Real MathieuModel::accel_du(Real u, Real phase) const {
  const Real u2 = u * u;
  const Real u4 = u2 * u2, u6 = u4 * u2;
  const Real gac = 1.0 + 6.0 * p(iac_[0]) * u2 + 15.0 * p(iac_[1]) * u4 + 28.0 * p(iac_[2]) * u6;
  const Real hdc = p(ia_) + 6.0 * p(idc_[0]) * u2 + 15.0 * p(idc_[1]) * u4 + 28.0 * p(idc_[2]) * u6;
  return 2.0 * p(iq_) * std::cos(phase) * gac - hdc;
}

Real MathieuModel::accel_dparam(std::string_view param, Real u, Real phase) const {
  const Real u2 = u * u;
  const Real u3 = u2 * u, u5 = u3 * u2, u7 = u5 * u2;
  if (param == "alpha4_dc") return -2.0 * u3;
  if (param == "alpha6_dc") return -3.0 * u5;
  if (param == "alpha8_dc") return -4.0 * u7;
  if (param == "a") return -u;
  if (param == "q")
    return 2.0 * std::cos(phase) *
           (u + 2.0 * p(iac_[0]) * u3 + 3.0 * p(iac_[1]) * u5 + 4.0 * p(iac_[2]) * u7);
  if (param == "alpha4_ac") return 2.0 * p(iq_) * std::cos(phase) * 2.0 * u3;
  if (param == "alpha6_ac") return 2.0 * p(iq_) * std::cos(phase) * 3.0 * u5;
  if (param == "alpha8_ac") return 2.0 * p(iq_) * std::cos(phase) * 4.0 * u7;
  return DriveModel::accel_dparam(param, u, phase);
}

std::unique_ptr<DriveModel> MathieuModel::clone() const {
  return std::make_unique<MathieuModel>(*this);
}

std::pair<Real, Real> MathieuModel::control_scan_range(std::string_view) const {
  return {-20.0, 20.0};
}

Real MathieuModel::omega_seed(Real) const {
  // Lowest-order secular frequency beta0 = sqrt(a + q^2/2).
  const Real b2 = p(ia_) + 0.5 * p(iq_) * p(iq_);
  return std::sqrt(std::max(b2, 1e-6));
}

void MathieuModel::seed_coefficients(CoefficientTable& table) const {
  // u ~ A cos(beta xi) (1 - (q/2) cos 2 zeta) micromotion seed.
  const Real a01 = table.amplitudes[table.set.secular_index()];
  const Real micro = -0.25 * p(iq_) * a01;
  for (int m : {-1, 1}) {
    const int i = table.set.index_of(m, 1);
    if (i >= 0) table.amplitudes[i] = micro;
  }
}

// ---------------------------------------------------------------------------
// OpticalLatticeModel
// ---------------------------------------------------------------------------

OpticalLatticeModel::OpticalLatticeModel(Real v0, Real lam) {
  if (v0 <= 0.0) throw InvalidArgument("OpticalLatticeModel: v0 must be positive");
  iv0_ = add_param("v0", v0);
  ilam_ = add_param("lam", lam);
}

Real OpticalLatticeModel::accel(Real u, Real phase) const {
  return -p(iv0_) * std::sin(2.0 * (u - p(ilam_) * std::cos(phase)));
}

Real OpticalLatticeModel::accel_du(Real u, Real phase) const {
  return -2.0 * p(iv0_) * std::cos(2.0 * (u - p(ilam_) * std::cos(phase)));
}

Real OpticalLatticeModel::accel_dparam(std::string_view param, Real u, Real phase) const {
  if (param == "lam")
    return 2.0 * p(iv0_) * std::cos(phase) * std::cos(2.0 * (u - p(ilam_) * std::cos(phase)));
  if (param == "v0") return -std::sin(2.0 * (u - p(ilam_) * std::cos(phase)));
  return DriveModel::accel_dparam(param, u, phase);
}

std::unique_ptr<DriveModel> OpticalLatticeModel::clone() const {
  return std::make_unique<OpticalLatticeModel>(*this);
}

std::pair<Real, Real> OpticalLatticeModel::control_scan_range(std::string_view param) const {
  // Beyond 2*lam ~ 2.405 the Bessel-renormalized well depth changes sign and
  // the trap closes; stay on the stable side.
  if (param == "lam") return {0.02, 1.19};
  return {0.02, 5.0};
}

Real OpticalLatticeModel::omega_seed(Real) const {
  // Depth renormalized by the shaking: omega0^2 ~ 2 V0 J0(2 lam).
  const Real j0 = std::cyl_bessel_j(0.0, std::abs(2.0 * p(ilam_)));
  return std::sqrt(2.0 * p(iv0_) * std::max(j0, 0.02));
}

void OpticalLatticeModel::seed_coefficients(CoefficientTable& table) const {
  // Linear forced response u'' + 2 V0 u = 2 V0 lam cos(Omega zeta), Omega = 2.
  const int i10 = table.set.index_of(1, 0);
  if (i10 >= 0) {
    const Real v0 = p(iv0_);
    table.amplitudes[i10] = 2.0 * v0 * p(ilam_) / (2.0 * v0 - 4.0);
  }
}

// ---------------------------------------------------------------------------
// TargetPotential
// ---------------------------------------------------------------------------

Real TargetPotential::value(Real u, Real omega0) const {
  Real poly = u * u;
  for (const auto& [k, c] : c_coeffs) poly += c * std::pow(u, k);
  return 0.5 * omega0 * omega0 * poly;
}

Real TargetPotential::dvalue(Real u, Real omega0) const {
  Real poly = 2.0 * u;
  for (const auto& [k, c] : c_coeffs) poly += k * c * std::pow(u, k - 1);
  return 0.5 * omega0 * omega0 * poly;
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

std::unique_ptr<DriveModel> make_model(const std::string& name,
                                       const std::map<std::string, Real>& params) {
  std::unique_ptr<DriveModel> model;
  if (name == "mathieu") {
    model = std::make_unique<MathieuModel>(0.0, 0.0);
  } else if (name == "lattice") {
    model = std::make_unique<OpticalLatticeModel>(1.0, 0.0);
  } else {
    throw InvalidArgument("unknown model: " + name);
  }
  for (const auto& [key, value] : params) model->set_param(key, value);
  return model;
}

}  // namespace hbeng
