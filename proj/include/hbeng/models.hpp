#pragma once

// Physical drive models: nonlinear acceleration functions F(u, drive phase)
// with named parameters. The drive phase is 2*xi in normalized time, so all
// built-in models have Omega = 2. Parameters carry a fixed/control
// designation; the inverse engine treats control parameters as unknowns.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hbeng/basis.hpp"
#include "hbeng/types.hpp"

namespace hbeng {

struct Param {
  std::string name;
  Real value = 0.0;
  bool control = false;
};

class DriveModel {
 public:
  virtual ~DriveModel() = default;

  virtual std::string name() const = 0;
  virtual Real accel(Real u, Real phase) const = 0;
  virtual Real accel_du(Real u, Real phase) const = 0;

  /// d(accel)/d(param). Default: central finite difference on a clone.
  virtual Real accel_dparam(std::string_view param, Real u, Real phase) const;

  virtual std::unique_ptr<DriveModel> clone() const = 0;

  const std::vector<Param>& params() const { return params_; }
  Real param(std::string_view name) const;
  void set_param(std::string_view name, Real value);
  bool has_param(std::string_view name) const;
  void designate_control(std::string_view name, bool on = true);
  std::vector<std::string> control_names() const;

  /// Plausible range for scanning a control during inverse seeding.
  virtual std::pair<Real, Real> control_scan_range(std::string_view param) const;

  /// Initial secular-frequency guess at small amplitude.
  virtual Real omega_seed(Real a01) const = 0;

  /// Fill lowest-order micromotion / forced-response amplitudes into a
  /// zeroed table whose (0,1) entry is already set.
  virtual void seed_coefficients(CoefficientTable& table) const;

 protected:
  DriveModel() = default;
  DriveModel(const DriveModel&) = default;
  DriveModel& operator=(const DriveModel&) = default;

  int add_param(std::string name, Real value, bool control = false);
  Real p(int i) const { return params_[static_cast<size_t>(i)].value; }

  virtual void on_param_changed() {}

 private:
  std::vector<Param> params_;
  int find(std::string_view name) const;
};

/// Nonlinear Mathieu trap:
///   accel(u, phi) = 2 q cos(phi) (u + 1/2 sum_k k a_k^ac u^(k-1))
///                   - a u - 1/2 sum_k k a~_k^dc u^(k-1)
/// with even nonlinear orders k in {4, 6, 8}. The DC anharmonicities are the
/// aggregated a~_k^dc = a * a_k^dc combinations, registered as alpha4_dc,
/// alpha6_dc, alpha8_dc.
class MathieuModel : public DriveModel {
 public:
  MathieuModel(Real q, Real a, const std::map<int, Real>& alpha_ac = {},
               const std::map<int, Real>& alpha_dc_tilde = {});

  std::string name() const override { return "mathieu"; }
  Real accel(Real u, Real phase) const override;
  Real accel_du(Real u, Real phase) const override;
  Real accel_dparam(std::string_view param, Real u, Real phase) const override;
  std::unique_ptr<DriveModel> clone() const override;
  std::pair<Real, Real> control_scan_range(std::string_view param) const override;

  Real omega_seed(Real a01) const override;
  void seed_coefficients(CoefficientTable& table) const override;

 private:
  int iq_, ia_, iac_[3], idc_[3];
};

/// Shaken optical lattice: accel(u, phi) = -V0 sin(2 (u - lambda cos(phi))).
class OpticalLatticeModel : public DriveModel {
 public:
  OpticalLatticeModel(Real v0, Real lam);

  std::string name() const override { return "lattice"; }
  Real accel(Real u, Real phase) const override;
  Real accel_du(Real u, Real phase) const override;
  Real accel_dparam(std::string_view param, Real u, Real phase) const override;
  std::unique_ptr<DriveModel> clone() const override;
  std::pair<Real, Real> control_scan_range(std::string_view param) const override;

  Real omega_seed(Real a01) const override;
  void seed_coefficients(CoefficientTable& table) const override;

 private:
  int iv0_, ilam_;
};

/// Target effective potential U_eff = 1/2 w0^2 (u^2 + sum_k C_k u^k),
/// even anharmonic orders k in {4, 6, 8}.
struct TargetPotential {
  std::map<int, Real> c_coeffs;

  Real value(Real u, Real omega0) const;
  Real dvalue(Real u, Real omega0) const;
};

std::unique_ptr<DriveModel> make_model(const std::string& name,
                                       const std::map<std::string, Real>& params);

}  // namespace hbeng
