#pragma once

// Run manifest: config echo, per-solve diagnostics, timings, and the output
// file list, written atomically (temp file + rename) at run end, also on
// partial failure.

#include <filesystem>
#include <string>
#include <vector>

#include "hbeng/types.hpp"

namespace hbeng {

class IoError : public Error {
 public:
  using Error::Error;
};

struct SolveRecord {
  std::string label;
  int iterations = 0;
  Real residual_norm = 0.0;
  bool converged = false;
  std::vector<Real> residual_trace;
};

struct RunManifest {
  std::string experiment;
  std::string config_echo;
  std::string tool_version;
  std::vector<SolveRecord> solves;
  std::vector<std::pair<std::string, Real>> results;  // named scalar outputs
  std::vector<std::pair<std::string, Real>> timings_ms;
  std::vector<std::string> artifacts;
  std::vector<std::string> failures;

  void write(const std::filesystem::path& path) const;
};

/// 17-significant-digit CSV writer (comma separator, '.' decimal point,
/// LF line endings). Empty cells encode per-point failures.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  ~CsvWriter();

  void header(const std::vector<std::string>& columns);
  void field(Real value);
  void field(const std::string& text);
  void empty_field();
  void end_row();

  static std::string format(Real value);

 private:
  std::string path_;
  std::string buffer_;
  int field_count_ = 0;
  bool closed_ = false;

  void flush_close();
  friend struct RunManifest;
};

}  // namespace hbeng
