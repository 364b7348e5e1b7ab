#include "hbeng/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

#ifndef HBENG_VERSION
#define HBENG_VERSION "0.0.0"
#endif

namespace hbeng {

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out.good()) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

}  // namespace

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["tool"] = "hbeng";
  j["version"] = tool_version.empty() ? HBENG_VERSION : tool_version;
  j["experiment"] = experiment;
  j["config_echo"] = config_echo;
  j["solves"] = nlohmann::ordered_json::array();
  for (const auto& s : solves) {
    nlohmann::ordered_json js;
    js["label"] = s.label;
    js["iterations"] = s.iterations;
    js["residual_norm"] = s.residual_norm;
    js["converged"] = s.converged;
    js["residual_trace"] = s.residual_trace;
    j["solves"].push_back(std::move(js));
  }
  j["results"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : results) j["results"][k] = v;
  j["timings_ms"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : timings_ms) j["timings_ms"][k] = v;
  j["artifacts"] = artifacts;
  j["failures"] = failures;
  atomic_write(path, j.dump(2) + "\n");
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path.string()) {}

CsvWriter::~CsvWriter() {
  try {
    flush_close();
  } catch (...) {
  }
}

std::string CsvWriter::format(Real value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void CsvWriter::header(const std::vector<std::string>& columns) {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += columns[i];
  }
  buffer_ += '\n';
}

void CsvWriter::field(Real value) {
  if (field_count_++) buffer_ += ',';
  buffer_ += format(value);
}

void CsvWriter::field(const std::string& text) {
  if (field_count_++) buffer_ += ',';
  buffer_ += text;
}

void CsvWriter::empty_field() {
  if (field_count_++) buffer_ += ',';
}

void CsvWriter::end_row() {
  buffer_ += '\n';
  field_count_ = 0;
}

void CsvWriter::flush_close() {
  if (closed_) return;
  closed_ = true;
  atomic_write(path_, buffer_);
}

}  // namespace hbeng
