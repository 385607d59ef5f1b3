#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace orbitherm {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

// Numeric cell formatting: shortest round-trip decimal, '.' separator.
std::string format_cell(double v);

// RFC-4180 CSV with LF line endings; all rows must match the header width.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const { return header_; }
  std::vector<std::string>& row(std::size_t i) { return rows_[i]; }
  std::size_t size() const { return rows_.size(); }
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Result envelope shared by every driver run.
struct ResultEnvelope {
  std::string config_hash;
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json verdicts = nlohmann::json::array();
  std::vector<std::string> failures;

  void add_verdict(const std::string& name, bool pass, const nlohmann::json& detail);
  nlohmann::json to_json() const;
  void write(const std::string& path) const;
  bool ok() const { return failures.empty(); }
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Cache directory for a config hash: <root>/<hash>, where <root> is the
// explicit argument, else $ORBITHERM_CACHE, else <out_dir>/cache.
std::string cache_dir_for(const std::string& cache_root, const std::string& out_dir,
                          const std::string& config_hash);

}  // namespace orbitherm
