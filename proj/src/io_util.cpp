#include "orbitherm/io_util.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "orbitherm/errors.hpp"

namespace orbitherm {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string format_cell(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(std::vector<std::string> cells) {
  require(cells.size() == header_.size(), errc::internal, "CSV row width mismatch");
  rows_.push_back(std::move(cells));
}

std::string CsvWriter::str() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < header_.size(); ++i)
    out << (i ? "," : "") << csv_escape(header_[i]);
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << csv_escape(row[i]);
    out << '\n';
  }
  return out.str();
}

void CsvWriter::write(const std::string& path) const { write_text_file(path, str()); }

void ResultEnvelope::add_verdict(const std::string& name, bool pass,
                                 const nlohmann::json& detail) {
  nlohmann::json v;
  v["name"] = name;
  v["pass"] = pass;
  v["detail"] = detail;
  verdicts.push_back(v);
  if (!pass) failures.push_back(name);
}

nlohmann::json ResultEnvelope::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["tool_version"] = kToolVersion;
  j["schema_version"] = kSchemaVersion;
  j["rows"] = rows;
  j["verdicts"] = verdicts;
  j["failures"] = failures;
  return j;
}

void ResultEnvelope::write(const std::string& path) const {
  write_text_file(path, to_json().dump(1, '\t') + "\n");
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  require(!ec, errc::io_error, "cannot create directory " + p.parent_path().string());
  std::ofstream out(p, std::ios::binary);
  require(out.good(), errc::io_error, "cannot open " + path + " for writing");
  out << content;
  out.flush();
  require(out.good(), errc::io_error, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  require(!in.bad(), errc::io_error, "read failed for " + path);
  return buf.str();
}

std::string cache_dir_for(const std::string& cache_root, const std::string& out_dir,
                          const std::string& config_hash) {
  std::string root = cache_root;
  if (root.empty()) {
    if (const char* env = std::getenv("ORBITHERM_CACHE")) root = env;
  }
  if (root.empty()) root = out_dir + "/cache";
  return root + "/" + config_hash;
}

}  // namespace orbitherm
