#pragma once
#include <stdexcept>
#include <string>

namespace orbitherm {

enum class errc {
  numeric_overflow,
  ambiguous_classification,
  invalid_config,
  resource_limit,
  estimation_failure,
  reduction_limit,
  not_closed_geodesic,
  invalid_spec,
  quadrature_resolution,
  stale_table,
  bracket_failure,
  degenerate_weights,
  bisection_failure,
  family_error,
  invalid_target,
  schedule_failure,
  io_error,
  internal,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::numeric_overflow: return "numeric_overflow";
    case errc::ambiguous_classification: return "ambiguous_classification";
    case errc::invalid_config: return "invalid_config";
    case errc::resource_limit: return "resource_limit";
    case errc::estimation_failure: return "estimation_failure";
    case errc::reduction_limit: return "reduction_limit";
    case errc::not_closed_geodesic: return "not_closed_geodesic";
    case errc::invalid_spec: return "invalid_spec";
    case errc::quadrature_resolution: return "quadrature_resolution";
    case errc::stale_table: return "stale_table";
    case errc::bracket_failure: return "bracket_failure";
    case errc::degenerate_weights: return "degenerate_weights";
    case errc::bisection_failure: return "bisection_failure";
    case errc::family_error: return "family_error";
    case errc::invalid_target: return "invalid_target";
    case errc::schedule_failure: return "schedule_failure";
    case errc::io_error: return "io_error";
    case errc::internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, errc code, const std::string& msg) {
  if (!cond) raise(code, msg);
}

}  // namespace orbitherm
