#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "orbitherm/potentials.hpp"

namespace orbitherm {

// One integrated observable along closed orbits: either the bump 1/(1 + d) of
// a compiled set, or time spent within radius of it.
struct ColumnRequest {
  enum class Op { Bump, Time };
  Op op = Op::Bump;
  CompiledSet set;
  double radius = 0.0;  // Time only
  std::string id() const;
};

struct ClassRow {
  Word rep;      // canonical class representative, length n
  int n = 0;     // word length
  int mult = 0;  // class size (number of distinct rotations)
  double ell = 0.0;
  std::vector<double> cols;  // integrals of each column over the full period
};

struct OrbitTable {
  std::vector<std::string> column_ids;
  int n_max = 0;
  double quad_step = 0.0;
  std::vector<ClassRow> rows;            // level-major, deterministic order
  std::vector<std::size_t> level_begin;  // rows of level n: [level_begin[n], level_begin[n+1])
  std::size_t find_column(const std::string& id) const;
};

// Integrate the requested columns over every conjugacy class of word length
// <= n_max (parabolic powers carry no closed geodesic and are skipped).
// Non-primitive classes reuse their primitive root exactly; inverse classes
// reuse their partner through the flipped column, so only one orbit per
// inverse pair of primitives is ever swept.
OrbitTable build_orbit_table(SetStore& store, int n_max, double quad_step,
                             std::vector<ColumnRequest> columns, int threads,
                             std::int64_t word_cap);

// JSON cache round trip keyed by an exact identity string; doubles survive
// bit-for-bit.  load returns false when the file is absent or belongs to a
// different identity; a matching file with malformed contents raises.
void save_orbit_table(const OrbitTable& t, const std::string& identity,
                      const std::filesystem::path& file);
bool load_orbit_table(OrbitTable& t, const std::string& identity,
                      const std::filesystem::path& file);

}  // namespace orbitherm
