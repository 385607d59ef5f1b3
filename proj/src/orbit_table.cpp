#include "orbitherm/orbit_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"
#include "orbitherm/errors.hpp"
#include "orbitherm/parallel.hpp"

namespace orbitherm {

std::string ColumnRequest::id() const {
  if (op == Op::Bump) return "bump:" + set.key();
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", radius);
  return "time:" + set.key() + ":" + buf;
}

std::size_t OrbitTable::find_column(const std::string& id) const {
  for (std::size_t i = 0; i < column_ids.size(); ++i)
    if (column_ids[i] == id) return i;
  raise(errc::internal, "orbit table column missing: " + id);
}

namespace {

std::string word_key(const Word& w) {
  std::string k;
  for (int l : w) k.push_back(static_cast<char>(l + 16));
  return k;
}

bool rank_less_word(const Word& a, const Word& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return letter_rank(a[i]) < letter_rank(b[i]);
  return false;
}

bool is_parabolic_power(const SchottkyGroup& g, const Word& w) {
  if (!g.extended || g.parabolic_index < 0) return false;
  for (int l : w)
    if (std::abs(l) - 1 != g.parabolic_index) return false;
  return true;
}

}  // namespace

OrbitTable build_orbit_table(SetStore& store, int n_max, double quad_step,
                             std::vector<ColumnRequest> columns, int threads,
                             std::int64_t word_cap) {
  require(n_max >= 1, errc::invalid_config, "n_max must be >= 1");
  require(!columns.empty(), errc::invalid_config, "orbit table needs columns");
  const SchottkyGroup& g = store.group();

  // Close the column list under flipping so inverse classes can reuse their
  // partner's integrals.
  std::vector<std::size_t> flip_col(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    ColumnRequest flipped = columns[i];
    flipped.set = store.flip_set(columns[i].set);
    const std::string fid = flipped.id();
    std::size_t at = columns.size();
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (columns[j].id() == fid) {
        at = j;
        break;
      }
    if (at == columns.size()) {  // at now names the appended column
      columns.push_back(flipped);
      flip_col.push_back(i);
    }
    flip_col[i] = at;
  }
  for (const auto& col : columns) store.prepare(col.set);

  // Conjugacy classes by level, with primitives interned once per inverse pair.
  struct ClassRef {
    Word rep;
    int n = 0, mult = 0, power = 1;
    std::size_t prim = 0;  // leader primitive index
    bool follower = false;
  };
  struct Primitive {
    Word word;
    double ell = 0.0;
    std::vector<double> integrals;
  };
  std::vector<ClassRef> classes;
  std::vector<Primitive> prims;
  std::map<std::string, std::size_t> prim_index;
  std::vector<std::size_t> level_begin(static_cast<std::size_t>(n_max) + 2, 0);

  for (int n = 1; n <= n_max; ++n) {
    level_begin[n] = classes.size();
    for (const auto& cls : enumerate_cyclic_classes(g.rank(), n, word_cap)) {
      if (is_parabolic_power(g, cls.rep)) continue;
      ClassRef ref;
      ref.rep = cls.rep;
      ref.n = n;
      ref.mult = cls.mult;
      const int p = primitive_period(cls.rep);
      ref.power = n / p;
      Word prim = canonical_rotation(Word(cls.rep.begin(), cls.rep.begin() + p));
      Word inv = canonical_rotation(inverse_word(prim));
      ref.follower = rank_less_word(inv, prim);
      const Word& leader = ref.follower ? inv : prim;
      auto [it, fresh] = prim_index.try_emplace(word_key(leader), prims.size());
      if (fresh) prims.push_back({leader, 0.0, {}});
      ref.prim = it->second;
      classes.push_back(std::move(ref));
    }
  }
  level_begin[n_max + 1] = classes.size();

  // One sweep per leader primitive: sample its orbit once and integrate every
  // column by the closed-curve trapezoid rule.
  const std::size_t n_cols = columns.size();
  parallel_for(prims.size(), threads, [&](std::size_t pi) {
    Primitive& prim = prims[pi];
    OrbitSamples orbit = closed_geodesic_from_word(g, prim.word, quad_step);
    prim.ell = orbit.ell;
    const double h = orbit.ell / orbit.nodes.size();

    std::vector<KahanAccumulator> acc(n_cols);
    std::vector<double> dist(store.atomic_count() * 2);
    std::vector<char> have(store.atomic_count() * 2);
    for (const auto& node : orbit.nodes) {
      std::fill(have.begin(), have.end(), 0);
      auto term_dist = [&](const SetTerm& t) {
        const std::size_t slot = t.atomic * 2 + (t.flipped ? 1 : 0);
        if (!have[slot]) {
          CompiledSet single;
          single.terms.push_back(t);
          dist[slot] = store.distance(node, single);
          have[slot] = 1;
        }
        return dist[slot];
      };
      for (std::size_t ci = 0; ci < n_cols; ++ci) {
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& t : columns[ci].set.terms) dmin = std::min(dmin, term_dist(t));
        if (columns[ci].op == ColumnRequest::Op::Bump)
          acc[ci].add(1.0 / (1.0 + dmin));
        else if (dmin < columns[ci].radius)
          acc[ci].add(1.0);
      }
    }
    prim.integrals.resize(n_cols);
    for (std::size_t ci = 0; ci < n_cols; ++ci) prim.integrals[ci] = h * acc[ci].value();
  });

  OrbitTable table;
  table.n_max = n_max;
  table.quad_step = quad_step;
  for (const auto& col : columns) table.column_ids.push_back(col.id());
  table.level_begin = std::move(level_begin);
  table.rows.reserve(classes.size());
  for (const auto& ref : classes) {
    const Primitive& prim = prims[ref.prim];
    ClassRow row;
    row.rep = ref.rep;
    row.n = ref.n;
    row.mult = ref.mult;
    row.ell = ref.power * prim.ell;
    row.cols.resize(n_cols);
    for (std::size_t ci = 0; ci < n_cols; ++ci) {
      const std::size_t source = ref.follower ? flip_col[ci] : ci;
      require(source < prim.integrals.size(), errc::internal, "flip column out of range");
      row.cols[ci] = ref.power * prim.integrals[source];
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void save_orbit_table(const OrbitTable& t, const std::string& identity,
                      const std::filesystem::path& file) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["identity"] = identity;
  j["column_ids"] = t.column_ids;
  j["n_max"] = t.n_max;
  j["quad_step"] = t.quad_step;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json r;
    r["rep"] = row.rep;
    r["n"] = row.n;
    r["mult"] = row.mult;
    r["ell"] = row.ell;
    r["cols"] = row.cols;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  require(out.good(), errc::io_error, "cannot write orbit table cache");
  out << j.dump(1, '\t') << "\n";
  require(out.good(), errc::io_error, "orbit table cache write failed");
}

bool load_orbit_table(OrbitTable& t, const std::string& identity,
                      const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in.good()) return false;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return false;  // unreadable cache is treated as absent
  }
  if (!j.is_object() || !j.contains("identity") || !j["identity"].is_string() ||
      j["identity"].get<std::string>() != identity)
    return false;
  try {
    require(j.at("schema_version").get<int>() == 1, errc::stale_table,
            "orbit table cache has an unknown schema version");
    OrbitTable loaded;
    loaded.column_ids = j.at("column_ids").get<std::vector<std::string>>();
    loaded.n_max = j.at("n_max").get<int>();
    loaded.quad_step = j.at("quad_step").get<double>();
    for (const auto& r : j.at("rows")) {
      ClassRow row;
      row.rep = r.at("rep").get<Word>();
      row.n = r.at("n").get<int>();
      row.mult = r.at("mult").get<int>();
      row.ell = r.at("ell").get<double>();
      row.cols = r.at("cols").get<std::vector<double>>();
      require(row.cols.size() == loaded.column_ids.size(), errc::stale_table,
              "orbit table cache row has a wrong column count");
      loaded.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < loaded.rows.size(); ++i) {
      const int n = loaded.rows[i].n;
      require(n >= 1 && n <= loaded.n_max && (i == 0 || loaded.rows[i - 1].n <= n),
              errc::stale_table, "orbit table cache rows out of order");
    }
    loaded.level_begin.assign(static_cast<std::size_t>(loaded.n_max) + 2,
                              loaded.rows.size());
    loaded.level_begin[0] = 0;
    for (std::size_t i = loaded.rows.size(); i-- > 0;)
      loaded.level_begin[loaded.rows[i].n] = i;
    for (int n = loaded.n_max; n >= 1; --n)
      loaded.level_begin[n] =
          std::min(loaded.level_begin[n], loaded.level_begin[n + 1]);
    t = std::move(loaded);
  } catch (const nlohmann::json::exception&) {
    raise(errc::stale_table, "orbit table cache is malformed");
  }
  return true;
}

}  // namespace orbitherm
