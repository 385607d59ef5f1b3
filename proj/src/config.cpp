#include "orbitherm/config.hpp"

#include <cmath>
#include <initializer_list>

#include "json.hpp"
#include "orbitherm/errors.hpp"
#include "orbitherm/io_util.hpp"

namespace orbitherm {
namespace {

using nlohmann::json;

struct Violations {
  std::vector<std::string> items;
  void add(const std::string& path, const std::string& msg) {
    items.push_back(path + ": " + msg);
  }
  void raise_if_any() const {
    if (items.empty()) return;
    std::string msg = "config schema violations:";
    for (const auto& it : items) msg += "\n  " + it;
    raise(errc::invalid_config, msg);
  }
};

const json* get(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed, Violations& errs) {
  if (!j.is_object()) {
    errs.add(path.empty() ? "/" : path, "expected an object");
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) errs.add(path + "/" + it.key(), "unknown key");
  }
}

bool get_num(const json& j, const char* key, const std::string& path, Violations& errs,
             double& out) {
  const json* v = get(j, key);
  if (!v) return false;
  if (!v->is_number() || !std::isfinite(v->get<double>())) {
    errs.add(path + "/" + key, "expected a finite number");
    return false;
  }
  out = v->get<double>();
  return true;
}

bool get_int(const json& j, const char* key, const std::string& path, Violations& errs,
             long long& out) {
  const json* v = get(j, key);
  if (!v) return false;
  if (!v->is_number_integer()) {
    errs.add(path + "/" + key, "expected an integer");
    return false;
  }
  out = v->get<long long>();
  return true;
}

bool get_bool(const json& j, const char* key, const std::string& path, Violations& errs,
              bool& out) {
  const json* v = get(j, key);
  if (!v) return false;
  if (!v->is_boolean()) {
    errs.add(path + "/" + key, "expected a boolean");
    return false;
  }
  out = v->get<bool>();
  return true;
}

bool get_str(const json& j, const char* key, const std::string& path, Violations& errs,
             std::string& out) {
  const json* v = get(j, key);
  if (!v) return false;
  if (!v->is_string()) {
    errs.add(path + "/" + key, "expected a string");
    return false;
  }
  out = v->get<std::string>();
  return true;
}

Word parse_word(const json& j, const std::string& path, Violations& errs) {
  Word w;
  if (!j.is_array() || j.empty()) {
    errs.add(path, "expected a nonempty array of signed letters");
    return w;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() == 0 ||
        std::abs(j[i].get<long long>()) > 64) {
      errs.add(path + "/" + std::to_string(i), "letters are nonzero integers");
      return {};
    }
    w.push_back(static_cast<int>(j[i].get<long long>()));
  }
  return w;
}

std::vector<double> parse_num_array(const json& j, const std::string& path,
                                    Violations& errs) {
  std::vector<double> out;
  if (!j.is_array() || j.empty()) {
    errs.add(path, "expected a nonempty array of numbers");
    return out;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number() || !std::isfinite(j[i].get<double>())) {
      errs.add(path + "/" + std::to_string(i), "expected a finite number");
      return {};
    }
    out.push_back(j[i].get<double>());
  }
  return out;
}

std::vector<int> parse_int_array(const json& j, const std::string& path, Violations& errs) {
  std::vector<int> out;
  if (!j.is_array() || j.empty()) {
    errs.add(path, "expected a nonempty array of integers");
    return out;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) {
      errs.add(path + "/" + std::to_string(i), "expected an integer");
      return {};
    }
    out.push_back(static_cast<int>(j[i].get<long long>()));
  }
  return out;
}

InvariantSetSpec parse_set(const json& j, const std::string& path, Violations& errs) {
  InvariantSetSpec spec;
  std::string kind;
  if (!j.is_object() || !get_str(j, "kind", path, errs, kind)) {
    errs.add(path, "set spec needs a \"kind\"");
    return spec;
  }
  if (kind == "closed_orbit") {
    check_keys(j, path, {"kind", "word"}, errs);
    if (const json* w = get(j, "word"))
      spec = InvariantSetSpec::closed_orbit(parse_word(*w, path + "/word", errs));
    else
      errs.add(path + "/word", "missing required key");
  } else if (kind == "subgroup_core") {
    check_keys(j, path, {"kind", "generators", "depth"}, errs);
    std::vector<PoweredGen> gens;
    const json* garr = get(j, "generators");
    if (!garr || !garr->is_array() || garr->empty()) {
      errs.add(path + "/generators", "expected a nonempty array");
    } else {
      for (std::size_t i = 0; i < garr->size(); ++i) {
        const std::string gp = path + "/generators/" + std::to_string(i);
        check_keys((*garr)[i], gp, {"index", "power"}, errs);
        long long index = 0, power = 1;
        if (!get_int((*garr)[i], "index", gp, errs, index))
          errs.add(gp + "/index", "missing required key");
        get_int((*garr)[i], "power", gp, errs, power);
        if (index < 1 || index > 64) errs.add(gp + "/index", "index must be in [1, 64]");
        if (power < 1 || power > 256) errs.add(gp + "/power", "power must be in [1, 256]");
        gens.push_back({static_cast<int>(index), static_cast<int>(power)});
      }
    }
    long long depth = 3;
    get_int(j, "depth", path, errs, depth);
    if (depth < 1 || depth > 8) errs.add(path + "/depth", "depth must be in [1, 8]");
    spec.kind = InvariantSetSpec::Kind::SubgroupCore;
    spec.gens = std::move(gens);
    spec.sample_depth = static_cast<int>(depth);
  } else if (kind == "flipped") {
    check_keys(j, path, {"kind", "inner"}, errs);
    if (const json* inner = get(j, "inner"))
      spec = InvariantSetSpec::flipped(parse_set(*inner, path + "/inner", errs));
    else
      errs.add(path + "/inner", "missing required key");
  } else if (kind == "union") {
    check_keys(j, path, {"kind", "parts"}, errs);
    const json* parts = get(j, "parts");
    if (!parts || !parts->is_array() || parts->empty()) {
      errs.add(path + "/parts", "expected a nonempty array");
    } else {
      std::vector<InvariantSetSpec> inner;
      for (std::size_t i = 0; i < parts->size(); ++i)
        inner.push_back(parse_set((*parts)[i], path + "/parts/" + std::to_string(i), errs));
      spec = InvariantSetSpec::unite(std::move(inner));
    }
  } else {
    errs.add(path + "/kind",
             "unknown set kind (closed_orbit, subgroup_core, flipped, union)");
  }
  return spec;
}

PotentialSpec parse_potential(const json& j, const std::string& path, Violations& errs) {
  PotentialSpec spec = PotentialSpec::constant(0.0);
  std::string kind;
  if (!j.is_object() || !get_str(j, "kind", path, errs, kind)) {
    errs.add(path, "potential spec needs a \"kind\"");
    return spec;
  }
  if (kind == "bump" || kind == "tail") {
    check_keys(j, path, {"kind", "target"}, errs);
    if (const json* t = get(j, "target")) {
      InvariantSetSpec target = parse_set(*t, path + "/target", errs);
      spec = kind == "bump" ? PotentialSpec::bump(std::move(target))
                            : PotentialSpec::tail(std::move(target));
    } else {
      errs.add(path + "/target", "missing required key");
    }
  } else if (kind == "constant") {
    check_keys(j, path, {"kind", "value"}, errs);
    double value = 0.0;
    if (!get_num(j, "value", path, errs, value))
      errs.add(path + "/value", "missing required key");
    spec = PotentialSpec::constant(value);
  } else if (kind == "scaled") {
    check_keys(j, path, {"kind", "factor", "inner"}, errs);
    double factor = 0.0;
    if (!get_num(j, "factor", path, errs, factor))
      errs.add(path + "/factor", "missing required key");
    if (const json* inner = get(j, "inner"))
      spec = PotentialSpec::scaled(factor, parse_potential(*inner, path + "/inner", errs));
    else
      errs.add(path + "/inner", "missing required key");
  } else if (kind == "weighted_sum") {
    check_keys(j, path, {"kind", "weights", "parts"}, errs);
    std::vector<double> weights;
    std::vector<PotentialSpec> parts;
    if (const json* w = get(j, "weights"))
      weights = parse_num_array(*w, path + "/weights", errs);
    else
      errs.add(path + "/weights", "missing required key");
    if (const json* p = get(j, "parts")) {
      if (!p->is_array() || p->empty()) {
        errs.add(path + "/parts", "expected a nonempty array");
      } else {
        for (std::size_t i = 0; i < p->size(); ++i)
          parts.push_back(parse_potential((*p)[i], path + "/parts/" + std::to_string(i), errs));
      }
    } else {
      errs.add(path + "/parts", "missing required key");
    }
    if (weights.size() != parts.size() || parts.empty()) {
      errs.add(path, "weights and parts must be matching nonempty arrays");
      return spec;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] > 0.0))
        errs.add(path + "/weights/" + std::to_string(i),
                 "F-sum constraint: weights must be positive");
      else if (i > 0 && !(weights[i] <= weights[i - 1] / 2.0))
        errs.add(path + "/weights/" + std::to_string(i),
                 "F-sum constraint: weights must satisfy w[k+1] <= w[k]/2");
    }
    try {
      spec = PotentialSpec::weighted_sum(std::move(weights), std::move(parts));
    } catch (const Error&) {
      // already reported with pointer paths above
    }
  } else {
    errs.add(path + "/kind",
             "unknown potential kind (bump, tail, constant, scaled, weighted_sum)");
  }
  return spec;
}

void parse_group(const json& j, const std::string& path, Violations& errs,
                 ExperimentConfig& cfg) {
  check_keys(j, path,
             {"generators", "disks", "basepoint", "extended", "parabolic_s"}, errs);
  std::vector<Isometry> mats;
  const json* gens = get(j, "generators");
  if (!gens || !gens->is_array() || gens->empty()) {
    errs.add(path + "/generators", "expected a nonempty array of generators");
    return;
  }
  for (std::size_t i = 0; i < gens->size(); ++i) {
    const std::string gp = path + "/generators/" + std::to_string(i);
    const std::vector<double> entries = parse_num_array((*gens)[i], gp, errs);
    if (entries.size() != 4) {
      errs.add(gp, "a generator is 4 reals [a, b, c, d]");
      return;
    }
    try {
      mats.emplace_back(entries[0], entries[1], entries[2], entries[3]);
    } catch (const Error& e) {
      errs.add(gp, e.what());
      return;
    }
  }

  HPoint basepoint{0.0, 1.0};
  if (const json* bp = get(j, "basepoint")) {
    const std::vector<double> xy = parse_num_array(*bp, path + "/basepoint", errs);
    if (xy.size() != 2 || !(xy[1] > 0.0)) {
      errs.add(path + "/basepoint", "expected [x, y] with y > 0");
      return;
    }
    basepoint = {xy[0], xy[1]};
  }

  bool extended = false;
  get_bool(j, "extended", path, errs, extended);
  double parabolic_s = 0.0;
  const bool has_s = get_num(j, "parabolic_s", path, errs, parabolic_s);
  if (extended && (!has_s || !(parabolic_s > 0.0))) {
    errs.add(path + "/parabolic_s", "extended groups need parabolic_s > 0");
    return;
  }
  if (!extended && mats.size() < 2) {
    errs.add(path + "/generators",
             "need at least two generators (or one with \"extended\": true)");
    return;
  }
  if (!extended && get(j, "parabolic_s")) {
    errs.add(path + "/parabolic_s", "only valid with \"extended\": true");
    return;
  }

  const json* disks = get(j, "disks");
  if (!disks) {
    errs.add(path + "/disks", "missing required key");
    return;
  }
  std::vector<GeneratorDisks> gd;
  if (!disks->is_array() || disks->size() != mats.size()) {
    errs.add(path + "/disks", "expected one disk pair per generator");
    return;
  }
  for (std::size_t i = 0; i < disks->size(); ++i) {
    const std::string dp = path + "/disks/" + std::to_string(i);
    check_keys((*disks)[i], dp, {"minus", "plus"}, errs);
    GeneratorDisks pair;
    Disk* slots[2] = {&pair.minus, &pair.plus};
    const char* names[2] = {"minus", "plus"};
    for (int s = 0; s < 2; ++s) {
      const json* d = get((*disks)[i], names[s]);
      const std::string sp = dp + "/" + names[s];
      if (!d) {
        errs.add(sp, "missing required key");
        return;
      }
      check_keys(*d, sp, {"center", "radius"}, errs);
      double center = 0.0, radius = 0.0;
      if (!get_num(*d, "center", sp, errs, center) ||
          !get_num(*d, "radius", sp, errs, radius) || !(radius > 0.0)) {
        errs.add(sp, "expected {center, radius} with radius > 0");
        return;
      }
      *slots[s] = Disk{center, radius};
    }
    gd.push_back(pair);
  }

  try {
    cfg.group = extended ? make_extended_schottky(parabolic_s, mats, basepoint)
                         : make_schottky(mats, basepoint);
    override_disks(cfg.group, gd);
  } catch (const Error& e) {
    errs.add(path, e.what());
  }
}

void parse_knobs(const json& j, const std::string& path, Violations& errs, Knobs& k) {
  check_keys(j, path,
             {"set_step", "quad_step", "neighbor_depth", "grid_steps", "shell_len",
              "cluster_size", "word_cap", "extrapolation"},
             errs);
  get_num(j, "set_step", path, errs, k.set_step);
  get_num(j, "quad_step", path, errs, k.quad_step);
  long long v = 0;
  if (get_int(j, "neighbor_depth", path, errs, v)) k.neighbor_depth = static_cast<int>(v);
  if (get_int(j, "grid_steps", path, errs, v)) k.grid_steps = static_cast<int>(v);
  if (get_int(j, "shell_len", path, errs, v)) k.shell_len = static_cast<int>(v);
  if (get_int(j, "cluster_size", path, errs, v)) k.cluster_size = static_cast<int>(v);
  if (get_int(j, "word_cap", path, errs, v)) k.word_cap = v;
  get_str(j, "extrapolation", path, errs, k.extrapolation);

  if (!(k.set_step >= 0.005 && k.set_step <= 1.0))
    errs.add(path + "/set_step", "must be in [0.005, 1]");
  if (!(k.quad_step >= 0.005 && k.quad_step <= 1.0))
    errs.add(path + "/quad_step", "must be in [0.005, 1]");
  if (k.neighbor_depth < 0 || k.neighbor_depth > 4)
    errs.add(path + "/neighbor_depth", "must be in [0, 4]");
  if (k.grid_steps < 2 || k.grid_steps > 1025)
    errs.add(path + "/grid_steps", "must be in [2, 1025]");
  if (k.shell_len < 5 || k.shell_len > 14)
    errs.add(path + "/shell_len", "must be in [5, 14]");
  if (k.cluster_size < 1 || k.cluster_size > 1024)
    errs.add(path + "/cluster_size", "must be in [1, 1024]");
  if (k.word_cap < 1 || k.word_cap > 100000000)
    errs.add(path + "/word_cap", "must be in [1, 1e8]");
  if (k.extrapolation != "richardson" && k.extrapolation != "aitken" &&
      k.extrapolation != "top_level")
    errs.add(path + "/extrapolation", "one of richardson, aitken, top_level");
}

void parse_exponents(const json& j, const std::string& path, Violations& errs,
                     ExponentsConfig& e) {
  e.present = true;
  check_keys(j, path, {"cyclic", "nested"}, errs);
  if (const json* cyc = get(j, "cyclic")) {
    if (!cyc->is_array()) {
      errs.add(path + "/cyclic", "expected an array");
    } else {
      for (std::size_t i = 0; i < cyc->size(); ++i) {
        const std::string cp = path + "/cyclic/" + std::to_string(i);
        check_keys((*cyc)[i], cp, {"name", "letter", "matrix", "n_max"}, errs);
        ExponentsConfig::CyclicEntry entry;
        if (!get_str((*cyc)[i], "name", cp, errs, entry.name))
          errs.add(cp + "/name", "missing required key");
        long long v = 0;
        if (get_int((*cyc)[i], "n_max", cp, errs, v)) entry.n_max = static_cast<int>(v);
        if (entry.n_max < 8 || entry.n_max > 4096)
          errs.add(cp + "/n_max", "must be in [8, 4096]");
        const bool has_letter = get_int((*cyc)[i], "letter", cp, errs, v);
        const json* mat = get((*cyc)[i], "matrix");
        if (has_letter == (mat != nullptr)) {
          errs.add(cp, "give exactly one of \"letter\" or \"matrix\"");
          continue;
        }
        if (has_letter) {
          entry.by_letter = true;
          entry.letter = static_cast<int>(v);
          if (entry.letter == 0 || std::abs(entry.letter) > 64)
            errs.add(cp + "/letter", "letters are nonzero integers");
        } else {
          entry.by_letter = false;
          const std::vector<double> entries = parse_num_array(*mat, cp + "/matrix", errs);
          if (entries.size() != 4) {
            errs.add(cp + "/matrix", "a matrix is 4 reals [a, b, c, d]");
            continue;
          }
          try {
            entry.matrix = Isometry(entries[0], entries[1], entries[2], entries[3]);
          } catch (const Error& err) {
            errs.add(cp + "/matrix", err.what());
            continue;
          }
        }
        e.cyclic.push_back(entry);
      }
    }
  }
  if (const json* nested = get(j, "nested")) {
    e.has_nested = true;
    check_keys(*nested, path + "/nested", {"plus", "minus", "n_list", "core_depth"}, errs);
    auto pair_of = [&](const char* key, int out[2]) {
      const json* arr = get(*nested, key);
      const std::string pp = path + "/nested/" + key;
      if (!arr) {
        errs.add(pp, "missing required key");
        return;
      }
      const std::vector<int> v = parse_int_array(*arr, pp, errs);
      if (v.size() != 2 || v[0] < 1 || v[1] < 1 || v[0] == v[1]) {
        errs.add(pp, "expected two distinct generator indices");
        return;
      }
      out[0] = v[0];
      out[1] = v[1];
    };
    pair_of("plus", e.nested_plus);
    pair_of("minus", e.nested_minus);
    if (const json* nl = get(*nested, "n_list")) {
      e.nested_n_list = parse_int_array(*nl, path + "/nested/n_list", errs);
      for (int n : e.nested_n_list)
        if (n < 0 || n > 10) errs.add(path + "/nested/n_list", "entries must be in [0, 10]");
    } else {
      errs.add(path + "/nested/n_list", "missing required key");
    }
    long long v = 0;
    if (get_int(*nested, "core_depth", path + "/nested", errs, v))
      e.core_depth = static_cast<int>(v);
    if (e.core_depth < 1 || e.core_depth > 8)
      errs.add(path + "/nested/core_depth", "must be in [1, 8]");
  }
}

void parse_zero_temp(const json& j, const std::string& path, Violations& errs,
                     ZeroTempConfig& z) {
  z.present = true;
  check_keys(j, path,
             {"target", "radius", "eps_target", "entropy_tol", "t0_entropy_tol"}, errs);
  if (const json* t = get(j, "target")) {
    z.target = parse_set(*t, path + "/target", errs);
    if (z.target.kind != InvariantSetSpec::Kind::ClosedOrbit &&
        z.target.kind != InvariantSetSpec::Kind::SubgroupCore)
      errs.add(path + "/target", "target must be a closed_orbit or subgroup_core");
  } else {
    errs.add(path + "/target", "missing required key");
  }
  get_num(j, "radius", path, errs, z.radius);
  get_num(j, "eps_target", path, errs, z.eps_target);
  get_num(j, "entropy_tol", path, errs, z.entropy_tol);
  get_num(j, "t0_entropy_tol", path, errs, z.t0_entropy_tol);
  if (!(z.radius > 0.0 && z.radius <= 2.0))
    errs.add(path + "/radius", "must be in (0, 2]");
  if (!(z.eps_target > 0.0 && z.eps_target < 1.0))
    errs.add(path + "/eps_target", "must be in (0, 1)");
}

void parse_intermediate(const json& j, const std::string& path, Violations& errs,
                        IntermediateConfig& c) {
  c.present = true;
  check_keys(j, path, {"target_fracs", "tol", "max_evals"}, errs);
  if (const json* f = get(j, "target_fracs")) {
    c.target_fracs = parse_num_array(*f, path + "/target_fracs", errs);
    for (double frac : c.target_fracs)
      if (!(frac > 0.0 && frac < 1.0))
        errs.add(path + "/target_fracs", "fractions must lie in (0, 1)");
  }
  get_num(j, "tol", path, errs, c.tol);
  long long v = 0;
  if (get_int(j, "max_evals", path, errs, v)) c.max_evals = static_cast<int>(v);
  if (!(c.tol > 0.0)) errs.add(path + "/tol", "must be positive");
  if (c.max_evals < 3 || c.max_evals > 1000)
    errs.add(path + "/max_evals", "must be in [3, 1000]");
}

void parse_nonergodic(const json& j, const std::string& path, Violations& errs,
                      NonergodicConfig& c) {
  c.present = true;
  check_keys(j, path, {"target_word", "radius", "t_max", "mass_tol", "combined_min"},
             errs);
  if (const json* w = get(j, "target_word"))
    c.target_word = parse_word(*w, path + "/target_word", errs);
  else
    errs.add(path + "/target_word", "missing required key");
  get_num(j, "radius", path, errs, c.radius);
  get_num(j, "t_max", path, errs, c.t_max);
  get_num(j, "mass_tol", path, errs, c.mass_tol);
  get_num(j, "combined_min", path, errs, c.combined_min);
  if (!(c.radius > 0.0 && c.radius <= 2.0)) errs.add(path + "/radius", "must be in (0, 2]");
  if (!(c.t_max > 0.0)) errs.add(path + "/t_max", "must be positive");
}

void parse_divergence(const json& j, const std::string& path, Violations& errs,
                      DivergenceConfig& c) {
  c.present = true;
  check_keys(j, path,
             {"stages", "delta1", "t_start", "t_cap", "delta_min", "radius"}, errs);
  const json* stages = get(j, "stages");
  if (!stages || !stages->is_array() || stages->empty()) {
    errs.add(path + "/stages", "expected a nonempty array");
  } else {
    double prev_eps = 0.0;
    for (std::size_t i = 0; i < stages->size(); ++i) {
      const std::string sp = path + "/stages/" + std::to_string(i);
      check_keys((*stages)[i], sp, {"bump_target", "region", "eps"}, errs);
      DivergenceStageConfig stage;
      if (const json* t = get((*stages)[i], "bump_target"))
        stage.bump = PotentialSpec::bump(parse_set(*t, sp + "/bump_target", errs));
      else
        errs.add(sp + "/bump_target", "missing required key");
      if (const json* r = get((*stages)[i], "region"))
        stage.region = parse_set(*r, sp + "/region", errs);
      else
        errs.add(sp + "/region", "missing required key");
      get_num((*stages)[i], "eps", sp, errs, stage.eps);
      if (!(stage.eps > 0.0 && stage.eps < 1.0))
        errs.add(sp + "/eps", "must be in (0, 1)");
      if (i > 0 && stage.eps > prev_eps)
        errs.add(sp + "/eps", "stage tolerances must be non-increasing");
      prev_eps = stage.eps;
      c.stages.push_back(std::move(stage));
    }
  }
  get_num(j, "delta1", path, errs, c.delta1);
  get_num(j, "t_start", path, errs, c.t_start);
  get_num(j, "t_cap", path, errs, c.t_cap);
  get_num(j, "delta_min", path, errs, c.delta_min);
  get_num(j, "radius", path, errs, c.radius);
  if (!(c.delta1 > 0.0)) errs.add(path + "/delta1", "must be positive");
  if (!(c.t_cap > c.t_start && c.t_start > 0.0))
    errs.add(path + "/t_cap", "need 0 < t_start < t_cap");
  if (!(c.delta_min > 0.0 && c.delta_min < c.delta1))
    errs.add(path + "/delta_min", "must be in (0, delta1)");
  if (!(c.radius > 0.0 && c.radius <= 2.0)) errs.add(path + "/radius", "must be in (0, 2]");
}

void parse_no_maximizer(const json& j, const std::string& path, Violations& errs,
                        NoMaximizerConfig& c) {
  c.present = true;
  check_keys(
      j, path,
      {"parabolic_letter", "tail_word", "n_list", "margin", "s_grid", "psi", "expect"},
      errs);
  long long v = 0;
  if (get_int(j, "parabolic_letter", path, errs, v)) c.parabolic_letter = static_cast<int>(v);
  if (c.parabolic_letter == 0 || std::abs(c.parabolic_letter) > 64)
    errs.add(path + "/parabolic_letter", "letters are nonzero integers");
  if (const json* w = get(j, "tail_word"))
    c.tail_word = parse_word(*w, path + "/tail_word", errs);
  if (const json* nl = get(j, "n_list")) {
    c.n_list = parse_int_array(*nl, path + "/n_list", errs);
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
      if (c.n_list[i] < 1 || c.n_list[i] > 100000)
        errs.add(path + "/n_list", "entries must be in [1, 1e5]");
      if (i > 0 && c.n_list[i] <= c.n_list[i - 1])
        errs.add(path + "/n_list", "entries must be strictly increasing");
    }
  }
  get_num(j, "margin", path, errs, c.margin);
  if (!(c.margin > 0.0)) errs.add(path + "/margin", "must be positive");
  if (const json* s = get(j, "s_grid")) {
    c.s_grid = parse_num_array(*s, path + "/s_grid", errs);
    for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
      if (c.s_grid[i] < 0.0) errs.add(path + "/s_grid", "tilts must be nonnegative");
      if (i > 0 && c.s_grid[i] <= c.s_grid[i - 1])
        errs.add(path + "/s_grid", "grid must be strictly increasing");
    }
  }
  if (const json* p = get(j, "psi")) {
    c.has_psi = true;
    c.psi = parse_potential(*p, path + "/psi", errs);
  }
  get_str(j, "expect", path, errs, c.expect);
  if (!c.expect.empty() && c.expect != "maximizer_expected" &&
      c.expect != "full_escape_expected")
    errs.add(path + "/expect", "one of maximizer_expected, full_escape_expected");
}

void parse_density(const json& j, const std::string& path, Violations& errs,
                   DensityConfig& c) {
  c.present = true;
  check_keys(j, path, {"target_word", "tests", "deviation_max"}, errs);
  if (const json* w = get(j, "target_word"))
    c.target_word = parse_word(*w, path + "/target_word", errs);
  else
    errs.add(path + "/target_word", "missing required key");
  const json* tests = get(j, "tests");
  if (!tests || !tests->is_array() || tests->empty()) {
    errs.add(path + "/tests", "expected a nonempty array");
  } else {
    for (std::size_t i = 0; i < tests->size(); ++i) {
      const std::string tp = path + "/tests/" + std::to_string(i);
      check_keys((*tests)[i], tp, {"name", "potential"}, errs);
      std::string name;
      if (!get_str((*tests)[i], "name", tp, errs, name))
        errs.add(tp + "/name", "missing required key");
      if (const json* p = get((*tests)[i], "potential"))
        c.tests.emplace_back(name, parse_potential(*p, tp + "/potential", errs));
      else
        errs.add(tp + "/potential", "missing required key");
    }
  }
  get_num(j, "deviation_max", path, errs, c.deviation_max);
  if (!(c.deviation_max > 0.0)) errs.add(path + "/deviation_max", "must be positive");
}

// Letters referenced anywhere must exist in the group; closed-orbit words must
// be cyclically reduced so they name conjugacy classes.
void check_set_letters(const InvariantSetSpec& spec, const std::string& path, int rank,
                       Violations& errs) {
  switch (spec.kind) {
    case InvariantSetSpec::Kind::ClosedOrbit:
      for (int l : spec.word)
        if (std::abs(l) > rank) errs.add(path, "letter out of range for the group");
      if (!spec.word.empty() && !is_cyclically_reduced(spec.word))
        errs.add(path, "closed-orbit word must be cyclically reduced");
      break;
    case InvariantSetSpec::Kind::SubgroupCore:
      for (const auto& pg : spec.gens)
        if (pg.index > rank) errs.add(path, "generator index out of range for the group");
      break;
    case InvariantSetSpec::Kind::Flipped:
    case InvariantSetSpec::Kind::Union:
      for (std::size_t i = 0; i < spec.parts.size(); ++i)
        check_set_letters(spec.parts[i], path, rank, errs);
      break;
  }
}

void check_potential_letters(const PotentialSpec& spec, const std::string& path, int rank,
                             Violations& errs) {
  switch (spec.kind) {
    case PotentialSpec::Kind::Bump:
    case PotentialSpec::Kind::Tail:
      check_set_letters(spec.target, path, rank, errs);
      break;
    case PotentialSpec::Kind::Constant:
      break;
    case PotentialSpec::Kind::Scaled:
    case PotentialSpec::Kind::WeightedSum:
      for (const auto& term : spec.terms)
        check_potential_letters(term, path, rank, errs);
      break;
  }
}

void check_word_letters(const Word& w, const std::string& path, int rank,
                        Violations& errs) {
  for (int l : w)
    if (std::abs(l) > rank) errs.add(path, "letter out of range for the group");
  if (!w.empty() && !is_cyclically_reduced(w))
    errs.add(path, "word must be cyclically reduced");
}

}  // namespace

ExperimentConfig parse_config(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    raise(errc::invalid_config, std::string("config is not valid JSON: ") + e.what());
  }

  Violations errs;
  check_keys(j, "",
             {"group", "potential", "t_grid", "n_range", "knobs", "regions", "reference",
              "seed", "experiment"},
             errs);

  ExperimentConfig cfg;
  if (const json* g = get(j, "group"))
    parse_group(*g, "/group", errs, cfg);
  else
    errs.add("/group", "missing required section");

  if (const json* p = get(j, "potential")) {
    cfg.has_potential = true;
    cfg.potential = parse_potential(*p, "/potential", errs);
  }
  if (const json* t = get(j, "t_grid")) {
    cfg.t_grid = parse_num_array(*t, "/t_grid", errs);
    for (std::size_t i = 1; i < cfg.t_grid.size(); ++i)
      if (cfg.t_grid[i] <= cfg.t_grid[i - 1]) {
        errs.add("/t_grid", "grid must be strictly increasing");
        break;
      }
  }
  if (const json* nr = get(j, "n_range")) {
    const std::vector<int> range = parse_int_array(*nr, "/n_range", errs);
    if (range.size() != 2 || range[0] < 1 || range[0] > range[1] || range[1] > 16)
      errs.add("/n_range", "expected [lo, hi] with 1 <= lo <= hi <= 16");
    else {
      cfg.n_lo = range[0];
      cfg.n_hi = range[1];
    }
  }
  if (const json* k = get(j, "knobs")) parse_knobs(*k, "/knobs", errs, cfg.knobs);
  if (const json* r = get(j, "regions")) {
    if (!r->is_array()) {
      errs.add("/regions", "expected an array");
    } else {
      for (std::size_t i = 0; i < r->size(); ++i) {
        const std::string rp = "/regions/" + std::to_string(i);
        check_keys((*r)[i], rp, {"name", "set", "radius", "complement"}, errs);
        RegionConfig region;
        if (!get_str((*r)[i], "name", rp, errs, region.name))
          errs.add(rp + "/name", "missing required key");
        if (const json* s = get((*r)[i], "set"))
          region.set = parse_set(*s, rp + "/set", errs);
        else
          errs.add(rp + "/set", "missing required key");
        get_num((*r)[i], "radius", rp, errs, region.radius);
        get_bool((*r)[i], "complement", rp, errs, region.complement);
        if (!(region.radius > 0.0 && region.radius <= 2.0))
          errs.add(rp + "/radius", "must be in (0, 2]");
        cfg.regions.push_back(std::move(region));
      }
    }
  }
  if (const json* ref = get(j, "reference")) {
    check_keys(*ref, "/reference", {"h_inf_reference"}, errs);
    cfg.has_h_inf = get_num(*ref, "h_inf_reference", "/reference", errs,
                            cfg.h_inf_reference);
  }
  long long seed = 1;
  if (get_int(j, "seed", "", errs, seed)) {
    if (seed < 0)
      errs.add("/seed", "must be nonnegative");
    else
      cfg.seed = static_cast<std::uint64_t>(seed);
  }

  if (const json* exp = get(j, "experiment")) {
    check_keys(*exp, "/experiment",
               {"exponents", "zero_temp", "intermediate", "nonergodic", "divergence",
                "no_maximizer", "density", "pressure_checks"},
               errs);
    if (const json* e = get(*exp, "exponents"))
      parse_exponents(*e, "/experiment/exponents", errs, cfg.exponents);
    if (const json* z = get(*exp, "zero_temp"))
      parse_zero_temp(*z, "/experiment/zero_temp", errs, cfg.zero_temp);
    if (const json* c = get(*exp, "intermediate"))
      parse_intermediate(*c, "/experiment/intermediate", errs, cfg.intermediate);
    if (const json* c = get(*exp, "nonergodic"))
      parse_nonergodic(*c, "/experiment/nonergodic", errs, cfg.nonergodic);
    if (const json* c = get(*exp, "divergence"))
      parse_divergence(*c, "/experiment/divergence", errs, cfg.divergence);
    if (const json* c = get(*exp, "no_maximizer"))
      parse_no_maximizer(*c, "/experiment/no_maximizer", errs, cfg.no_maximizer);
    if (const json* c = get(*exp, "density"))
      parse_density(*c, "/experiment/density", errs, cfg.density);
    if (const json* pc = get(*exp, "pressure_checks")) {
      check_keys(*pc, "/experiment/pressure_checks",
                 {"convexity_tol", "fd_tol", "beta_floor_tol"}, errs);
      get_num(*pc, "convexity_tol", "/experiment/pressure_checks", errs,
              cfg.pressure_checks.convexity_tol);
      get_num(*pc, "fd_tol", "/experiment/pressure_checks", errs,
              cfg.pressure_checks.fd_tol);
      get_num(*pc, "beta_floor_tol", "/experiment/pressure_checks", errs,
              cfg.pressure_checks.beta_floor_tol);
    }
  }

  // Letter-range and reducedness checks once the group is known.
  if (!cfg.group.generators.empty()) {
    const int rank = cfg.group.rank();
    if (cfg.has_potential) check_potential_letters(cfg.potential, "/potential", rank, errs);
    for (std::size_t i = 0; i < cfg.regions.size(); ++i)
      check_set_letters(cfg.regions[i].set, "/regions/" + std::to_string(i) + "/set", rank,
                        errs);
    if (cfg.zero_temp.present)
      check_set_letters(cfg.zero_temp.target, "/experiment/zero_temp/target", rank, errs);
    if (cfg.nonergodic.present)
      check_word_letters(cfg.nonergodic.target_word, "/experiment/nonergodic/target_word",
                         rank, errs);
    if (cfg.divergence.present)
      for (std::size_t i = 0; i < cfg.divergence.stages.size(); ++i) {
        const std::string sp = "/experiment/divergence/stages/" + std::to_string(i);
        check_potential_letters(cfg.divergence.stages[i].bump, sp + "/bump_target", rank,
                                errs);
        check_set_letters(cfg.divergence.stages[i].region, sp + "/region", rank, errs);
      }
    if (cfg.no_maximizer.present) {
      if (cfg.group.extended && cfg.no_maximizer.tail_word.empty())
        errs.add("/experiment/no_maximizer/tail_word",
                 "required on extended groups (the escaping family needs a tail)");
      if (cfg.group.extended && cfg.no_maximizer.n_list.empty())
        errs.add("/experiment/no_maximizer/n_list", "required on extended groups");
      if (std::abs(cfg.no_maximizer.parabolic_letter) > rank)
        errs.add("/experiment/no_maximizer/parabolic_letter",
                 "letter out of range for the group");
      for (int l : cfg.no_maximizer.tail_word)
        if (std::abs(l) > rank)
          errs.add("/experiment/no_maximizer/tail_word",
                   "letter out of range for the group");
      if (cfg.no_maximizer.has_psi)
        check_potential_letters(cfg.no_maximizer.psi, "/experiment/no_maximizer/psi", rank,
                                errs);
    }
    if (cfg.density.present) {
      check_word_letters(cfg.density.target_word, "/experiment/density/target_word", rank,
                         errs);
      for (std::size_t i = 0; i < cfg.density.tests.size(); ++i)
        check_potential_letters(cfg.density.tests[i].second,
                                "/experiment/density/tests/" + std::to_string(i) +
                                    "/potential",
                                rank, errs);
    }
    if (cfg.exponents.present) {
      for (std::size_t i = 0; i < cfg.exponents.cyclic.size(); ++i)
        if (cfg.exponents.cyclic[i].by_letter &&
            std::abs(cfg.exponents.cyclic[i].letter) > rank)
          errs.add("/experiment/exponents/cyclic/" + std::to_string(i) + "/letter",
                   "letter out of range for the group");
      if (cfg.exponents.has_nested) {
        for (int idx : {cfg.exponents.nested_plus[0], cfg.exponents.nested_plus[1],
                        cfg.exponents.nested_minus[0], cfg.exponents.nested_minus[1]})
          if (idx > rank)
            errs.add("/experiment/exponents/nested",
                     "generator index out of range for the group");
      }
    }
  }

  errs.raise_if_any();
  cfg.config_hash = hex64(fnv1a64(j.dump()));
  return cfg;
}

}  // namespace orbitherm
