#pragma once

#include <json.hpp>

#include <string>

#include "tdscat/duhamel.hpp"
#include "tdscat/nls.hpp"
#include "tdscat/schema_embed.hpp"

namespace tdscat {

using json = nlohmann::json;

// Invalid configuration; path is the dotted key path of the offending value.
struct SchemaError : std::runtime_error {
  std::string path;
  SchemaError(std::string p, const std::string& msg) : std::runtime_error(msg), path(std::move(p)) {}
};

inline const json& config_schema() {
  static const json schema = json::parse(embedded_schema_text);
  return schema;
}

// Validator for the JSON Schema subset used by configs/schema.json:
// type, enum, const, numeric bounds, properties, required,
// additionalProperties, items, minItems, maxItems, anyOf, allOf, if/then, $ref.
class SchemaValidator {
 public:
  explicit SchemaValidator(const json& root) : root_(root) {}

  void validate(const json& doc) const { check(root_, doc, ""); }

  bool accepts(const json& schema, const json& doc) const {
    try {
      check(schema, doc, "");
      return true;
    } catch (const SchemaError&) {
      return false;
    }
  }

 private:
  const json& root_;

  static std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

  const json& resolve(const json& s) const {
    if (!s.contains("$ref")) return s;
    const std::string ref = s["$ref"].get<std::string>();
    const std::string prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0) throw std::logic_error("unsupported $ref " + ref);
    return root_.at("definitions").at(ref.substr(prefix.size()));
  }

  static bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    if (t == "number") return v.is_number();
    if (t == "null") return v.is_null();
    return false;
  }

  void check(const json& raw, const json& v, const std::string& path) const {
    const json& s = resolve(raw);
    if (s.contains("type")) {
      const json& t = s["type"];
      bool ok = false;
      if (t.is_string()) ok = has_type(v, t.get<std::string>());
      else
        for (const auto& x : t) ok = ok || has_type(v, x.get<std::string>());
      if (!ok) throw SchemaError(path, "expected type " + t.dump());
    }
    if (s.contains("const") && v != s["const"]) throw SchemaError(path, "expected " + s["const"].dump());
    if (s.contains("enum")) {
      bool ok = false;
      for (const auto& x : s["enum"]) ok = ok || x == v;
      if (!ok) throw SchemaError(path, "value " + v.dump() + " is not one of " + s["enum"].dump());
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s["minimum"].get<double>())
        throw SchemaError(path, "value " + v.dump() + " is below the minimum " + s["minimum"].dump());
      if (s.contains("maximum") && x > s["maximum"].get<double>())
        throw SchemaError(path, "value " + v.dump() + " is above the maximum " + s["maximum"].dump());
      if (s.contains("exclusiveMinimum") && !(x > s["exclusiveMinimum"].get<double>()))
        throw SchemaError(path, "value " + v.dump() + " must exceed " + s["exclusiveMinimum"].dump());
      if (s.contains("exclusiveMaximum") && !(x < s["exclusiveMaximum"].get<double>()))
        throw SchemaError(path, "value " + v.dump() + " must be below " + s["exclusiveMaximum"].dump());
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& k : s["required"])
          if (!v.contains(k.get<std::string>())) throw SchemaError(join(path, k.get<std::string>()), "required key is missing");
      const json* props = s.contains("properties") ? &s["properties"] : nullptr;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (props && props->contains(it.key())) check((*props)[it.key()], it.value(), join(path, it.key()));
        else if (s.contains("additionalProperties") && s["additionalProperties"] == false)
          throw SchemaError(join(path, it.key()), "unknown key");
      }
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
        throw SchemaError(path, "needs at least " + s["minItems"].dump() + " items");
      if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
        throw SchemaError(path, "allows at most " + s["maxItems"].dump() + " items");
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], path + "[" + std::to_string(i) + "]");
    }
    if (s.contains("anyOf")) {
      bool ok = false;
      for (const auto& alt : s["anyOf"]) ok = ok || accepts(alt, v);
      if (!ok) throw SchemaError(path, "value " + v.dump() + " matches none of the allowed forms");
    }
    if (s.contains("allOf"))
      for (const auto& part : s["allOf"]) check(part, v, path);
    if (s.contains("if") && accepts(s["if"], v) && s.contains("then")) check(s["then"], v, path);
  }
};

inline void validate_config(const json& doc) { SchemaValidator(config_schema()).validate(doc); }

// Builders -----------------------------------------------------------------

inline Vec3 vec3_from(const json& j) {
  Vec3 v{0, 0, 0};
  for (std::size_t i = 0; i < j.size() && i < 3; ++i) v[i] = j[i].get<double>();
  return v;
}

inline double p_from(const json& j) { return j.is_string() ? inf : j.get<double>(); }

inline std::vector<double> pset_from(const json& cfg, std::vector<double> fallback = {1.0, 2.0, inf}) {
  if (!cfg.contains("norm") || !cfg["norm"].contains("p")) return fallback;
  const json& p = cfg["norm"]["p"];
  std::vector<double> out;
  if (p.is_array())
    for (const auto& x : p) out.push_back(p_from(x));
  else
    out.push_back(p_from(p));
  return out;
}

inline GridSpec grid_from(const json& j, const std::string& path) {
  const int dim = j["dim"].get<int>(), n = j["n"].get<int>();
  if (j.contains("L") == j.contains("time_unit")) throw SchemaError(path, "give exactly one of L and time_unit");
  try {
    if (j.contains("time_unit")) return GridSpec::commensurate(dim, n, j["time_unit"].get<double>());
    return GridSpec(dim, n, j["L"].get<double>());
  } catch (const ContractViolation& e) {
    throw SchemaError(path + ".n", e.what());
  }
}

inline TimeEnvelope envelope_from(const json& j, const std::string& path) {
  const std::string kind = j["kind"].get<std::string>();
  auto need = [&](const char* key) -> double {
    if (!j.contains(key)) throw SchemaError(path + "." + key, "required for envelope kind " + kind);
    return j[key].get<double>();
  };
  try {
    if (kind == "const") return TimeEnvelope::constant();
    if (kind == "tanh") return TimeEnvelope::hyperbolic();
    if (kind == "quench") return TimeEnvelope::quench(need("d"), true);
    if (kind == "quench_smooth") return TimeEnvelope::quench(need("d"), false);
    if (kind == "log_osc") return TimeEnvelope::log_osc(need("omega"), j.value("delta", 0.0));
    if (!j.contains("coefficients")) throw SchemaError(path + ".coefficients", "required for envelope kind " + kind);
    return TimeEnvelope::inverse_power(j["coefficients"].get<std::vector<double>>(), need("t0"));
  } catch (const ContractViolation& e) {
    throw SchemaError(path, e.what());
  }
}

inline PotentialPtr potential_from(const json& j, const std::string& path, const GridSpec* g = nullptr) {
  const std::string type = j["type"].get<std::string>();
  auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw SchemaError(path + "." + key, "required for potential type " + type);
    return j[key];
  };
  if (type == "zero") return zero_potential();
  if (type == "gaussian")
    return gaussian(need("amplitude").get<double>(), need("width").get<double>(), j.contains("center") ? vec3_from(j["center"]) : Vec3{0, 0, 0});
  if (type == "plane_waves") {
    std::vector<PlaneWaveTerm> terms;
    const json& waves = need("waves");
    for (std::size_t i = 0; i < waves.size(); ++i) {
      const json& w = waves[i];
      const std::string wp = path + ".waves[" + std::to_string(i) + "]";
      PlaneWaveTerm t;
      const json& a = w["amplitude"];
      t.amplitude = a.is_array() ? cplx{a[0].get<double>(), a[1].get<double>()} : cplx{a.get<double>(), 0.0};
      if (w.contains("lattice") == w.contains("frequency")) throw SchemaError(wp, "give exactly one of lattice and frequency");
      if (w.contains("lattice")) {
        if (!g) throw SchemaError(wp + ".lattice", "lattice frequencies need a grid");
        Vec3 k = vec3_from(w["lattice"]);
        for (double& x : k) x *= g->dxi();
        t.frequency = k;
      } else {
        t.frequency = vec3_from(w["frequency"]);
      }
      terms.push_back(t);
    }
    return plane_waves(std::move(terms));
  }
  if (type == "enveloped")
    return enveloped(potential_from(need("spatial"), path + ".spatial", g), envelope_from(need("envelope"), path + ".envelope"));
  if (type == "moving") {
    const std::string p = need("path").get<std::string>();
    PathKind k = p == "sin_log" ? PathKind::SinLog : (p == "linear" ? PathKind::Linear : PathKind::SqrtShift);
    return moving(potential_from(need("spatial"), path + ".spatial", g), k, vec3_from(need("velocity")));
  }
  if (type == "self_similar")
    return self_similar(potential_from(need("profile"), path + ".profile", g), need("cutoff").get<double>(),
                        need("omega").get<double>());
  std::vector<PotentialPtr> parts;
  const json& terms = need("terms");
  for (std::size_t i = 0; i < terms.size(); ++i)
    parts.push_back(potential_from(terms[i], path + ".terms[" + std::to_string(i) + "]", g));
  return sum(std::move(parts));
}

inline NonlinearitySpec nonlinearity_from(const json& j) {
  NonlinearitySpec nl;
  nl.kind = j["kind"] == "power" ? NonlinearitySpec::Kind::Power : NonlinearitySpec::Kind::Hartree;
  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    const std::string kind = k["kind"].get<std::string>();
    nl.kernel.kind = kind == "singular" ? KernelKind::Singular
                     : kind == "bracket" ? KernelKind::Bracket
                     : kind == "delta"   ? KernelKind::Delta
                                         : KernelKind::Gaussian;
    nl.kernel.delta = k.value("delta", 0.5);
    nl.kernel.width = k.value("width", 1.0);
    if ((nl.kernel.kind == KernelKind::Singular || nl.kernel.kind == KernelKind::Bracket) &&
        !(nl.kernel.delta > 0 && nl.kernel.delta < 1.5))
      throw SchemaError("nonlinearity.kernel.delta", "must lie in (0, 1.5)");
  }
  const std::string power = j.value("power", std::string("cubic"));
  nl.power = power == "quartic" ? PowerKind::Quartic : (power == "mixed" ? PowerKind::Mixed : PowerKind::Cubic);
  nl.coupling = j.value("coupling", 1.0);
  nl.sign = j.value("sign", 1);
  return nl;
}

inline SeriesConfig series_from(const json& cfg, SeriesConfig s = {}) {
  if (!cfg.contains("series")) return s;
  const json& j = cfg["series"];
  s.max_order = j.value("max_order", s.max_order);
  s.n_t = j.value("n_t", s.n_t);
  if (j.contains("eps_schedule")) s.eps_schedule = j["eps_schedule"].get<std::vector<double>>();
  if (j.contains("cutoffs")) s.cutoffs = j["cutoffs"].get<std::vector<double>>();
  if (j.contains("rule")) s.rule = j["rule"] == "trapezoid" ? QuadRule::Trapezoid : QuadRule::Simpson;
  s.weight_on_largest = j.value("weight_on_largest", s.weight_on_largest);
  s.horizon = j.value("horizon", s.horizon);
  s.tail_tolerance = j.value("tail_tolerance", s.tail_tolerance);
  s.subtract_zero_mode = j.value("subtract_zero_mode", s.subtract_zero_mode);
  s.slack = j.value("slack", s.slack);
  try {
    s.validate();
  } catch (const ContractViolation& e) {
    throw SchemaError("series", e.what());
  }
  return s;
}

inline Ensemble ensemble_from(const json& cfg, std::uint64_t seed, Ensemble e = {}) {
  e.seed = seed;
  if (!cfg.contains("ensemble")) return e;
  const json& j = cfg["ensemble"];
  if (j.contains("kind")) {
    const std::string k = j["kind"].get<std::string>();
    e.kind = k == "gaussian_random" ? EnsembleKind::GaussianRandom
             : k == "plane_packets" ? EnsembleKind::PlanePackets
             : k == "near_delta"    ? EnsembleKind::NearDelta
             : k == "high_cutoff"   ? EnsembleKind::HighCutoff
                                    : EnsembleKind::Mixed;
  }
  e.count = j.value("count", e.count);
  e.cutoff = j.value("cutoff", e.cutoff);
  e.band = j.value("band", e.band);
  return e;
}

inline StepSpec step_from(const json& cfg, StepSpec s = {}) {
  if (!cfg.contains("step")) return s;
  s.dt = cfg["step"].value("dt", s.dt);
  if (cfg["step"].contains("scheme")) s.scheme = cfg["step"]["scheme"] == "lie" ? Scheme::Lie : Scheme::Strang;
  return s;
}

// Initial state: a Gaussian packet or an ensemble member.
inline Field state_from(const json& cfg, const GridSpec& g, const Ensemble& ens) {
  if (!cfg.contains("state")) throw SchemaError("state", "required key is missing");
  const json& j = cfg["state"];
  if (j["kind"] == "member") return ens.member(g, j.value("index", 0));
  const double w = j.value("width", 1.0), amp = j.value("amplitude", 1.0);
  const Vec3 q = j.contains("momentum") ? vec3_from(j["momentum"]) : Vec3{0, 0, 0};
  const Vec3 c = j.contains("center") ? vec3_from(j["center"]) : Vec3{0, 0, 0};
  return sample(g, [&](const Vec3& x) {
    double r2 = 0.0;
    for (int a = 0; a < g.dim; ++a) r2 += (x[a] - c[a]) * (x[a] - c[a]);
    return amp * std::exp(-r2 / (2.0 * w * w)) * std::polar(1.0, dot3(q, x));
  });
}

// 64-bit FNV-1a of the canonical dump (object keys sorted).
inline std::string config_hash(const json& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : cfg.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tdscat
