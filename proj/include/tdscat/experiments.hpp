#pragma once

#include <chrono>
#include <cstdarg>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tdscat/config.hpp"
#include "tdscat/io.hpp"
#include "tdscat/mikhlin.hpp"

namespace tdscat {

struct Check {
  std::string name;
  bool pass = true;
  std::string detail;
  bool asserted = true;  // unasserted checks are reported only
};

struct RunReport {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  std::vector<Table> tables;
  std::vector<std::pair<std::string, std::string>> plots;  // file name, SVG text
  std::vector<std::pair<std::string, std::vector<Field>>> snapshots;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> timings;  // section, seconds

  bool passed(bool strict = false) const {
    for (const auto& c : checks)
      if (c.asserted && !c.pass) return false;
    return !(strict && !warnings.empty());
  }

  double timing(const std::string& section) const {
    double s = 0.0;
    for (const auto& [k, v] : timings)
      if (k == section) s += v;
    return s;
  }

  double total_time() const {
    double s = 0.0;
    for (const auto& t : timings) s += t.second;
    return s;
  }

  const Table* table(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return &t;
    return nullptr;
  }
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::string anchor;  // the statement the experiment probes
};

inline const std::vector<ExperimentInfo>& list_experiments() {
  static const std::vector<ExperimentInfo> infos{
      {"cancellation-check", "free-flow conjugated potential: p->p norms against the Fourier mass, plane-wave vs spectral "
                             "application, resolvent vs quadrature",
       "cancellation lemma; conjugation identity; resolvent form of the integrated operator"},
      {"born-series", "truncated Born series against direct propagation with the factorial majorant ledger",
       "exponential bound for the Duhamel expansion"},
      {"wave-operator", "eps dependence of the integrated operator norm and Abelian Cauchy differences",
       "eps-uniform bound and Abelian limit of the wave operator"},
      {"highfreq-scan", "Born terms on high-frequency data for doubling cutoffs M",
       "high-frequency smallness of the integrated Born terms"},
      {"decay-scan", "fitted dispersive decay exponent of the free 1->inf proxy", "free dispersive decay t^{-n/2}"},
      {"moving-potential", "decay monitor for a potential moving along sqrt(1+t) v",
       "charge-transfer decay for moving potentials"},
      {"self-similar", "dense wave-operator norms for a self-similar potential against exp(h)",
       "series bound for self-similar potentials"},
      {"nls-run", "Hartree NLS evolution with mass, energy and sup-norm monitors",
       "global existence and decay for Hartree NLS"},
      {"picard", "Picard iteration in Strichartz norm at the smallness threshold",
       "local solution by contraction for Hartree NLS"},
      {"free-channel", "free-channel deficit e^{itH0} psi(t) - psi0 along geometric times",
       "asymptotic free channel for Hartree NLS"},
      {"intertwine", "U(T,0) against Omega_T e^{-iTH0} Omega_+^* on a scattering state", "intertwining identity"},
      {"mikhlin-constants", "Mikhlin-type constants and class verdicts for catalog potentials",
       "Mikhlin-type condition on the potential"},
  };
  return infos;
}

inline std::string strf(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// Pinned default configurations; a user config is merged on top.
inline json experiment_defaults(const std::string& name) {
  auto gauss = [](double a, double w) { return json{{"type", "gaussian"}, {"amplitude", a}, {"width", w}}; };
  const json waves = json::array({json{{"amplitude", json::array({0.3, 0.1})}, {"lattice", {1, 0, 0}}},
                                  json{{"amplitude", -0.2}, {"lattice", {-2, 0, 0}}},
                                  json{{"amplitude", json::array({0.0, 0.15})}, {"lattice", {3, 0, 0}}},
                                  json{{"amplitude", json::array({0.1, -0.1})}, {"lattice", {-5, 0, 0}}},
                                  json{{"amplitude", 0.05}, {"lattice", {4, 0, 0}}}});
  const json five_waves{{"type", "plane_waves"}, {"waves", waves}};
  const json tanh_env{{"type", "enveloped"}, {"spatial", gauss(-0.8, 0.7)}, {"envelope", {{"kind", "tanh"}}}};
  const json moving_sqrt{{"type", "moving"}, {"spatial", gauss(0.6, 1.0)}, {"path", "sqrt_shift"}, {"velocity", {0.7, 0, 0}}};
  const json self_sim{{"type", "self_similar"}, {"profile", gauss(1.0, 1.0)}, {"cutoff", 0.25}, {"omega", 1.0}};
  const json log_osc{{"type", "enveloped"}, {"spatial", gauss(1.0, 1.0)}, {"envelope", {{"kind", "log_osc"}, {"omega", 1.0}, {"delta", 0.5}}}};
  auto named = [](const char* n, const json& p) { return json{{"name", n}, {"potential", p}}; };
  json d{{"experiment", name}, {"seed", 1}, {"output", {{"dir", "out"}, {"svg", false}, {"snapshots", false}}}};

  if (name == "cancellation-check") {
    d["ensemble"] = {{"kind", "mixed"}, {"count", 16}};
    d["norm"] = {{"p", json::array({1, 2, "inf"})}};
    d["params"] = {
        {"grids", json::array({json{{"dim", 1}, {"n", 256}, {"time_unit", 0.5}}, json{{"dim", 3}, {"n", 32}, {"time_unit", 0.5}}})},
        {"dense_grid", {{"dim", 1}, {"n", 16}, {"time_unit", 0.5}}},
        {"times", {0.0, 0.5, 2.0}},
        {"catalog", json::array({named("gaussian", gauss(1.0, 1.0)), named("five-waves", five_waves),
                                 named("tanh-gaussian", tanh_env), named("moving-sqrt", moving_sqrt),
                                 named("self-similar", self_sim)})},
        {"probe_grid", {{"dim", 1}, {"n", 128}, {"L", 10.0}}},
        {"waves", waves},
        {"conjugation_members", 20},
        {"resolvent_grid", {{"dim", 1}, {"n", 32}, {"L", 8.0}}},
        {"resolvent_eps", {0.5, 0.1}},
        {"phase_step", 0.05}};
  } else if (name == "born-series") {
    d["grid"] = {{"dim", 1}, {"n", 256}, {"L", 32.0}};
    d["potential"] = gauss(0.5, 1.0);
    d["state"] = {{"kind", "packet"}, {"width", 1.5}, {"momentum", {1.0, 0, 0}}, {"center", {-4.0, 0, 0}}};
    d["series"] = {{"max_order", 8}, {"n_t", 801}};
    d["norm"] = {{"p", json::array({1, 2, "inf"})}};
    d["params"] = {{"T", 2.0}, {"dense_grid", {{"dim", 1}, {"n", 16}, {"time_unit", 0.5}}}, {"direct_dt", 1e-3}};
  } else if (name == "wave-operator") {
    d["seed"] = 3;
    d["grid"] = {{"dim", 1}, {"n", 128}, {"L", 16.0}};
    d["ensemble"] = {{"kind", "high_cutoff"}, {"count", 16}, {"cutoff", 4.0}, {"band", 0.5}};
    d["state"] = {{"kind", "member"}, {"index", 0}};
    d["series"] = {{"max_order", 4}, {"n_t", 16001}, {"horizon", 32.0}, {"subtract_zero_mode", true},
                   {"eps_schedule", {0.4, 0.2, 0.1}}};
    d["params"] = {
        {"eps_grid", {1.0, 0.3, 0.1, 0.03, 0.01}},
        {"catalog", json::array({named("gaussian", gauss(1.0, 1.0)),
                                 named("tanh-gaussian", {{"type", "enveloped"}, {"spatial", gauss(1.0, 1.0)}, {"envelope", {{"kind", "tanh"}}}}),
                                 named("smooth-quench", {{"type", "enveloped"}, {"spatial", gauss(1.0, 1.0)},
                                                         {"envelope", {{"kind", "quench_smooth"}, {"d", 1.0}}}})})},
        {"phase_step", 0.5},
        {"abelian_potential", gauss(1.0, 1.0)},
        {"tail_rule_report", true}};
  } else if (name == "highfreq-scan") {
    d["seed"] = 7;
    d["grid"] = {{"dim", 1}, {"n", 256}, {"L", 16.0}};
    d["ensemble"] = {{"kind", "plane_packets"}, {"count", 16}, {"band", 1.0}};
    d["series"] = {{"max_order", 2}, {"n_t", 2001}, {"cutoffs", {2.0, 4.0, 8.0}}, {"subtract_zero_mode", true}};
    d["params"] = {{"catalog", json::array({named("gaussian", gauss(1.0, 1.0)), named("log-oscillating", log_osc)})},
                   {"eps", 0.5},
                   {"orders", {1, 2}}};
  } else if (name == "decay-scan") {
    d["ensemble"] = {{"kind", "near_delta"}, {"count", 4}};
    d["step"] = {{"dt", 0.1}};
    d["params"] = {{"grids", json::array({json{{"dim", 1}, {"n", 1024}, {"L", 128.0}}, json{{"dim", 2}, {"n", 512}, {"L", 96.0}}})},
                   {"times", {1, 2, 3, 4, 5, 6, 7, 8}}};
  } else if (name == "moving-potential") {
    d["grid"] = {{"dim", 1}, {"n", 4096}, {"L", 256.0}};
    d["ensemble"] = {{"kind", "near_delta"}, {"count", 8}};
    d["potential"] = {{"type", "moving"}, {"spatial", gauss(0.5, 1.0)}, {"path", "sqrt_shift"}, {"velocity", {1.0, 0, 0}}};
    d["step"] = {{"dt", 0.02}};
    d["params"] = {{"times", {1, 2, 4, 8}}, {"cutoff", 2.0}};
  } else if (name == "self-similar") {
    d["potential"] = {{"type", "self_similar"}, {"profile", gauss(1.0, 1.0)}, {"cutoff", 0.4}, {"omega", 2.0}};
    d["step"] = {{"dt", 0.01}};
    d["norm"] = {{"p", json::array({1, 2, "inf"})}};
    d["params"] = {{"times", {4, 8, 16}}, {"dense_grid", {{"dim", 1}, {"n", 16}, {"time_unit", 0.5}}}};
  } else if (name == "nls-run") {
    d["grid"] = {{"dim", 3}, {"n", 32}, {"L", 12.0}};
    d["state"] = {{"kind", "packet"}, {"width", 1.5}, {"amplitude", 1.0}};
    d["nonlinearity"] = {{"kind", "hartree"}, {"kernel", {{"kind", "gaussian"}, {"width", 1.0}}}, {"coupling", 0.5}, {"sign", 1}};
    d["step"] = {{"dt", 0.01}};
    d["norm"] = {{"p", json::array({2, "inf"})}};
    d["params"] = {{"T", 4.0}, {"record_step", 0.25}, {"linf_c", 1.0}, {"linf_end", 4.0}};
  } else if (name == "picard") {
    d["grid"] = {{"dim", 3}, {"n", 32}, {"L", 12.0}};
    d["state"] = {{"kind", "packet"}, {"width", 1.5}, {"amplitude", 0.2}};
    d["nonlinearity"] = {{"kind", "hartree"}, {"kernel", {{"kind", "gaussian"}, {"width", 1.0}}}, {"coupling", 0.5}, {"sign", 1}};
    d["params"] = {{"T", "threshold"}, {"steps", 64}, {"n_max", 40}, {"T_ref", 1.0}};
  } else if (name == "free-channel") {
    d["grid"] = {{"dim", 3}, {"n", 32}, {"L", 12.0}};
    d["state"] = {{"kind", "packet"}, {"width", 1.5}, {"amplitude", 1.0}};
    d["nonlinearity"] = {{"kind", "hartree"}, {"kernel", {{"kind", "bracket"}, {"delta", 0.5}}}, {"coupling", 0.5}, {"sign", 1}};
    d["step"] = {{"dt", 0.01}};
    d["norm"] = {{"p", json::array({2, "inf"})}};
    d["params"] = {{"times", {0, 1, 2, 4, 8}}};
  } else if (name == "intertwine") {
    d["grid"] = {{"dim", 1}, {"n", 256}, {"L", 64.0}};
    d["potential"] = gauss(0.1, 1.0);
    d["state"] = {{"kind", "packet"}, {"width", 1.0}, {"momentum", {1.0, 0, 0}}, {"center", {0.0, 0, 0}}};
    d["step"] = {{"dt", 0.01}};
    d["params"] = {{"T", 4.0}, {"s_max", 16.0}};
  } else if (name == "mikhlin-constants") {
    d["grid"] = {{"dim", 1}, {"n", 256}, {"L", 16.0}};
    d["params"] = {
        {"catalog", json::array({named("gaussian", gauss(1.0, 1.0)), named("five-waves", five_waves), named("tanh-gaussian", tanh_env),
                                 named("log-oscillating", log_osc),
                                 named("sharp-quench", {{"type", "enveloped"}, {"spatial", gauss(1.0, 1.0)}, {"envelope", {{"kind", "quench"}, {"d", 1.0}}}}),
                                 named("smooth-quench", {{"type", "enveloped"}, {"spatial", gauss(1.0, 1.0)}, {"envelope", {{"kind", "quench_smooth"}, {"d", 1.0}}}}),
                                 named("moving-sqrt", moving_sqrt), named("self-similar", self_sim)})},
        {"T", 4.0}};
  } else {
    throw SchemaError("experiment", "unknown experiment " + name);
  }
  return d;
}

namespace detail {

class Timer {
 public:
  Timer(RunReport& r, std::string section) : r_(r), section_(std::move(section)), t0_(std::chrono::steady_clock::now()) {}
  ~Timer() {
    r_.timings.emplace_back(section_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count());
  }

 private:
  RunReport& r_;
  std::string section_;
  std::chrono::steady_clock::time_point t0_;
};

struct Ctx {
  const json& cfg;
  const json& P;  // params block
  RunReport& rep;
  std::uint64_t seed;

  GridSpec grid_at(const json& node, const std::string& path) const { return grid_from(node, path); }
  GridSpec grid() const {
    if (!cfg.contains("grid")) throw SchemaError("grid", "required key is missing");
    return grid_from(cfg["grid"], "grid");
  }
  const json& param(const char* key) const {
    if (!P.contains(key)) throw SchemaError(std::string("params.") + key, "required key is missing");
    return P[key];
  }
  PotentialPtr potential(const GridSpec& g) const {
    if (!cfg.contains("potential")) throw SchemaError("potential", "required key is missing");
    return potential_from(cfg["potential"], "potential", &g);
  }
  NonlinearitySpec nonlinearity() const {
    if (!cfg.contains("nonlinearity")) throw SchemaError("nonlinearity", "required key is missing");
    return nonlinearity_from(cfg["nonlinearity"]);
  }
  Ensemble ensemble() const { return ensemble_from(cfg, seed); }

  void check(const std::string& name, bool pass, const std::string& detail, bool asserted = true) {
    rep.checks.push_back({name, pass, detail, asserted});
  }
};

inline std::vector<std::pair<std::string, PotentialPtr>> catalog_from(const json& cat, const std::string& path, const GridSpec& g) {
  std::vector<std::pair<std::string, PotentialPtr>> out;
  for (std::size_t i = 0; i < cat.size(); ++i)
    out.emplace_back(cat[i]["name"].get<std::string>(),
                     potential_from(cat[i]["potential"], path + "[" + std::to_string(i) + "].potential", &g));
  return out;
}

inline std::string grid_label(const GridSpec& g) { return strf("%dD N=%d L=%.6g", g.dim, g.n, g.half_length); }

inline double rel_l2(const Field& a, const Field& ref) {
  double d = lp_norm(ref, 2.0);
  return lp_norm(a - ref, 2.0) / (d > 0 ? d : 1.0);
}

inline Check audit_check(const std::string& name, const std::vector<AuditRow>& rows) {
  Check c{name, true, "", true};
  double worst = inf;
  const AuditRow* bad = nullptr;
  for (const auto& r : rows) {
    if (r.margin < worst) worst = r.margin;
    if (!r.pass && !bad) bad = &r;
    c.pass = c.pass && r.pass;
  }
  c.detail = strf("%zu rows, smallest margin %.3e", rows.size(), worst);
  if (bad) c.detail += strf("; violation %s p=%g fixture %s seed %llu", bad->label.c_str(), bad->p, bad->fixture.c_str(),
                            static_cast<unsigned long long>(bad->seed));
  return c;
}

// Experiments ----------------------------------------------------------------

inline void run_cancellation(Ctx& c) {
  const auto ps = pset_from(c.cfg);
  const auto times = c.param("times").get<std::vector<double>>();
  const Ensemble ens = c.ensemble();
  std::vector<NormReport> reports;
  {
    Timer tm(c.rep, "cl_bound");
    auto one_grid = [&](const GridSpec& g, bool dense) {
      const auto members = ens.members(g);
      for (const auto& [name, s] : catalog_from(c.param("catalog"), "params.catalog", g))
        for (double t : times) {
          LinearMap A = [&, sp = s, t](const Field& f) { return apply_kt_spectral(*sp, t, f); };
          std::optional<Eigen::MatrixXcd> M;
          if (dense) M = operator_matrix(g, A);
          const double bound = coefficient_mass(evaluate(*s, g, t));
          for (double p : ps) {
            NormReport r = op_norm(A, p, members, M, strf("K_t t=%g", t), bound);
            r.fixture = name + " @ " + grid_label(g) + (dense ? " dense" : "");
            r.seed = c.seed;
            reports.push_back(r);
          }
        }
    };
    const json& grids = c.param("grids");
    for (std::size_t i = 0; i < grids.size(); ++i)
      one_grid(c.grid_at(grids[i], "params.grids[" + std::to_string(i) + "]"), false);
    if (c.P.contains("dense_grid")) one_grid(c.grid_at(c.P["dense_grid"], "params.dense_grid"), true);
  }
  auto audit = bound_audit(reports);
  c.rep.tables.push_back(norm_table(reports));
  c.rep.tables.push_back(audit_table(audit));
  c.rep.checks.push_back(audit_check("cl_bound", audit));

  const json waves_node{{"type", "plane_waves"}, {"waves", c.param("waves")}};
  {
    Timer tm(c.rep, "conjugation");
    const GridSpec g = c.grid_at(c.param("probe_grid"), "params.probe_grid");
    auto s = potential_from(waves_node, "params", &g);
    Ensemble pe;
    pe.kind = EnsembleKind::GaussianRandom;
    pe.count = c.P.value("conjugation_members", 20);
    pe.band = 0.375;
    pe.seed = c.seed;
    const auto members = pe.members(g);
    Table t{"conjugation", {"member", "t", "relative_difference"}, {}};
    double worst = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m)
      for (double tt : times) {
        double d = rel_l2(apply_kt_planewave(*s, tt, members[m]), apply_kt_spectral(*s, tt, members[m]));
        worst = std::max(worst, d);
        t.add(m, tt, d);
      }
    c.rep.tables.push_back(t);
    c.check("conjugation", worst <= 1e-10, strf("max relative L2 difference %.3e over %zu members (tolerance 1e-10)", worst, members.size()));
  }
  {
    Timer tm(c.rep, "resolvent");
    const GridSpec g = c.grid_at(c.param("resolvent_grid"), "params.resolvent_grid");
    auto s = potential_from(waves_node, "params", &g);
    Ensemble pe;
    pe.kind = EnsembleKind::GaussianRandom;
    pe.count = 3;
    pe.band = 0.5;
    pe.seed = c.seed;
    const auto members = pe.members(g);
    QuadratureSpec quad;
    quad.phase_step = c.P.value("phase_step", 0.05);
    const auto eps_list = c.param("resolvent_eps").get<std::vector<double>>();
    Table t{"resolvent", {"member", "eps", "relative_difference"}, {}};
    double worst = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m)
      for (double eps : eps_list) {
        double d = rel_l2(apply_i_eps(*s, eps, members[m], quad), apply_i_eps_resolvent(*s, eps, members[m]));
        worst = std::max(worst, d);
        t.add(m, eps, d);
      }
    c.rep.tables.push_back(t);
    c.check("resolvent", worst <= 1e-6, strf("max relative L2 difference %.3e (tolerance 1e-6)", worst));
  }
}

inline void run_born(Ctx& c) {
  const GridSpec g = c.grid();
  auto s = c.potential(g);
  const Ensemble ens = c.ensemble();
  const Field psi = state_from(c.cfg, g, ens);
  const SeriesConfig sc = series_from(c.cfg);
  StepSpec st = step_from(c.cfg);
  if (c.P.contains("direct_dt")) st.dt = c.P["direct_dt"].get<double>();
  const double T = c.param("T").get<double>();
  const bool assert_checks = sc.max_order > 0;
  {
    Timer tm(c.rep, "series");
    SeriesComparison cmp;
    try {
      cmp = born_series_vs_direct(*s, T, psi, sc, st);
    } catch (const ContractViolation& e) {
      throw SchemaError("series", e.what());
    }
    c.rep.tables.push_back(ledger_table(cmp.ledger));
    Table sum{"summary", {"T", "K", "c_T", "residual", "tail_bound"}, {}};
    sum.add(T, sc.max_order, cmp.ledger.c_T, cmp.residual, cmp.tail_bound);
    c.rep.tables.push_back(sum);
    c.check("c_T", cmp.ledger.c_T <= 1.5, strf("accumulated Fourier mass c(T) = %.4f (fixture requires <= 1.5)", cmp.ledger.c_T),
            assert_checks);
    c.check("residual", cmp.residual <= 1e-3,
            strf("relative L2 residual series vs direct %.3e at K=%d (tolerance 1e-3)", cmp.residual, sc.max_order), assert_checks);
    double worst = 0.0;
    for (const auto& r : cmp.ledger.rows) worst = std::max(worst, r.ratio);
    c.check("majorant", worst <= 1.2, strf("largest order norm / factorial majorant %.4f (limit 1.2)", worst), assert_checks);
  }
  if (c.P.contains("dense_grid")) {
    Timer tm(c.rep, "dense_bound");
    const GridSpec gd = c.grid_at(c.P["dense_grid"], "params.dense_grid");
    auto sd = potential_from(c.cfg["potential"], "potential", &gd);
    auto M = operator_matrix(gd, [&](const Field& f) { return series_sum(born_terms(*sd, T, f, sc, {2.0}).orders); });
    const double cT = accumulated_c(*sd, gd, T);
    std::vector<NormReport> reports;
    for (double p : pset_from(c.cfg)) {
      NormReport r;
      r.label = strf("series K=%d T=%g", sc.max_order, T);
      r.p = p;
      r.exact = dense_norm(M, p);
      r.bound = std::exp(cT) * 1.2;
      r.margin = *r.bound - *r.exact;
      r.pass = r.margin >= -1e-8;
      r.fixture = "dense " + grid_label(gd);
      r.seed = c.seed;
      reports.push_back(r);
    }
    auto audit = bound_audit(reports);
    c.rep.tables.push_back(norm_table(reports, "dense_norms"));
    Check ck = audit_check("exp_bound", audit);
    ck.asserted = assert_checks;
    c.rep.checks.push_back(ck);
  }
}

// I_eps by the resolvent (time-independent) or split (settling envelope) route.
inline LinearMap i_eps_route(const PotentialPtr& s, const GridSpec& g, double eps, const QuadratureSpec& q,
                             const std::string& path) {
  if (auto* en = std::get_if<Enveloped>(&s->node)) {
    if (!en->envelope.asymptote(q.tail_tolerance)) throw SchemaError(path, "envelope does not settle; eps scan needs a settling envelope");
    return [en, eps, q](const Field& f) { return apply_i_eps_split(*en, eps, f, q, true); };
  }
  if (!is_time_independent(*s)) throw SchemaError(path, "eps scan needs a time-independent or settling enveloped potential");
  Field V = mean_free(evaluate(*s, g, 0.0));
  return [V, eps](const Field& f) { return apply_i_eps_resolvent(V, eps, f); };
}

inline void run_wave_operator(Ctx& c) {
  const GridSpec g = c.grid();
  const Ensemble ens = c.ensemble();
  const auto members = ens.members(g);
  const auto eps_grid = c.param("eps_grid").get<std::vector<double>>();
  QuadratureSpec q;
  q.phase_step = c.P.value("phase_step", 0.5);
  {
    Timer tm(c.rep, "eps_uniformity");
    Table t{"eps_norms", {"fixture", "eps", "norm"}, {}};
    std::vector<Series> plot;
    const auto cat = catalog_from(c.param("catalog"), "params.catalog", g);
    for (std::size_t i = 0; i < cat.size(); ++i) {
      const auto& [name, s] = cat[i];
      double lo = inf, hi = 0.0;
      Series ser{name, {}, {}};
      for (double eps : eps_grid) {
        double n = op_norm(i_eps_route(s, g, eps, q, "params.catalog[" + std::to_string(i) + "]"), 2.0, members).measured;
        t.add(name, eps, n);
        ser.x.push_back(eps);
        ser.y.push_back(n);
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      plot.push_back(ser);
      const Verdict v = mikhlin_data(*s, g, 1.0, {}, false).verdict;
      c.check("mikhlin class " + name, v == Verdict::PP1Class || v == Verdict::TimeIndependent,
              std::string("verdict: ") + verdict_name(v));
      c.check("eps_uniform " + name, hi <= 10.0 * lo,
              strf("max/min of estimated ||I_eps||_2->2 over eps = %.3f (limit 10)", lo > 0 ? hi / lo : inf));
    }
    c.rep.tables.push_back(t);
    c.rep.plots.emplace_back("eps_norms.svg", svg_plot("estimated ||I_eps|| vs eps", plot, true, true));
  }
  {
    Timer tm(c.rep, "abelian");
    auto sa = potential_from(c.param("abelian_potential"), "params.abelian_potential", &g);
    const Field psi = state_from(c.cfg, g, ens);
    SeriesConfig sc = series_from(c.cfg);
    Table t{"abelian", {"horizon_rule", "eps_a", "eps_b", "difference"}, {}};
    auto run = [&](const SeriesConfig& cfg, const std::string& rule) {
      AbelianResult r = abelian_limit(*sa, psi, cfg);
      for (std::size_t i = 0; i < r.differences.size(); ++i)
        t.add(rule, cfg.eps_schedule[i], cfg.eps_schedule[i + 1], r.differences[i]);
      std::string d = "Cauchy differences";
      for (double v : r.differences) d += strf(" %.3e", v);
      return std::pair{r.converged, d};
    };
    auto [ok, detail] = run(sc, sc.horizon > 0 ? strf("fixed %g", sc.horizon) : "tail");
    c.check("abelian_monotone", ok, detail + strf(" (K=%d)", sc.max_order));
    if (c.P.value("tail_rule_report", false) && sc.horizon > 0) {
      SeriesConfig tail = sc;
      tail.horizon = 0.0;
      auto [ok2, d2] = run(tail, "tail");
      c.check("abelian_monotone tail-rule horizon", ok2, d2 + " (reported only)", false);
      if (!ok2) c.rep.warnings.push_back("tail-rule horizon: Abelian Cauchy differences are not monotone");
    }
    c.rep.tables.push_back(t);
  }
}

inline void run_highfreq(Ctx& c) {
  const GridSpec g = c.grid();
  const auto members = c.ensemble().members(g);
  SeriesConfig sc = series_from(c.cfg);
  const double eps = c.param("eps").get<double>();
  const auto orders = c.param("orders").get<std::vector<int>>();
  for (int k : orders)
    if (k > sc.max_order) throw SchemaError("params.orders", "order exceeds series.max_order");
  if (sc.cutoffs.size() < 2) throw SchemaError("series.cutoffs", "needs at least two cutoffs");
  Timer tm(c.rep, "scan");
  Table t{"scan", {"fixture", "order", "M", "norm", "skipped"}, {}};
  std::vector<Series> plot;
  for (const auto& [name, s] : catalog_from(c.param("catalog"), "params.catalog", g)) {
    auto rows = omega_eps_highfreq_scan(sampler_of(s, g, sc.subtract_zero_mode), members, sc, eps);
    for (const auto& r : rows) {
      t.add(name, r.order, r.M, r.norm, r.skipped);
      if (r.skipped) c.rep.warnings.push_back(name + ": " + r.note + strf(" (M=%g)", r.M));
    }
    for (int k : orders) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& r : rows)
        if (!r.skipped && r.order == k) pts.emplace_back(r.M, r.norm);
      Series ser{strf("%s k=%d", name.c_str(), k), {}, {}};
      bool ok = pts.size() >= 2;
      std::string d = "reduction per doubling:";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        ser.x.push_back(pts[i].first);
        ser.y.push_back(pts[i].second);
        if (i == 0) continue;
        double ratio = pts[i].second > 0 ? pts[i - 1].second / pts[i].second : inf;
        ok = ok && ratio >= 1.5;
        d += strf(" %.3f", ratio);
      }
      plot.push_back(ser);
      c.check(strf("highfreq %s k=%d", name.c_str(), k), ok, d + " (limit 1.5)");
    }
  }
  c.rep.tables.push_back(t);
  c.rep.plots.emplace_back("scan.svg", svg_plot("||I_eps^(k) beta(|P|>M)|| vs M", plot, true, true));
}

inline void run_decay(Ctx& c) {
  const auto ts = c.param("times").get<std::vector<double>>();
  const StepSpec st = step_from(c.cfg);
  Ensemble ens = c.ensemble();
  Timer tm(c.rep, "decay");
  Table vals{"decay", {"grid", "t", "value"}, {}};
  Table fits{"fits", {"grid", "dim", "exponent", "expected", "intercept", "residual"}, {}};
  std::vector<Series> plot;
  const json& grids = c.param("grids");
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const GridSpec g = c.grid_at(grids[i], "params.grids[" + std::to_string(i) + "]");
    auto s = c.cfg.contains("potential") ? potential_from(c.cfg["potential"], "potential", &g) : zero_potential();
    auto v = gap_norm_scan(*s, ens.members(g), 0.0, ts, st);
    auto f = decay_fit(ts, v);
    const std::string label = grid_label(g);
    for (std::size_t k = 0; k < ts.size(); ++k) vals.add(label, ts[k], v[k]);
    const double expected = -0.5 * g.dim;
    fits.add(label, g.dim, f.exponent, expected, f.intercept, f.residual);
    plot.push_back({label, ts, v});
    c.check("decay " + label, std::abs(f.exponent - expected) <= 0.05 * std::abs(expected),
            strf("fitted exponent %.4f, expected %.2f +- 5%%", f.exponent, expected));
  }
  c.rep.tables.push_back(vals);
  c.rep.tables.push_back(fits);
  c.rep.plots.emplace_back("decay.svg", svg_plot("free 1->inf proxy vs t", plot, true, true));
}

inline void run_moving(Ctx& c) {
  const GridSpec g = c.grid();
  auto s = c.potential(g);
  const auto ts = c.param("times").get<std::vector<double>>();
  const double M = c.param("cutoff").get<double>();
  const StepSpec st = step_from(c.cfg);
  const auto members = c.ensemble().members(g);
  Timer tm(c.rep, "monitor");
  Table vals{"decay", {"potential", "t", "value"}, {}};
  Table fits{"fits", {"potential", "exponent", "intercept", "residual"}, {}};
  std::vector<Series> plot;
  for (bool with_v : {true, false}) {
    const std::string label = with_v ? "moving" : "free";
    auto v = gap_norm_scan(with_v ? *s : *zero_potential(), members, 0.0, ts, st, M);
    auto f = decay_fit(ts, v);
    for (std::size_t k = 0; k < ts.size(); ++k) vals.add(label, ts[k], v[k]);
    fits.add(label, f.exponent, f.intercept, f.residual);
    plot.push_back({label, ts, v});
    c.check("decay exponent " + label, f.exponent <= -0.4,
            strf("fitted exponent %.4f (threshold -0.4, surrogate of -n/2)", f.exponent), with_v);
  }
  c.rep.tables.push_back(vals);
  c.rep.tables.push_back(fits);
  c.rep.plots.emplace_back("moving.svg", svg_plot("high-cutoff 1->inf proxy vs t", plot, true, true));
}

inline void run_self_similar(Ctx& c) {
  const GridSpec g = c.grid_at(c.param("dense_grid"), "params.dense_grid");
  auto s = c.potential(g);
  const auto ts = c.param("times").get<std::vector<double>>();
  const StepSpec st = step_from(c.cfg);
  Timer tm(c.rep, "dense_bound");
  std::vector<NormReport> reports;
  for (double T : ts) {
    auto M = operator_matrix(g, [&](const Field& f) { return omega_direct(*s, T, f, st); });
    const double h = accumulated_c(*s, g, T);
    for (double p : pset_from(c.cfg)) {
      NormReport r;
      r.label = strf("Omega(0,T) T=%g", T);
      r.p = p;
      r.exact = dense_norm(M, p);
      r.bound = std::exp(h) * 1.2;
      r.margin = *r.bound - *r.exact;
      r.pass = r.margin >= -1e-8;
      r.fixture = "self-similar dense " + grid_label(g);
      r.seed = c.seed;
      reports.push_back(r);
    }
  }
  auto audit = bound_audit(reports);
  c.rep.tables.push_back(norm_table(reports));
  c.rep.tables.push_back(audit_table(audit));
  c.rep.checks.push_back(audit_check("self_similar_bound", audit));
}

inline void mass_check(Ctx& c, const Trajectory& tr, const std::string& run) {
  c.check("mass " + run, tr.mass_drift <= 1e-8, strf("relative mass drift %.3e (tolerance 1e-8)", tr.mass_drift));
}

inline std::vector<double> record_times(double T, double step) {
  std::vector<double> r;
  const int n = static_cast<int>(std::llround(T / step));
  for (int k = 0; k <= n; ++k) r.push_back(std::min(T, step * k));
  if (r.back() < T) r.push_back(T);
  return r;
}

inline void run_nls(Ctx& c) {
  const GridSpec g = c.grid();
  const auto nl = c.nonlinearity();
  const Field psi = state_from(c.cfg, g, c.ensemble());
  auto lin = c.cfg.contains("potential") ? c.potential(g) : nullptr;
  const double T = c.param("T").get<double>();
  const StepSpec st = step_from(c.cfg);
  Timer tm(c.rep, "evolve");
  auto run = nls_evolve(nl, lin.get(), psi, 0.0, T, st, record_times(T, c.P.value("record_step", 0.25)));
  if (run.zero_mode_regularised) c.rep.warnings.push_back("singular kernel: zero mode replaced by the first lattice shell");
  c.rep.tables.push_back(nls_trajectory_table(run, pset_from(c.cfg, {2.0, inf})));
  mass_check(c, run.traj, "nls-run");
  const double lc = c.P.value("linf_c", 1.0);
  std::optional<double> le;
  if (c.P.contains("linf_end")) le = c.P["linf_end"].get<double>();
  auto lm = linf_monitor(run.traj, lc, le);
  c.check("linf_monitor", lm.ratio <= 3.0, strf("sup ||psi(t)||_inf / sup ||e^{-itH0}psi0||_inf = %.4f (limit 3)", lm.ratio));
  const double E0 = energy(nl, psi), E1 = energy(nl, run.traj.final_state());
  c.check("energy", true, strf("relative energy drift %.3e", std::abs(E1 - E0) / std::max(std::abs(E0), 1e-300)), false);
  std::vector<double> linf;
  for (const auto& s : run.traj.states) linf.push_back(lp_norm(s, inf));
  c.rep.plots.emplace_back("linf.svg", svg_plot("||psi(t)||_inf", {{"nls", run.traj.times, linf}}, false, false));
  c.rep.snapshots.emplace_back("states.bin", std::vector<Field>{run.traj.states.front(), run.traj.final_state()});
}

inline void run_picard(Ctx& c) {
  const GridSpec g = c.grid();
  const auto nl = c.nonlinearity();
  if (nl.kind != NonlinearitySpec::Kind::Hartree) throw SchemaError("nonlinearity.kind", "Picard iteration needs a Hartree nonlinearity");
  const Field psi = state_from(c.cfg, g, c.ensemble());
  const int steps = c.P.value("steps", 64), n_max = c.P.value("n_max", 40);
  Timer tm(c.rep, "picard");
  auto th = picard_threshold(nl, psi, c.P.value("T_ref", 1.0));
  double T = th.T;
  if (c.P.contains("T") && c.P["T"].is_number()) T = c.P["T"].get<double>();
  if (!std::isfinite(T)) throw SchemaError("params.T", "smallness threshold is unbounded; give an explicit T");
  auto pr = picard_iterate(nl, psi, T, n_max, steps);
  Table it{"iterations", {"iteration", "diff_strichartz", "diff_c_l2", "factor"}, {}};
  for (std::size_t i = 0; i < pr.diff_strichartz.size(); ++i)
    it.add(i + 1, pr.diff_strichartz[i], pr.diff_c_l2[i], i > 0 ? fmt(pr.factors[i - 1]) : std::string());
  c.rep.tables.push_back(it);
  Table th_t{"threshold", {"cl_constant", "strichartz_c", "f_l2", "T_threshold", "T_used", "steps"}, {}};
  th_t.add(th.cl_constant, th.strichartz_c, th.f_l2, th.T, T, steps);
  c.rep.tables.push_back(th_t);
  c.check("contraction", pr.max_factor <= 5.0 / 6.0,
          strf("max consecutive factor %.4f over %d iterations at T=%.4g (limit 5/6)", pr.max_factor, pr.iterations, T));
  auto split = nls_evolve(nl, nullptr, psi, 0.0, T, {T / steps}, pr.times);
  double cl2 = 0.0;
  for (std::size_t k = 0; k < pr.times.size(); ++k) cl2 = std::max(cl2, lp_norm(split.traj.states[k] - pr.final_iterate[k], 2.0));
  c.check("picard_vs_split", cl2 <= 1e-5, strf("C_t L^2 distance to the split-step solution %.3e (tolerance 1e-5)", cl2));
  mass_check(c, split.traj, "split-step");
}

inline void run_free_channel(Ctx& c) {
  const GridSpec g = c.grid();
  const auto nl = c.nonlinearity();
  const Field psi = state_from(c.cfg, g, c.ensemble());
  auto ts = c.param("times").get<std::vector<double>>();
  std::sort(ts.begin(), ts.end());
  const StepSpec st = step_from(c.cfg);
  auto ps = pset_from(c.cfg, {2.0, inf});
  if (std::find(ps.begin(), ps.end(), 2.0) == ps.end()) ps.insert(ps.begin(), 2.0);
  const std::size_t i2 = static_cast<std::size_t>(std::find(ps.begin(), ps.end(), 2.0) - ps.begin());
  Timer tm(c.rep, "evolve");
  auto run = nls_evolve(nl, nullptr, psi, ts.front(), ts.back(), st, ts);
  mass_check(c, run.traj, "free-channel");
  auto rows = free_channel_deficit(run.traj, ps);
  Table t{"deficit", {"t"}, {}};
  for (double p : ps) t.columns.push_back("norm_" + fmt(p));
  for (double p : ps) t.columns.push_back("cauchy_" + fmt(p));
  std::vector<double> cauchy;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> r{fmt(rows[i].t)};
    for (double v : rows[i].norms) r.push_back(fmt(v));
    for (std::size_t k = 0; k < ps.size(); ++k) r.push_back(rows[i].cauchy.empty() ? "" : fmt(rows[i].cauchy[k]));
    t.rows.push_back(r);
    // Differences between consecutive positive times.
    if (i > 0 && rows[i - 1].t > 0) cauchy.push_back(rows[i].cauchy[i2]);
  }
  c.rep.tables.push_back(t);
  bool dec = cauchy.size() >= 2;
  std::string d = "L2 Cauchy differences:";
  for (std::size_t i = 0; i < cauchy.size(); ++i) {
    d += strf(" %.4e", cauchy[i]);
    if (i > 0) dec = dec && cauchy[i] < cauchy[i - 1];
  }
  c.check("deficit_cauchy", dec, d + " (strictly decreasing required)");
}

inline void run_intertwine(Ctx& c) {
  const GridSpec g = c.grid();
  auto s = c.potential(g);
  const Field psi = state_from(c.cfg, g, c.ensemble());
  const double T = c.param("T").get<double>(), s_max = c.param("s_max").get<double>();
  Timer tm(c.rep, "intertwine");
  auto r = intertwine_check(*s, T, psi, s_max, step_from(c.cfg));
  Table t{"intertwine", {"T", "s_max", "residual", "residual_half", "cauchy"}, {}};
  t.add(T, s_max, r.residual, r.residual_half, r.cauchy);
  c.rep.tables.push_back(t);
  c.check("residual", r.residual <= 5e-2, strf("relative residual %.3e (tolerance 5e-2)", r.residual));
  c.check("residual_vs_truncation", r.residual <= 3.0 * r.cauchy,
          strf("residual %.3e against 3 x s_max Cauchy difference %.3e", r.residual, 3.0 * r.cauchy));
}

inline void run_mikhlin(Ctx& c) {
  const GridSpec g = c.grid();
  const double T = c.param("T").get<double>();
  Timer tm(c.rep, "constants");
  Table t{"constants", {"fixture", "verdict", "m0", "c_T", "h_L1", "mikhlin_c", "vhat0_l1", "vhat0_linf", "km_estimate"}, {}};
  bool finite = true;
  for (const auto& [name, s] : catalog_from(c.param("catalog"), "params.catalog", g)) {
    PotentialConstants d;
    try {
      d = mikhlin_data(*s, g, T);
    } catch (const UnsupportedSpec& e) {
      c.rep.warnings.push_back(name + ": " + e.what());
      t.add(name, std::string("unsupported"), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, std::optional<double>{});
      continue;
    }
    for (double v : {d.m0, d.c_T, d.h_L1, d.mikhlin_c, d.vhat0_l1, d.vhat0_linf, d.km_estimate.value_or(0.0)})
      finite = finite && std::isfinite(v);
    t.add(name, std::string(verdict_name(d.verdict)), d.m0, d.c_T, d.h_L1, d.mikhlin_c, d.vhat0_l1, d.vhat0_linf, d.km_estimate);
  }
  c.rep.tables.push_back(t);
  c.check("constants_finite", finite, "every reported constant is finite");
}

}  // namespace detail

// Validates, merges onto the pinned defaults and runs one experiment.
inline RunReport run_experiment(const json& user_cfg, std::optional<std::uint64_t> seed_override = std::nullopt) {
  validate_config(user_cfg);
  const std::string name = user_cfg["experiment"].get<std::string>();
  json cfg = experiment_defaults(name);
  // params, output, series and ensemble merge key by key; other blocks
  // replace the default block.
  for (auto it = user_cfg.begin(); it != user_cfg.end(); ++it) {
    if (it.value().is_object() && cfg.contains(it.key()) && cfg[it.key()].is_object() &&
        (it.key() == "params" || it.key() == "output" || it.key() == "series" || it.key() == "ensemble"))
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) cfg[it.key()][jt.key()] = jt.value();
    else
      cfg[it.key()] = it.value();
  }
  if (seed_override) cfg["seed"] = *seed_override;
  validate_config(cfg);
  RunReport rep;
  rep.experiment = name;
  rep.seed = cfg.value("seed", std::uint64_t{1});
  rep.config_hash = config_hash(cfg);
  static const json empty = json::object();
  const json& ccfg = cfg;
  detail::Ctx ctx{ccfg, ccfg.contains("params") ? ccfg["params"] : empty, rep, rep.seed};
  static const std::map<std::string, std::function<void(detail::Ctx&)>> table{
      {"cancellation-check", detail::run_cancellation}, {"born-series", detail::run_born},
      {"wave-operator", detail::run_wave_operator},     {"highfreq-scan", detail::run_highfreq},
      {"decay-scan", detail::run_decay},                {"moving-potential", detail::run_moving},
      {"self-similar", detail::run_self_similar},       {"nls-run", detail::run_nls},
      {"picard", detail::run_picard},                   {"free-channel", detail::run_free_channel},
      {"intertwine", detail::run_intertwine},           {"mikhlin-constants", detail::run_mikhlin}};
  table.at(name)(ctx);
  return rep;
}

inline json report_json(const RunReport& rep, const std::vector<std::string>& artifacts, bool strict) {
  json j{{"experiment", rep.experiment}, {"config_hash", rep.config_hash}, {"seed", rep.seed}, {"passed", rep.passed(strict)}};
  j["checks"] = json::array();
  for (const auto& c : rep.checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"asserted", c.asserted}, {"detail", c.detail}});
  j["warnings"] = rep.warnings;
  j["artifacts"] = artifacts;
  j["timings"] = json::object();
  for (const auto& [k, v] : rep.timings) j["timings"][k] = v;
  return j;
}

// Writes CSV tables, report.json and, if requested, SVG plots and snapshots.
inline std::vector<std::string> write_outputs(const RunReport& rep, const std::filesystem::path& dir, bool svg, bool snapshots,
                                              bool strict) {
  std::vector<std::string> artifacts;
  for (const auto& t : rep.tables) {
    auto p = dir / (t.name + ".csv");
    write_csv(p, t);
    artifacts.push_back(p.string());
  }
  if (svg)
    for (const auto& [file, text] : rep.plots) {
      write_text(dir / file, text);
      artifacts.push_back((dir / file).string());
    }
  if (snapshots)
    for (const auto& [file, states] : rep.snapshots) {
      write_snapshot(dir / file, states);
      artifacts.push_back((dir / file).string());
    }
  write_text(dir / "report.json", report_json(rep, artifacts, strict).dump(2) + "\n");
  return artifacts;
}

}  // namespace tdscat
