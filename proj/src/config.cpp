#include "lpshift/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lpshift {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) {
  throw_error(ErrorCode::validation, "config: " + msg);
}

double number_field(const json& doc, const char* name) {
  if (!doc.contains(name) || !doc[name].is_number())
    bad(std::string("missing or non-numeric field '") + name + "'");
  return doc[name].get<double>();
}

cplx parse_complex(const json& v, const std::string& where) {
  if (v.is_number()) return cplx(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return cplx(v[0].get<double>(), v[1].get<double>());
  bad(where + ": complex values are numbers or [re, im] pairs");
}

CylinderFunction parse_function(const json& doc, int n, const std::string& name,
                                bool real_only) {
  if (!doc.is_object() || !doc.contains("depth") || !doc.contains("values"))
    bad("'" + name + "' must be an object with 'depth' and 'values'");
  const int depth = doc["depth"].get<int>();
  if (depth < 0) bad("'" + name + "' depth must be >= 0");
  const std::int64_t count = state_count(n, depth);
  if (!doc["values"].is_array() ||
      static_cast<std::int64_t>(doc["values"].size()) != count) {
    std::ostringstream msg;
    msg << "'" << name << "' needs " << count << " values at depth " << depth
        << " over " << n << " letters";
    bad(msg.str());
  }
  Eigen::VectorXcd values(count);
  for (std::int64_t j = 0; j < count; ++j) {
    std::ostringstream where;
    where << "'" << name << "' value " << j;
    values[j] = parse_complex(doc["values"][static_cast<std::size_t>(j)],
                              where.str());
    if (real_only && values[j].imag() != 0.0)
      bad("'" + name + "' must be real-valued");
  }
  return CylinderFunction(n, depth, std::move(values));
}

json word_strings(int n, int depth) {
  json out = json::array();
  const std::int64_t count = state_count(n, depth);
  for (std::int64_t j = 0; j < count; ++j)
    out.push_back(Word::from_index(n, depth, j).str());
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) out.push_back(v[j]);
  return out;
}

}  // namespace

SystemConfig parse_config(const json& doc) {
  if (!doc.is_object()) bad("document must be a JSON object");
  SystemConfig cfg;

  const double n_raw = number_field(doc, "n");
  if (n_raw != std::floor(n_raw) || n_raw < 2) bad("'n' must be an integer >= 2");
  cfg.n = static_cast<int>(n_raw);

  cfg.p = number_field(doc, "p");
  if (!(cfg.p >= 1.0) || !std::isfinite(cfg.p)) bad("'p' must lie in [1, infinity)");

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    if (!s.is_object()) bad("'solver' must be an object");
    if (s.contains("power_tol")) cfg.solver.power_tol = s["power_tol"].get<double>();
    if (s.contains("power_max_iter"))
      cfg.solver.power_max_iter = s["power_max_iter"].get<int>();
    if (s.contains("gelfand_iters"))
      cfg.solver.gelfand_iters = s["gelfand_iters"].get<int>();
    if (s.contains("restarts")) cfg.solver.restarts = s["restarts"].get<int>();
    if (s.contains("seed")) cfg.solver.seed = s["seed"].get<unsigned>();
    if (s.contains("angles")) cfg.solver.angles = s["angles"].get<int>();
    if (s.contains("probes")) cfg.solver.probes = s["probes"].get<int>();
    if (s.contains("state_cap"))
      cfg.solver.state_cap = s["state_cap"].get<std::int64_t>();
    if (cfg.solver.power_tol <= 0.0 || cfg.solver.power_max_iter < 1 ||
        cfg.solver.gelfand_iters < 1 || cfg.solver.restarts < 1 ||
        cfg.solver.angles < 1 || cfg.solver.probes < 1)
      bad("solver settings must be positive");
  }
  set_state_cap(cfg.solver.state_cap);

  if (!doc.contains("rho")) bad("missing required field 'rho'");
  cfg.rho.emplace(parse_function(doc["rho"], cfg.n, "rho", /*real_only=*/true));

  if (doc.contains("a")) {
    cfg.a.emplace(parse_function(doc["a"], cfg.n, "a", /*real_only=*/false));
  } else {
    cfg.a.emplace(CylinderFunction::constant(cfg.n, 1.0));
  }

  if (doc.contains("depth")) {
    const double d_raw = number_field(doc, "depth");
    if (d_raw != std::floor(d_raw) || d_raw < 1) bad("'depth' must be an integer >= 1");
    cfg.depth = static_cast<int>(d_raw);
  }
  const int dmin = std::max({cfg.rho->depth() - 1, cfg.a->depth(), 1});
  if (cfg.depth < dmin) {
    std::ostringstream msg;
    msg << "'depth' must be >= " << dmin << " for these rho and a";
    bad(msg.str());
  }
  state_count(cfg.n, cfg.depth + 1);  // cap check up front
  return cfg;
}

nlohmann::json config_to_json(const SystemConfig& cfg) {
  json rho_values = json::array();
  const Eigen::VectorXd rv = cfg.potential().values();
  for (Eigen::Index j = 0; j < rv.size(); ++j) rho_values.push_back(rv[j]);
  json a_values = json::array();
  for (std::int64_t j = 0; j < cfg.symbol().size(); ++j) {
    const cplx v = cfg.symbol().values()[j];
    a_values.push_back(json::array({v.real(), v.imag()}));
  }
  return json{{"n", cfg.n},
              {"p", cfg.p},
              {"depth", cfg.depth},
              {"rho", {{"depth", cfg.potential().depth()}, {"values", rho_values}}},
              {"a", {{"depth", cfg.symbol().depth()}, {"values", a_values}}},
              {"solver",
               {{"power_tol", cfg.solver.power_tol},
                {"power_max_iter", cfg.solver.power_max_iter},
                {"gelfand_iters", cfg.solver.gelfand_iters},
                {"restarts", cfg.solver.restarts},
                {"seed", cfg.solver.seed},
                {"angles", cfg.solver.angles},
                {"probes", cfg.solver.probes},
                {"state_cap", cfg.solver.state_cap}}}};
}

SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::validation, "cannot open config file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw_error(ErrorCode::validation, std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json config_schema() {
  json schema;
  schema["word_order"] =
      "vectors over depth-d words are indexed lexicographically with the "
      "first letter most significant: idx(w) = sum_k (w_k - 1) n^(d-k)";
  schema["fields"] = {
      {"n", "alphabet size, integer >= 2"},
      {"p", "exponent of the L^p space, real >= 1"},
      {"depth", "working depth, integer >= max(rho.depth - 1, a.depth, 1)"},
      {"rho",
       "object {depth >= 1, values: n^depth positive reals}; preimage sums "
       "must equal 1 to 1e-12 per fiber (then renormalized exactly)"},
      {"a",
       "object {depth >= 0, values: n^depth entries, each a number or an "
       "[re, im] pair}; defaults to the constant 1"},
      {"solver",
       "optional overrides: power_tol (1e-13), power_max_iter (100000), "
       "gelfand_iters (500), restarts (20), seed (0), angles (64), "
       "probes (64), state_cap (2^20)"}};
  return schema;
}

json tolerances_json(const SolverOptions& solver) {
  return json{{"power_tol", solver.power_tol},
              {"power_max_iter", solver.power_max_iter},
              {"gelfand_iters", solver.gelfand_iters},
              {"restarts", solver.restarts},
              {"seed", solver.seed},
              {"angles", solver.angles},
              {"probes", solver.probes},
              {"relation_pass_threshold", 1e-10},
              {"radius_agreement_rel", 1e-8}};
}

json to_json(const GelfandEnclosure& g) {
  return json{{"lower", g.lower}, {"upper", g.upper}, {"estimate", g.estimate}};
}

json to_json(const RadiusReport& r) {
  return json{{"p", r.p},
              {"r_perron", r.r_perron},
              {"r_gelfand", to_json(r.r_gelfand)},
              {"r_variational", r.r_variational},
              {"perron_variational_rel_dev", r.perron_variational_rel_dev},
              {"perron_variational_agree", r.perron_variational_agree},
              {"gelfand_brackets_perron", r.gelfand_brackets_perron},
              {"gelfand_width", r.gelfand_width}};
}

json to_json(const RelationReport& r) {
  json rel = json::object();
  for (const auto& [name, dev] : r.deviations) rel[name] = dev;
  return json{{"relations", rel}, {"max_deviation", r.max_deviation()}};
}

json to_json(const AndoReport& r) {
  return json{{"formula_dev", r.formula_dev},
              {"idempotent_dev", r.idempotent_dev},
              {"unit_dev", r.unit_dev},
              {"range_dev", r.range_dev},
              {"norm_T", r.norm_T},
              {"norm_S", r.norm_S}};
}

json to_json(const RadonNikodymReport& r) {
  return json{{"max_rel_dev", r.max_rel_dev}};
}

json to_json(const LampertiDecomposition& d) {
  return json{{"criterion_max_dev", d.criterion_max_dev},
              {"is_isometry", d.is_isometry}};
}

json to_json(const MarkovMeasure& m) {
  return json{{"n", m.n()},
              {"order", m.order()},
              {"states", word_strings(m.n(), m.order())},
              {"transition", matrix_json(m.transition())},
              {"stationary", vector_json(m.stationary())}};
}

json to_json(const Objective& v) {
  if (v.minus_infinity) return json{{"value", "-inf"}, {"finite", false}};
  return json{{"value", v.value}, {"finite", true}};
}

json to_json(const GibbsResult& g) {
  json out{{"objective", to_json(g.value)},
           {"lambda", g.lambda},
           {"unique", g.unique}};
  if (g.maximizer) out["measure"] = to_json(*g.maximizer);
  return out;
}

json to_json(const NumericOptResult& r) {
  json out{{"objective", to_json(r.value)}, {"converged", r.converged}};
  if (r.best) out["measure"] = to_json(*r.best);
  return out;
}

namespace {
json finite_or_string(double v) {
  if (std::isfinite(v)) return json(v);
  return json(v > 0 ? "inf" : "-inf");
}
}  // namespace

json to_json(const DiskReport& d) {
  json rings = json::array();
  for (const auto& ring : d.rings)
    rings.push_back(json{{"fraction", ring.fraction},
                         {"radius", ring.radius},
                         {"min_value", finite_or_string(ring.min_value)},
                         {"max_value", finite_or_string(ring.max_value)},
                         {"uniformity_ratio", finite_or_string(ring.uniformity_ratio)},
                         {"boundary_band", ring.boundary_band}});
  json growth = json::array();
  for (const auto& v : d.interior_growth)
    growth.push_back(json{{"depth", v.depth}, {"value", finite_or_string(v.value)}});
  json outside = json::array();
  for (const auto& v : d.outside_values)
    outside.push_back(json{{"depth", v.depth}, {"value", finite_or_string(v.value)}});
  return json{{"radius", to_json(d.radius)},
              {"p", d.p},
              {"depth", d.depth},
              {"rings", rings},
              {"interior_growth", growth},
              {"outside_values", outside},
              {"outside_bound", finite_or_string(d.outside_bound)},
              {"note", d.note}};
}

}  // namespace lpshift
