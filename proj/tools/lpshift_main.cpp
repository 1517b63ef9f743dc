#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lpshift/config.hpp"

namespace {

using nlohmann::json;
using namespace lpshift;

constexpr double kRelationPass = 1e-10;

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::optional<int> depth;
  std::optional<double> p;
  std::optional<unsigned> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "system config JSON file")
      ->required();
  cmd->add_option("--out", args.out_path, "write output here (default: stdout)");
  cmd->add_option("--depth", args.depth, "override the working depth");
  cmd->add_option("--p", args.p, "override the exponent p");
  cmd->add_option("--seed", args.seed, "override the solver seed");
}

SystemConfig load(const CommonArgs& args) {
  SystemConfig cfg = load_config(args.config_path);
  if (args.p) {
    if (!(*args.p >= 1.0))
      throw_error(ErrorCode::validation, "--p must be >= 1");
    cfg.p = *args.p;
  }
  if (args.depth) {
    const int dmin = std::max({cfg.potential().depth() - 1, cfg.symbol().depth(), 1});
    if (*args.depth < dmin)
      throw_error(ErrorCode::validation, "--depth too small for rho and a");
    cfg.depth = *args.depth;
  }
  if (args.seed) cfg.solver.seed = *args.seed;
  return cfg;
}

void emit(const CommonArgs& args, const std::string& text) {
  if (args.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(args.out_path, std::ios::binary);
  if (!out)
    throw_error(ErrorCode::validation, "cannot open output file " + args.out_path);
  out << text;
}

// rebuilds diag(h) T_Phi from a decomposition, optionally with one tampered
// atom weight (negative control for the isometry criterion)
RepOperator rebuild_from_decomposition(const RepOperator& op,
                                       const LampertiDecomposition& lam,
                                       double tamper_eps) {
  Eigen::VectorXcd h = lam.h;
  if (tamper_eps != 0.0 && !lam.phi.atom_images.empty())
    for (std::int64_t r : lam.phi.atom_images.front()) h[r] *= 1.0 + tamper_eps;
  std::vector<Eigen::Triplet<cplx>> trips;
  for (std::size_t v = 0; v < lam.phi.atom_images.size(); ++v)
    for (std::int64_t r : lam.phi.atom_images[v])
      trips.emplace_back(static_cast<int>(r), static_cast<int>(v), h[r]);
  SparseC m(op.matrix().rows(), op.matrix().cols());
  m.setFromTriplets(trips.begin(), trips.end());
  return RepOperator(op.source(), op.target(), std::move(m), op.gauge_degree());
}

int cmd_check(const CommonArgs& args, double tamper_eps) {
  const SystemConfig cfg = load(args);
  const Potential& rho = cfg.potential();
  const CylinderFunction& a = cfg.symbol();
  const PowerOptions popts{cfg.solver.power_tol, cfg.solver.power_max_iter};

  RelationReport report = verify_covariance(rho, a, cfg.p, cfg.depth);

  const CylinderMeasure mu = fixed_point_measure(rho, cfg.depth + 1, popts);
  const WeightedLpSpace Xd =
      WeightedLpSpace::from_measure(mu.restricted(cfg.depth), cfg.p);
  const WeightedLpSpace Xd1 = WeightedLpSpace::from_measure(mu, cfg.p);
  const RepOperator T = make_T_phi(Xd, Xd1);

  LampertiDecomposition lam = lamperti_decompose(T);
  if (tamper_eps != 0.0) {
    const RepOperator tampered = rebuild_from_decomposition(T, lam, tamper_eps);
    lam = lamperti_decompose(tampered);
  }
  report.record("lamperti_isometry_criterion", lam.criterion_max_dev);
  report.record("lamperti_reconstruction",
                max_abs_diff(rebuild_from_decomposition(T, lam, 0.0), T));
  {
    double dev = 0.0;
    const auto family = cuntz_family(rho, cfg.p, cfg.depth, mu);
    for (const auto& pair : family)
      dev = std::max(dev, lamperti_decompose(pair.T).criterion_max_dev);
    report.record("lamperti_isometry_criterion_Ti", dev);
  }

  const AndoReport ando = ando_projection_check(rho, cfg.p, cfg.depth);
  report.record("ando_projection_formula", ando.formula_dev);
  report.record("ando_idempotent", ando.idempotent_dev);
  report.record("ando_unit", ando.unit_dev);
  report.record("ando_range", ando.range_dev);

  const RadonNikodymReport rn = radon_nikodym_check(rho, mu, cfg.depth);
  report.record("radon_nikodym_derivative", rn.max_rel_dev);

  const bool pass = report.max_deviation() <= kRelationPass;
  json doc{{"command", "check"},
           {"n", cfg.n},
           {"p", cfg.p},
           {"depth", cfg.depth},
           {"tolerances", tolerances_json(cfg.solver)},
           {"report", to_json(report)},
           {"ando", to_json(ando)},
           {"radon_nikodym", to_json(rn)},
           {"pass", pass}};
  emit(args, doc.dump(2) + "\n");
  return pass ? 0 : 3;
}

int cmd_radius(const CommonArgs& args, const std::string& sweep, bool csv) {
  const SystemConfig cfg = load(args);
  if (sweep.empty() && !csv) {
    const RadiusReport r = radius(cfg.symbol(), cfg.potential(), cfg.p, cfg.depth,
                                  cfg.solver.gelfand_iters);
    json doc{{"command", "radius"},
             {"n", cfg.n},
             {"depth", cfg.depth},
             {"tolerances", tolerances_json(cfg.solver)}};
    doc.update(to_json(r));
    emit(args, doc.dump(2) + "\n");
    return (r.perron_variational_agree && r.gelfand_brackets_perron) ? 0 : 2;
  }

  std::vector<double> ps;
  if (sweep.empty()) {
    ps.push_back(cfg.p);
  } else {
    double lo = 0.0, hi = 0.0, step = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream in(sweep);
    if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' ||
        step <= 0.0 || lo < 1.0 || hi < lo)
      throw_error(ErrorCode::validation, "--sweep-p expects A:B:STEP with A >= 1");
    for (double p = lo; p <= hi + 1e-12; p += step) ps.push_back(p);
  }
  std::ostringstream out;
  out << "p,r_perron,r_gelfand_lower,r_gelfand_upper,r_variational\n";
  char buf[256];
  bool all_agree = true;
  for (double p : ps) {
    const RadiusReport r =
        radius(cfg.symbol(), cfg.potential(), p, cfg.depth, cfg.solver.gelfand_iters);
    all_agree = all_agree && r.perron_variational_agree && r.gelfand_brackets_perron;
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", p,
                  r.r_perron, r.r_gelfand.lower, r.r_gelfand.upper,
                  r.r_variational);
    out << buf;
  }
  emit(args, out.str());
  return all_agree ? 0 : 2;
}

int cmd_variational(const CommonArgs& args, const std::vector<std::string>& orbits) {
  const SystemConfig cfg = load(args);
  const Potential& rho = cfg.potential();
  const CylinderFunction& a = cfg.symbol();
  const int order =
      std::max(std::max(rho.depth(), a.depth()) - 1, 1);

  const GibbsResult gibbs = gibbs_maximizer(a, rho, cfg.p, order);
  const NumericOptResult numeric = maximize_numeric(
      a, rho, cfg.p, order, cfg.solver.restarts, cfg.solver.seed);

  json orbit_bounds = json::array();
  std::vector<std::string> orbit_words = orbits;
  if (orbit_words.empty()) {
    for (int len = 1; len <= 2; ++len) {
      const std::int64_t count = state_count(cfg.n, len);
      for (std::int64_t j = 0; j < count; ++j)
        orbit_words.push_back(Word::from_index(cfg.n, len, j).str());
    }
  }
  for (const auto& text : orbit_words) {
    const Word w = Word::parse(cfg.n, text);
    if (w.size() == 0)
      throw_error(ErrorCode::validation, "--orbit word must be nonempty");
    const Objective bound = periodic_orbit_bound(a, rho, cfg.p, w);
    orbit_bounds.push_back(json{{"word", w.str()}, {"bound", to_json(bound)}});
  }

  const double gibbs_value =
      gibbs.value.minus_infinity ? -std::numeric_limits<double>::infinity()
                                 : gibbs.value.value;
  const double numeric_value =
      numeric.value.minus_infinity ? -std::numeric_limits<double>::infinity()
                                   : numeric.value.value;
  const bool consistent = numeric_value <= gibbs_value + 1e-9;

  json doc{{"command", "variational"},
           {"n", cfg.n},
           {"p", cfg.p},
           {"order", order},
           {"tolerances", tolerances_json(cfg.solver)},
           {"gibbs", to_json(gibbs)},
           {"numeric", to_json(numeric)},
           {"orbit_bounds", orbit_bounds},
           {"numeric_below_gibbs", consistent}};
  emit(args, doc.dump(2) + "\n");
  return consistent ? 0 : 3;
}

int cmd_pseudospectrum(const CommonArgs& args, const std::string& radii_csv,
                       bool as_json) {
  const SystemConfig cfg = load(args);
  std::vector<double> fractions;
  {
    std::istringstream in(radii_csv);
    std::string tok;
    while (std::getline(in, tok, ','))
      if (!tok.empty()) fractions.push_back(std::stod(tok));
  }
  if (fractions.empty()) fractions = {0.4, 0.6, 0.8};

  if (as_json) {
    const DiskReport report = disk_report(
        cfg.symbol(), cfg.potential(), cfg.p, cfg.depth, fractions,
        {cfg.depth - 4, cfg.depth - 2, cfg.depth}, cfg.solver.gelfand_iters,
        cfg.solver.angles, cfg.solver.seed);
    json doc{{"command", "pseudospectrum"},
             {"tolerances", tolerances_json(cfg.solver)}};
    doc.update(to_json(report));
    emit(args, doc.dump(2) + "\n");
    return 0;
  }

  const RadiusReport r = radius(cfg.symbol(), cfg.potential(), cfg.p, cfg.depth,
                                cfg.solver.gelfand_iters);
  if (r.r_perron <= 0.0)
    throw_error(ErrorCode::validation,
                "spectral radius is zero; no rings to sample");
  const RepOperator A = compress(cfg.symbol(), cfg.potential(), cfg.p, cfg.depth);
  GridSpec spec;
  spec.angles = cfg.solver.angles;
  spec.probes = cfg.solver.probes;
  spec.seed = cfg.solver.seed;
  for (double t : fractions) spec.radii.push_back(t * r.r_perron);
  const PseudospectrumGrid grid = pseudospectrum(A, cfg.p, spec);
  std::ostringstream out;
  grid.write_csv(out);
  emit(args, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "transfer-operator representations on weighted L^p spaces: relation "
      "checks, spectral radii of weighted shifts, variational principle, "
      "and pseudospectrum evidence.\n\nValue vectors over depth-d words use "
      "the canonical order idx(w) = sum_k (w_k - 1) n^(d-k) (first letter "
      "most significant); run `lpshift schema` for the config format."};
  app.require_subcommand(1);

  CommonArgs check_args, radius_args, var_args, pseudo_args;
  double tamper_eps = 0.0;
  std::string sweep, radii_csv;
  bool radius_csv = false, pseudo_json = false, pseudo_csv = false;
  std::vector<std::string> orbits;
  std::string schema_out;

  CLI::App* check = app.add_subcommand(
      "check", "verify every generating relation and structural identity");
  add_common(check, check_args);
  check->add_option("--tamper-h", tamper_eps,
                    "debug: scale one atom weight by 1+eps before the "
                    "isometry criterion (negative control)");

  CLI::App* rad = app.add_subcommand(
      "radius", "spectral radius of pi(a)T by three independent routes");
  add_common(rad, radius_args);
  rad->add_option("--sweep-p", sweep, "sweep the exponent, format A:B:STEP (CSV out)");
  rad->add_flag("--csv", radius_csv, "emit CSV (single row without --sweep-p)");

  CLI::App* var = app.add_subcommand(
      "variational", "Gibbs maximizer, numeric optimizer, and orbit bounds");
  add_common(var, var_args);
  var->add_option("--orbit", orbits,
                  "periodic orbit word, comma-separated letters (repeatable)");

  CLI::App* pseudo = app.add_subcommand(
      "pseudospectrum", "resolvent-norm grid of the finite section (CSV), or "
                        "a disk-evidence summary with --json");
  add_common(pseudo, pseudo_args);
  pseudo->add_option("--radii", radii_csv,
                     "ring radii as fractions of r(pi(a)T), comma-separated "
                     "(default 0.4,0.6,0.8)");
  pseudo->add_flag("--json", pseudo_json, "emit the disk-evidence JSON summary");
  pseudo->add_flag("--csv", pseudo_csv, "emit the grid CSV (default)");

  CLI::App* schema = app.add_subcommand("schema", "emit the config schema");
  schema->add_option("--out", schema_out, "write output here (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(check_args, tamper_eps);
    if (rad->parsed()) return cmd_radius(radius_args, sweep, radius_csv);
    if (var->parsed()) return cmd_variational(var_args, orbits);
    if (pseudo->parsed())
      return cmd_pseudospectrum(pseudo_args, radii_csv, pseudo_json && !pseudo_csv);
    if (schema->parsed()) {
      const std::string text = lpshift::config_schema().dump(2) + "\n";
      if (schema_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(schema_out, std::ios::binary);
        out << text;
      }
      return 0;
    }
  } catch (const lpshift::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return e.code() == lpshift::ErrorCode::convergence ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
