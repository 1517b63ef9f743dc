// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "lpshift/spectral.hpp"
#include "support.hpp"

using namespace lpshift;
namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string message;
};

void require(bool cond, const std::string& message) {
  if (!cond) throw Failure{message};
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(3);
  out << v;
  return out.str();
}

// ---------------------------------------------------------------------------
// criterion 1: Cuntz relation suite over (n, d, p) grids at 1e-12, under 30 s

void criterion_cuntz_relations(std::string& detail) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  int systems = 0;
  for (int n = 2; n <= 4; ++n)
    for (int depth = 2; depth <= 6; ++depth)
      for (double p : {1.0, 1.5, 2.0, 3.0})
        for (int trial = 0; trial < 20; ++trial) {
          const int d_rho = 1 + trial % std::min(3, depth);
          const int d_a = static_cast<int>(rng() % 3);
          const Potential rho = testing::random_potential(n, d_rho, rng);
          const CylinderFunction a =
              testing::random_symbol(n, std::min(d_a, depth), rng);
          const RelationReport report = verify_covariance(rho, a, p, depth);
          worst = std::max(worst, report.max_deviation());
          ++systems;
        }
  const double seconds =
      std::chrono::duration<double>(clock::now() - start).count();
  require(worst <= 1e-12, "max relation deviation " + fmt(worst));
  require(seconds < 30.0, "suite took " + fmt(seconds) + " s");
  detail = std::to_string(systems) + " systems, max dev " + fmt(worst) + ", " +
           fmt(seconds) + " s";
}

// ---------------------------------------------------------------------------
// criterion 2: exact unit norms and sampled isometry/contraction identities

void criterion_isometry_norms(std::string& detail) {
  std::mt19937_64 rng(2);
  double worst_norm = 0.0, worst_iso = 0.0, worst_contr = 0.0;
  for (int n : {2, 3})
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const int depth = 3;
      const Potential rho = testing::random_potential(n, 2, rng);
      const CylinderMeasure mu = fixed_point_measure(rho, depth + 1);
      const WeightedLpSpace shallow =
          WeightedLpSpace::from_measure(mu.restricted(depth), p);
      const WeightedLpSpace deep = WeightedLpSpace::from_measure(mu, p);
      const RepOperator T = make_T_phi(shallow, deep);
      const RepOperator S = make_S_phi(rho, deep, shallow);
      const auto family = cuntz_family(rho, p, depth, mu);

      worst_norm = std::max(worst_norm, std::abs(exact_norm(T) - 1.0));
      worst_norm = std::max(worst_norm, std::abs(exact_norm(S) - 1.0));
      for (const auto& [Ti, Si] : family) {
        worst_norm = std::max(worst_norm, std::abs(exact_norm(Ti) - 1.0));
        worst_norm = std::max(worst_norm, std::abs(exact_norm(Si) - 1.0));
      }

      for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::VectorXcd f =
            testing::random_vector(shallow.weights.size(), rng);
        const Eigen::VectorXcd g = testing::random_vector(deep.weights.size(), rng);
        const double nf = shallow.norm(f);
        const auto& Ti = family[static_cast<std::size_t>(
            rng() % static_cast<std::uint64_t>(n))];
        worst_iso = std::max(worst_iso, std::abs(deep.norm(Ti.T.apply(f)) - nf));
        worst_contr =
            std::max(worst_contr, shallow.norm(S.apply(g)) - deep.norm(g));
        worst_contr =
            std::max(worst_contr, shallow.norm(Ti.S.apply(g)) - deep.norm(g));
      }
    }
  require(worst_norm <= 1e-13, "unit-norm deviation " + fmt(worst_norm));
  require(worst_iso <= 1e-12, "isometry deviation " + fmt(worst_iso));
  require(worst_contr <= 1e-12, "contraction excess " + fmt(worst_contr));
  detail = "norm dev " + fmt(worst_norm) + ", isometry dev " + fmt(worst_iso);
}

// ---------------------------------------------------------------------------
// criterion 3: three-route radius agreement on 50 random systems + anchors

struct RandomSystem {
  Potential rho;
  CylinderFunction a;
  double p;
};

std::vector<RandomSystem> criterion3_systems() {
  std::vector<RandomSystem> systems;
  std::mt19937_64 rng(3);
  const double ps[4] = {1.0, 1.5, 2.0, 3.0};
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + static_cast<int>(rng() % 2);
    const int d_rho = 1 + static_cast<int>(rng() % 3);
    const int d_a = static_cast<int>(rng() % 3);
    systems.push_back(RandomSystem{testing::random_potential(n, d_rho, rng),
                                   testing::random_symbol(n, d_a, rng),
                                   ps[k % 4]});
  }
  return systems;
}

void criterion_radius_agreement(std::string& detail) {
  double worst_rel = 0.0, worst_width = 0.0;
  for (const RandomSystem& sys : criterion3_systems()) {
    const RadiusReport r = radius(sys.a, sys.rho, sys.p, 3, 500);
    worst_rel = std::max(worst_rel, r.perron_variational_rel_dev);
    worst_width = std::max(worst_width, r.gelfand_width);
    require(r.gelfand_brackets_perron, "Gelfand enclosure missed the Perron value");
  }
  require(worst_rel <= 1e-8, "relative radius deviation " + fmt(worst_rel));
  require(worst_width <= 1e-5, "Gelfand width " + fmt(worst_width));

  // closed-form anchors
  std::mt19937_64 rng(33);
  const RadiusReport unit = radius(CylinderFunction::constant(2, 1.0),
                                   testing::random_potential(2, 2, rng), 1.5, 2, 500);
  require(std::abs(unit.r_perron - 1.0) <= 1e-12,
          "unital anchor r_perron = " + fmt(unit.r_perron));

  Eigen::VectorXd av(2);
  av << 2.0, 1.0;
  const CylinderFunction a2 = CylinderFunction::from_real(2, 1, av);
  const RadiusReport w1 = radius(a2, Potential::uniform(2), 1.0, 2, 500);
  require(std::abs(w1.r_perron - 1.5) <= 1e-10, "anchor p=1: " + fmt(w1.r_perron));
  const RadiusReport w2 = radius(a2, Potential::uniform(2), 2.0, 2, 500);
  require(std::abs(w2.r_perron - std::sqrt(2.5)) <= 1e-10,
          "anchor p=2: " + fmt(w2.r_perron));
  detail = "50 systems, rel dev " + fmt(worst_rel) + ", width " + fmt(worst_width);
}

// ---------------------------------------------------------------------------
// criterion 4: variational dominance and optimizer quality

void criterion_variational_dominance(std::string& detail) {
  std::mt19937_64 rng(4);
  double worst_excess = -1.0, worst_gap = 0.0;
  for (const RandomSystem& sys : criterion3_systems()) {
    const CylinderFunction g = mul(sys.rho.rho(), abs_pow(sys.a, sys.p));
    const int order = std::max(g.depth() - 1, 1);
    const GibbsResult gibbs = gibbs_maximizer(sys.a, sys.rho, sys.p, order);
    require(static_cast<bool>(gibbs.maximizer), "Gibbs maximizer missing");

    for (int m = 0; m < 200; ++m) {
      const MarkovMeasure mm = testing::random_markov(sys.rho.n(), order, rng);
      const Objective f = objective(sys.a, sys.rho, sys.p, mm);
      if (!f.minus_infinity)
        worst_excess = std::max(worst_excess, f.value - gibbs.value.value);
    }
    for (int len = 1; len <= 4; ++len) {
      const std::int64_t count = state_count(sys.rho.n(), len);
      for (std::int64_t w = 0; w < count; ++w) {
        const Objective bound = periodic_orbit_bound(
            sys.a, sys.rho, sys.p, Word::from_index(sys.rho.n(), len, w));
        if (!bound.minus_infinity)
          worst_excess = std::max(worst_excess, bound.value - gibbs.value.value);
      }
    }
    const NumericOptResult numeric =
        maximize_numeric(sys.a, sys.rho, sys.p, order, 20, 0);
    require(!numeric.value.minus_infinity, "numeric optimizer returned -inf");
    worst_excess = std::max(worst_excess, numeric.value.value - gibbs.value.value);
    worst_gap = std::max(worst_gap, gibbs.value.value - numeric.value.value);
  }
  require(worst_excess <= 1e-9, "objective exceeded Gibbs by " + fmt(worst_excess));
  require(worst_gap <= 1e-6, "optimizer fell short by " + fmt(worst_gap));
  detail = "max excess " + fmt(worst_excess) + ", optimizer gap " + fmt(worst_gap);
}

// ---------------------------------------------------------------------------
// criterion 5: Lamperti/Ando structural suite with negative control

void criterion_lamperti_ando(std::string& detail) {
  std::mt19937_64 rng(5);
  double worst_criterion = 0.0, worst_ando = 0.0;
  for (int n : {2, 3})
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const int depth = 3;
      const Potential rho = testing::random_potential(n, 2, rng);
      const CylinderMeasure mu = fixed_point_measure(rho, depth + 1);
      const WeightedLpSpace shallow =
          WeightedLpSpace::from_measure(mu.restricted(depth), p);
      const WeightedLpSpace deep = WeightedLpSpace::from_measure(mu, p);
      const RepOperator T = make_T_phi(shallow, deep);
      const auto family = cuntz_family(rho, p, depth, mu);

      std::vector<const RepOperator*> isometries{&T};
      for (const auto& pair : family) isometries.push_back(&pair.T);
      for (const RepOperator* op : isometries) {
        require(op->kind() == OpKind::weighted_composition,
                "isometry is not one-nonzero-per-row");
        const LampertiDecomposition lam = lamperti_decompose(*op);
        worst_criterion = std::max(worst_criterion, lam.criterion_max_dev);
        // exact reconstruction
        std::vector<Eigen::Triplet<cplx>> trips;
        for (std::size_t v = 0; v < lam.phi.atom_images.size(); ++v)
          for (std::int64_t r : lam.phi.atom_images[v])
            trips.emplace_back(static_cast<int>(r), static_cast<int>(v), lam.h[r]);
        SparseC m(op->matrix().rows(), op->matrix().cols());
        m.setFromTriplets(trips.begin(), trips.end());
        const RepOperator rebuilt(op->source(), op->target(), std::move(m),
                                  op->gauge_degree());
        require(max_abs_diff(rebuilt, *op) == 0.0, "reconstruction not exact");
      }

      const AndoReport ando = ando_projection_check(rho, p, depth);
      worst_ando = std::max({worst_ando, ando.formula_dev, ando.idempotent_dev,
                             ando.unit_dev, ando.range_dev});

      // negative control: perturb one atom weight
      const LampertiDecomposition lam = lamperti_decompose(T);
      std::vector<Eigen::Triplet<cplx>> trips;
      for (std::size_t v = 0; v < lam.phi.atom_images.size(); ++v)
        for (std::int64_t r : lam.phi.atom_images[v]) {
          cplx h = lam.h[r];
          if (v == 0 && r == lam.phi.atom_images[0][0]) h *= 1.01;
          trips.emplace_back(static_cast<int>(r), static_cast<int>(v), h);
        }
      SparseC m(T.matrix().rows(), T.matrix().cols());
      m.setFromTriplets(trips.begin(), trips.end());
      const RepOperator tampered(T.source(), T.target(), std::move(m), +1);
      const LampertiDecomposition bad = lamperti_decompose(tampered);
      require(!bad.is_isometry, "tampered weight passed the criterion");
      const Eigen::VectorXcd witness = Eigen::VectorXcd::Unit(
          shallow.weights.size(), 0);
      require(std::abs(deep.norm(tampered.apply(witness)) -
                       shallow.norm(witness)) > 1e-8,
              "tampered operator stayed isometric on the witness atom");
    }
  require(worst_criterion <= 1e-12, "isometry criterion " + fmt(worst_criterion));
  require(worst_ando <= 1e-12, "Ando deviation " + fmt(worst_ando));
  detail = "criterion dev " + fmt(worst_criterion) + ", Ando dev " + fmt(worst_ando);
}

// ---------------------------------------------------------------------------
// criterion 6: p = 2 adjoint identification

void criterion_p2_adjoint(std::string& detail) {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int n : {2, 3, 4}) {
    const int depth = 3;
    const Potential rho = testing::random_potential(n, 2, rng);
    const CylinderMeasure mu = fixed_point_measure(rho, depth + 1);
    const WeightedLpSpace shallow =
        WeightedLpSpace::from_measure(mu.restricted(depth), 2.0);
    const WeightedLpSpace deep = WeightedLpSpace::from_measure(mu, 2.0);
    const RepOperator T = make_T_phi(shallow, deep);
    const RepOperator S = make_S_phi(rho, deep, shallow);
    worst = std::max(worst, max_abs_diff(S, weighted_adjoint(T)));
    for (const auto& [Ti, Si] : cuntz_family(rho, 2.0, depth, mu))
      worst = std::max(worst, max_abs_diff(Si, weighted_adjoint(Ti)));
  }
  require(worst <= 1e-12, "adjoint deviation " + fmt(worst));
  detail = "max entrywise deviation " + fmt(worst);
}

// ---------------------------------------------------------------------------
// criterion 7: disk evidence (explicitly non-verifying)

void criterion_disk_evidence(std::string& detail) {
  const DiskReport report =
      disk_report(CylinderFunction::constant(2, 1.0), Potential::uniform(2), 2.0,
                  6, {0.4, 0.6, 0.8, 1.2}, {4, 6, 8});
  double worst_ratio = 0.0;
  for (const auto& ring : report.rings)
    if (ring.fraction < 1.0) {
      require(std::isfinite(ring.uniformity_ratio),
              "interior ring hit a singular point");
      worst_ratio = std::max(worst_ratio, ring.uniformity_ratio);
    }
  require(worst_ratio <= 1.05, "angular uniformity ratio " + fmt(worst_ratio));

  require(report.interior_growth.size() == 3, "depth schedule incomplete");
  for (std::size_t k = 1; k < report.interior_growth.size(); ++k)
    require(report.interior_growth[k - 1].value < report.interior_growth[k].value,
            "interior resolvent norm not growing with depth");

  double out_min = std::numeric_limits<double>::infinity(), out_max = 0.0;
  for (const auto& v : report.outside_values) {
    require(std::isfinite(v.value), "outside value not finite");
    out_min = std::min(out_min, v.value);
    out_max = std::max(out_max, v.value);
  }
  require(out_max <= out_min * 1.05, "outside values drift with depth");
  detail = "uniformity " + fmt(worst_ratio) + ", growth " +
           fmt(report.interior_growth[0].value) + " -> " +
           fmt(report.interior_growth[2].value) + ", outside bound " +
           fmt(report.outside_bound) + " (recorded)";
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical CLI reruns with --seed 0

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void criterion_determinism(std::string& detail) {
  const char* cli = std::getenv("LPSHIFT_CLI");
  require(cli != nullptr && *cli,
          "LPSHIFT_CLI must point at the command-line binary");
  const fs::path dir = fs::temp_directory_path() / "lpshift_acceptance";
  fs::create_directories(dir);
  const fs::path cfg = dir / "system.json";
  {
    std::ofstream out(cfg, std::ios::binary);
    out << R"({
  "n": 2,
  "p": 2.0,
  "depth": 3,
  "rho": {"depth": 2, "values": [0.2, 0.5, 0.8, 0.5]},
  "a": {"depth": 1, "values": [[2, 0], [1, 1]]}
})";
  }
  const std::vector<std::string> commands = {"check", "radius", "variational",
                                             "pseudospectrum"};
  std::size_t bytes = 0;
  for (const std::string& sub : commands) {
    const fs::path out_a = dir / (sub + "_a.out");
    const fs::path out_b = dir / (sub + "_b.out");
    for (const fs::path* out : {&out_a, &out_b}) {
      const std::string cmd = std::string(cli) + " " + sub + " --config " +
                              cfg.string() + " --seed 0 --out " +
                              out->string() + " 2> /dev/null";
      const int status = std::system(cmd.c_str());
      require(WIFEXITED(status) && WEXITSTATUS(status) == 0,
              sub + " exited nonzero");
    }
    const std::string a = slurp(out_a), b = slurp(out_b);
    require(!a.empty(), sub + " produced no output");
    require(a == b, sub + " output differs between reruns");
    bytes += a.size();
  }
  detail = "4 commands, " + std::to_string(bytes / 2) +
           " bytes each run, byte-identical";
}

}  // namespace

int main() {
  using Entry = std::pair<std::string, std::function<void(std::string&)>>;
  const std::vector<Entry> criteria = {
      {"criterion 1: Cuntz relation suite (n,d,p grid) <= 1e-12, < 30 s",
       criterion_cuntz_relations},
      {"criterion 2: exact unit norms; sampled isometry/contraction",
       criterion_isometry_norms},
      {"criterion 3: radius triple agreement + closed-form anchors",
       criterion_radius_agreement},
      {"criterion 4: variational dominance and optimizer proximity",
       criterion_variational_dominance},
      {"criterion 5: Lamperti/Ando structure + negative control",
       criterion_lamperti_ando},
      {"criterion 6: p = 2 weighted adjoint identification",
       criterion_p2_adjoint},
      {"criterion 7: disk evidence (non-verifying)", criterion_disk_evidence},
      {"criterion 8: deterministic CLI reruns (--seed 0)",
       criterion_determinism},
  };

  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    std::string why;
    try {
      fn(detail);
    } catch (const Failure& f) {
      ok = false;
      why = f.message;
    } catch (const std::exception& e) {
      ok = false;
      why = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::ostringstream line;
    line << (ok ? "[PASS] " : "[FAIL] ") << name << " (" << fmt(seconds)
         << " s)";
    if (ok && !detail.empty()) line << " -- " << detail;
    if (!ok) line << " -- " << why;
    std::cout << line.str() << std::endl;
    if (!ok) ++failures;
  }
  return failures;
}
