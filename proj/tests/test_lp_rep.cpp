#include <doctest.h>

#include <random>

#include "lpshift/lp_rep.hpp"
#include "support.hpp"

using namespace lpshift;

namespace {

CylinderFunction real_fn(int n, int depth, std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index j = 0;
  for (double x : vals) v[j++] = x;
  return CylinderFunction::from_real(n, depth, v);
}

struct System {
  Potential rho;
  CylinderMeasure mu;  // at depth + 1
  WeightedLpSpace shallow;
  WeightedLpSpace deep;
  RepOperator T;
  RepOperator S;
};

System make_system(const Potential& rho, double p, int depth) {
  CylinderMeasure mu = fixed_point_measure(rho, depth + 1);
  WeightedLpSpace shallow = WeightedLpSpace::from_measure(mu.restricted(depth), p);
  WeightedLpSpace deep = WeightedLpSpace::from_measure(mu, p);
  RepOperator T = make_T_phi(shallow, deep);
  RepOperator S = make_S_phi(rho, deep, shallow);
  return System{rho, std::move(mu), std::move(shallow), std::move(deep),
                std::move(T), std::move(S)};
}

// independent norm estimate: maximize ||Mf|| / ||f|| over random vectors,
// mixing dense and sparse samples so the per-atom maximum can be hit
double brute_force_norm(const RepOperator& op, int samples, std::mt19937_64& rng) {
  const std::int64_t dim = op.matrix().cols();
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(dim);
    if (s % 3 == 0) {
      const int support = 1 + static_cast<int>(rng() % 4);
      for (int k = 0; k < support; ++k)
        f[static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(dim))] =
            cplx(testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1));
    } else {
      f = testing::random_vector(dim, rng);
    }
    const double nf = op.source().norm(f);
    if (nf == 0.0) continue;
    best = std::max(best, op.target().norm(op.apply(f)) / nf);
  }
  return best;
}

}  // namespace

TEST_CASE("make_pi: identity, indicators, exact diagonal norm") {
  const System sys = make_system(Potential::uniform(2), 2.0, 1);

  CHECK(max_abs_diff(make_pi(CylinderFunction::constant(2, 1.0), sys.shallow),
                     RepOperator::identity(sys.shallow)) == 0.0);

  const RepOperator proj =
      make_pi(CylinderFunction::indicator(Word(2, {1}), 1), sys.shallow);
  CHECK(proj.kind() == OpKind::multiplication);
  CHECK(Eigen::MatrixXcd(proj.matrix())(0, 0) == cplx(1.0));
  CHECK(Eigen::MatrixXcd(proj.matrix())(1, 1) == cplx(0.0));

  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const System s = make_system(Potential::uniform(2), p, 1);
    CHECK(exact_norm(make_pi(real_fn(2, 1, {3.0, -5.0}), s.shallow)) == 5.0);
  }
}

TEST_CASE("make_T_phi: matrix, isometry, preimage of a cylinder") {
  // constants map to constants: depth 0 -> 1 is the all-ones column
  const Potential rho(real_fn(2, 1, {0.3, 0.7}));
  {
    const CylinderMeasure mu = fixed_point_measure(rho, 1);
    const WeightedLpSpace X0 = WeightedLpSpace::from_measure(mu.restricted(0), 2.0);
    const WeightedLpSpace X1 = WeightedLpSpace::from_measure(mu, 2.0);
    const RepOperator T = make_T_phi(X0, X1);
    const Eigen::MatrixXcd dense = T.dense();
    CHECK(dense.rows() == 2);
    CHECK(dense.cols() == 1);
    CHECK(dense(0, 0) == cplx(1.0));
    CHECK(dense(1, 0) == cplx(1.0));
  }

  const System sys = make_system(rho, 1.5, 2);
  CHECK(sys.T.kind() == OpKind::weighted_composition);
  CHECK(exact_norm(sys.T) == 1.0);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXcd f = testing::random_vector(4, rng);
    CHECK(sys.deep.norm(sys.T.apply(f)) ==
          doctest::Approx(sys.shallow.norm(f)).epsilon(1e-12));
  }

  // T 1_{C_2} = 1_{C_12} + 1_{C_22} at depth 1 -> 2
  const System sys1 = make_system(rho, 2.0, 1);
  const Eigen::VectorXcd image =
      sys1.T.apply(CylinderFunction::indicator(Word(2, {2}), 1).values());
  const Eigen::VectorXcd expected =
      add(CylinderFunction::indicator(Word(2, {1, 2}), 2),
          CylinderFunction::indicator(Word(2, {2, 2}), 2))
          .values();
  CHECK((image - expected).cwiseAbs().maxCoeff() == 0.0);

  // mismatched exponents are rejected
  const WeightedLpSpace other{2, 3, 2.5, sys.deep.weights};
  CHECK_THROWS_AS(make_T_phi(sys.shallow, other), Error);
}

TEST_CASE("make_S_phi: averaging action, left inverse, unit norm") {
  const System sys = make_system(Potential::uniform(2), 2.0, 1);

  Eigen::VectorXcd f(4);
  f << 3.0, 5.0, 3.0, 5.0;  // order 11, 12, 21, 22
  const Eigen::VectorXcd out = sys.S.apply(f);
  CHECK(out[0] == cplx(3.0));
  CHECK(out[1] == cplx(5.0));

  // S T = identity, exactly
  CHECK(max_abs_diff(sys.S * sys.T, RepOperator::identity(sys.shallow)) == 0.0);

  // S 1 = 1
  const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(4);
  CHECK((sys.S.apply(ones) - Eigen::VectorXcd::Ones(2)).cwiseAbs().maxCoeff() == 0.0);

  // the closed-form norm of the fiber average is 1 (computed through the
  // dual one-nonzero-per-row structure)
  std::mt19937_64 rng(9);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const Potential rho = testing::random_potential(2, 2, rng);
    const System s = make_system(rho, p, 2);
    CHECK(exact_norm(s.S) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(s.S.kind() == OpKind::general);
    // S (T g) = g for arbitrary g
    const Eigen::VectorXcd g = testing::random_vector(4, rng);
    CHECK((s.S.apply(s.T.apply(g)) - g).cwiseAbs().maxCoeff() <= 1e-15);
    // contraction on random inputs
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXcd h = testing::random_vector(8, rng);
      CHECK(s.shallow.norm(s.S.apply(h)) <= s.deep.norm(h) + 1e-12);
    }
  }
}

TEST_CASE("cuntz family relations and isometry norms") {
  std::mt19937_64 rng(13);
  for (int n : {2, 3}) {
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const Potential rho = testing::random_potential(n, 2, rng);
      const int depth = 2;
      const CylinderMeasure mu = fixed_point_measure(rho, depth + 1);
      const auto family = cuntz_family(rho, p, depth, mu);
      const WeightedLpSpace shallow =
          WeightedLpSpace::from_measure(mu.restricted(depth), p);
      const WeightedLpSpace deep = WeightedLpSpace::from_measure(mu, p);

      std::optional<RepOperator> sum;
      for (int i = 0; i < n; ++i) {
        const auto& [Ti, Si] = family[static_cast<std::size_t>(i)];
        CHECK(Ti.kind() == OpKind::weighted_composition);
        CHECK(Si.kind() == OpKind::weighted_composition);
        CHECK(max_abs_diff(Si * Ti, RepOperator::identity(shallow)) <= 1e-15);

        const RepOperator proj = Ti * Si;
        const CylinderFunction ind =
            CylinderFunction::indicator(Word(n, {i + 1}), 1);
        CHECK(max_abs_diff(proj, make_pi(ind, deep)) <= 1e-15);
        // hermitian witness: diagonal with real 0/1 entries
        CHECK(proj.kind() == OpKind::multiplication);
        const Eigen::MatrixXcd dense = proj.dense();
        for (Eigen::Index j = 0; j < dense.rows(); ++j) {
          CHECK(dense(j, j).imag() == 0.0);
          CHECK(std::min(std::abs(dense(j, j) - 1.0), std::abs(dense(j, j))) <=
                1e-15);
        }

        CHECK(exact_norm(Ti) == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(exact_norm(Si) == doctest::Approx(1.0).epsilon(1e-13));
        for (int trial = 0; trial < 10; ++trial) {
          const Eigen::VectorXcd f =
              testing::random_vector(shallow.weights.size(), rng);
          CHECK(deep.norm(Ti.apply(f)) ==
                doctest::Approx(shallow.norm(f)).epsilon(1e-12));
        }
        sum = sum ? sum->plus(proj) : proj;
      }
      CHECK(max_abs_diff(*sum, RepOperator::identity(deep)) <= 1e-15);
    }
  }
}

TEST_CASE("verify_covariance: every relation within 1e-12") {
  std::mt19937_64 rng(17);
  const CylinderFunction a = testing::random_symbol(2, 2, rng);
  const RelationReport report =
      verify_covariance(Potential::uniform(2), a, 2.0, 4);
  for (const auto& [name, dev] : report.deviations) {
    INFO(name);
    CHECK(dev <= 1e-12);
  }
  // trivial symbol
  const RelationReport trivial = verify_covariance(
      Potential::uniform(2), CylinderFunction::constant(2, 1.0), 1.0, 3);
  CHECK(trivial.max_deviation() <= 1e-12);
}

TEST_CASE("exact_norm vs brute force, and the p-power norm identity") {
  std::mt19937_64 rng(19);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const Potential rho = testing::random_potential(2, 2, rng);
    const System sys = make_system(rho, p, 3);
    const CylinderFunction a = testing::random_symbol(2, 2, rng);
    const RepOperator op = make_pi(a, sys.deep) * sys.T;

    const double exact = exact_norm(op);
    const double brute = brute_force_norm(op, 10000, rng);
    CHECK(brute <= exact * (1.0 + 1e-12));
    CHECK(brute >= exact * 0.98);
  }

  // ||(pi(a) T)^N||^p equals the L^1 norm of the |a|^p-weighted power
  std::mt19937_64 rng2(23);
  const Potential rho = testing::random_potential(2, 1, rng2);
  const CylinderFunction a = testing::random_symbol(2, 1, rng2);
  for (double p : {1.5, 2.0, 3.0}) {
    const int N = 3;
    const CylinderMeasure mu = fixed_point_measure(rho, N + 1);
    std::optional<RepOperator> powered, powered1;
    for (int k = 0; k < N; ++k) {
      const WeightedLpSpace lo =
          WeightedLpSpace::from_measure(mu.restricted(k), p);
      const WeightedLpSpace hi =
          WeightedLpSpace::from_measure(mu.restricted(k + 1), p);
      const RepOperator step = make_pi(a, hi) * make_T_phi(lo, hi);
      powered = powered ? step * *powered : step;
      const WeightedLpSpace lo1 =
          WeightedLpSpace::from_measure(mu.restricted(k), 1.0);
      const WeightedLpSpace hi1 =
          WeightedLpSpace::from_measure(mu.restricted(k + 1), 1.0);
      const RepOperator step1 =
          make_pi(abs_pow(a, p), hi1) * make_T_phi(lo1, hi1);
      powered1 = powered1 ? step1 * *powered1 : step1;
    }
    CHECK(std::pow(exact_norm(*powered), p) ==
          doctest::Approx(exact_norm(*powered1)).epsilon(1e-11));
  }
}

TEST_CASE("p = 2: S is the weighted adjoint of T, family included") {
  std::mt19937_64 rng(29);
  const Potential rho = testing::random_potential(3, 2, rng);
  const System sys = make_system(rho, 2.0, 2);
  CHECK(max_abs_diff(sys.S, weighted_adjoint(sys.T)) <= 1e-12);

  const auto family = cuntz_family(rho, 2.0, 2, sys.mu);
  for (const auto& [Ti, Si] : family)
    CHECK(max_abs_diff(Si, weighted_adjoint(Ti)) <= 1e-12);
}

TEST_CASE("lamperti decomposition of T, T_i, and diagonal operators") {
  std::mt19937_64 rng(31);
  const Potential rho = testing::random_potential(2, 2, rng);
  const double p = 1.5;
  const System sys = make_system(rho, p, 2);

  SUBCASE("composition operator: atoms are letter extensions, unit weight") {
    const LampertiDecomposition lam = lamperti_decompose(sys.T);
    CHECK(lam.is_isometry);
    CHECK(lam.criterion_max_dev <= 1e-13);
    for (std::int64_t v = 0; v < 4; ++v) {
      REQUIRE(lam.phi.atom_images[static_cast<std::size_t>(v)].size() == 2);
      for (std::int64_t r : lam.phi.atom_images[static_cast<std::size_t>(v)]) {
        CHECK(r % 4 == v);
        CHECK(lam.h[r] == cplx(1.0));
      }
    }
  }

  SUBCASE("family isometries: singleton atoms inside the letter cylinder") {
    const auto family = cuntz_family(rho, p, 2, sys.mu);
    const Eigen::VectorXd rl = rho.rho().lifted(3).real_values();
    for (int i = 0; i < 2; ++i) {
      const LampertiDecomposition lam =
          lamperti_decompose(family[static_cast<std::size_t>(i)].T);
      CHECK(lam.is_isometry);
      for (std::int64_t v = 0; v < 4; ++v) {
        REQUIRE(lam.phi.atom_images[static_cast<std::size_t>(v)].size() == 1);
        const std::int64_t r = lam.phi.atom_images[static_cast<std::size_t>(v)][0];
        CHECK(r == i * 4 + v);
        CHECK(std::abs(lam.h[r] - std::pow(rl[r], -1.0 / p)) <= 1e-15);
      }
    }
  }

  SUBCASE("nonvanishing diagonal: identity set map, h = a") {
    const CylinderFunction a = testing::random_symbol(2, 2, rng);
    const RepOperator diag = make_pi(a, sys.shallow);
    const LampertiDecomposition lam = lamperti_decompose(diag);
    for (std::int64_t v = 0; v < 4; ++v) {
      REQUIRE(lam.phi.atom_images[static_cast<std::size_t>(v)].size() == 1);
      CHECK(lam.phi.atom_images[static_cast<std::size_t>(v)][0] == v);
      CHECK(lam.h[v] == a.values()[v]);
    }
  }

  SUBCASE("rejections: two nonzeros in a row, empty column") {
    CHECK_THROWS_AS(lamperti_decompose(sys.S), Error);  // n nonzeros per row
    const RepOperator killed =
        make_pi(CylinderFunction::indicator(Word(2, {1}), 1), sys.shallow);
    CHECK_THROWS_AS(lamperti_decompose(killed), Error);
    // S_i kills every atom outside its letter cylinder
    const auto family = cuntz_family(rho, p, 2, sys.mu);
    CHECK_THROWS_AS(lamperti_decompose(family[0].S), Error);
  }

  SUBCASE("perturbing h on one atom breaks the criterion and the isometry") {
    const LampertiDecomposition lam = lamperti_decompose(sys.T);
    std::vector<Eigen::Triplet<cplx>> trips;
    for (std::size_t v = 0; v < lam.phi.atom_images.size(); ++v)
      for (std::int64_t r : lam.phi.atom_images[v]) {
        cplx h = lam.h[r];
        if (v == 0 && r == lam.phi.atom_images[0][0]) h *= 1.01;
        trips.emplace_back(static_cast<int>(r), static_cast<int>(v), h);
      }
    SparseC m(sys.T.matrix().rows(), sys.T.matrix().cols());
    m.setFromTriplets(trips.begin(), trips.end());
    const RepOperator tampered(sys.T.source(), sys.T.target(), std::move(m), 1);
    const LampertiDecomposition bad = lamperti_decompose(tampered);
    CHECK(!bad.is_isometry);
    CHECK(bad.criterion_max_dev > 1e-6);
    // witnessed basis vector: the perturbed atom itself
    const Eigen::VectorXcd e0 = Eigen::VectorXcd::Unit(4, 0);
    const double before = sys.shallow.norm(e0);
    const double after = sys.deep.norm(tampered.apply(e0));
    CHECK(std::abs(after - before) > 1e-6);
  }
}

TEST_CASE("reconstruction h T_phi equals the operator exactly") {
  std::mt19937_64 rng(37);
  const Potential rho = testing::random_potential(3, 1, rng);
  const System sys = make_system(rho, 2.5, 2);
  const auto family = cuntz_family(rho, 2.5, 2, sys.mu);
  for (const RepOperator* op : {&sys.T, &family[0].T, &family[2].T}) {
    const LampertiDecomposition lam = lamperti_decompose(*op);
    std::vector<Eigen::Triplet<cplx>> trips;
    for (std::size_t v = 0; v < lam.phi.atom_images.size(); ++v)
      for (std::int64_t r : lam.phi.atom_images[v])
        trips.emplace_back(static_cast<int>(r), static_cast<int>(v), lam.h[r]);
    SparseC m(op->matrix().rows(), op->matrix().cols());
    m.setFromTriplets(trips.begin(), trips.end());
    const RepOperator rebuilt(op->source(), op->target(), std::move(m),
                              op->gauge_degree());
    CHECK(max_abs_diff(rebuilt, *op) == 0.0);
  }
}

TEST_CASE("ando projection formula reproduces TS") {
  std::mt19937_64 rng(41);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const AndoReport uniform_report =
        ando_projection_check(Potential::uniform(2), p, 3);
    CHECK(uniform_report.formula_dev <= 1e-12);
    CHECK(uniform_report.idempotent_dev <= 1e-12);
    CHECK(uniform_report.unit_dev <= 1e-12);
    CHECK(uniform_report.range_dev <= 1e-12);
    CHECK(uniform_report.norm_T == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(uniform_report.norm_S == doctest::Approx(1.0).epsilon(1e-13));

    const AndoReport random_report =
        ando_projection_check(testing::random_potential(2, 2, rng), p, 3);
    CHECK(random_report.formula_dev <= 1e-12);
    CHECK(random_report.idempotent_dev <= 1e-12);
  }
}

TEST_CASE("radon-nikodym derivative against mass ratios") {
  // Bernoulli: the derivative on the first-letter cylinder is the letter mass
  const Potential bern(real_fn(2, 1, {0.3, 0.7}));
  const CylinderMeasure mu = fixed_point_measure(bern, 3);
  CHECK(radon_nikodym_check(bern, mu, 2).max_rel_dev <= 1e-12);

  CHECK(radon_nikodym_check(Potential::uniform(3),
                            fixed_point_measure(Potential::uniform(3), 3), 2)
            .max_rel_dev <= 1e-14);

  std::mt19937_64 rng(43);
  const Potential rho = testing::random_potential(2, 2, rng);
  CHECK(radon_nikodym_check(rho, fixed_point_measure(rho, 4), 3).max_rel_dev <=
        1e-10);
}
