#include "lpshift/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

namespace lpshift {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

cplx unit_power(cplx z, int degree) {
  cplx out = 1.0;
  const cplx base = degree >= 0 ? z : cplx(1.0) / z;
  for (int k = 0; k < std::abs(degree); ++k) out *= base;
  return out;
}

}  // namespace

RadiusReport radius(const CylinderFunction& a, const Potential& rho, double p,
                    int depth, int n_max, const PowerOptions& opts) {
  if (a.n() != rho.n())
    throw_error(ErrorCode::validation, "alphabet mismatch between a and rho");
  if (!(p >= 1.0) || !std::isfinite(p))
    throw_error(ErrorCode::validation, "exponent p must lie in [1, infinity)");

  RadiusReport out;
  out.p = p;
  const CylinderFunction g = mul(rho.rho(), abs_pow(a, p));
  if (g.real_values().maxCoeff() == 0.0) {
    out.perron_variational_agree = true;
    out.gelfand_brackets_perron = true;
    return out;  // a vanishes identically: every route gives zero
  }

  const int dmin = std::max(g.depth() - 1, 0);
  const double inv_p = 1.0 / p;
  out.r_perron = std::pow(radius_perron(g, std::max(depth, dmin), opts), inv_p);

  const GelfandEnclosure gel = radius_gelfand(g, n_max);
  out.r_gelfand.lower = std::pow(gel.lower, inv_p);
  out.r_gelfand.upper = std::pow(gel.upper, inv_p);
  out.r_gelfand.estimate = std::pow(gel.estimate, inv_p);
  out.gelfand_width = out.r_gelfand.upper - out.r_gelfand.lower;

  const GibbsResult gibbs =
      gibbs_maximizer(a, rho, p, std::max(g.depth() - 1, 1), opts);
  out.r_variational =
      gibbs.value.minus_infinity ? 0.0 : std::exp(gibbs.value.value);

  out.perron_variational_rel_dev = std::abs(out.r_perron - out.r_variational) /
                                   std::max(1.0, out.r_perron);
  out.perron_variational_agree = out.perron_variational_rel_dev <= 1e-8;
  out.gelfand_brackets_perron =
      out.r_gelfand.lower <= out.r_perron + 1e-12 &&
      out.r_perron <= out.r_gelfand.upper + 1e-12;
  return out;
}

RepOperator gauge_scale(const RepOperator& op, cplx z) {
  if (std::abs(std::abs(z) - 1.0) > 1e-12)
    throw_error(ErrorCode::validation, "gauge parameter must be unimodular");
  if (op.gauge_degree() == 0) return op;
  return op.scaled(unit_power(z, op.gauge_degree()));
}

RepOperator compress(const CylinderFunction& a, const Potential& rho, double p,
                     int depth, const PowerOptions& opts) {
  if (a.n() != rho.n())
    throw_error(ErrorCode::validation, "alphabet mismatch between a and rho");
  if (depth < std::max({rho.depth() - 1, a.depth() - 1, 1}))
    throw_error(ErrorCode::depth, "compression depth too small for inputs");
  const CylinderMeasure mu = fixed_point_measure(rho, depth + 1, opts);
  const WeightedLpSpace Xd = WeightedLpSpace::from_measure(mu.restricted(depth), p);
  const WeightedLpSpace Xd1 = WeightedLpSpace::from_measure(mu, p);
  const RepOperator B = make_pi(a, Xd1) * make_T_phi(Xd, Xd1);

  // conditional expectation onto depth-d cylinders: atoms are the n
  // one-letter extensions of each depth-d word
  const std::int64_t dim = Xd.weights.size();
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(dim) * rho.n());
  for (std::int64_t w = 0; w < dim; ++w)
    for (int i = 0; i < rho.n(); ++i) {
      const std::int64_t wi = w * rho.n() + i;
      trips.emplace_back(static_cast<int>(w), static_cast<int>(wi),
                         cplx(Xd1.weights[wi] / Xd.weights[w]));
    }
  SparseC E(dim, Xd1.weights.size());
  E.setFromTriplets(trips.begin(), trips.end());
  const RepOperator Ed(Xd1, Xd, std::move(E), 0);
  return Ed * B;
}

namespace {

struct ResolventEvaluator {
  Eigen::MatrixXcd C;  // weight-conjugated matrix
  double p = 2.0;
  int probes = 64;
  unsigned seed = 0;

  PseudospectrumSample eval(cplx lambda) const {
    PseudospectrumSample out;
    out.lambda = lambda;
    const Eigen::Index dim = C.rows();
    Eigen::MatrixXcd M = C - lambda * Eigen::MatrixXcd::Identity(dim, dim);

    if (p == 2.0) {
      Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
      const double smin = svd.singularValues()(dim - 1);
      if (smin <= 0.0) {
        out.singular = true;
        out.lower = out.upper = kInf;
        return out;
      }
      out.lower = out.upper = 1.0 / smin;
      return out;
    }

    Eigen::FullPivLU<Eigen::MatrixXcd> lu(M);
    if (!lu.isInvertible()) {
      out.singular = true;
      out.lower = out.upper = kInf;
      return out;
    }
    const Eigen::MatrixXcd inv = lu.inverse();

    if (p == 1.0) {
      out.lower = out.upper = inv.cwiseAbs().colwise().sum().maxCoeff();
      return out;
    }

    const double q = p / (p - 1.0);
    const auto norm_p = [](const Eigen::VectorXcd& v, double e) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < v.size(); ++j)
        acc += std::pow(std::abs(v[j]), e);
      return std::pow(acc, 1.0 / e);
    };
    const auto dual_vec = [](const Eigen::VectorXcd& v, double e) {
      Eigen::VectorXcd out_v(v.size());
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        const double m = std::abs(v[j]);
        out_v[j] = m == 0.0 ? cplx(0.0) : std::pow(m, e - 1.0) * (v[j] / m);
      }
      return out_v;
    };

    // structured probes: strided basis vectors, unit, alternating pattern,
    // seeded random directions
    double best = 0.0;
    Eigen::VectorXcd best_x = Eigen::VectorXcd::Unit(dim, 0);
    const auto consider = [&](const Eigen::VectorXcd& x) {
      const double nx = norm_p(x, p);
      if (nx == 0.0) return;
      const double ratio = norm_p(inv * x, p) / nx;
      if (ratio > best) {
        best = ratio;
        best_x = x;
      }
    };
    const Eigen::Index n_basis = std::min<Eigen::Index>(dim, std::max(probes, 1));
    const Eigen::Index stride = std::max<Eigen::Index>(1, dim / n_basis);
    for (Eigen::Index j = 0; j < dim; j += stride)
      consider(Eigen::VectorXcd::Unit(dim, j));
    consider(Eigen::VectorXcd::Ones(dim));
    {
      Eigen::VectorXcd alt(dim);
      for (Eigen::Index j = 0; j < dim; ++j) alt[j] = (j % 2 == 0) ? 1.0 : -1.0;
      consider(alt);
    }
    std::mt19937_64 rng(seed);
    for (int k = 0; k < std::max(probes / 4, 4); ++k) {
      Eigen::VectorXcd v(dim);
      for (Eigen::Index j = 0; j < dim; ++j)
        v[j] = cplx(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
      consider(v);
    }

    // p-norm power-method ascent; every iterate is a certified lower bound
    Eigen::VectorXcd x = best_x / norm_p(best_x, p);
    for (int it = 0; it < 40; ++it) {
      Eigen::VectorXcd y = inv * x;
      const double est = norm_p(y, p);
      if (est > best) best = est;
      if (est == 0.0) break;
      Eigen::VectorXcd z = inv.adjoint() * dual_vec(y, p);
      const double zq = norm_p(z, q);
      const double inner = (z.adjoint() * x)(0).real();
      if (zq <= inner * (1.0 + 1e-12)) break;
      x = dual_vec(z, q);
      const double nx = norm_p(x, p);
      if (nx == 0.0) break;
      x /= nx;
    }
    out.lower = best;
    const double n1 = inv.cwiseAbs().colwise().sum().maxCoeff();
    const double ninf = inv.cwiseAbs().rowwise().sum().maxCoeff();
    out.upper = std::pow(n1, 1.0 / p) * std::pow(ninf, 1.0 / q);
    return out;
  }
};

ResolventEvaluator make_evaluator(const RepOperator& A, double p,
                                  const GridSpec& grid) {
  if (A.matrix().rows() != A.matrix().cols())
    throw_error(ErrorCode::validation, "pseudospectrum needs a square operator");
  if (!(p >= 1.0) || !std::isfinite(p))
    throw_error(ErrorCode::validation, "exponent p must lie in [1, infinity)");
  ResolventEvaluator ev;
  ev.p = p;
  ev.probes = grid.probes;
  ev.seed = grid.seed;
  ev.C = A.dense();
  const Eigen::VectorXd& ws = A.source().weights;
  const Eigen::VectorXd& wt = A.target().weights;
  for (Eigen::Index r = 0; r < ev.C.rows(); ++r)
    ev.C.row(r) *= std::pow(wt[r], 1.0 / p);
  for (Eigen::Index c = 0; c < ev.C.cols(); ++c)
    ev.C.col(c) *= std::pow(ws[c], -1.0 / p);
  return ev;
}

}  // namespace

PseudospectrumGrid pseudospectrum(const RepOperator& A, double p,
                                  const GridSpec& grid) {
  const ResolventEvaluator ev = make_evaluator(A, p, grid);

  PseudospectrumGrid out;
  out.p = p;
  out.depth = A.source().depth;
  for (double radius : grid.radii)
    for (int k = 0; k < grid.angles; ++k) {
      const double angle = 2.0 * M_PI * k / grid.angles;
      out.samples.push_back(
          ev.eval(radius * cplx(std::cos(angle), std::sin(angle))));
    }
  for (cplx lambda : grid.extra_points) out.samples.push_back(ev.eval(lambda));

  double lo = kInf, hi = 0.0;
  for (const auto& s : out.samples) {
    if (s.singular || !std::isfinite(s.lower)) continue;
    lo = std::min(lo, s.lower);
    hi = std::max(hi, s.lower);
  }
  if (hi > 0.0 && std::isfinite(lo) && lo > 0.0) {
    for (int level = 0; level < 5; ++level) {
      const double t = static_cast<double>(level) / 4.0;
      out.contour_epsilons.push_back(
          1.0 / std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
    }
  }
  return out;
}

void PseudospectrumGrid::write_csv(std::ostream& out) const {
  out << "re,im,value_lower,value_upper,p,depth\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  s.lambda.real(), s.lambda.imag(), s.lower, s.upper, p, depth);
    out << buf;
  }
}

DiskReport disk_report(const CylinderFunction& a, const Potential& rho, double p,
                       int depth, const std::vector<double>& fractions,
                       const std::vector<int>& depth_schedule, int n_max,
                       int angles, unsigned seed, const PowerOptions& opts) {
  DiskReport out;
  out.p = p;
  out.depth = depth;
  out.radius = radius(a, rho, p, depth, n_max, opts);
  const double r = out.radius.r_perron;
  out.note =
      "pseudospectrum evidence on finite sections; eigenvalues of "
      "compressions are not used and no spectral claim is verified";

  const RepOperator A = compress(a, rho, p, depth, opts);
  GridSpec ring_spec;
  ring_spec.angles = angles;
  ring_spec.seed = seed;
  for (double t : fractions) {
    if (t <= 0.0)
      throw_error(ErrorCode::validation, "ring fractions must be positive");
    ring_spec.radii = {t * r};
    const PseudospectrumGrid ring = pseudospectrum(A, p, ring_spec);
    DiskRingStat stat;
    stat.fraction = t;
    stat.radius = t * r;
    stat.min_value = kInf;
    stat.max_value = 0.0;
    for (const auto& s : ring.samples) {
      stat.min_value = std::min(stat.min_value, s.lower);
      stat.max_value = std::max(stat.max_value, s.lower);
    }
    stat.uniformity_ratio =
        stat.min_value > 0.0 ? stat.max_value / stat.min_value : kInf;
    stat.boundary_band = t > 0.95 && t < 1.05;
    out.rings.push_back(stat);
  }

  GridSpec point_spec;
  point_spec.angles = 0;
  point_spec.seed = seed;
  const int dmin = std::max({rho.depth() - 1, a.depth() - 1, 1});
  for (int d : depth_schedule) {
    if (d < dmin) continue;
    const RepOperator Ad = compress(a, rho, p, d, opts);
    point_spec.extra_points = {cplx(0.5 * r, 0.0)};
    const auto interior = pseudospectrum(Ad, p, point_spec);
    out.interior_growth.push_back({d, interior.samples.front().lower});
    point_spec.extra_points = {cplx(1.2 * r, 0.0)};
    const auto outside = pseudospectrum(Ad, p, point_spec);
    out.outside_values.push_back({d, outside.samples.front().upper});
  }
  for (const auto& v : out.outside_values)
    out.outside_bound = std::max(out.outside_bound, v.value);
  return out;
}

}  // namespace lpshift
