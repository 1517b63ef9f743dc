#pragma once

#include <iosfwd>
#include <vector>

#include "lpshift/ergopt.hpp"
#include "lpshift/lp_rep.hpp"

namespace lpshift {

// Spectral radius of pi(a)T by three routes: Perron eigenvalue of the
// weighted transfer matrix, Gelfand/Collatz-Wielandt enclosure, and the
// variational principle over Markov measures. All values are on the
// pi(a)T scale, i.e. already taken to the power 1/p.
struct RadiusReport {
  double p = 2.0;
  double r_perron = 0.0;
  GelfandEnclosure r_gelfand;
  double r_variational = 0.0;
  double perron_variational_rel_dev = 0.0;
  bool perron_variational_agree = false;  // within 1e-8 relative
  bool gelfand_brackets_perron = false;
  double gelfand_width = 0.0;
};

RadiusReport radius(const CylinderFunction& a, const Potential& rho, double p,
                    int depth, int n_max, const PowerOptions& opts = {});

// The circle action: multiplication operators are fixed, composition-type
// operators scale by z, transfer-type by 1/z; an operator of gauge degree g
// picks up z^g. Requires |z| = 1 to 1e-12.
RepOperator gauge_scale(const RepOperator& op, cplx z);

// Finite section of pi(a) T_phi on depth-d functions: the conditional
// expectation onto depth-d cylinders composed with pi(a) T_phi. Exact on
// functions of depth d-1.
RepOperator compress(const CylinderFunction& a, const Potential& rho, double p,
                     int depth, const PowerOptions& opts = {});

struct PseudospectrumSample {
  cplx lambda;
  double lower = 0.0;  // certified lower bound on the resolvent p-norm
  double upper = 0.0;  // certified upper bound (equal to lower when exact)
  bool singular = false;
};

struct PseudospectrumGrid {
  double p = 2.0;
  int depth = 0;
  std::vector<PseudospectrumSample> samples;  // ordered by (radius, angle)
  std::vector<double> contour_epsilons;       // suggested 1/value contour levels
  // columns: re(lambda), im(lambda), value_lower, value_upper, p, depth
  void write_csv(std::ostream& out) const;
};

struct GridSpec {
  std::vector<double> radii;        // absolute |lambda| values, one ring each
  int angles = 64;
  std::vector<cplx> extra_points;   // additional individual samples
  int probes = 64;                  // probe budget for p outside {1, 2}
  unsigned seed = 0;
};

// Resolvent-norm samples of a square operator on its weighted space. Exact
// at p in {1, 2}; otherwise a certified lower bound (structured probes plus
// ascent) and an interpolation upper bound.
PseudospectrumGrid pseudospectrum(const RepOperator& A, double p,
                                  const GridSpec& grid);

struct DiskRingStat {
  double fraction = 0.0;  // requested |lambda| as a fraction of the radius
  double radius = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  double uniformity_ratio = 0.0;  // max/min over angles
  bool boundary_band = false;     // fraction within 5% of the circle: no claim
};

struct DiskDepthValue {
  int depth = 0;
  double value = 0.0;
};

// Numerical evidence (not verification) that the spectrum fills the disk of
// radius r(pi(a)T): angular uniformity of the resolvent norm on interior
// rings, growth of the interior resolvent norm with depth, and depth-uniform
// boundedness outside the disk. Finite sections have spectra very different
// from the limit operator, so eigenvalues of compressions are never used.
struct DiskReport {
  RadiusReport radius;
  double p = 2.0;
  int depth = 0;
  std::vector<DiskRingStat> rings;
  std::vector<DiskDepthValue> interior_growth;   // at lambda = 0.5 r
  std::vector<DiskDepthValue> outside_values;    // at lambda = 1.2 r
  double outside_bound = 0.0;                    // max over depths (observed)
  std::string note;
};

DiskReport disk_report(const CylinderFunction& a, const Potential& rho, double p,
                       int depth, const std::vector<double>& fractions,
                       const std::vector<int>& depth_schedule, int n_max = 500,
                       int angles = 64, unsigned seed = 0,
                       const PowerOptions& opts = {});

}  // namespace lpshift
