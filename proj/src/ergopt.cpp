#include "lpshift/ergopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

namespace lpshift {

namespace {

// dense chains beyond this state count are rejected; keeps transition
// matrices and stationary solves cheap
constexpr std::int64_t kMaxChainStates = 1 << 14;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::int64_t chain_states(int n, int order) {
  if (order < 1)
    throw_error(ErrorCode::validation, "Markov order must be >= 1");
  const std::int64_t N = state_count(n, order);
  if (N > kMaxChainStates)
    throw_error(ErrorCode::resource, "Markov order too large for a dense chain");
  return N;
}

// Stationary row vector of a row-stochastic matrix: direct solve with one
// equation replaced by normalization, shifted power iteration as fallback
// for (numerically) singular systems.
Eigen::VectorXd stationary_of(const Eigen::MatrixXd& P) {
  const Eigen::Index N = P.rows();
  if (N == 1) return Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(N, N);
  A.row(0).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
  b[0] = 1.0;
  Eigen::VectorXd x = A.partialPivLu().solve(b);
  bool ok = x.allFinite() && x.minCoeff() > -1e-9;
  if (ok) {
    Eigen::VectorXd pi = x.cwiseMax(0.0);
    pi /= pi.sum();
    ok = (P.transpose() * pi - pi).cwiseAbs().maxCoeff() <= 1e-11;
    if (ok) return pi;
  }
  // averaging with the identity removes periodicity
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(N));
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd next = 0.5 * (P.transpose() * pi) + 0.5 * pi;
    next /= next.sum();
    const double delta = (next - pi).cwiseAbs().maxCoeff();
    pi.swap(next);
    if (delta <= 1e-15) return pi;
  }
  throw_error(ErrorCode::convergence, "stationary vector iteration did not converge");
}

}  // namespace

MarkovMeasure::MarkovMeasure(int n, int order, Eigen::MatrixXd transition,
                             Eigen::VectorXd stationary)
    : n_(n), order_(order), transition_(std::move(transition)),
      stationary_(std::move(stationary)) {
  const std::int64_t N = chain_states(n_, order_);
  if (transition_.rows() != N || transition_.cols() != N)
    throw_error(ErrorCode::validation, "transition matrix has wrong shape");
  if (stationary_.size() != N)
    throw_error(ErrorCode::validation, "stationary vector has wrong length");

  const std::int64_t prefix = N / n_;
  for (std::int64_t u = 0; u < N; ++u) {
    double sum = 0.0;
    for (std::int64_t v = 0; v < N; ++v) {
      const double entry = transition_(u, v);
      if (entry < 0.0)
        throw_error(ErrorCode::validation, "transition entries must be nonnegative");
      if (entry > 0.0 && v / n_ != u % prefix) {
        std::ostringstream msg;
        msg << "transition " << Word::from_index(n_, order_, u).str() << " -> "
            << Word::from_index(n_, order_, v).str() << " is not shift-compatible";
        throw_error(ErrorCode::validation, msg.str());
      }
      sum += entry;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << "transition row " << Word::from_index(n_, order_, u).str()
          << " sums to " << sum;
      throw_error(ErrorCode::validation, msg.str());
    }
    transition_.row(u) /= sum;
  }

  if (stationary_.minCoeff() < 0.0)
    throw_error(ErrorCode::validation, "stationary vector must be nonnegative");
  const double total = stationary_.sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw_error(ErrorCode::validation, "stationary vector must sum to 1");
  stationary_ /= total;
  const double res =
      (transition_.transpose() * stationary_ - stationary_).cwiseAbs().maxCoeff();
  if (res > 1e-12) {
    std::ostringstream msg;
    msg << "stationary vector residual " << res << " exceeds 1e-12";
    throw_error(ErrorCode::validation, msg.str());
  }
}

MarkovMeasure MarkovMeasure::from_transition(int n, int order,
                                             const Eigen::MatrixXd& transition) {
  return MarkovMeasure(n, order, transition, stationary_of(transition));
}

MarkovMeasure MarkovMeasure::bernoulli(const Eigen::VectorXd& letter_probs) {
  const int n = static_cast<int>(letter_probs.size());
  if (n < 1 || letter_probs.minCoeff() < 0.0)
    throw_error(ErrorCode::validation, "letter probabilities must be nonnegative");
  Eigen::VectorXd probs = letter_probs / letter_probs.sum();
  Eigen::MatrixXd P(n, n);
  for (int u = 0; u < n; ++u) P.row(u) = probs.transpose();
  return MarkovMeasure(n, 1, std::move(P), std::move(probs));
}

Eigen::VectorXd MarkovMeasure::cylinder_masses(int depth) const {
  const std::int64_t N = transition_.rows();
  if (depth <= order_) {
    const std::int64_t count = state_count(n_, depth);
    const std::int64_t block = N / count;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
    for (std::int64_t u = 0; u < N; ++u) out[u / block] += stationary_[u];
    return out;
  }
  Eigen::VectorXd cur = stationary_;
  for (int level = order_; level < depth; ++level) {
    const std::int64_t count = state_count(n_, level + 1);
    Eigen::VectorXd next(count);
    for (std::int64_t x = 0; x < count; ++x) {
      const std::int64_t prev = x / n_;
      const std::int64_t u = prev % N;
      const std::int64_t v = x % N;
      next[x] = cur[prev] * transition_(u, v);
    }
    cur = std::move(next);
  }
  return cur;
}

PeriodicOrbitMeasure::PeriodicOrbitMeasure(Word block) : block_(std::move(block)) {
  if (block_.size() < 1)
    throw_error(ErrorCode::validation, "periodic orbit needs a nonempty word");
}

Eigen::VectorXd PeriodicOrbitMeasure::cylinder_masses(int depth) const {
  const int n = block_.n();
  const int m = period();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(state_count(n, depth));
  for (int j = 0; j < m; ++j) {
    std::int64_t idx = 0;
    for (int t = 0; t < depth; ++t)
      idx = idx * n + (block_.letters()[static_cast<std::size_t>((j + t) % m)] - 1);
    out[idx] += 1.0 / m;
  }
  return out;
}

double entropy(const MarkovMeasure& mu) {
  double h = 0.0;
  const Eigen::MatrixXd& P = mu.transition();
  for (Eigen::Index u = 0; u < P.rows(); ++u) {
    if (mu.stationary()[u] == 0.0) continue;
    double row = 0.0;
    for (Eigen::Index v = 0; v < P.cols(); ++v)
      if (P(u, v) > 0.0) row += P(u, v) * std::log(P(u, v));
    h -= mu.stationary()[u] * row;
  }
  return std::max(h, 0.0);
}

cplx integrate(const CylinderFunction& f, const MarkovMeasure& mu) {
  if (f.n() != mu.n()) throw_error(ErrorCode::validation, "alphabet mismatch");
  const Eigen::VectorXd masses = mu.cylinder_masses(f.depth());
  cplx acc = 0.0;
  for (std::int64_t j = 0; j < f.size(); ++j) acc += f.values()[j] * masses[j];
  return acc;
}

cplx integrate(const CylinderFunction& f, const PeriodicOrbitMeasure& mu) {
  if (f.n() != mu.block().n()) throw_error(ErrorCode::validation, "alphabet mismatch");
  const Eigen::VectorXd masses = mu.cylinder_masses(f.depth());
  cplx acc = 0.0;
  for (std::int64_t j = 0; j < f.size(); ++j) acc += f.values()[j] * masses[j];
  return acc;
}

namespace {

// int ln(|a| rho^{1/p}) dmu for cylinder masses at the weight depth; tagged
// minus infinity when a vanishes on a charged cylinder
Objective log_integral(const CylinderFunction& a, const Potential& rho, double p,
                       const Eigen::VectorXd& masses) {
  const int depth = std::max(a.depth(), rho.depth());
  const CylinderFunction al = a.lifted(depth);
  const Eigen::VectorXd rl = rho.rho().lifted(depth).real_values();
  double acc = 0.0;
  for (std::int64_t j = 0; j < al.size(); ++j) {
    const double m = masses[j];
    if (m <= 0.0) continue;
    const double av = std::abs(al.values()[j]);
    if (av == 0.0) return Objective{kNegInf, true};
    acc += m * (std::log(av) + std::log(rl[j]) / p);
  }
  return Objective{acc, false};
}

void check_inputs(const CylinderFunction& a, const Potential& rho, double p) {
  if (a.n() != rho.n())
    throw_error(ErrorCode::validation, "alphabet mismatch between a and rho");
  if (!(p >= 1.0) || !std::isfinite(p))
    throw_error(ErrorCode::validation, "exponent p must lie in [1, infinity)");
}

}  // namespace

Objective objective(const CylinderFunction& a, const Potential& rho, double p,
                    const MarkovMeasure& mu) {
  check_inputs(a, rho, p);
  const int depth = std::max(a.depth(), rho.depth());
  Objective base = log_integral(a, rho, p, mu.cylinder_masses(depth));
  if (base.minus_infinity) return base;
  base.value += entropy(mu) / p;
  return base;
}

Objective objective(const CylinderFunction& a, const Potential& rho, double p,
                    const PeriodicOrbitMeasure& mu) {
  check_inputs(a, rho, p);
  const int depth = std::max(a.depth(), rho.depth());
  return log_integral(a, rho, p, mu.cylinder_masses(depth));
}

Objective periodic_orbit_bound(const CylinderFunction& a, const Potential& rho,
                               double p, const Word& w) {
  return objective(a, rho, p, PeriodicOrbitMeasure(w));
}

namespace {

// strongly connected components (Kosaraju, iterative); returns component id
// per node and the number of components
int scc_decompose(const std::vector<std::vector<int>>& out_edges,
                  std::vector<int>& comp) {
  const int N = static_cast<int>(out_edges.size());
  std::vector<std::vector<int>> in_edges(static_cast<std::size_t>(N));
  for (int u = 0; u < N; ++u)
    for (int v : out_edges[static_cast<std::size_t>(u)])
      in_edges[static_cast<std::size_t>(v)].push_back(u);

  std::vector<char> seen(static_cast<std::size_t>(N), 0);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(N));
  std::vector<std::pair<int, std::size_t>> stack;
  for (int s = 0; s < N; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    seen[static_cast<std::size_t>(s)] = 1;
    stack.emplace_back(s, 0);
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < out_edges[static_cast<std::size_t>(u)].size()) {
        const int v = out_edges[static_cast<std::size_t>(u)][next++];
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.emplace_back(v, 0);
        }
      } else {
        order.push_back(u);
        stack.pop_back();
      }
    }
  }

  comp.assign(static_cast<std::size_t>(N), -1);
  int n_comp = 0;
  std::vector<int> dfs;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (comp[static_cast<std::size_t>(*it)] >= 0) continue;
    dfs.push_back(*it);
    comp[static_cast<std::size_t>(*it)] = n_comp;
    while (!dfs.empty()) {
      const int u = dfs.back();
      dfs.pop_back();
      for (int v : in_edges[static_cast<std::size_t>(u)])
        if (comp[static_cast<std::size_t>(v)] < 0) {
          comp[static_cast<std::size_t>(v)] = n_comp;
          dfs.push_back(v);
        }
    }
    ++n_comp;
  }
  return n_comp;
}

}  // namespace

GibbsResult gibbs_maximizer(const CylinderFunction& a, const Potential& rho,
                            double p, int order, const PowerOptions& opts) {
  check_inputs(a, rho, p);
  const CylinderFunction g = mul(rho.rho(), abs_pow(a, p));
  const int weight_depth = std::max(g.depth(), 1);
  if (order < std::max(weight_depth - 1, 1))
    throw_error(ErrorCode::depth, "Markov order below weight depth - 1");
  const int n = rho.n();
  const std::int64_t N = chain_states(n, order);

  const SparseR W = SparseR(transfer_matrix(g, order).matrix.transpose());
  std::vector<std::vector<int>> edges(static_cast<std::size_t>(N));
  for (int k = 0; k < W.outerSize(); ++k)
    for (SparseR::InnerIterator it(W, k); it; ++it)
      if (it.value() > 0.0)
        edges[static_cast<std::size_t>(it.row())].push_back(static_cast<int>(it.col()));
  for (auto& e : edges) std::sort(e.begin(), e.end());

  std::vector<int> comp;
  const int n_comp = scc_decompose(edges, comp);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(n_comp));
  for (int u = 0; u < N; ++u)
    members[static_cast<std::size_t>(comp[static_cast<std::size_t>(u)])].push_back(u);

  // Perron radius per component (0 for transient single nodes)
  std::vector<double> comp_radius(static_cast<std::size_t>(n_comp), 0.0);
  std::vector<Eigen::VectorXd> comp_vec(static_cast<std::size_t>(n_comp));
  for (int c = 0; c < n_comp; ++c) {
    const auto& nodes = members[static_cast<std::size_t>(c)];
    bool has_edge = false;
    for (int u : nodes)
      for (int v : edges[static_cast<std::size_t>(u)])
        if (comp[static_cast<std::size_t>(v)] == c) has_edge = true;
    if (!has_edge) continue;
    std::vector<int> local(static_cast<std::size_t>(N), -1);
    for (std::size_t j = 0; j < nodes.size(); ++j)
      local[static_cast<std::size_t>(nodes[j])] = static_cast<int>(j);
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < W.outerSize(); ++k)
      for (SparseR::InnerIterator it(W, k); it; ++it) {
        const int lu = local[static_cast<std::size_t>(it.row())];
        const int lv = local[static_cast<std::size_t>(it.col())];
        if (lu >= 0 && lv >= 0 && it.value() > 0.0)
          trips.emplace_back(lu, lv, it.value());
      }
    SparseR sub(static_cast<Eigen::Index>(nodes.size()),
                static_cast<Eigen::Index>(nodes.size()));
    sub.setFromTriplets(trips.begin(), trips.end());
    const PerronResult pr = perron_eigen(sub, opts);
    comp_radius[static_cast<std::size_t>(c)] = pr.value;
    comp_vec[static_cast<std::size_t>(c)] = pr.vector;
  }

  double lambda = 0.0;
  for (double r : comp_radius) lambda = std::max(lambda, r);
  if (lambda <= 0.0)
    return GibbsResult{std::nullopt, Objective{kNegInf, true}, 0.0, true};

  int chosen = -1;
  int n_max_comps = 0;
  for (int c = 0; c < n_comp; ++c)
    if (comp_radius[static_cast<std::size_t>(c)] >= lambda * (1.0 - 1e-12)) {
      ++n_max_comps;
      if (chosen < 0 ||
          members[static_cast<std::size_t>(c)].front() <
              members[static_cast<std::size_t>(chosen)].front())
        chosen = c;
    }
  lambda = comp_radius[static_cast<std::size_t>(chosen)];

  const auto& nodes = members[static_cast<std::size_t>(chosen)];
  const Eigen::VectorXd& r = comp_vec[static_cast<std::size_t>(chosen)];
  if (r.minCoeff() <= 0.0)
    throw_error(ErrorCode::convergence,
                "Perron vector of the maximal component is not strictly positive");
  std::vector<int> local(static_cast<std::size_t>(N), -1);
  for (std::size_t j = 0; j < nodes.size(); ++j)
    local[static_cast<std::size_t>(nodes[j])] = static_cast<int>(j);

  // Doeblin transform on the maximal component; rows elsewhere carry the
  // uniform compatible kernel and no stationary mass
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
  const std::int64_t prefix = N / n;
  for (int k = 0; k < W.outerSize(); ++k)
    for (SparseR::InnerIterator it(W, k); it; ++it) {
      const int lu = local[static_cast<std::size_t>(it.row())];
      const int lv = local[static_cast<std::size_t>(it.col())];
      if (lu >= 0 && lv >= 0 && it.value() > 0.0)
        P(it.row(), it.col()) = it.value() * r[lv] / (lambda * r[lu]);
    }
  for (std::int64_t u = 0; u < N; ++u) {
    const double sum = P.row(u).sum();
    if (sum > 0.0) {
      P.row(u) /= sum;
    } else {
      for (int j = 0; j < n; ++j)
        P(u, (u % prefix) * n + j) = 1.0 / static_cast<double>(n);
    }
  }

  Eigen::MatrixXd P_sub(nodes.size(), nodes.size());
  for (std::size_t iu = 0; iu < nodes.size(); ++iu)
    for (std::size_t iv = 0; iv < nodes.size(); ++iv)
      P_sub(static_cast<Eigen::Index>(iu), static_cast<Eigen::Index>(iv)) =
          P(nodes[iu], nodes[iv]);
  const Eigen::VectorXd pi_sub = stationary_of(P_sub);
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(N);
  for (std::size_t j = 0; j < nodes.size(); ++j)
    pi[nodes[j]] = pi_sub[static_cast<Eigen::Index>(j)];

  MarkovMeasure mm(n, order, std::move(P), std::move(pi));
  const Objective value = objective(a, rho, p, mm);
  if (value.minus_infinity ||
      std::abs(value.value - std::log(lambda) / p) > 1e-10) {
    std::ostringstream msg;
    msg << "Gibbs objective " << value.value << " disagrees with ln(lambda)/p = "
        << std::log(lambda) / p;
    throw_error(ErrorCode::convergence, msg.str());
  }
  return GibbsResult{std::move(mm), value, lambda, n_max_comps == 1};
}

namespace {

struct AscentProblem {
  int n = 0;
  int order = 0;
  std::int64_t N = 0;
  int weight_depth = 0;
  std::vector<int> alive;                       // alive state indices, sorted
  std::vector<int> local;                       // full index -> alive slot or -1
  std::vector<std::vector<int>> allowed;        // per alive slot: allowed letters
  Eigen::VectorXd integrand;                    // ln|a| + ln(rho)/p at weight depth
  double inv_p = 1.0;

  int n_params() const {
    int total = 0;
    for (const auto& js : allowed) total += static_cast<int>(js.size());
    return total;
  }

  // objective of the softmax-parameterized chain
  double eval(const Eigen::VectorXd& theta) const {
    const int A = static_cast<int>(alive.size());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(A, A);
    {
      int t = 0;
      for (int iu = 0; iu < A; ++iu) {
        const auto& js = allowed[static_cast<std::size_t>(iu)];
        double zmax = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < js.size(); ++c)
          zmax = std::max(zmax, theta[t + static_cast<int>(c)]);
        double denom = 0.0;
        for (std::size_t c = 0; c < js.size(); ++c)
          denom += std::exp(theta[t + static_cast<int>(c)] - zmax);
        const std::int64_t prefix = N / n;
        for (std::size_t c = 0; c < js.size(); ++c) {
          const std::int64_t succ =
              (alive[static_cast<std::size_t>(iu)] % prefix) * n + js[c] - 1;
          P(iu, local[static_cast<std::size_t>(succ)]) =
              std::exp(theta[t + static_cast<int>(c)] - zmax) / denom;
        }
        t += static_cast<int>(js.size());
      }
    }
    const Eigen::VectorXd pi = stationary_of(P);

    double h = 0.0;
    for (int iu = 0; iu < A; ++iu) {
      if (pi[iu] <= 0.0) continue;
      double row = 0.0;
      for (int iv = 0; iv < A; ++iv)
        if (P(iu, iv) > 0.0) row += P(iu, iv) * std::log(P(iu, iv));
      h -= pi[iu] * row;
    }

    double acc = 0.0;
    if (weight_depth <= order) {
      const std::int64_t block = state_count(n, order - weight_depth);
      for (int iu = 0; iu < A; ++iu) {
        if (pi[iu] <= 0.0) continue;
        acc += pi[iu] * integrand[alive[static_cast<std::size_t>(iu)] / block];
      }
    } else {  // weight depth = order + 1: masses sit on edges
      const std::int64_t prefix = N / n;
      for (int iu = 0; iu < A; ++iu) {
        if (pi[iu] <= 0.0) continue;
        const std::int64_t u = alive[static_cast<std::size_t>(iu)];
        for (int j : allowed[static_cast<std::size_t>(iu)]) {
          const std::int64_t succ = (u % prefix) * n + j - 1;
          const double mass = pi[iu] * P(iu, local[static_cast<std::size_t>(succ)]);
          if (mass > 0.0) acc += mass * integrand[u * n + j - 1];
        }
      }
    }
    return acc + h * inv_p;
  }
};

}  // namespace

NumericOptResult maximize_numeric(const CylinderFunction& a, const Potential& rho,
                                  double p, int order, int restarts,
                                  unsigned seed) {
  check_inputs(a, rho, p);
  if (restarts < 1)
    throw_error(ErrorCode::validation, "optimizer needs at least one restart");
  const CylinderFunction g = mul(rho.rho(), abs_pow(a, p));
  const int weight_depth = std::max(g.depth(), 1);
  if (order < std::max(weight_depth - 1, 1))
    throw_error(ErrorCode::depth, "Markov order below weight depth - 1");
  const int n = rho.n();
  const std::int64_t N = chain_states(n, order);
  const std::int64_t prefix = N / n;

  const Eigen::VectorXd gk1 = g.lifted(order + 1).real_values();
  // prune states until every survivor has an allowed edge into a survivor
  std::vector<char> alive_mask(static_cast<std::size_t>(N), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::int64_t u = 0; u < N; ++u) {
      if (!alive_mask[static_cast<std::size_t>(u)]) continue;
      bool ok = false;
      for (int j = 1; j <= n && !ok; ++j) {
        const std::int64_t succ = (u % prefix) * n + j - 1;
        ok = gk1[u * n + j - 1] > 0.0 && alive_mask[static_cast<std::size_t>(succ)];
      }
      if (!ok) {
        alive_mask[static_cast<std::size_t>(u)] = 0;
        changed = true;
      }
    }
  }

  AscentProblem prob;
  prob.n = n;
  prob.order = order;
  prob.N = N;
  prob.weight_depth = weight_depth;
  prob.inv_p = 1.0 / p;
  prob.local.assign(static_cast<std::size_t>(N), -1);
  for (std::int64_t u = 0; u < N; ++u)
    if (alive_mask[static_cast<std::size_t>(u)]) {
      prob.local[static_cast<std::size_t>(u)] = static_cast<int>(prob.alive.size());
      prob.alive.push_back(static_cast<int>(u));
    }
  if (prob.alive.empty())
    return NumericOptResult{std::nullopt, Objective{kNegInf, true}, true};
  for (int u : prob.alive) {
    std::vector<int> js;
    for (int j = 1; j <= n; ++j) {
      const std::int64_t succ = (u % prefix) * n + j - 1;
      if (gk1[static_cast<std::int64_t>(u) * n + j - 1] > 0.0 &&
          alive_mask[static_cast<std::size_t>(succ)])
        js.push_back(j);
    }
    prob.allowed.push_back(std::move(js));
  }

  {
    const int depth = std::max(a.depth(), rho.depth());
    const CylinderFunction al = a.lifted(depth);
    const Eigen::VectorXd rl = rho.rho().lifted(depth).real_values();
    prob.integrand = Eigen::VectorXd::Zero(al.size());
    for (std::int64_t j = 0; j < al.size(); ++j) {
      const double av = std::abs(al.values()[j]);
      prob.integrand[j] =
          av > 0.0 ? std::log(av) + std::log(rl[j]) / p : kNegInf;
    }
  }

  const int n_params = prob.n_params();
  double best_value = kNegInf;
  Eigen::VectorXd best_theta;
  bool best_refined = false;

  for (int restart = 0; restart < restarts; ++restart) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_params);
    if (restart > 0) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 0x9e3779b97f4a7c15ULL +
                          static_cast<std::uint64_t>(restart));
      for (int t = 0; t < n_params; ++t) theta[t] = 4.0 * uniform01(rng) - 2.0;
    }
    double value = prob.eval(theta);
    double step = 0.5;
    bool refined = false;
    for (int sweep = 0; sweep < 400; ++sweep) {
      bool improved = false;
      for (int t = 0; t < n_params; ++t) {
        for (const double s : {step, -step}) {
          theta[t] += s;
          const double trial = prob.eval(theta);
          if (trial > value + 1e-14) {
            value = trial;
            improved = true;
            break;
          }
          theta[t] -= s;
        }
      }
      if (!improved) {
        step *= 0.5;
        if (step < 1e-5) {
          refined = true;
          break;
        }
      }
    }
    if (value > best_value) {
      best_value = value;
      best_theta = theta;
      best_refined = refined;
    }
  }

  // rebuild the best chain as a full validated measure
  const int A = static_cast<int>(prob.alive.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
  {
    int t = 0;
    for (int iu = 0; iu < A; ++iu) {
      const auto& js = prob.allowed[static_cast<std::size_t>(iu)];
      double zmax = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < js.size(); ++c)
        zmax = std::max(zmax, best_theta[t + static_cast<int>(c)]);
      double denom = 0.0;
      for (std::size_t c = 0; c < js.size(); ++c)
        denom += std::exp(best_theta[t + static_cast<int>(c)] - zmax);
      for (std::size_t c = 0; c < js.size(); ++c) {
        const std::int64_t u = prob.alive[static_cast<std::size_t>(iu)];
        const std::int64_t succ = (u % prefix) * n + js[c] - 1;
        P(u, succ) = std::exp(best_theta[t + static_cast<int>(c)] - zmax) / denom;
      }
      t += static_cast<int>(js.size());
    }
  }
  Eigen::MatrixXd P_sub(A, A);
  for (int iu = 0; iu < A; ++iu)
    for (int iv = 0; iv < A; ++iv)
      P_sub(iu, iv) = P(prob.alive[static_cast<std::size_t>(iu)],
                        prob.alive[static_cast<std::size_t>(iv)]);
  const Eigen::VectorXd pi_sub = stationary_of(P_sub);
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(N);
  for (int iu = 0; iu < A; ++iu) pi[prob.alive[static_cast<std::size_t>(iu)]] = pi_sub[iu];
  for (std::int64_t u = 0; u < N; ++u) {
    if (P.row(u).sum() > 0.0) continue;
    for (int j = 0; j < n; ++j)
      P(u, (u % prefix) * n + j) = 1.0 / static_cast<double>(n);
  }

  MarkovMeasure mm(n, order, std::move(P), std::move(pi));
  const Objective value = objective(a, rho, p, mm);
  return NumericOptResult{std::move(mm), value, best_refined};
}

}  // namespace lpshift
