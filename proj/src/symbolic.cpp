#include "lpshift/symbolic.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace lpshift {

namespace {
std::atomic<std::int64_t> g_state_cap{std::int64_t{1} << 20};
}

std::int64_t state_cap() noexcept { return g_state_cap.load(); }

void set_state_cap(std::int64_t cap) {
  if (cap < 1) throw_error(ErrorCode::validation, "state cap must be positive");
  g_state_cap.store(cap);
}

std::int64_t state_count(int n, int depth) {
  if (n < 1) throw_error(ErrorCode::validation, "alphabet size must be >= 1");
  if (depth < 0) throw_error(ErrorCode::validation, "depth must be >= 0");
  const std::int64_t cap = state_cap();
  std::int64_t count = 1;
  for (int k = 0; k < depth; ++k) {
    if (count > cap / n) {
      std::ostringstream msg;
      msg << "state count " << n << "^" << depth << " exceeds cap " << cap;
      throw_error(ErrorCode::resource, msg.str());
    }
    count *= n;
  }
  if (count > cap) {
    std::ostringstream msg;
    msg << "state count " << n << "^" << depth << " exceeds cap " << cap;
    throw_error(ErrorCode::resource, msg.str());
  }
  return count;
}

Word::Word(int n, std::vector<int> letters) : n_(n), letters_(std::move(letters)) {
  if (n_ < 1) throw_error(ErrorCode::validation, "alphabet size must be >= 1");
  for (int letter : letters_) {
    if (letter < 1 || letter > n_) {
      std::ostringstream msg;
      msg << "letter " << letter << " outside alphabet {1.." << n_ << "}";
      throw_error(ErrorCode::validation, msg.str());
    }
  }
}

Word Word::from_index(int n, int depth, std::int64_t index) {
  const std::int64_t count = state_count(n, depth);
  if (index < 0 || index >= count)
    throw_error(ErrorCode::validation, "word index out of range");
  std::vector<int> letters(static_cast<std::size_t>(depth));
  for (int k = depth - 1; k >= 0; --k) {
    letters[static_cast<std::size_t>(k)] = static_cast<int>(index % n) + 1;
    index /= n;
  }
  return Word(n, std::move(letters));
}

Word Word::parse(int n, const std::string& text) {
  std::vector<int> letters;
  if (!text.empty()) {
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      try {
        letters.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw_error(ErrorCode::validation, "cannot parse word letter '" + tok + "'");
      }
    }
  }
  return Word(n, std::move(letters));
}

std::int64_t Word::index() const {
  std::int64_t idx = 0;
  for (int letter : letters_) idx = idx * n_ + (letter - 1);
  return idx;
}

Word Word::rotated(int shift) const {
  const int d = size();
  if (d == 0) return *this;
  std::vector<int> out(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k)
    out[static_cast<std::size_t>(k)] =
        letters_[static_cast<std::size_t>(((k + shift) % d + d) % d)];
  return Word(n_, std::move(out));
}

std::string Word::str() const {
  std::ostringstream out;
  for (std::size_t k = 0; k < letters_.size(); ++k) {
    if (k) out << ',';
    out << letters_[k];
  }
  return out.str();
}

CylinderFunction::CylinderFunction(int n, int depth, Eigen::VectorXcd values)
    : n_(n), depth_(depth), values_(std::move(values)) {
  const std::int64_t count = state_count(n_, depth_);
  if (values_.size() != count) {
    std::ostringstream msg;
    msg << "cylinder function at depth " << depth_ << " over " << n_
        << " letters needs " << count << " values, got " << values_.size();
    throw_error(ErrorCode::validation, msg.str());
  }
}

CylinderFunction CylinderFunction::constant(int n, cplx value) {
  Eigen::VectorXcd v(1);
  v[0] = value;
  return CylinderFunction(n, 0, std::move(v));
}

CylinderFunction CylinderFunction::from_real(int n, int depth,
                                             const Eigen::VectorXd& values) {
  return CylinderFunction(n, depth, values.cast<cplx>());
}

CylinderFunction CylinderFunction::indicator(const Word& w, int depth) {
  if (w.size() > depth)
    throw_error(ErrorCode::depth, "indicator depth shorter than its word");
  const std::int64_t count = state_count(w.n(), depth);
  const std::int64_t block = count / state_count(w.n(), w.size());
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(count);
  const std::int64_t start = w.index() * block;
  for (std::int64_t j = 0; j < block; ++j) v[start + j] = 1.0;
  return CylinderFunction(w.n(), depth, std::move(v));
}

cplx CylinderFunction::value_at(const Word& w) const {
  if (w.n() != n_) throw_error(ErrorCode::validation, "alphabet mismatch");
  if (w.size() < depth_)
    throw_error(ErrorCode::depth, "word shorter than function depth");
  std::int64_t idx = w.index();
  for (int k = depth_; k < w.size(); ++k) idx /= n_;
  return values_[idx];
}

CylinderFunction CylinderFunction::lifted(int new_depth) const {
  if (new_depth < depth_)
    throw_error(ErrorCode::depth, "cannot lift to a shallower depth");
  if (new_depth == depth_) return *this;
  const std::int64_t count = state_count(n_, new_depth);
  const std::int64_t block = count / values_.size();
  Eigen::VectorXcd v(count);
  for (std::int64_t j = 0; j < count; ++j) v[j] = values_[j / block];
  return CylinderFunction(n_, new_depth, std::move(v));
}

CylinderFunction CylinderFunction::composed_with_shift() const {
  const std::int64_t count = state_count(n_, depth_ + 1);
  Eigen::VectorXcd v(count);
  const std::int64_t suffix = values_.size();
  for (std::int64_t j = 0; j < count; ++j) v[j] = values_[j % suffix];
  return CylinderFunction(n_, depth_ + 1, std::move(v));
}

bool CylinderFunction::is_real(double tol) const {
  for (std::int64_t j = 0; j < values_.size(); ++j)
    if (std::abs(values_[j].imag()) > tol) return false;
  return true;
}

Eigen::VectorXd CylinderFunction::real_values(double tol) const {
  if (!is_real(tol))
    throw_error(ErrorCode::validation, "cylinder function is not real");
  return values_.real();
}

double CylinderFunction::max_abs() const {
  double m = 0.0;
  for (std::int64_t j = 0; j < values_.size(); ++j)
    m = std::max(m, std::abs(values_[j]));
  return m;
}

namespace {
std::pair<CylinderFunction, CylinderFunction> aligned(const CylinderFunction& f,
                                                      const CylinderFunction& g) {
  if (f.n() != g.n())
    throw_error(ErrorCode::validation, "alphabet mismatch in pointwise op");
  const int d = std::max(f.depth(), g.depth());
  return {f.lifted(d), g.lifted(d)};
}
}  // namespace

CylinderFunction add(const CylinderFunction& f, const CylinderFunction& g) {
  auto [a, b] = aligned(f, g);
  return CylinderFunction(a.n(), a.depth(), a.values() + b.values());
}

CylinderFunction mul(const CylinderFunction& f, const CylinderFunction& g) {
  auto [a, b] = aligned(f, g);
  return CylinderFunction(a.n(), a.depth(),
                          a.values().cwiseProduct(b.values()));
}

CylinderFunction abs_pow(const CylinderFunction& f, double t) {
  Eigen::VectorXcd v(f.size());
  for (std::int64_t j = 0; j < f.size(); ++j) {
    const double m = std::abs(f.values()[j]);
    if (m == 0.0 && t < 0.0)
      throw_error(ErrorCode::singularity,
                  "abs_pow with negative exponent hit a zero entry");
    v[j] = (t == 1.0) ? m : std::pow(m, t);
  }
  return CylinderFunction(f.n(), f.depth(), std::move(v));
}

}  // namespace lpshift
