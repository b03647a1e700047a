#pragma once

// Sparse multivariate polynomials over a named variable space.
//
// Variables are split into two contiguous blocks: the parameter block
// (theta, leading) and the uncertainty block (alpha, trailing).  Monomials
// are ordered graded-lexicographically everywhere: total degree first, then
// lexicographically with larger leading exponents first, so that in two
// variables the degree-2 basis reads x^2, xy, y^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sosmm {

/// Coefficients with absolute value below this are never stored.
inline constexpr double kDropTolerance = 1e-14;

class VariableSpace {
 public:
  VariableSpace() = default;
  VariableSpace(std::vector<std::string> theta_names, std::vector<std::string> alpha_names)
      : theta_count_(theta_names.size()), alpha_count_(alpha_names.size()) {
    names_ = std::move(theta_names);
    names_.insert(names_.end(), std::make_move_iterator(alpha_names.begin()),
                  std::make_move_iterator(alpha_names.end()));
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw std::invalid_argument("variable names must be non-empty");
      if (!seen.insert(n).second) throw std::invalid_argument("duplicate variable name '" + n + "'");
    }
  }

  static std::shared_ptr<const VariableSpace> make(std::vector<std::string> theta,
                                                   std::vector<std::string> alpha = {}) {
    return std::make_shared<const VariableSpace>(std::move(theta), std::move(alpha));
  }

  std::size_t size() const { return names_.size(); }
  std::size_t theta_count() const { return theta_count_; }
  std::size_t alpha_count() const { return alpha_count_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  bool is_theta(std::size_t i) const { return i < theta_count_; }

  std::size_t index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::invalid_argument("unknown variable '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::vector<std::string> theta_names() const {
    return {names_.begin(), names_.begin() + static_cast<std::ptrdiff_t>(theta_count_)};
  }
  std::vector<std::string> alpha_names() const {
    return {names_.begin() + static_cast<std::ptrdiff_t>(theta_count_), names_.end()};
  }

  friend bool operator==(const VariableSpace& a, const VariableSpace& b) {
    return a.theta_count_ == b.theta_count_ && a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::size_t theta_count_ = 0;
  std::size_t alpha_count_ = 0;
};

using SpacePtr = std::shared_ptr<const VariableSpace>;

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
  return a == b || (a && b && *a == *b);
}

class ExponentVector {
 public:
  ExponentVector() = default;
  explicit ExponentVector(std::size_t n) : e_(n, 0) {}
  ExponentVector(std::initializer_list<int> list) : e_(list) { check(); }
  explicit ExponentVector(std::vector<int> e) : e_(std::move(e)) { check(); }

  static ExponentVector unit(std::size_t n, std::size_t var, int power = 1) {
    ExponentVector v(n);
    v.e_[var] = power;
    return v;
  }

  std::size_t size() const { return e_.size(); }
  int operator[](std::size_t i) const { return e_[i]; }
  int& operator[](std::size_t i) { return e_[i]; }
  const std::vector<int>& data() const { return e_; }
  int degree() const { return std::accumulate(e_.begin(), e_.end(), 0); }
  bool is_zero() const {
    return std::all_of(e_.begin(), e_.end(), [](int x) { return x == 0; });
  }

  ExponentVector operator+(const ExponentVector& o) const {
    if (o.size() != size()) throw std::invalid_argument("exponent length mismatch");
    ExponentVector r(*this);
    for (std::size_t i = 0; i < e_.size(); ++i) r.e_[i] += o.e_[i];
    return r;
  }

  /// Indices of variables with a positive exponent.
  std::vector<std::size_t> support() const {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < e_.size(); ++i)
      if (e_[i] > 0) s.push_back(i);
    return s;
  }

  friend bool operator==(const ExponentVector& a, const ExponentVector& b) { return a.e_ == b.e_; }
  friend bool operator!=(const ExponentVector& a, const ExponentVector& b) { return a.e_ != b.e_; }

 private:
  void check() const {
    for (int x : e_)
      if (x < 0) throw std::invalid_argument("negative exponent");
  }
  std::vector<int> e_;
};

/// Graded-lexicographic "less": lower total degree first; within a degree,
/// the vector with the larger first differing exponent comes first.
struct GradedLexLess {
  bool operator()(const ExponentVector& a, const ExponentVector& b) const {
    const int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
      if (a[i] != b[i]) return a[i] > b[i];
    return a.size() < b.size();
  }
};

struct ExponentHash {
  std::size_t operator()(const ExponentVector& v) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (int x : v.data()) {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

enum class BasisBlock { all, theta_only, alpha_only };

namespace detail {
inline void enumerate_degree(std::span<const std::size_t> vars, int degree, ExponentVector& cur,
                             std::size_t pos, std::vector<ExponentVector>& out) {
  if (pos + 1 == vars.size()) {
    cur[vars[pos]] = degree;
    out.push_back(cur);
    cur[vars[pos]] = 0;
    return;
  }
  for (int d = degree; d >= 0; --d) {
    cur[vars[pos]] = d;
    enumerate_degree(vars, degree - d, cur, pos + 1, out);
  }
  cur[vars[pos]] = 0;
}
}  // namespace detail

/// All exponent vectors of total degree <= max_degree supported on `vars`,
/// in graded-lexicographic order.  `n` is the full vector length.
inline std::vector<ExponentVector> monomial_basis_on(std::size_t n, std::span<const std::size_t> vars,
                                                     int max_degree) {
  if (max_degree < 0) throw std::invalid_argument("max_degree must be >= 0");
  std::vector<ExponentVector> out;
  ExponentVector cur(n);
  out.push_back(cur);
  if (vars.empty()) return out;
  for (int d = 1; d <= max_degree; ++d) detail::enumerate_degree(vars, d, cur, 0, out);
  return out;
}

inline std::vector<ExponentVector> monomial_basis(const VariableSpace& space, int max_degree,
                                                  BasisBlock block = BasisBlock::all) {
  std::vector<std::size_t> vars;
  const std::size_t lo = block == BasisBlock::alpha_only ? space.theta_count() : 0;
  const std::size_t hi = block == BasisBlock::theta_only ? space.theta_count() : space.size();
  for (std::size_t i = lo; i < hi; ++i) vars.push_back(i);
  return monomial_basis_on(space.size(), vars, max_degree);
}

/// Binomial coefficient C(n, k) as a size_t (small arguments only).
inline std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

class Polynomial {
 public:
  using TermMap = std::map<ExponentVector, double, GradedLexLess>;

  Polynomial() = default;
  explicit Polynomial(SpacePtr space) : space_(std::move(space)) {
    if (!space_) throw std::invalid_argument("polynomial needs a variable space");
  }

  static Polynomial constant(SpacePtr space, double c) {
    Polynomial p(std::move(space));
    p.add_term(ExponentVector(p.nvars()), c);
    return p;
  }
  static Polynomial variable(SpacePtr space, std::size_t index) {
    Polynomial p(std::move(space));
    p.add_term(ExponentVector::unit(p.nvars(), index), 1.0);
    return p;
  }
  static Polynomial variable(SpacePtr space, const std::string& name) {
    const auto idx = space->index_of(name);
    return variable(std::move(space), idx);
  }
  static Polynomial monomial(SpacePtr space, ExponentVector e, double c = 1.0) {
    Polynomial p(std::move(space));
    p.add_term(std::move(e), c);
    return p;
  }

  const SpacePtr& space() const { return space_; }
  std::size_t nvars() const { return space_ ? space_->size() : 0; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t term_count() const { return terms_.size(); }

  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, e.degree());
    return d;
  }

  double coefficient(const ExponentVector& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
  }

  double max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Adds c * x^e, applying the drop tolerance to the resulting coefficient.
  void add_term(ExponentVector e, double c) {
    if (e.size() != nvars()) throw std::invalid_argument("exponent vector does not match the variable space");
    auto [it, inserted] = terms_.try_emplace(std::move(e), 0.0);
    it->second += c;
    if (std::abs(it->second) < kDropTolerance) terms_.erase(it);
  }

  /// Variable indices appearing with positive degree in some term.
  std::vector<std::size_t> variables_used() const {
    std::vector<bool> used(nvars(), false);
    for (const auto& [e, c] : terms_)
      for (std::size_t i = 0; i < e.size(); ++i)
        if (e[i] > 0) used[i] = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < used.size(); ++i)
      if (used[i]) out.push_back(i);
    return out;
  }

  bool depends_on_theta() const {
    for (const auto& [e, c] : terms_)
      for (std::size_t i = 0; i < space_->theta_count(); ++i)
        if (e[i] > 0) return true;
    return false;
  }

  double operator()(std::span<const double> x) const { return evaluate(x); }

  double evaluate(std::span<const double> x) const {
    if (x.size() != nvars()) throw std::invalid_argument("evaluation point has wrong dimension");
    double sum = 0.0;
    for (const auto& [e, c] : terms_) {
      double m = c;
      for (std::size_t i = 0; i < x.size(); ++i)
        for (int k = 0; k < e[i]; ++k) m *= x[i];
      sum += m;
    }
    return sum;
  }

  Polynomial& operator+=(const Polynomial& q) {
    require_same(q);
    for (const auto& [e, c] : q.terms_) add_term(e, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& q) {
    require_same(q);
    for (const auto& [e, c] : q.terms_) add_term(e, -c);
    return *this;
  }
  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
      it->second *= s;
      if (std::abs(it->second) < kDropTolerance)
        it = terms_.erase(it);
      else
        ++it;
    }
    return *this;
  }
  Polynomial& operator+=(double c) {
    add_term(ExponentVector(nvars()), c);
    return *this;
  }

  friend Polynomial operator+(Polynomial p, const Polynomial& q) { return p += q; }
  friend Polynomial operator-(Polynomial p, const Polynomial& q) { return p -= q; }
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
  friend Polynomial operator+(Polynomial p, double c) { return p += c; }
  friend Polynomial operator+(double c, Polynomial p) { return p += c; }
  friend Polynomial operator-(Polynomial p, double c) { return p += -c; }
  friend Polynomial operator-(double c, Polynomial p) { return (p *= -1.0) += c; }
  friend Polynomial operator-(Polynomial p) { return p *= -1.0; }

  friend Polynomial operator*(const Polynomial& p, const Polynomial& q) {
    p.require_same(q);
    std::unordered_map<ExponentVector, double, ExponentHash> acc;
    acc.reserve(p.terms_.size() * q.terms_.size());
    for (const auto& [ep, cp] : p.terms_)
      for (const auto& [eq, cq] : q.terms_) acc[ep + eq] += cp * cq;
    Polynomial r(p.space_);
    for (auto& [e, c] : acc)
      if (std::abs(c) >= kDropTolerance) r.terms_.emplace(e, c);
    return r;
  }  Polynomial& operator*=(const Polynomial& q) { return *this = *this * q; }


  Polynomial pow(int k) const {
    if (k < 0) throw std::invalid_argument("negative power");
    Polynomial r = constant(space_, 1.0);
    for (int i = 0; i < k; ++i) r = r * *this;
    return r;
  }

  /// Substitutes x_i -> shift_i + scale_i * x_i for every variable.
  Polynomial affine_substitute(std::span<const double> shift, std::span<const double> scale) const {
    if (shift.size() != nvars() || scale.size() != nvars())
      throw std::invalid_argument("affine substitution has wrong dimension");
    const std::size_t n = nvars();
    // Univariate powers (shift + scale * x)^k expanded lazily per variable.
    std::vector<std::vector<std::vector<double>>> binom(n);
    auto univariate = [&](std::size_t var, int k) -> const std::vector<double>& {
      auto& cache = binom[var];
      while (static_cast<int>(cache.size()) <= k) {
        if (cache.empty()) {
          cache.push_back({1.0});
          continue;
        }
        const auto& prev = cache.back();
        std::vector<double> next(prev.size() + 1, 0.0);
        for (std::size_t j = 0; j < prev.size(); ++j) {
          next[j] += prev[j] * shift[var];
          next[j + 1] += prev[j] * scale[var];
        }
        cache.push_back(std::move(next));
      }
      return cache[static_cast<std::size_t>(k)];
    };
    std::unordered_map<ExponentVector, double, ExponentHash> acc;
    for (const auto& [e, c] : terms_) {
      std::vector<std::pair<ExponentVector, double>> partial{{ExponentVector(n), c}};
      for (std::size_t i = 0; i < n; ++i) {
        if (e[i] == 0) continue;
        const auto& coefs = univariate(i, e[i]);
        std::vector<std::pair<ExponentVector, double>> next;
        next.reserve(partial.size() * coefs.size());
        for (const auto& [pe, pc] : partial)
          for (std::size_t j = 0; j < coefs.size(); ++j) {
            if (coefs[j] == 0.0) continue;
            ExponentVector ne = pe;
            ne[i] = static_cast<int>(j);
            next.emplace_back(std::move(ne), pc * coefs[j]);
          }
        partial = std::move(next);
      }
      for (auto& [pe, pc] : partial) acc[pe] += pc;
    }
    Polynomial r(space_);
    for (auto& [ex, c] : acc)
      if (std::abs(c) >= kDropTolerance) r.terms_.emplace(ex, c);
    return r;
  }

  /// Re-expresses the polynomial over `target`, matching variables by name.
  /// Throws if a variable with nonzero degree has no counterpart.
  Polynomial remap(const SpacePtr& target) const {
    std::vector<std::ptrdiff_t> where(nvars(), -1);
    for (std::size_t i = 0; i < nvars(); ++i) {
      const auto& names = target->names();
      auto it = std::find(names.begin(), names.end(), space_->name(i));
      if (it != names.end()) where[i] = it - names.begin();
    }
    Polynomial r(target);
    for (const auto& [e, c] : terms_) {
      ExponentVector ne(target->size());
      for (std::size_t i = 0; i < nvars(); ++i) {
        if (e[i] == 0) continue;
        if (where[i] < 0)
          throw std::invalid_argument("variable '" + space_->name(i) + "' is not present in the target space");
        ne[static_cast<std::size_t>(where[i])] = e[i];
      }
      r.add_term(std::move(ne), c);
    }
    return r;
  }

  /// Fixes the variables listed in `indices` to `values` and returns the
  /// polynomial in the remaining variables (same space; those variables
  /// simply no longer appear).
  Polynomial partial_evaluate(std::span<const std::size_t> indices, std::span<const double> values) const {
    if (indices.size() != values.size()) throw std::invalid_argument("partial_evaluate size mismatch");
    Polynomial r(space_);
    for (const auto& [e, c] : terms_) {
      ExponentVector ne = e;
      double m = c;
      for (std::size_t k = 0; k < indices.size(); ++k) {
        for (int p = 0; p < e[indices[k]]; ++p) m *= values[k];
        ne[indices[k]] = 0;
      }
      r.add_term(std::move(ne), m);
    }
    return r;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return same_space(a.space_, b.space_) && a.terms_ == b.terms_;
  }

  /// Human-readable form, e.g. "2*t^2 - 1".
  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::string s;
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
      const auto& [e, c] = *it;
      std::string mono;
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0) continue;
        if (!mono.empty()) mono += "*";
        mono += space_->name(i);
        if (e[i] > 1) mono += "^" + std::to_string(e[i]);
      }
      const double a = std::abs(c);
      std::string coef = std::to_string(a);
      coef.erase(coef.find_last_not_of('0') + 1);
      if (!coef.empty() && coef.back() == '.') coef.pop_back();
      s += first ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + ");
      if (mono.empty())
        s += coef;
      else if (a == 1.0)
        s += mono;
      else
        s += coef + "*" + mono;
      first = false;
    }
    return s;
  }

 private:
  void require_same(const Polynomial& q) const {
    if (!same_space(space_, q.space_)) throw std::invalid_argument("polynomials live in different variable spaces");
  }

  SpacePtr space_;
  TermMap terms_;
};

inline Polynomial poly_add(const Polynomial& p, const Polynomial& q) { return p + q; }
inline Polynomial poly_mul(const Polynomial& p, const Polynomial& q) { return p * q; }
inline double poly_eval(const Polynomial& p, std::span<const double> x) { return p.evaluate(x); }

/// Maximum over matched monomials of |p_k - q_k|.
inline double coefficient_distance(const Polynomial& p, const Polynomial& q) {
  double m = 0.0;
  const Polynomial d = p - q;
  for (const auto& [e, c] : d.terms()) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace sosmm
