#pragma once

// Dense primal-dual interior-point solver for block-diagonal semidefinite
// programs with free scalar variables.
//
//   primal:  min  <C, X> + c'x   s.t.  <A_i, X> + a_i'x = b_i,  X psd
//   dual:    max  b'y            s.t.  C - sum_i y_i A_i = S psd,  c - B'y = 0
//
// X is block diagonal.  Search directions use Nesterov-Todd scaling with a
// Mehrotra predictor-corrector; the Schur complement is formed densely and
// factored by Cholesky.  Free variables enter through a reduced system on
// B' M^{-1} B instead of being split into differences of nonnegatives.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sosmm::sdp {

/// One entry of a symmetric block matrix.  Off-diagonal entries stand for
/// both (row, col) and (col, row); duplicates add up.
struct BlockEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct Constraint {
  std::vector<BlockEntry> entries;
  std::vector<std::pair<int, double>> free_terms;
  double rhs = 0.0;
};

struct Problem {
  std::vector<int> block_sizes;
  int free_count = 0;
  std::vector<BlockEntry> objective_entries;
  std::vector<double> objective_free;  // length free_count (may be empty = zeros)
  std::vector<Constraint> constraints;

  int variable_count() const {
    int n = free_count;
    for (int s : block_sizes) n += s * (s + 1) / 2;
    return n;
  }

  void validate() const {
    for (int s : block_sizes)
      if (s < 1) throw std::invalid_argument("sdp: block sizes must be >= 1");
    if (block_sizes.empty() && free_count == 0) throw std::invalid_argument("sdp: problem has no variables");
    if (!objective_free.empty() && static_cast<int>(objective_free.size()) != free_count)
      throw std::invalid_argument("sdp: objective free-variable vector has the wrong length");
    auto check_entry = [&](const BlockEntry& e, const std::string& where) {
      if (e.block < 0 || e.block >= static_cast<int>(block_sizes.size()))
        throw std::invalid_argument("sdp: " + where + " references a missing block");
      const int n = block_sizes[static_cast<std::size_t>(e.block)];
      if (e.row < 0 || e.col < 0 || e.row >= n || e.col >= n)
        throw std::invalid_argument("sdp: " + where + " has an entry outside its block");
    };
    for (const auto& e : objective_entries) check_entry(e, "objective");
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      for (const auto& e : constraints[i].entries) check_entry(e, "constraint " + std::to_string(i));
      for (const auto& [k, v] : constraints[i].free_terms)
        if (k < 0 || k >= free_count)
          throw std::invalid_argument("sdp: constraint " + std::to_string(i) + " references a missing free variable");
    }
  }
};

enum class Status { optimal, max_iterations, presumed_infeasible, presumed_unbounded, numerical_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::max_iterations: return "max_iterations";
    case Status::presumed_infeasible: return "presumed_infeasible";
    case Status::presumed_unbounded: return "presumed_unbounded";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct Residuals {
  double primal_feas = 0.0;
  double dual_feas = 0.0;
  double relative_gap = 0.0;
};

struct Solution {
  Status status = Status::numerical_failure;
  std::vector<Eigen::MatrixXd> primal_blocks;
  Eigen::VectorXd free_values;
  Eigen::VectorXd dual_multipliers;
  std::vector<Eigen::MatrixXd> dual_slacks;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  Residuals residuals;
  int iterations = 0;
};

struct Settings {
  double tol = 1e-8;
  int max_iter = 100;
  bool verbose = false;
};

/// Residual level at which a solution is reported as optimal.
inline constexpr double kOptimalTolerance = 1e-7;

namespace detail {

struct ScaledEntry {
  int constraint;
  int row;
  int col;
  double u;  // value, halved on the diagonal
};

class Kernel {
 public:
  Kernel(const Problem& p, const Settings& s) : prob_(p), set_(s) {
    p.validate();
    m_ = static_cast<int>(p.constraints.size());
    nf_ = p.free_count;
    nb_ = static_cast<int>(p.block_sizes.size());
    per_block_.resize(static_cast<std::size_t>(nb_));
    for (int i = 0; i < m_; ++i)
      for (const auto& e : p.constraints[static_cast<std::size_t>(i)].entries) {
        const int r = std::min(e.row, e.col), c = std::max(e.row, e.col);
        per_block_[static_cast<std::size_t>(e.block)].push_back({i, r, c, r == c ? 0.5 * e.value : e.value});
      }
    C_.resize(static_cast<std::size_t>(nb_));
    for (int k = 0; k < nb_; ++k) C_[static_cast<std::size_t>(k)] = Eigen::MatrixXd::Zero(size(k), size(k));
    for (const auto& e : p.objective_entries) {
      auto& cm = C_[static_cast<std::size_t>(e.block)];
      cm(e.row, e.col) += e.value;
      if (e.row != e.col) cm(e.col, e.row) += e.value;
    }
    c_ = Eigen::VectorXd::Zero(nf_);
    for (int k = 0; k < nf_ && !p.objective_free.empty(); ++k) c_(k) = p.objective_free[static_cast<std::size_t>(k)];
    b_.resize(m_);
    B_ = Eigen::MatrixXd::Zero(m_, nf_);
    for (int i = 0; i < m_; ++i) {
      b_(i) = p.constraints[static_cast<std::size_t>(i)].rhs;
      for (const auto& [k, v] : p.constraints[static_cast<std::size_t>(i)].free_terms) B_(i, k) += v;
    }
    total_dim_ = 0;
    for (int s : p.block_sizes) total_dim_ += s;
    if (nf_ > 0) {
      qr_.compute(B_);
      rank_ = static_cast<int>(qr_.rank());
    }
  }

  Solution run();

 private:
  int size(int k) const { return prob_.block_sizes[static_cast<std::size_t>(k)]; }

  // A(Z) for block-diagonal symmetric Z.
  Eigen::VectorXd apply_A(const std::vector<Eigen::MatrixXd>& Z) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m_);
    for (int k = 0; k < nb_; ++k) {
      const auto& z = Z[static_cast<std::size_t>(k)];
      for (const auto& e : per_block_[static_cast<std::size_t>(k)]) r(e.constraint) += 2.0 * e.u * z(e.row, e.col);
    }
    return r;
  }

  // sum_i y_i A_i
  std::vector<Eigen::MatrixXd> apply_At(const Eigen::VectorXd& y) const {
    std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(nb_));
    for (int k = 0; k < nb_; ++k) {
      auto& z = out[static_cast<std::size_t>(k)];
      z = Eigen::MatrixXd::Zero(size(k), size(k));
      for (const auto& e : per_block_[static_cast<std::size_t>(k)]) {
        const double v = e.u * y(e.constraint);
        z(e.row, e.col) += v;
        z(e.col, e.row) += v;
      }
    }
    return out;
  }

  static double inner(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k].array() * b[k].array()).sum();
    return s;
  }
  static double fro2(const std::vector<Eigen::MatrixXd>& a) {
    double s = 0.0;
    for (const auto& x : a) s += x.squaredNorm();
    return s;
  }

  // Largest step t in (0, inf] keeping X + t dX psd.
  static double max_step(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::MatrixXd& dX) {
    Eigen::MatrixXd t = chol.matrixL().solve(dX);
    t = chol.matrixL().solve(t.transpose()).eval();
    t = 0.5 * (t + t.transpose()).eval();
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t, Eigen::EigenvaluesOnly).eigenvalues()(0);
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
  }

  bool factor_schur(const std::vector<Eigen::MatrixXd>& W);
  void solve_system(const Eigen::VectorXd& h, const Eigen::VectorXd& rf, Eigen::VectorXd& dy,
                    Eigen::VectorXd& dx) const;

  const Problem& prob_;
  Settings set_;
  int m_ = 0, nf_ = 0, nb_ = 0, total_dim_ = 0;
  std::vector<std::vector<ScaledEntry>> per_block_;
  std::vector<Eigen::MatrixXd> C_;
  Eigen::VectorXd c_, b_;
  Eigen::MatrixXd B_;

  Eigen::MatrixXd M_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd dscale_;
  Eigen::VectorXd schur_solve(const Eigen::VectorXd& b) const {
    return dscale_.cwiseProduct(llt_.solve(dscale_.cwiseProduct(b)));
  }
  // Free variables: B P = Q [R11 R12; 0 0].  The step is solved in the
  // rotated coordinates Q' dy, where only the trailing block of Q' M Q is
  // factored.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  int rank_ = 0;
  Eigen::MatrixXd QMQ_;
};

inline bool Kernel::factor_schur(const std::vector<Eigen::MatrixXd>& W) {
  M_.setZero(m_, m_);
  for (int k = 0; k < nb_; ++k) {
    const auto& w = W[static_cast<std::size_t>(k)];
    const auto& ent = per_block_[static_cast<std::size_t>(k)];
    // Entries are grouped by constraint in ascending order by construction.
    for (std::size_t a = 0; a < ent.size(); ++a) {
      const auto& e = ent[a];
      for (std::size_t f = 0; f <= a; ++f) {
        const auto& g = ent[f];
        double v = 2.0 * e.u * g.u * (w(e.row, g.col) * w(e.col, g.row) + w(e.row, g.row) * w(e.col, g.col));
        if (g.constraint == e.constraint && f != a) v *= 2.0;
        M_(e.constraint, g.constraint) += v;
      }
    }
  }
  // Entries were accumulated into the lower triangle (constraint(e) >= constraint(g)).
  // Jacobi-scaled Cholesky with escalating diagonal regularization.
  auto factor = [&](const Eigen::MatrixXd& A) {
    const Eigen::VectorXd d = A.diagonal();
    if (!d.allFinite() || !(d.maxCoeff() > 0.0)) return false;
    const double floor = 1e-30 * d.maxCoeff();
    dscale_ = d.cwiseMax(floor).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd As = dscale_.asDiagonal() * A * dscale_.asDiagonal();
    double reg = 1e-14;
    for (int attempt = 0; attempt < 6; ++attempt, reg *= 100.0) {
      Eigen::MatrixXd Ar = As;
      Ar.diagonal().array() += reg;
      llt_.compute(Ar);
      if (llt_.info() == Eigen::Success) return true;
    }
    return false;
  };
  if (nf_ == 0) return factor(M_);
  QMQ_ = M_.selfadjointView<Eigen::Lower>();
  const auto q = qr_.householderQ();
  QMQ_.applyOnTheLeft(q.adjoint());
  QMQ_.transposeInPlace();
  QMQ_.applyOnTheLeft(q.adjoint());
  if (rank_ == m_) return true;
  return factor(QMQ_.bottomRightCorner(m_ - rank_, m_ - rank_));
}

inline void Kernel::solve_system(const Eigen::VectorXd& h, const Eigen::VectorXd& rf, Eigen::VectorXd& dy,
                                 Eigen::VectorXd& dx) const {
  auto once = [&](const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& y, Eigen::VectorXd& x) {
    if (nf_ == 0) {
      y = schur_solve(r1);
      x.resize(0);
      return;
    }
    const int r = rank_, n2 = m_ - rank_;
    const auto q = qr_.householderQ();
    const auto R11 = qr_.matrixR().topLeftCorner(r, r).triangularView<Eigen::Upper>();
    const Eigen::VectorXd hq = q.adjoint() * r1;
    const Eigen::VectorXd rp = qr_.colsPermutation().transpose() * r2;
    Eigen::VectorXd yq(m_);
    yq.head(r) = R11.transpose().solve(rp.head(r));
    if (n2 > 0)
      yq.tail(n2) = schur_solve(hq.tail(n2) - QMQ_.bottomLeftCorner(n2, r) * yq.head(r));
    Eigen::VectorXd xp = Eigen::VectorXd::Zero(nf_);
    xp.head(r) = R11.solve(hq.head(r) - QMQ_.topRows(r) * yq);
    y = q * yq;
    x = qr_.colsPermutation() * xp;
  };
  once(h, rf, dy, dx);
  // Iterative refinement against the unregularized system.
  const double hn = h.norm() + (nf_ > 0 ? rf.norm() : 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 4; ++pass) {
    Eigen::VectorXd r1 = h - M_.selfadjointView<Eigen::Lower>() * dy;
    if (nf_ > 0) r1 -= B_ * dx;
    Eigen::VectorXd r2 = nf_ > 0 ? Eigen::VectorXd(rf - B_.transpose() * dy) : Eigen::VectorXd();
    const double rn = r1.norm() + (nf_ > 0 ? r2.norm() : 0.0);
    if (rn <= 1e-15 * hn || rn >= 0.5 * prev) break;
    prev = rn;
    Eigen::VectorXd cy, cx;
    once(r1, r2, cy, cx);
    dy += cy;
    if (nf_ > 0) dx += cx;
  }
}

inline Solution Kernel::run() {
  Solution sol;
  const auto nbs = static_cast<std::size_t>(nb_);

  // Data norms for scaled residuals.
  const double norm_b = b_.norm();
  const double norm_c = std::sqrt(fro2(C_) + c_.squaredNorm());

  // Initial point: identity-scaled blocks, zero free variables and duals.
  std::vector<Eigen::MatrixXd> X(nbs), S(nbs);
  {
    std::vector<double> normA_blk(nbs, 0.0);
    std::vector<std::vector<double>> row_norm(nbs);
    for (int k = 0; k < nb_; ++k) {
      std::vector<double> rn(static_cast<std::size_t>(m_), 0.0);
      for (const auto& e : per_block_[static_cast<std::size_t>(k)])
        rn[static_cast<std::size_t>(e.constraint)] += (e.row == e.col ? 4.0 : 2.0) * e.u * e.u;
      row_norm[static_cast<std::size_t>(k)] = rn;
    }
    for (int k = 0; k < nb_; ++k) {
      const double n = size(k);
      double constX = 1.0, maxA = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double na = std::sqrt(row_norm[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]);
        maxA = std::max(maxA, na);
        constX = std::max(constX, (1.0 + std::abs(b_(i))) / (1.0 + na));
      }
      const double xi = std::max({10.0, std::sqrt(n), n * constX});
      const double eta = std::max({10.0, std::sqrt(n), 1.0 + std::max(maxA, C_[static_cast<std::size_t>(k)].norm())});
      X[static_cast<std::size_t>(k)] = xi * Eigen::MatrixXd::Identity(size(k), size(k));
      S[static_cast<std::size_t>(k)] = eta * Eigen::MatrixXd::Identity(size(k), size(k));
    }
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m_);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nf_);

  auto objectives = [&](double& pobj, double& dobj) {
    pobj = inner(C_, X) + c_.dot(x);
    dobj = b_.dot(y);
  };

  auto evaluate = [&](Residuals& r, Eigen::VectorXd& rp, std::vector<Eigen::MatrixXd>& Rd, Eigen::VectorXd& rf,
                      double& pobj, double& dobj) {
    rp = b_ - apply_A(X);
    if (nf_ > 0) rp -= B_ * x;
    auto Aty = apply_At(y);
    Rd.resize(nbs);
    for (std::size_t k = 0; k < nbs; ++k) Rd[k] = C_[k] - Aty[k] - S[k];
    rf = nf_ > 0 ? Eigen::VectorXd(c_ - B_.transpose() * y) : Eigen::VectorXd();
    objectives(pobj, dobj);
    r.primal_feas = rp.norm() / (1.0 + norm_b);
    r.dual_feas = std::sqrt(fro2(Rd) + (nf_ > 0 ? rf.squaredNorm() : 0.0)) / (1.0 + norm_c);
    r.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  };

  auto acceptable = [](const Residuals& r) {
    return r.primal_feas <= kOptimalTolerance && r.dual_feas <= kOptimalTolerance &&
           r.relative_gap <= kOptimalTolerance;
  };
  auto worst = [](const Residuals& r) { return std::max({r.primal_feas, r.dual_feas, r.relative_gap}); };

  // Best iterate seen so far; late iterations can lose accuracy on degenerate problems.
  struct Snapshot {
    std::vector<Eigen::MatrixXd> X, S;
    Eigen::VectorXd x, y;
    Residuals r;
    double pobj = 0.0, dobj = 0.0;
    int iter = -1;
  } best;
  auto remember = [&](int iter, const Residuals& r, double pobj, double dobj) {
    if (best.iter >= 0 && worst(r) >= worst(best.r)) return;
    best = {X, S, x, y, r, pobj, dobj, iter};
  };

  auto finish_at = [&](Status st, int iter, const Residuals& r, double pobj, double dobj) {
    sol.status = st;
    sol.primal_blocks = X;
    sol.dual_slacks = S;
    sol.free_values = x;
    sol.dual_multipliers = y;
    sol.primal_objective = pobj;
    sol.dual_objective = dobj;
    sol.residuals = r;
    sol.iterations = iter;
    return sol;
  };

  auto finish = [&](Status st, int iter, const Residuals& r, double pobj, double dobj) {
    if (st != Status::optimal && best.iter >= 0 && acceptable(best.r)) {
      X = best.X;
      S = best.S;
      x = best.x;
      y = best.y;
      return finish_at(Status::optimal, best.iter, best.r, best.pobj, best.dobj);
    }
    return finish_at(st, iter, r, pobj, dobj);
  };

  Eigen::VectorXd rp, rf;
  std::vector<Eigen::MatrixXd> Rd;
  Residuals res;
  double pobj = 0.0, dobj = 0.0;
  const double scale0 = 1.0 + norm_b + norm_c;
  int small_steps = 0;

  for (int iter = 0;; ++iter) {
    evaluate(res, rp, Rd, rf, pobj, dobj);
    const double mu = total_dim_ > 0 ? inner(X, S) / total_dim_ : 0.0;
    if (set_.verbose)
      std::fprintf(stderr, "%3d  pobj % .8e  dobj % .8e  pinf %.2e  dinf %.2e  gap %.2e  mu %.2e\n", iter, pobj, dobj,
                   res.primal_feas, res.dual_feas, res.relative_gap, mu);
    if (res.primal_feas <= set_.tol && res.dual_feas <= set_.tol && res.relative_gap <= set_.tol)
      return finish(Status::optimal, iter, res, pobj, dobj);
    remember(iter, res, pobj, dobj);
    if (acceptable(best.r) && iter - best.iter >= 5) return finish(Status::max_iterations, iter, res, pobj, dobj);
    if (iter >= set_.max_iter)
      return finish(acceptable(res) ? Status::optimal : Status::max_iterations, iter, res, pobj, dobj);

    // Divergence heuristics (never certified).
    const double ynorm = y.lpNorm<Eigen::Infinity>();
    double xnorm = 0.0;
    for (const auto& xb : X) xnorm = std::max(xnorm, xb.lpNorm<Eigen::Infinity>());
    if (nf_ > 0) xnorm = std::max(xnorm, x.lpNorm<Eigen::Infinity>());
    if (ynorm > 1e10 * scale0 && res.primal_feas > 1e-6)
      return finish(Status::presumed_infeasible, iter, res, pobj, dobj);
    if (xnorm > 1e10 * scale0 && res.dual_feas > 1e-6)
      return finish(Status::presumed_unbounded, iter, res, pobj, dobj);

    // Nesterov-Todd scaling: W = G G', G' S G = G^{-1} X G^{-T} = V diagonal.
    std::vector<Eigen::MatrixXd> G(nbs), Ginv(nbs), W(nbs);
    std::vector<Eigen::VectorXd> v(nbs);
    std::vector<Eigen::LLT<Eigen::MatrixXd>> cholX(nbs), cholS(nbs);
    bool ok = true;
    for (std::size_t k = 0; k < nbs && ok; ++k) {
      cholX[k].compute(X[k]);
      cholS[k].compute(S[k]);
      if (cholX[k].info() != Eigen::Success || cholS[k].info() != Eigen::Success) {
        ok = false;
        break;
      }
      Eigen::MatrixXd L = cholX[k].matrixL();
      Eigen::MatrixXd T = L.transpose() * S[k] * L;
      T = 0.5 * (T + T.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
      Eigen::VectorXd lam = es.eigenvalues().cwiseMax(1e-300);
      Eigen::VectorXd q4 = lam.array().pow(-0.25);
      G[k] = L * es.eigenvectors() * q4.asDiagonal();
      Ginv[k] = lam.array().pow(0.25).matrix().asDiagonal() * es.eigenvectors().transpose() *
                L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(size(static_cast<int>(k)), size(static_cast<int>(k))));
      W[k] = G[k] * G[k].transpose();
      v[k] = lam.array().sqrt();
    }
    if (!ok || !factor_schur(W))
      return finish(acceptable(res) ? Status::optimal : Status::numerical_failure, iter, res, pobj, dobj);

    auto direction = [&](const std::vector<Eigen::MatrixXd>& Rc, std::vector<Eigen::MatrixXd>& dX,
                         std::vector<Eigen::MatrixXd>& dS, Eigen::VectorXd& dy, Eigen::VectorXd& dx) {
      std::vector<Eigen::MatrixXd> T(nbs);
      for (std::size_t k = 0; k < nbs; ++k) T[k] = Rc[k] - W[k] * Rd[k] * W[k];
      Eigen::VectorXd h = rp - apply_A(T);
      Eigen::VectorXd rfree = nf_ > 0 ? rf : Eigen::VectorXd();
      solve_system(h, rfree, dy, dx);
      auto Atdy = apply_At(dy);
      dS.resize(nbs);
      dX.resize(nbs);
      for (std::size_t k = 0; k < nbs; ++k) {
        dS[k] = Rd[k] - Atdy[k];
        dX[k] = Rc[k] - W[k] * dS[k] * W[k];
        dX[k] = 0.5 * (dX[k] + dX[k].transpose()).eval();
        dS[k] = 0.5 * (dS[k] + dS[k].transpose()).eval();
      }
      // Recovering dX from dy cancels badly near the boundary; refine the
      // primal equation A(dX) + B dx = rp on the full Newton system.
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(nf_);
      double prev = std::numeric_limits<double>::infinity();
      for (int pass = 0; pass < 2; ++pass) {
        Eigen::VectorXd e = rp - apply_A(dX);
        if (nf_ > 0) e -= B_ * dx;
        const double en = e.norm();
        if (en <= 1e-15 * (1.0 + rp.norm()) || en >= 0.5 * prev) break;
        prev = en;
        Eigen::VectorXd cy, cx;
        solve_system(e, zero, cy, cx);
        dy += cy;
        if (nf_ > 0) dx += cx;
        const auto Atc = apply_At(cy);
        for (std::size_t k = 0; k < nbs; ++k) {
          dS[k] -= Atc[k];
          Eigen::MatrixXd c = W[k] * Atc[k] * W[k];
          dX[k] += 0.5 * (c + c.transpose());
        }
      }
    };

    auto steps = [&](const std::vector<Eigen::MatrixXd>& dX, const std::vector<Eigen::MatrixXd>& dS, double& ap,
                     double& ad) {
      ap = std::numeric_limits<double>::infinity();
      ad = ap;
      for (std::size_t k = 0; k < nbs; ++k) {
        ap = std::min(ap, max_step(cholX[k], dX[k]));
        ad = std::min(ad, max_step(cholS[k], dS[k]));
      }
    };

    // Predictor.
    std::vector<Eigen::MatrixXd> Rc(nbs), dX, dS;
    for (std::size_t k = 0; k < nbs; ++k) Rc[k] = -X[k];
    Eigen::VectorXd dy, dx;
    direction(Rc, dX, dS, dy, dx);
    double ap, ad;
    steps(dX, dS, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nbs; ++k)
      mu_aff += ((X[k] + ap * dX[k]).array() * (S[k] + ad * dS[k]).array()).sum();
    mu_aff /= std::max(1, total_dim_);
    double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector: V D + D V = 2 sigma mu I - 2 V^2 - (dXs dSs + dSs dXs).
    for (std::size_t k = 0; k < nbs; ++k) {
      const Eigen::MatrixXd dXs = Ginv[k] * dX[k] * Ginv[k].transpose();
      const Eigen::MatrixXd dSs = G[k].transpose() * dS[k] * G[k];
      Eigen::MatrixXd R = -(dXs * dSs + dSs * dXs);
      const auto n = R.rows();
      for (Eigen::Index i = 0; i < n; ++i) R(i, i) += 2.0 * sigma * mu - 2.0 * v[k](i) * v[k](i);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) R(i, j) /= (v[k](i) + v[k](j));
      Rc[k] = G[k] * R * G[k].transpose();
      Rc[k] = 0.5 * (Rc[k] + Rc[k].transpose()).eval();
    }
    direction(Rc, dX, dS, dy, dx);
    steps(dX, dS, ap, ad);
    ap = std::min(1.0, 0.98 * ap);
    ad = std::min(1.0, 0.98 * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad) || !dy.allFinite())
      return finish(acceptable(res) ? Status::optimal : Status::numerical_failure, iter, res, pobj, dobj);

    for (std::size_t k = 0; k < nbs; ++k) {
      X[k] += ap * dX[k];
      S[k] += ad * dS[k];
    }
    if (nf_ > 0) x += ap * dx;
    y += ad * dy;

    small_steps = (ap < 1e-6 && ad < 1e-6) ? small_steps + 1 : 0;
    if (small_steps >= 3) {
      evaluate(res, rp, Rd, rf, pobj, dobj);
      return finish(acceptable(res) ? Status::optimal : Status::numerical_failure, iter + 1, res, pobj, dobj);
    }
  }
}

}  // namespace detail

inline Solution solve(const Problem& problem, const Settings& settings = {}) {
  detail::Kernel kernel(problem, settings);
  return kernel.run();
}

/// Sparse triplet dump for cross-checking against external solvers.
///
///   line 1:  m nblocks nfree
///   line 2:  block sizes
///   line 3:  right-hand sides b_1 .. b_m
///   then one line per nonzero: "k blk row col value" with 1-based indices;
///   k = 0 is the objective, blk = 0 addresses the free variables (row = col =
///   free index), and off-diagonal block entries are written once (row < col).
inline void write_triplets(std::ostream& os, const Problem& p) {
  os << std::setprecision(17);
  os << p.constraints.size() << ' ' << p.block_sizes.size() << ' ' << p.free_count << '\n';
  for (std::size_t k = 0; k < p.block_sizes.size(); ++k) os << (k ? " " : "") << p.block_sizes[k];
  os << '\n';
  for (std::size_t i = 0; i < p.constraints.size(); ++i) os << (i ? " " : "") << p.constraints[i].rhs;
  os << '\n';
  auto entry = [&](std::size_t k, const BlockEntry& e) {
    os << k << ' ' << e.block + 1 << ' ' << std::min(e.row, e.col) + 1 << ' ' << std::max(e.row, e.col) + 1 << ' '
       << e.value << '\n';
  };
  for (const auto& e : p.objective_entries) entry(0, e);
  for (std::size_t k = 0; k < p.objective_free.size(); ++k)
    if (p.objective_free[k] != 0.0) os << "0 0 " << k + 1 << ' ' << k + 1 << ' ' << p.objective_free[k] << '\n';
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    for (const auto& e : p.constraints[i].entries) entry(i + 1, e);
    for (const auto& [f, v] : p.constraints[i].free_terms)
      os << i + 1 << " 0 " << f + 1 << ' ' << f + 1 << ' ' << v << '\n';
  }
}

inline Problem read_triplets(std::istream& is) {
  Problem p;
  std::size_t m = 0, nb = 0;
  if (!(is >> m >> nb >> p.free_count)) throw std::runtime_error("triplets: bad header");
  p.block_sizes.resize(nb);
  for (auto& s : p.block_sizes) is >> s;
  p.constraints.resize(m);
  for (auto& c : p.constraints) is >> c.rhs;
  p.objective_free.assign(static_cast<std::size_t>(p.free_count), 0.0);
  std::size_t k = 0;
  int blk = 0, row = 0, col = 0;
  double v = 0.0;
  while (is >> k >> blk >> row >> col >> v) {
    if (k > m) throw std::runtime_error("triplets: constraint index out of range");
    if (blk == 0) {
      if (k == 0)
        p.objective_free.at(static_cast<std::size_t>(row - 1)) += v;
      else
        p.constraints[k - 1].free_terms.emplace_back(row - 1, v);
      continue;
    }
    BlockEntry e{blk - 1, row - 1, col - 1, v};
    if (k == 0)
      p.objective_entries.push_back(e);
    else
      p.constraints[k - 1].entries.push_back(e);
  }
  if (!is.eof()) throw std::runtime_error("triplets: malformed line");
  p.validate();
  return p;
}

}  // namespace sosmm::sdp
