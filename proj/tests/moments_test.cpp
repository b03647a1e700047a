#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "sosmm/moments.hpp"
#include "sosmm/oracle.hpp"
#include "sosmm/rng.hpp"

namespace sosmm {
namespace {

double min_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

TEST(BoxMoment, ClosedFormExamples) {
  const Box b1 = Box::cube(1, -1.0, 1.0);
  EXPECT_NEAR(box_moment(b1, ExponentVector{2}), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(box_moment(b1, ExponentVector{3}), 0.0, 1e-15);
  const Box b2({0.0, 0.0}, {1.0, 2.0});
  EXPECT_NEAR(box_moment(b2, ExponentVector{1, 2}), 2.0 / 3.0, 1e-15);
  // Midpoint oracle at 10^4 cells per axis.
  EXPECT_NEAR(oracle::quadrature_moment(b2, ExponentVector{1, 2}, 10000), box_moment(b2, ExponentVector{1, 2}), 1e-6);
  EXPECT_THROW(box_moment(b2, ExponentVector{1}), std::invalid_argument);
}

TEST(BoxMoment, AgreesWithQuadratureUpToDegreeSix) {
  CounterRng rng(99);
  for (std::size_t dim = 1; dim <= 3; ++dim) {
    for (int trial = 0; trial < 2; ++trial) {
      std::vector<double> lo, hi;
      for (std::size_t k = 0; k < dim; ++k) {
        const double a = rng.uniform(-2.0, 1.0);
        lo.push_back(a);
        hi.push_back(a + rng.uniform(0.5, 2.0));
      }
      const Box box(lo, hi);
      std::vector<std::string> names;
      for (std::size_t k = 0; k < dim; ++k) names.push_back("t" + std::to_string(k));
      for (const auto& beta : monomial_basis(*VariableSpace::make(names), 6)) {
        const double q = oracle::quadrature_moment(box, beta, 10000);
        EXPECT_NEAR(box_moment(box, beta), q, 1e-6) << "dim " << dim;
      }
    }
  }
}

TEST(MomentVector, Examples) {
  const auto z = moment_vector(Box::cube(1, -1.0, 1.0), 2);
  EXPECT_DOUBLE_EQ(z.at(ExponentVector{0}), 1.0);
  EXPECT_DOUBLE_EQ(z.at(ExponentVector{1}), 0.0);
  EXPECT_NEAR(z.at(ExponentVector{2}), 1.0 / 3.0, 1e-15);
  const auto z2 = moment_vector(Box::cube(1, 0.0, 1.0), 1);
  EXPECT_DOUBLE_EQ(z2.at(ExponentVector{1}), 0.5);
  const auto z3 = moment_vector(Box::cube(2, -2.0, 2.0), 2);
  EXPECT_NEAR(z3.at(ExponentVector{2, 0}), 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(z3.at(ExponentVector{0, 2}), 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(z3.at(ExponentVector{1, 1}), 0.0, 1e-14);
  EXPECT_NEAR(z3.at(ExponentVector{1, 0}), 0.0, 1e-14);
  EXPECT_EQ(z3.size(), 6u);
  EXPECT_THROW(z3.at(ExponentVector{3, 0}), std::out_of_range);
}

TEST(Riesz, Examples) {
  const auto z = moment_vector(Box::cube(1, -1.0, 1.0), 4);
  const auto& sp = z.space();
  const auto t = Polynomial::variable(sp, 0);
  EXPECT_NEAR(riesz(z, t * t), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(riesz(z, Polynomial::constant(sp, 1.0)), 1.0);
  EXPECT_NEAR(riesz(z, (1.0 + t).pow(2)), 4.0 / 3.0, 1e-15);
  EXPECT_THROW(riesz(z, t.pow(5)), std::invalid_argument);
}

TEST(MomentMatrix, HankelExamples) {
  const auto z = moment_vector(Box::cube(1, -1.0, 1.0), 4);
  Eigen::MatrixXd m1(2, 2);
  m1 << 1.0, 0.0, 0.0, 1.0 / 3.0;
  EXPECT_LE((moment_matrix(z, 1) - m1).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::MatrixXd m2(3, 3);
  m2 << 1.0, 0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, 0.2;
  const auto M2 = moment_matrix(z, 2);
  EXPECT_LE((M2 - m2).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(M2, M2.transpose());
  EXPECT_THROW(moment_matrix(z, 3), std::invalid_argument);
}

TEST(LocalizingMatrix, Examples) {
  const auto z = moment_vector(Box::cube(1, -1.0, 1.0), 4);
  const auto& sp = z.space();
  const auto t = Polynomial::variable(sp, 0);
  EXPECT_EQ(localizing_matrix(z, Polynomial::constant(sp, 1.0), 2), moment_matrix(z, 2));
  const auto L = localizing_matrix(z, 1.0 - t * t, 1);
  EXPECT_NEAR(L(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(L(1, 1), 2.0 / 15.0, 1e-15);
  EXPECT_NEAR(L(0, 1), 0.0, 1e-15);
  EXPECT_THROW(localizing_matrix(z, 1.0 - t * t, 2), std::invalid_argument);
}

TEST(LocalizingMatrix, AtomicMeasureIsPsd) {
  const auto sp = VariableSpace::make({"t"});
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    MomentSequence z(sp, {0}, 6);
    std::vector<double> atoms, w;
    double wsum = 0.0;
    for (int k = 0; k < 5; ++k) {
      atoms.push_back(-1.0 + 0.5 * static_cast<double>(rng.next_u64() % 5));  // grid atoms in [-1, 1]
      w.push_back(rng.uniform(0.1, 1.0));
      wsum += w.back();
    }
    for (int d = 0; d <= 6; ++d) {
      double m = 0.0;
      for (std::size_t k = 0; k < atoms.size(); ++k) m += w[k] / wsum * std::pow(atoms[k], d);
      z.set(ExponentVector{d}, m);
    }
    const auto t = Polynomial::variable(sp, 0);
    EXPECT_GE(min_eig(localizing_matrix(z, 1.0 - t * t, 2)), -1e-10);
    EXPECT_GE(min_eig(moment_matrix(z, 3)), -1e-10);
  }
}

TEST(MomentMatrix, BoxMomentsArePsdAndBilinear) {
  CounterRng rng(17);
  for (std::size_t dim = 1; dim <= 3; ++dim) {
    Box box = Box::cube(dim, -0.5, 1.5);
    const auto z = moment_vector(box, 6);
    for (int tau = 1; tau <= 3; ++tau) EXPECT_GE(min_eig(moment_matrix(z, tau)), -1e-10);
    // riesz(p q) = coef(p)' M coef(q)
    const auto basis = z.basis(2);
    Eigen::VectorXd cp(static_cast<Eigen::Index>(basis.size())), cq(cp.size());
    Polynomial p(z.space()), q(z.space());
    for (std::size_t i = 0; i < basis.size(); ++i) {
      cp(static_cast<Eigen::Index>(i)) = rng.uniform(-1.0, 1.0);
      cq(static_cast<Eigen::Index>(i)) = rng.uniform(-1.0, 1.0);
      p.add_term(basis[i], cp(static_cast<Eigen::Index>(i)));
      q.add_term(basis[i], cq(static_cast<Eigen::Index>(i)));
    }
    EXPECT_NEAR(riesz(z, p * q), cp.dot(moment_matrix(z, 2) * cq), 1e-12);
  }
}

}  // namespace
}  // namespace sosmm
