#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctrlkit/errors.hpp"

namespace ctrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

inline constexpr double kRankTol = 1e-9;

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;

  std::size_t size() const { return times.size(); }
  const Vector& back() const { return states.back(); }
  // linear interpolation, clamped to the grid ends
  Vector at(double t) const;
  void check() const;
};

using Rhs = std::function<Vector(double, const Vector&)>;
// autonomous controlled dynamics f(x, u)
using Dynamics = std::function<Vector(const Vector&, const Vector&)>;

struct OdeProblem {
  Rhs rhs;
  double t0 = 0.0;
  Vector x0;
  double t1 = 1.0;
  int steps = 100;
};

struct LtiSystem {
  Matrix A;
  Matrix B;
  std::optional<Vector> r;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  void check() const;
};

// Evaluation contracts must be safe to call concurrently.
struct LtvSystem {
  int n = 0;
  int m = 0;
  std::function<Matrix(double)> A;
  std::function<Matrix(double)> B;
  std::function<Vector(double)> r;   // may be empty
  std::function<Matrix(double)> dB;  // may be empty
  std::optional<Matrix> constant_A;  // set when A does not depend on t

  static LtvSystem from_lti(const LtiSystem& s);
};

Matrix expm(const Matrix& M);

Vector rk4_step(const Rhs& f, double t, const Vector& x, double h);

// Uniform-grid RK4; throws BlowupError on the first non-finite value.
Trajectory integrate(const OdeProblem& p);

// Endpoint only, same scheme; allows t1 < t0.
Vector integrate_endpoint(const Rhs& f, double t0, const Vector& x0, double t1, int steps);

// R(t, s) with dR/dt = A(t) R, R(s, s) = I.
Matrix transition_matrix(const LtvSystem& sys, double t, double s, int steps = 2000);

int numerical_rank(const Matrix& M, double rel_tol = kRankTol);
int numerical_rank(const CMatrix& M, double rel_tol = kRankTol);

// Composite Simpson; odd sample count >= 3.
double quadrature(std::span<const double> samples, double step);
std::vector<double> simpson_weights(int count, double step);

Matrix symmetrize(const Matrix& M);
bool all_finite(const Matrix& M);

// Orthonormal basis of the null space of M (columns).
Matrix null_space(const Matrix& M, double rel_tol = kRankTol);

// Eigenvalues computed in 113-bit binary floating point from the double matrix.
// Used where clustered or defective spectra need to be resolved.
std::vector<Complex> eigenvalues_extended(const Matrix& M);
// Spectrum of A + B K with the product formed in extended precision.
std::vector<Complex> eigenvalues_extended(const Matrix& A, const Matrix& B, const Matrix& K);

// Monic characteristic polynomial (1, c1, ..., cn), expanded in extended precision.
Vector characteristic_polynomial(const Matrix& M);
Vector characteristic_polynomial(const Matrix& A, const Matrix& B, const Matrix& K);

// Real monic polynomial from a root list closed under conjugation.
Vector poly_from_roots(const std::vector<Complex>& roots);

std::vector<Complex> eigenvalues(const Matrix& M);
std::vector<Complex> poly_roots(const Vector& coeffs);

// Largest distance in an optimal pairing of two equal-size multisets (small sizes).
double multiset_distance(std::vector<Complex> a, std::vector<Complex> b);

}  // namespace ctrl
