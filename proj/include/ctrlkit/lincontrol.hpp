#pragma once

#include <functional>
#include <vector>

#include "ctrlkit/numcore.hpp"

namespace ctrl {

struct KalmanReport {
  Matrix kalman_matrix;
  int rank = 0;
  bool controllable = false;
  double tolerance_used = kRankTol;
};

struct HautusEntry {
  Complex lambda;
  int rank = 0;
};

struct HautusReport {
  bool controllable = false;
  std::vector<HautusEntry> per_eigenvalue;
};

// P A P^-1 = [[A1, A3], [0, A2]], P B = [[B1], [0]].
struct Decomposition {
  Matrix P;
  Matrix A1, A2, A3, B1;
  int r = 0;
};

struct BrunovskiForm {
  Matrix P;          // P A P^-1 = companion, P B = e_n
  Matrix companion;
  Vector char_poly;  // a_1 ... a_n of s^n + a_1 s^{n-1} + ... + a_n
};

struct GramianReport {
  double T = 0.0;
  Matrix G;
  Vector eigenvalues;  // ascending
  double C_T = 0.0;
  bool invertible = false;
};

struct LtvKalmanReport {
  int rank = 0;
  bool satisfied = false;
  Matrix columns;
};

struct VectorField {
  std::function<Vector(const Vector&)> value;
  std::function<Matrix(const Vector&)> jacobian;
};

struct VectorFieldSet {
  int n = 0;
  std::vector<VectorField> fields;
};

struct LarcReport {
  int rank = 0;
  bool satisfied = false;
  int brackets = 0;
};

struct HumFinite {
  std::vector<double> times;
  std::vector<Vector> u;  // u(t_k)
  Vector psi;
  double cost = 0.0;
  Vector x_star;
  Vector endpoint;        // re-simulated x(T)
  double endpoint_error = 0.0;
  GramianReport gramian;
};

KalmanReport kalman_test(const LtiSystem& sys, double tol = kRankTol);
Matrix kalman_matrix(const Matrix& A, const Matrix& B);
HautusReport hautus_test(const LtiSystem& sys, double tol = kRankTol);
Decomposition controllable_decomposition(const LtiSystem& sys, double tol = kRankTol);
BrunovskiForm brunovski_form(const LtiSystem& sys, double tol = kRankTol);

// steps = number of Simpson intervals (even); 2000 gives 2001 nodes.
GramianReport gramian(const LtvSystem& sys, double T, int steps = 2000, double tol = 1e-12);
GramianReport gramian(const LtiSystem& sys, double T, int steps = 2000, double tol = 1e-12);

// Without sys.dB, derivatives come from nested central differences unless allow_fd is false.
LtvKalmanReport ltv_kalman_test(const LtvSystem& sys, double t, int depth, double tol = kRankTol,
                                bool allow_fd = true);

Vector lie_bracket(const VectorField& X, const VectorField& Y, const Vector& x);
// Field whose value is [X, Y] and whose jacobian is a central difference of that value.
VectorField bracket_field(const VectorField& X, const VectorField& Y, double fd_step = 1e-5);
LarcReport larc_rank(const VectorFieldSet& fs, const Vector& x, int depth = 3, double tol = kRankTol);

HumFinite hum_control_finite(const LtvSystem& sys, double T, const Vector& x0, const Vector& x1,
                             int steps = 2000, double tol = 1e-12);
HumFinite hum_control_finite(const LtiSystem& sys, double T, const Vector& x0, const Vector& x1,
                             int steps = 2000, double tol = 1e-12);

// Final state of the system driven by samples u on a uniform grid with an odd node count
// (odd nodes act as RK4 midpoints).
Vector simulate_sampled(const LtvSystem& sys, const Vector& x0, double T, const std::vector<Vector>& u);

}  // namespace ctrl
