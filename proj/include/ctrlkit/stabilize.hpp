#pragma once

#include <string>
#include <functional>
#include <optional>
#include <vector>

#include "ctrlkit/numcore.hpp"

namespace ctrl {

// Polynomials are coefficient vectors a0 ... an with a0 leading.

struct RouthReport {
  std::vector<std::vector<double>> table;
  bool complete = false;
  Vector first_column;
  int sign_changes = 0;
  bool hurwitz = false;
};

struct HurwitzReport {
  Vector minors;
  bool hurwitz = false;
};

struct PolePlacement {
  Matrix K;                          // u = K x
  std::vector<Complex> closed_loop;  // spectrum of A + BK (extended precision)
  Vector closed_loop_poly;           // monic, a0 first
  double coeff_residual = 0.0;       // max |chi_{A+BK} - target|
  Vector y;                          // multi-input reduction direction (empty unless method is reduction)
  std::string method;                // single-input, reduction or eigenvector
};

using FeedbackLaw = std::function<Vector(const Vector&)>;
using ScalarField = std::function<double(const Vector&)>;
using Field = std::function<Vector(const Vector&)>;

struct ClosedLoopRun {
  Trajectory traj;
  std::vector<Vector> u;
  std::vector<double> V;
};

RouthReport routh(const Vector& p);
HurwitzReport hurwitz(const Vector& p);

PolePlacement pole_place(const LtiSystem& sys, const Vector& target, double tol = 1e-6);

// Solves A^T P + P A = -I for Hurwitz A.
Matrix lyapunov_solve(const Matrix& A);

// (df/dx, df/du) at (x, u), returned as the A and B of an LtiSystem
using DynamicsJacobian = std::function<LtiSystem(const Vector&, const Vector&)>;

LtiSystem linearize(const Dynamics& f, const Vector& xbar, const Vector& ubar, double eq_tol = 1e-8);
// Exact linearization from an analytic Jacobian; the equilibrium check is the same.
LtiSystem linearize(const Dynamics& f, const DynamicsJacobian& jac, const Vector& xbar, const Vector& ubar,
                    double eq_tol = 1e-8);

// u_i = -<grad V, g_i>, clamped to [-s, s] when a saturation is given.
FeedbackLaw jurdjevic_quinn_feedback(std::vector<Field> g, Field grad_V, std::optional<double> saturation = {});

// x' = drift(x) + sum u_i g_i(x)
Dynamics control_affine(Field drift, std::vector<Field> g);

ClosedLoopRun simulate_closed_loop(const Dynamics& f, const FeedbackLaw& law, const Vector& x0, double T, int steps,
                                   const ScalarField& V = {});

}  // namespace ctrl
