#include "ctrlkit/models.hpp"

#include <cmath>

namespace ctrl::models {

LtiSystem rlc(double L, double C, double R) {
  LtiSystem s;
  s.A.resize(2, 2);
  s.A << 0, 1, -1.0 / (L * C), -R / L;
  s.B.resize(2, 1);
  s.B << 0, 1;
  return s;
}

LtiSystem coupled_springs(double k1, double k2) {
  LtiSystem s;
  s.A.resize(4, 4);
  s.A << 0, 1, 0, 0,
         -k1 - k2, 0, k2, 0,
         0, 0, 0, 1,
         k2, 0, -k2, 0;
  s.B.resize(4, 1);
  s.B << 0, 0, 0, 1;
  return s;
}

LtiSystem alpha_system(double a) {
  LtiSystem s;
  s.A.resize(2, 2);
  s.A << 2, a - 3, 0, 2;
  s.B.resize(2, 2);
  s.B << 1, 1, a * (a - 1), 0;
  return s;
}

LtiSystem double_integrator() {
  LtiSystem s;
  s.A.resize(2, 2);
  s.A << 0, 1, 0, 0;
  s.B.resize(2, 1);
  s.B << 0, 1;
  return s;
}

Dynamics pendulum(const PendulumParams& p) {
  return [p](const Vector& x, const Vector& u) {
    double th = x(2), w = x(3), s = std::sin(th), c = std::cos(th);
    double den = p.M + p.m * s * s;
    Vector d(4);
    d(0) = x(1);
    d(1) = (p.m * p.l * w * w * s - p.m * p.g * c * s + u(0)) / den;
    d(2) = w;
    d(3) = (-p.m * p.l * w * w * s * c + (p.M + p.m) * p.g * s - u(0) * c) / (p.l * den);
    return d;
  };
}

DynamicsJacobian pendulum_jacobian(const PendulumParams& p) {
  return [p](const Vector& x, const Vector& u) {
    double th = x(2), w = x(3), s = std::sin(th), c = std::cos(th);
    double den = p.M + p.m * s * s, dden = 2 * p.m * s * c;
    double n1 = p.m * p.l * w * w * s - p.m * p.g * c * s + u(0);
    double dn1 = p.m * p.l * w * w * c - p.m * p.g * (c * c - s * s);
    double n3 = -p.m * p.l * w * w * s * c + (p.M + p.m) * p.g * s - u(0) * c;
    double dn3 = -p.m * p.l * w * w * (c * c - s * s) + (p.M + p.m) * p.g * c + u(0) * s;
    LtiSystem lin;
    lin.A = Matrix::Zero(4, 4);
    lin.A(0, 1) = 1;
    lin.A(1, 2) = (dn1 * den - n1 * dden) / (den * den);
    lin.A(1, 3) = 2 * p.m * p.l * w * s / den;
    lin.A(2, 3) = 1;
    lin.A(3, 2) = (dn3 * den - n3 * dden) / (p.l * den * den);
    lin.A(3, 3) = -2 * p.m * w * s * c / den;
    lin.B = Matrix::Zero(4, 1);
    lin.B(1, 0) = 1 / den;
    lin.B(3, 0) = -c / (p.l * den);
    return lin;
  };
}

LtiSystem pendulum_linear(const PendulumParams& p) {
  LtiSystem s;
  s.A.resize(4, 4);
  s.A << 0, 1, 0, 0,
         0, 0, -p.m * p.g / p.M, 0,
         0, 0, 0, 1,
         0, 0, (p.M + p.m) * p.g / (p.l * p.M), 0;
  s.B.resize(4, 1);
  s.B << 0, 1.0 / p.M, 0, -1.0 / (p.l * p.M);
  return s;
}

Dynamics maxwell_bloch() {
  return [](const Vector& x, const Vector& u) {
    Vector d(3);
    d << x(1) + u(0), x(0) * x(2) + u(1), -x(0) * x(1);
    return d;
  };
}

DynamicsJacobian maxwell_bloch_jacobian() {
  return [](const Vector& x, const Vector&) {
    LtiSystem lin;
    lin.A.resize(3, 3);
    lin.A << 0, 1, 0, x(2), 0, x(0), -x(1), -x(0), 0;
    lin.B = Matrix::Identity(3, 2);
    return lin;
  };
}

LtvSystem dubins_linearized(double T) {
  LtvSystem s;
  s.n = 3;
  s.m = 1;
  const double w = 2 * M_PI / T;
  s.A = [w](double t) {
    Matrix A = Matrix::Zero(3, 3);
    A(0, 2) = -std::sin(w * t);
    A(1, 2) = std::cos(w * t);
    return A;
  };
  s.B = [](double) {
    Matrix B(3, 1);
    B << 0, 0, 1;
    return B;
  };
  s.dB = [](double) { return Matrix(Matrix::Zero(3, 1)); };
  return s;
}

LtvSystem rotating_frame() {
  LtvSystem s;
  s.n = 2;
  s.m = 1;
  Matrix A(2, 2);
  A << 0, -1, 1, 0;
  s.A = [A](double) { return A; };
  s.constant_A = A;
  s.B = [](double t) {
    Matrix B(2, 1);
    B << std::cos(t), std::sin(t);
    return B;
  };
  return s;
}

LtvSystem diag_example() {
  LtvSystem s;
  s.n = 3;
  s.m = 1;
  s.A = [](double t) {
    Matrix A = Matrix::Zero(3, 3);
    A(0, 0) = t;
    A(0, 1) = 1;
    A(1, 1) = t * t * t;
    A(2, 2) = t * t;
    return A;
  };
  s.B = [](double) {
    Matrix B(3, 1);
    B << 0, 1, 1;
    return B;
  };
  return s;
}

VectorFieldSet heisenberg() {
  VectorFieldSet fs;
  fs.n = 3;
  VectorField f1, f2;
  f1.value = [](const Vector& x) {
    Vector v(3);
    v << 1, 0, x(1);
    return v;
  };
  f1.jacobian = [](const Vector&) {
    Matrix J = Matrix::Zero(3, 3);
    J(2, 1) = 1;
    return J;
  };
  f2.value = [](const Vector& x) {
    Vector v(3);
    v << 0, 1, -x(0);
    return v;
  };
  f2.jacobian = [](const Vector&) {
    Matrix J = Matrix::Zero(3, 3);
    J(2, 0) = -1;
    return J;
  };
  fs.fields = {f1, f2};
  return fs;
}

}  // namespace ctrl::models

namespace ctrl::models {

namespace {
Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}
Matrix zeros(int r, int c) { return Matrix::Zero(r, c); }
}  // namespace

OcExample zermelo(double v, double ell) {
  AffineStructure a;
  a.drift = [](double, const Vector& x) { return v2(1 + x(1) * x(1), 0); };
  a.drift_x = [](double, const Vector& x) {
    Matrix J = zeros(2, 2);
    J(0, 1) = 2 * x(1);
    return J;
  };
  a.G = [v](double, const Vector&) { return Matrix(v * Matrix::Identity(2, 2)); };
  a.Gu_x = [](double, const Vector&, const Vector&) { return zeros(2, 2); };
  OcExample ex;
  ex.problem = affine_problem(a, 2, 2);
  auto& p = ex.problem;
  p.maximizer = ball_maximizer(a, 1.0);
  p.g = [](double, const Vector& x) { return x(0); };
  p.g_x = [](double, const Vector&) { return v2(1, 0); };
  p.g_t = [](double, const Vector&) { return 0.0; };
  p.x0 = Vector::Zero(2);
  p.terminal = TerminalKind::Manifold;
  p.F = [ell](const Vector& x) { return Vector::Constant(1, x(1) - ell); };
  p.F_x = [](const Vector&) {
    Matrix J(1, 2);
    J << 0, 1;
    return J;
  };
  p.free_time = true;
  p.T = 2.0;
  ex.guess = {v2(-1.0, 1.5), 2.0};
  return ex;
}

OcExample brachistochrone(double x1, double g) {
  AffineStructure a;
  a.drift = [](double, const Vector&) { return Vector(Vector::Zero(2)); };
  a.drift_x = [](double, const Vector&) { return zeros(2, 2); };
  a.G = [g](double, const Vector& x) {
    Matrix G = zeros(2, 2);
    G(0, 0) = x(1);
    G(1, 1) = g;
    return G;
  };
  a.Gu_x = [](double, const Vector&, const Vector& u) {
    Matrix J = zeros(2, 2);
    J(0, 1) = u(0);
    return J;
  };
  a.ell0 = [](double, const Vector&) { return 1.0; };
  a.ell0_x = [](double, const Vector&) { return Vector(Vector::Zero(2)); };
  OcExample ex;
  ex.problem = affine_problem(a, 2, 2);
  auto& p = ex.problem;
  p.maximizer = ball_maximizer(a, 1.0);
  p.x0 = Vector::Zero(2);
  p.terminal = TerminalKind::Fixed;
  p.x1 = v2(x1, 0);
  p.free_time = true;
  p.T = 1.0;
  ex.guess = {v2(0.5, 0.1), 0.8};
  return ex;
}

OcExample double_integrator_min_time(const Vector& x0) {
  AffineStructure a;
  a.drift = [](double, const Vector& x) { return v2(x(1), 0); };
  a.drift_x = [](double, const Vector&) {
    Matrix J = zeros(2, 2);
    J(0, 1) = 1;
    return J;
  };
  a.G = [](double, const Vector&) {
    Matrix G(2, 1);
    G << 0, 1;
    return G;
  };
  a.Gu_x = [](double, const Vector&, const Vector&) { return zeros(2, 2); };
  a.ell0 = [](double, const Vector&) { return 1.0; };
  a.ell0_x = [](double, const Vector&) { return Vector(Vector::Zero(2)); };
  OcExample ex;
  ex.problem = affine_problem(a, 2, 1);
  auto& p = ex.problem;
  p.maximizer = box_maximizer(a, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  p.x0 = x0;
  p.terminal = TerminalKind::Fixed;
  p.x1 = Vector::Zero(2);
  p.free_time = true;
  p.T = 2.0;
  ex.guess = {v2(-0.8, -1.2), 2.3};
  return ex;
}

OcExample predator_prey(const PredatorPreyParams& q) {
  AffineStructure a;
  a.drift = [q](double, const Vector& x) { return v2(x(0) * (q.a - q.b * x(1)), -q.c * x(1)); };
  a.drift_x = [q](double, const Vector& x) {
    Matrix J(2, 2);
    J << q.a - q.b * x(1), -q.b * x(0), 0, -q.c;
    return J;
  };
  a.G = [](double, const Vector&) {
    Matrix G(2, 1);
    G << 0, 1;
    return G;
  };
  a.Gu_x = [](double, const Vector&, const Vector&) { return zeros(2, 2); };
  a.c = Vector::Ones(1);
  OcExample ex;
  ex.problem = affine_problem(a, 2, 1);
  auto& p = ex.problem;
  p.maximizer = box_maximizer(a, Vector::Zero(1), Vector::Constant(1, q.M));
  p.g = [](double, const Vector& x) { return x(0); };
  p.g_x = [](double, const Vector&) { return v2(1, 0); };
  p.x0 = v2(q.x0, q.y0);
  p.terminal = TerminalKind::Free;
  p.T = q.T;
  ex.guess = {v2(-0.5, 1.0), {}};
  return ex;
}

OcExample scalar_lq(double T, double x0) {
  AffineStructure a;
  a.drift = [](double, const Vector&) { return Vector(Vector::Zero(1)); };
  a.drift_x = [](double, const Vector&) { return zeros(1, 1); };
  a.G = [](double, const Vector&) { return Matrix(Matrix::Ones(1, 1)); };
  a.Gu_x = [](double, const Vector&, const Vector&) { return zeros(1, 1); };
  a.ell0 = [](double, const Vector& x) { return x(0) * x(0); };
  a.ell0_x = [](double, const Vector& x) { return Vector(Vector::Constant(1, 2 * x(0))); };
  a.U = Matrix::Constant(1, 1, 2.0);
  OcExample ex;
  ex.problem = affine_problem(a, 1, 1);
  auto& p = ex.problem;
  p.maximizer = unconstrained_maximizer(a);
  p.x0 = Vector::Constant(1, x0);
  p.terminal = TerminalKind::Free;
  p.T = T;
  ex.guess = {Vector::Zero(1), {}};
  return ex;
}

}  // namespace ctrl::models
