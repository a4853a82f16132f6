#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctrlkit/optctrl.hpp"

namespace ctrl {

LqProblem LqProblem::constant(const LtiSystem& s, const Matrix& W, const Matrix& U, const Matrix& Q, double T) {
  LqProblem p;
  p.sys = LtvSystem::from_lti(s);
  p.W = [W](double) { return W; };
  p.U = [U](double) { return U; };
  p.Q = Q;
  p.T = T;
  return p;
}

Matrix RiccatiSolution::at(double t) const {
  const double t0 = grid.front(), t1 = grid.back();
  const double slack = 1e-12 * std::max(1.0, std::abs(t1 - t0));
  if (t < t0 - slack || t > t1 + slack) {
    std::ostringstream os;
    os << "Riccati solution queried at t=" << t << " outside [" << t0 << ", " << t1 << "]";
    throw Error(ErrorKind::OutOfRange, os.str());
  }
  t = std::clamp(t, t0, t1);
  const double h = (t1 - t0) / (grid.size() - 1);
  std::size_t i = std::min(grid.size() - 2, static_cast<std::size_t>((t - t0) / h));
  double w = (t - grid[i]) / (grid[i + 1] - grid[i]);
  return (1.0 - w) * E[i] + w * E[i + 1];
}

namespace {

void check_lq(const LqProblem& p) {
  const int n = p.sys.n, m = p.sys.m;
  if (!(p.T > 0)) throw Error(ErrorKind::Grid, "LQ horizon must be positive");
  if (p.Q.rows() != n || p.Q.cols() != n) throw Error(ErrorKind::Dimension, "Q must be n x n");
  Matrix W = p.W(0), U = p.U(0);
  if (W.rows() != n || W.cols() != n) throw Error(ErrorKind::Dimension, "W must be n x n");
  if (U.rows() != m || U.cols() != m) throw Error(ErrorKind::Dimension, "U must be m x m");
}

Matrix riccati_rhs(const LqProblem& p, double t, const Matrix& E) {
  Matrix A = p.sys.A(t), B = p.sys.B(t);
  Matrix UiBt = p.U(t).ldlt().solve(B.transpose());
  return p.W(t) - A.transpose() * E - E * A - E * B * UiBt * E;
}

Vector flat(const Matrix& M) { return Eigen::Map<const Vector>(M.data(), M.size()); }
Matrix unflat(const Vector& v, Eigen::Index n) { return Eigen::Map<const Matrix>(v.data(), n, n); }

}  // namespace

RiccatiSolution riccati_solve(const LqProblem& p, int steps) {
  check_lq(p);
  if (steps < 1) throw Error(ErrorKind::Grid, "riccati_solve: steps must be >= 1");
  const int n = p.sys.n;
  const double h = p.T / steps;
  RiccatiSolution sol;
  sol.grid.resize(steps + 1);
  sol.E.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) sol.grid[k] = k * h;
  sol.grid[steps] = p.T;
  sol.E[steps] = -p.Q;
  Rhs f = [&](double t, const Vector& v) { return flat(riccati_rhs(p, t, unflat(v, n))); };
  Vector v = flat(sol.E[steps]);
  for (int k = steps - 1; k >= 0; --k) {
    v = rk4_step(f, (k + 1) * h, v, -h);
    Matrix E = symmetrize(unflat(v, n));
    if (!E.allFinite() || E.norm() > 1e8) throw BlowupError(k * h, "Riccati solution exceeded the blow-up guard");
    sol.E[k] = E;
    v = flat(E);
  }
  return sol;
}

TimeFeedback lq_feedback(const RiccatiSolution& sol, const LqProblem& p) {
  return [sol, p](double t, const Vector& x) {
    Matrix E = sol.at(t);
    return Vector(p.U(t).ldlt().solve(p.sys.B(t).transpose() * (E * x)));
  };
}

double lq_closed_loop_cost(const LqProblem& p, const TimeFeedback& law, const Vector& x0, int steps) {
  const Eigen::Index n = x0.size();
  Rhs f = [&](double t, const Vector& s) {
    Vector x = s.head(n);
    Vector u = law(t, x);
    Vector d(n + 1);
    d.head(n) = p.sys.A(t) * x + p.sys.B(t) * u;
    if (p.sys.r) d.head(n) += p.sys.r(t);
    d(n) = x.dot(p.W(t) * x) + u.dot(p.U(t) * u);
    return d;
  };
  Vector s0 = Vector::Zero(n + 1);
  s0.head(n) = x0;
  Vector s = integrate_endpoint(f, 0.0, s0, p.T, steps);
  Vector xT = s.head(n);
  return s(n) + xT.dot(p.Q * xT);
}

TrackingResult tracking_gains(const TvDynamics& f, int m, const Trajectory& xi, const MatrixOfT& W, const MatrixOfT& U,
                              const Matrix& Q, int steps) {
  if (xi.size() < 3) throw Error(ErrorKind::Grid, "tracking: reference needs at least 3 samples");
  const double T = xi.times.back() - xi.times.front();
  const double t0 = xi.times.front();
  const Eigen::Index n = xi.states.front().size();
  // reference derivative by finite differences on the reference grid
  Trajectory dxi;
  dxi.times = xi.times;
  const std::size_t N = xi.size();
  for (std::size_t k = 0; k < N; ++k) {
    if (k == 0)
      dxi.states.push_back((-3.0 * xi.states[0] + 4.0 * xi.states[1] - xi.states[2]) / (xi.times[2] - xi.times[0]));
    else if (k + 1 == N)
      dxi.states.push_back((3.0 * xi.states[N - 1] - 4.0 * xi.states[N - 2] + xi.states[N - 3]) /
                           (xi.times[N - 1] - xi.times[N - 3]));
    else
      dxi.states.push_back((xi.states[k + 1] - xi.states[k - 1]) / (xi.times[k + 1] - xi.times[k - 1]));
  }
  const Vector u0 = Vector::Zero(m);
  auto jac_x = [f, n, u0](double t, const Vector& x) {
    Matrix J(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double h = 1e-6 * (1 + std::abs(x(i)));
      Vector a = x, b = x;
      a(i) += h;
      b(i) -= h;
      J.col(i) = (f(t, a, u0) - f(t, b, u0)) / (2 * h);
    }
    return J;
  };
  auto jac_u = [f, n, m, u0](double t, const Vector& x) {
    Matrix J(n, m);
    for (int i = 0; i < m; ++i) {
      Vector a = u0, b = u0;
      a(i) += 1e-6;
      b(i) -= 1e-6;
      J.col(i) = (f(t, x, a) - f(t, x, b)) / 2e-6;
    }
    return J;
  };
  TrackingResult res;
  LqProblem lq;
  lq.sys.n = static_cast<int>(n);
  lq.sys.m = m;
  lq.sys.A = [=](double t) { return jac_x(t, xi.at(t)); };
  lq.sys.B = [=](double t) { return jac_u(t, xi.at(t)); };
  lq.W = W;
  lq.U = U;
  lq.Q = Q;
  lq.T = T;
  // joint backward sweep of (E, h) so both share RK4 stages
  auto shift = [t0](double s) { return s + t0; };
  Rhs rhs = [&](double s, const Vector& v) {
    double t = shift(s);
    Matrix E = unflat(v.head(n * n), n);
    Vector h = v.tail(n);
    Matrix A = lq.sys.A(t), B = lq.sys.B(t);
    Matrix UiBt = U(t).ldlt().solve(B.transpose());
    Vector r1 = f(t, xi.at(t), u0) - dxi.at(t);
    Vector out(n * n + n);
    out.head(n * n) = flat(W(t) - A.transpose() * E - E * A - E * B * UiBt * E);
    out.tail(n) = -A.transpose() * h - E * r1 - E * B * UiBt * h;
    return out;
  };
  const double dt = T / steps;
  res.riccati.grid.resize(steps + 1);
  res.riccati.E.resize(steps + 1);
  res.h.resize(steps + 1);
  Vector v(n * n + n);
  v.head(n * n) = flat(-Q);
  v.tail(n).setZero();
  res.riccati.E[steps] = -Q;
  res.h[steps] = Vector::Zero(n);
  for (int k = 0; k <= steps; ++k) res.riccati.grid[k] = t0 + k * dt;
  res.riccati.grid[steps] = t0 + T;
  for (int k = steps - 1; k >= 0; --k) {
    v = rk4_step(rhs, (k + 1) * dt, v, -dt);
    Matrix E = symmetrize(unflat(v.head(n * n), n));
    if (!v.allFinite() || E.norm() > 1e8) throw BlowupError(t0 + k * dt, "tracking Riccati blow-up guard tripped");
    v.head(n * n) = flat(E);
    res.riccati.E[k] = E;
    res.h[k] = v.tail(n);
  }
  Trajectory htraj{res.riccati.grid, res.h};
  RiccatiSolution ric = res.riccati;
  auto B = lq.sys.B;
  res.law = [ric, htraj, xi, B, U](double t, const Vector& x) {
    Matrix Bt = B(t).transpose();
    return Vector(U(t).ldlt().solve(Bt * (ric.at(t) * (x - xi.at(t)) + htraj.at(t))));
  };
  return res;
}

}  // namespace ctrl
