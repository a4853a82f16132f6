#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ctrlkit/numcore.hpp"

namespace ctrl {

using MatrixOfT = std::function<Matrix(double)>;
using TimeFeedback = std::function<Vector(double, const Vector&)>;

// cost = int_0^T (x'Wx + u'Uu) dt + x(T)'Qx(T); optimal value x0'(-E(0))x0
struct LqProblem {
  LtvSystem sys;
  MatrixOfT W;
  MatrixOfT U;
  Matrix Q;
  double T = 1.0;

  static LqProblem constant(const LtiSystem& s, const Matrix& W, const Matrix& U, const Matrix& Q, double T);
};

struct RiccatiSolution {
  std::vector<double> grid;
  std::vector<Matrix> E;
  Matrix at(double t) const;  // linear interpolation
};

RiccatiSolution riccati_solve(const LqProblem& p, int steps);
TimeFeedback lq_feedback(const RiccatiSolution& sol, const LqProblem& p);

// quadratic cost of a closed loop, RK4 with the running cost as an extra state
double lq_closed_loop_cost(const LqProblem& p, const TimeFeedback& law, const Vector& x0, int steps);

using TvDynamics = std::function<Vector(double, const Vector&, const Vector&)>;

struct TrackingResult {
  RiccatiSolution riccati;
  std::vector<Vector> h;  // on riccati.grid
  TimeFeedback law;
};

// Reference xi sampled on a uniform grid of `steps` intervals over [0, T].
TrackingResult tracking_gains(const TvDynamics& f, int m, const Trajectory& xi, const MatrixOfT& W, const MatrixOfT& U,
                              const Matrix& Q, int steps);

// ---- Pontryagin shooting ----

// f = drift + G u, running cost ell0 + c.u + u'Uu/2
struct AffineStructure {
  std::function<Vector(double, const Vector&)> drift;
  std::function<Matrix(double, const Vector&)> G;
  std::function<double(double, const Vector&)> ell0;  // may be empty
  Vector c;                                            // may be empty
  Matrix U;                                            // may be empty
  // optional analytic x-jacobians
  std::function<Matrix(double, const Vector&)> drift_x;
  std::function<Matrix(double, const Vector&, const Vector&)> Gu_x;  // d(G u)/dx
  std::function<Vector(double, const Vector&)> ell0_x;
};

struct Maximizer {
  std::function<Vector(double, const Vector&, const Vector&, double)> argmax;
  // switching function phi (control-affine maximizers only)
  std::function<Vector(double, const Vector&, const Vector&, double)> switching;
  // discrete control mode; a change inside a step triggers switch-time localisation
  std::function<std::vector<int>(double, const Vector&, const Vector&, double)> mode;
};

Maximizer box_maximizer(const AffineStructure& a, const Vector& lo, const Vector& hi);
Maximizer ball_maximizer(const AffineStructure& a, double radius);
Maximizer unconstrained_maximizer(const AffineStructure& a);
Maximizer user_maximizer(std::function<Vector(double, const Vector&, const Vector&, double)> fn);

enum class TerminalKind { Fixed, Free, Manifold };

struct OcProblem {
  int n = 0, m = 0;
  TvDynamics f;
  std::function<Matrix(double, const Vector&, const Vector&)> f_x;  // may be empty: finite differences
  std::function<double(double, const Vector&, const Vector&)> f0;   // may be empty: zero
  std::function<Vector(double, const Vector&, const Vector&)> f0_x;
  std::function<double(double, const Vector&)> g;  // terminal cost, may be empty
  std::function<double(double, const Vector&)> g_t;
  std::function<Vector(double, const Vector&)> g_x;
  Vector x0;
  TerminalKind terminal = TerminalKind::Fixed;
  Vector x1;                                       // Fixed
  std::function<Vector(const Vector&)> F;          // Manifold F(x) = 0
  std::function<Matrix(const Vector&)> F_x;        // gradient rows
  bool free_time = false;
  double T = 1.0;  // horizon, or initial guess when free
  Maximizer maximizer;
  bool autonomous = true;

  void check() const;
};

OcProblem affine_problem(const AffineStructure& a, int n, int m);

struct ShootOptions {
  int steps = 1000;
  int newton_iters = 50;
  double tol = 1e-10;
  bool abnormal = false;  // p0 = 0 with |p(0)| = 1 appended
};

struct Extremal {
  Trajectory state;
  Trajectory adjoint;
  double p0 = -1.0;
  double tf = 0.0;
  std::vector<Vector> control;
  std::vector<double> hamiltonian;
  std::vector<double> switch_times;
  bool singular_arc = false;
  Vector residual;
  std::vector<double> residual_history;
  int iterations = 0;
  bool converged = false;
};

class ShootingError : public Error {
 public:
  ShootingError(Extremal best, const std::string& what)
      : Error(ErrorKind::NonConvergence, what), best_(std::move(best)) {}
  const Extremal& best() const { return best_; }
  const std::vector<double>& history() const { return best_.residual_history; }

 private:
  Extremal best_;
};

struct ShootGuess {
  Vector p;
  std::optional<double> T;
};

Extremal pmp_shoot(const OcProblem& p, const ShootGuess& guess, const ShootOptions& opt = {});

// Unknown vector z = (p(0), tf if free). Exposed for diagnostics and tests.
Vector shooting_residual(const OcProblem& p, const Vector& z, const ShootOptions& opt);
Matrix shooting_jacobian(const OcProblem& p, const Vector& z, const ShootOptions& opt, double rel_step = 1e-6);
Extremal integrate_extremal(const OcProblem& p, const Vector& p_init, double tf, double p0, int steps);

struct ExtremalDiagnostics {
  double hamiltonian_deviation = 0.0;
  double transversality = 0.0;
  double nontriviality = 0.0;
  double free_time_residual = 0.0;  // |H(tf) + p0 g_t|, zero when the horizon is fixed
  bool singular_arc = false;
};

ExtremalDiagnostics check_extremal(const Extremal& e, const OcProblem& p);

}  // namespace ctrl
