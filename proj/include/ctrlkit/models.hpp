#pragma once

#include "ctrlkit/lincontrol.hpp"
#include "ctrlkit/optctrl.hpp"
#include "ctrlkit/stabilize.hpp"

// Worked examples used by tests, the CLI builtins, and the acceptance suite.
namespace ctrl::models {

LtiSystem rlc(double L = 1.0, double C = 1.0, double R = 1.0);
// state (x1, x1', x2, x2'), control acts on the second mass
LtiSystem coupled_springs(double k1, double k2);
LtiSystem alpha_system(double alpha);
LtiSystem double_integrator();

struct PendulumParams {
  double m = 1.0, M = 1.0, l = 1.0, g = 1.0;
};
// state (xi, xi', theta, theta'), control = carriage force
Dynamics pendulum(const PendulumParams& p = {});
DynamicsJacobian pendulum_jacobian(const PendulumParams& p = {});
LtiSystem pendulum_linear(const PendulumParams& p = {});

Dynamics maxwell_bloch();
DynamicsJacobian maxwell_bloch_jacobian();

// linearization of the unicycle along a circle of period T
LtvSystem dubins_linearized(double T);
LtvSystem rotating_frame();
LtvSystem diag_example();

// drift-free fields (1,0,y) and (0,1,-x)
VectorFieldSet heisenberg();

struct OcExample {
  OcProblem problem;
  ShootGuess guess;
};

// minimal drift x(tf) to reach y = ell, current c(y) = 1 + y^2, heading as a unit vector
OcExample zermelo(double v = 0.5, double ell = 1.0);
// reduced (x, v) system, minimal time to (x1, 0), direction as a unit vector
OcExample brachistochrone(double x1 = 1.0, double g = 9.81);
// minimal time to the origin with |u| <= 1
OcExample double_integrator_min_time(const Vector& x0);
struct PredatorPreyParams {
  double a = 1.0, b = 1.0, c = 1.0, M = 2.0, T = 2.0, x0 = 3.0, y0 = 0.5;
};
// cost x(T) + int u, u in [0, M]
OcExample predator_prey(const PredatorPreyParams& p = {});
// x' = u, cost int x^2 + u^2 dt, free endpoint; p(0) = -2 tanh(T) x0
OcExample scalar_lq(double T = 2.0, double x0 = 1.0);

}  // namespace ctrl::models
