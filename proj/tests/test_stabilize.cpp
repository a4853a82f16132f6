#include "doctest.h"

#include <cmath>
#include <random>

#include "ctrlkit/lincontrol.hpp"
#include "ctrlkit/models.hpp"
#include "ctrlkit/stabilize.hpp"

using namespace ctrl;

namespace {
std::mt19937 rng(77);
double unif(double a = -1, double b = 1) { return std::uniform_real_distribution<double>(a, b)(rng); }
Matrix rnd(int r, int c) { return Matrix::NullaryExpr(r, c, [] { return unif(); }); }
Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double d : v) x(i++) = d;
  return x;
}
std::vector<Complex> random_stable_roots(int n) {
  std::vector<Complex> r;
  while (static_cast<int>(r.size()) < n) {
    if (n - static_cast<int>(r.size()) >= 2 && unif() > 0) {
      Complex z(unif(-3, -0.3), unif(0.2, 2));
      r.push_back(z);
      r.push_back(std::conj(z));
    } else {
      r.emplace_back(unif(-3, -0.3), 0.0);
    }
  }
  return r;
}
}  // namespace

TEST_CASE("Routh table examples") {
  auto a = routh(vec({1, 3, 2}));
  CHECK(a.complete);
  CHECK(a.hurwitz);
  CHECK((a.first_column - vec({1, 3, 2})).norm() < 1e-15);
  auto b = routh(vec({1, 1, 1, 1}));
  CHECK_FALSE(b.complete);
  CHECK_FALSE(b.hurwitz);
  auto c = routh(vec({1, -1, 1}));
  CHECK(c.complete);
  CHECK(c.sign_changes == 2);
  CHECK_FALSE(c.hurwitz);
  CHECK_FALSE(routh(vec({1, 0, 1, 0, 1})).hurwitz);
  CHECK_THROWS_AS(routh(vec({0, 1, 2})), Error);
}

TEST_CASE("Hurwitz minors examples") {
  auto h = hurwitz(vec({1, 3, 2}));
  CHECK(h.minors(0) == doctest::Approx(3));
  CHECK(h.minors(1) == doctest::Approx(6));
  CHECK(h.hurwitz);
  auto q = hurwitz(vec({1, 0, 1, 0, 1}));
  CHECK(q.minors(0) == 0.0);
  CHECK_FALSE(q.hurwitz);
  CHECK_THROWS_AS(hurwitz(vec({-1, 2, 3})), Error);
}

TEST_CASE("Routh and Hurwitz agree with root locations") {
  int disagreements = 0, count_mismatch = 0;
  for (int k = 0; k < 500; ++k) {
    int n = 1 + k % 6;
    Vector p(n + 1);
    if (k % 2) {
      std::vector<Complex> roots;
      for (auto z : random_stable_roots(n)) roots.push_back(k % 4 == 1 ? z : Complex(-z.real(), z.imag()) * (unif() > 0.7 ? -1.0 : 1.0));
      p = poly_from_roots(roots);
    } else {
      p(0) = 1;
      for (int i = 1; i <= n; ++i) p(i) = unif(-0.5, 3);
    }
    auto roots = poly_roots(p);
    int unstable = 0;
    bool stable = true;
    for (auto z : roots) {
      if (z.real() >= 0) stable = false;
      if (z.real() > 0) ++unstable;
    }
    auto r = routh(p);
    auto h = hurwitz(p);
    if (r.hurwitz != stable || h.hurwitz != stable) ++disagreements;
    if (r.complete && r.sign_changes != unstable) ++count_mismatch;
  }
  CHECK(disagreements == 0);
  CHECK(count_mismatch == 0);
}

TEST_CASE("pole placement worked cases") {
  auto di = pole_place(models::double_integrator(), vec({1, 2, 1}));
  CHECK((di.K - Matrix(rnd(1, 2).setZero() + (Matrix(1, 2) << -1, -2).finished())).norm() < 1e-12);

  auto pend = pole_place(models::pendulum_linear(), vec({1, 4, 6, 4, 1}));
  Matrix want(1, 4);
  want << 1, 4, 9, 8;  // exact gain for (s+1)^4 with unit parameters
  CHECK((pend.K - want).norm() < 1e-9);
  for (auto z : pend.closed_loop) CHECK(std::abs(z + 1.0) < 1e-6);
  CHECK(pend.coeff_residual < 1e-8);

  // multi-input: Maxwell-Bloch linearized at (a, 0, c) = (1, 0, 0), u = (0, -ac)
  Vector xb = vec({1, 0, 0}), ub = vec({0, 0});
  auto lin = linearize(models::maxwell_bloch(), xb, ub);
  Vector target = poly_from_roots({-1.0, -2.0, -3.0});
  auto mb = pole_place(lin, target);
  CHECK(multiset_distance(mb.closed_loop, {-1.0, -2.0, -3.0}) < 1e-6);
  CHECK((mb.method == "reduction" ? mb.y.size() == 2 : mb.method == "eigenvector"));

  CHECK_THROWS_AS(pole_place(models::coupled_springs(1, 0), vec({1, 4, 6, 4, 1})), Error);
  CHECK_THROWS_AS(pole_place(models::double_integrator(), vec({1, 1})), Error);
}

TEST_CASE("pole placement on random pairs") {
  double worst = 0, worst_coef = 0;
  for (int k = 0; k < 60; ++k) {
    int n = 1 + k % 8, m = 1 + k % 3;
    if (m > n) m = n;
    LtiSystem s{rnd(n, n), rnd(n, m), {}};
    auto roots = random_stable_roots(n);
    auto pp = pole_place(s, poly_from_roots(roots));
    worst = std::max(worst, multiset_distance(pp.closed_loop, roots));
    if (m == 1) worst_coef = std::max(worst_coef, pp.coeff_residual);
  }
  CHECK(worst < 1e-6);
  CHECK(worst_coef < 1e-8);
}

TEST_CASE("Lyapunov equation") {
  Matrix P = lyapunov_solve(-Matrix::Identity(2, 2));
  CHECK((P - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-15);
  Matrix A(2, 2);
  A << 0, 1, -2, -3;
  Matrix want(2, 2);
  want << 1.25, 0.25, 0.25, 0.25;
  CHECK((lyapunov_solve(A) - want).norm() < 1e-14);
  CHECK_THROWS_AS(lyapunov_solve(Matrix::Identity(2, 2)), Error);
  for (int k = 0; k < 20; ++k) {
    int n = 2 + k % 6;
    Matrix M = rnd(n, n);
    double shift = 0;
    for (auto z : eigenvalues(M)) shift = std::max(shift, z.real());
    Matrix H = M - (shift + 0.5) * Matrix::Identity(n, n);
    Matrix Q = lyapunov_solve(H);
    CHECK((H.transpose() * Q + Q * H + Matrix::Identity(n, n)).norm() < 1e-10);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(Q).eigenvalues().minCoeff() > 0);
  }
}

TEST_CASE("Lyapunov function decreases along the flow") {
  Matrix A = rnd(3, 3) - 2.5 * Matrix::Identity(3, 3);
  Matrix P = lyapunov_solve(A);
  auto V = [&](const Vector& x) { return x.dot(P * x); };
  for (int k = 0; k < 100; ++k) {
    OdeProblem p;
    p.rhs = [&](double, const Vector& x) { return Vector(A * x); };
    p.x0 = Vector::NullaryExpr(3, [] { return unif(); });
    p.t1 = 3;
    p.steps = 300;
    auto tr = integrate(p);
    bool dec = true;
    for (std::size_t i = 1; i < tr.size(); ++i) dec = dec && V(tr.states[i]) < V(tr.states[i - 1]);
    CHECK(dec);
  }
}

TEST_CASE("linearization") {
  Vector xb = vec({0.7, 0, 0, 0}), ub = vec({0});
  auto lin = linearize(models::pendulum(), xb, ub);
  auto ref = models::pendulum_linear();
  CHECK((lin.A - ref.A).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((lin.B - ref.B).cwiseAbs().maxCoeff() < 1e-6);
  models::PendulumParams pp{0.3, 2.0, 0.5, 9.81};
  auto lin2 = linearize(models::pendulum(pp), xb, ub);
  CHECK((lin2.A - models::pendulum_linear(pp).A).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((lin2.B - models::pendulum_linear(pp).B).cwiseAbs().maxCoeff() < 1e-6);

  Matrix A = rnd(3, 3), B = rnd(3, 2);
  Dynamics lf = [&](const Vector& x, const Vector& u) { return Vector(A * x + B * u); };
  auto l = linearize(lf, Vector::Zero(3), Vector::Zero(2));
  CHECK((l.A - A).norm() < 1e-10);
  CHECK((l.B - B).norm() < 1e-10);

  for (double b : {0.0, 0.8}) {
    auto mb = linearize(models::maxwell_bloch(), vec({0, b, 1.3}), vec({-b, 0}));
    CHECK(kalman_test(mb).controllable == (b != 0.0));
  }
  for (double a : {0.0, -0.4}) {
    auto mb = linearize(models::maxwell_bloch(), vec({a, 0, 0.6}), vec({0, -a * 0.6}));
    CHECK(kalman_test(mb).controllable == (a != 0.0));
  }
  try {
    linearize(models::maxwell_bloch(), vec({1, 1, 0}), vec({0, 0}));
    FAIL("expected equilibrium violation");
  } catch (const EquilibriumError& e) {
    CHECK(e.residual() == doctest::Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("Jurdjevic-Quinn feedback") {
  // x1' = x2, x2' = -x1 + u x1 with V = (x1^2 + x2^2)/2
  Field drift = [](const Vector& x) { return vec({x(1), -x(0)}); };
  Field g = [](const Vector& x) { return vec({0, x(0)}); };
  Field dV = [](const Vector& x) { return x; };
  auto law = jurdjevic_quinn_feedback({g}, dV, 1.0);
  Vector x = vec({0.5, 3.0});
  CHECK(law(x)(0) == doctest::Approx(-1.0));
  x = vec({0.2, 0.3});
  CHECK(law(x)(0) == doctest::Approx(-0.06));
  CHECK(law(Vector::Zero(2))(0) == 0.0);
  auto run = simulate_closed_loop(control_affine(drift, {g}), law, vec({1.5, -0.5}), 20, 4000,
                                  [](const Vector& y) { return 0.5 * y.squaredNorm(); });
  bool dec = true;
  for (std::size_t i = 1; i < run.V.size(); ++i) dec = dec && run.V[i] <= run.V[i - 1] + 1e-9;
  CHECK(dec);
  CHECK(run.V.back() < run.V.front());
  for (auto& u : run.u) CHECK(std::abs(u(0)) <= 1.0);
}

TEST_CASE("Jurdjevic-Quinn on predator-prey") {
  Field drift = [](const Vector& x) { return vec({x(0) * (1 - x(1)), -x(1) * (1 - x(0))}); };
  Field g = [](const Vector& x) { return vec({x(0), 0}); };
  Field dV = [](const Vector& x) { return vec({1 - 1 / x(0), 1 - 1 / x(1)}); };
  ScalarField V = [](const Vector& x) { return x(0) - 1 - std::log(x(0)) + x(1) - 1 - std::log(x(1)); };
  auto law = jurdjevic_quinn_feedback({g}, dV);
  CHECK(law(vec({2.5, 0.4}))(0) == doctest::Approx(-1.5));
  auto run = simulate_closed_loop(control_affine(drift, {g}), law, vec({2.0, 0.5}), 30, 6000, V);
  bool dec = true;
  for (std::size_t i = 1; i < run.V.size(); ++i) dec = dec && run.V[i] <= run.V[i - 1] + 1e-9;
  CHECK(dec);
  CHECK(run.V.back() < 0.5 * run.V.front());
}

TEST_CASE("closed-loop simulation") {
  auto di = models::double_integrator();
  auto pp = pole_place(di, vec({1, 2, 1}));
  Dynamics f = [&](const Vector& x, const Vector& u) { return Vector(di.A * x + di.B * u); };
  FeedbackLaw law = [&](const Vector& x) { return Vector(pp.K * x); };
  Vector x0 = vec({1, -0.5});
  auto run = simulate_closed_loop(f, law, x0, 8, 800);
  Vector oracle = expm(8 * (di.A + di.B * pp.K)) * x0;
  CHECK((run.traj.back() - oracle).norm() < 1e-8);
  CHECK(run.traj.back().norm() < x0.norm() * std::exp(-0.5 * 8));

  Dynamics zero = [](const Vector& x, const Vector&) { return Vector(Vector::Zero(x.size())); };
  auto c = simulate_closed_loop(zero, [](const Vector&) { return Vector(Vector::Zero(1)); }, x0, 1, 10);
  CHECK(c.traj.back() == x0);

  auto pend = models::pendulum();
  auto pk = pole_place(models::pendulum_linear(), vec({1, 4, 6, 4, 1}));
  Vector xbar = vec({0.3, 0, 0, 0});
  FeedbackLaw pl = [&](const Vector& x) { return Vector(pk.K * (x - xbar)); };
  auto pr = simulate_closed_loop(pend, pl, xbar + vec({0.05, 0, 0.05, 0}), 25, 5000);
  CHECK((pr.traj.back() - xbar).norm() < 1e-4);
}

TEST_CASE("analytic jacobians match finite differences") {
  models::PendulumParams p{0.7, 1.3, 0.9, 9.81};
  for (auto [x, u] : {std::pair{vec({0.2, -0.4, 0.3, 0.5}), vec({0.1})}, std::pair{vec({0, 0, 2.0, -1.0}), vec({-0.6})}}) {
    auto exact = models::pendulum_jacobian(p)(x, u);
    // linearize() demands an equilibrium, so compare against a shifted field that vanishes at (x, u)
    Vector f0 = models::pendulum(p)(x, u);
    Dynamics g = [&](const Vector& y, const Vector& v) { return Vector(models::pendulum(p)(y, v) - f0); };
    auto fd = linearize(g, x, u);
    CHECK((exact.A - fd.A).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((exact.B - fd.B).cwiseAbs().maxCoeff() < 1e-8);
  }
  Vector x = vec({0.4, -1.1, 0.8}), u = vec({0.3, 0.2});
  Vector f0 = models::maxwell_bloch()(x, u);
  Dynamics g = [&](const Vector& y, const Vector& v) { return Vector(models::maxwell_bloch()(y, v) - f0); };
  auto fd = linearize(g, x, u);
  auto exact = models::maxwell_bloch_jacobian()(x, u);
  CHECK((exact.A - fd.A).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((exact.B - fd.B).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((models::pendulum_jacobian()(Vector::Zero(4), Vector::Zero(1)).A - models::pendulum_linear().A).norm() == 0);
}
