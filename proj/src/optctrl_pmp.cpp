#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ctrlkit/optctrl.hpp"

namespace ctrl {

namespace {

Vector phi_of(const AffineStructure& a, double t, const Vector& x, const Vector& p, double p0) {
  Vector phi = a.G(t, x).transpose() * p;
  if (a.c.size()) phi += p0 * a.c;
  return phi;
}

std::vector<int> sign_pattern(const Vector& phi) {
  std::vector<int> s(phi.size());
  for (Eigen::Index i = 0; i < phi.size(); ++i) s[i] = std::abs(phi(i)) < 1e-12 ? 0 : (phi(i) > 0 ? 1 : -1);
  return s;
}

Matrix fd_jacobian_x(const std::function<Vector(const Vector&)>& f, const Vector& x) {
  Vector f0 = f(x);
  Matrix J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = 1e-6 * (1 + std::abs(x(i)));
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    J.col(i) = (f(a) - f(b)) / (2 * h);
  }
  return J;
}

}  // namespace

Maximizer box_maximizer(const AffineStructure& a, const Vector& lo, const Vector& hi) {
  if (lo.size() != hi.size()) throw Error(ErrorKind::Dimension, "box bounds differ in length");
  Maximizer mx;
  mx.switching = [a](double t, const Vector& x, const Vector& p, double p0) { return phi_of(a, t, x, p, p0); };
  mx.argmax = [a, lo, hi](double t, const Vector& x, const Vector& p, double p0) {
    Vector phi = phi_of(a, t, x, p, p0);
    if (phi.size() != lo.size()) throw Error(ErrorKind::Dimension, "box maximizer: control dimension");
    Vector u(phi.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i)
      u(i) = std::abs(phi(i)) < 1e-12 ? 0.5 * (lo(i) + hi(i)) : (phi(i) > 0 ? hi(i) : lo(i));
    return u;
  };
  mx.mode = [a](double t, const Vector& x, const Vector& p, double p0) { return sign_pattern(phi_of(a, t, x, p, p0)); };
  return mx;
}

Maximizer ball_maximizer(const AffineStructure& a, double radius) {
  if (!(radius > 0)) throw Error(ErrorKind::Configuration, "ball radius must be positive");
  Maximizer mx;
  mx.switching = [a](double t, const Vector& x, const Vector& p, double p0) { return phi_of(a, t, x, p, p0); };
  mx.argmax = [a, radius](double t, const Vector& x, const Vector& p, double p0) {
    Vector phi = phi_of(a, t, x, p, p0);
    double nrm = phi.norm();
    if (nrm < 1e-12) return Vector(Vector::Zero(phi.size()));
    return Vector(radius * phi / nrm);
  };
  return mx;
}

Maximizer unconstrained_maximizer(const AffineStructure& a) {
  if (a.U.size() == 0) throw Error(ErrorKind::Configuration, "unconstrained maximizer needs a quadratic control cost");
  Maximizer mx;
  Eigen::LDLT<Matrix> Ul(a.U);
  mx.switching = [a](double t, const Vector& x, const Vector& p, double p0) { return phi_of(a, t, x, p, p0); };
  mx.argmax = [a, Ul](double t, const Vector& x, const Vector& p, double p0) {
    if (p0 == 0.0) throw Error(ErrorKind::Configuration, "unconstrained maximizer is unbounded for p0 = 0");
    return Vector(Ul.solve(phi_of(a, t, x, p, p0)) / -p0);
  };
  return mx;
}

Maximizer user_maximizer(std::function<Vector(double, const Vector&, const Vector&, double)> fn) {
  Maximizer mx;
  mx.argmax = std::move(fn);
  return mx;
}

OcProblem affine_problem(const AffineStructure& a, int n, int m) {
  OcProblem p;
  p.n = n;
  p.m = m;
  p.f = [a](double t, const Vector& x, const Vector& u) { return Vector(a.drift(t, x) + a.G(t, x) * u); };
  if (a.drift_x && a.Gu_x)
    p.f_x = [a](double t, const Vector& x, const Vector& u) { return Matrix(a.drift_x(t, x) + a.Gu_x(t, x, u)); };
  p.f0 = [a](double t, const Vector& x, const Vector& u) {
    double v = a.ell0 ? a.ell0(t, x) : 0.0;
    if (a.c.size()) v += a.c.dot(u);
    if (a.U.size()) v += 0.5 * u.dot(a.U * u);
    return v;
  };
  if (a.ell0_x)
    p.f0_x = [a](double t, const Vector& x, const Vector&) { return a.ell0_x(t, x); };
  else if (!a.ell0)
    p.f0_x = [n](double, const Vector&, const Vector&) { return Vector(Vector::Zero(n)); };
  return p;
}

void OcProblem::check() const {
  if (n < 1 || m < 1) throw Error(ErrorKind::Dimension, "OC problem dimensions must be positive");
  if (!f) throw Error(ErrorKind::Configuration, "OC problem without dynamics");
  if (!maximizer.argmax) throw Error(ErrorKind::Configuration, "OC problem without Hamiltonian maximizer");
  if (x0.size() != n) throw Error(ErrorKind::Dimension, "x0 has wrong length");
  if (terminal == TerminalKind::Fixed && x1.size() != n) throw Error(ErrorKind::Dimension, "x1 has wrong length");
  if (terminal == TerminalKind::Manifold && (!F || !F_x))
    throw Error(ErrorKind::Configuration, "manifold target needs F and its gradient");
  if (!(T > 0)) throw Error(ErrorKind::Grid, "horizon must be positive");
}

namespace {

struct Ham {
  const OcProblem& p;
  double p0;

  Matrix fx(double t, const Vector& x, const Vector& u) const {
    if (p.f_x) return p.f_x(t, x, u);
    return fd_jacobian_x([&](const Vector& y) { return p.f(t, y, u); }, x);
  }
  Vector f0x(double t, const Vector& x, const Vector& u) const {
    if (p.f0_x) return p.f0_x(t, x, u);
    if (!p.f0) return Vector::Zero(p.n);
    return fd_jacobian_x([&](const Vector& y) { return Vector::Constant(1, p.f0(t, y, u)); }, x).row(0).transpose();
  }
  double f0(double t, const Vector& x, const Vector& u) const { return p.f0 ? p.f0(t, x, u) : 0.0; }

  Vector rhs(double t, const Vector& s, const Vector& u) const {
    const int n = p.n;
    Vector x = s.head(n), q = s.tail(n);
    Vector d(2 * n);
    d.head(n) = p.f(t, x, u);
    d.tail(n) = -fx(t, x, u).transpose() * q;
    if (p0 != 0.0) d.tail(n) -= p0 * f0x(t, x, u);
    return d;
  }
  Vector control(double t, const Vector& s) const { return p.maximizer.argmax(t, s.head(p.n), s.tail(p.n), p0); }
  Vector rhs_max(double t, const Vector& s) const { return rhs(t, s, control(t, s)); }
  double H(double t, const Vector& s, const Vector& u) const {
    return s.tail(p.n).dot(p.f(t, s.head(p.n), u)) + p0 * f0(t, s.head(p.n), u);
  }

  Vector step(double t, const Vector& s, double h) const {
    Rhs f = [this](double tt, const Vector& y) { return rhs_max(tt, y); };
    return rk4_step(f, t, s, h);
  }
  Vector step_frozen(double t, const Vector& s, double h, const Vector& u) const {
    Rhs f = [this, &u](double tt, const Vector& y) { return rhs(tt, y, u); };
    return rk4_step(f, t, s, h);
  }
};

}  // namespace

Extremal integrate_extremal(const OcProblem& p, const Vector& p_init, double tf, double p0, int steps) {
  if (!(tf > 0)) throw Error(ErrorKind::Grid, "final time must be positive");
  if (steps < 1) throw Error(ErrorKind::Grid, "steps must be >= 1");
  const int n = p.n;
  Ham ham{p, p0};
  Extremal e;
  e.p0 = p0;
  e.tf = tf;
  const double h = tf / steps;
  Vector s(2 * n);
  s.head(n) = p.x0;
  s.tail(n) = p_init;
  auto record = [&](double t, const Vector& st) {
    e.state.times.push_back(t);
    e.adjoint.times.push_back(t);
    e.state.states.push_back(st.head(n));
    e.adjoint.states.push_back(st.tail(n));
    Vector u = ham.control(t, st);
    e.control.push_back(u);
    e.hamiltonian.push_back(ham.H(t, st, u));
  };
  record(0.0, s);
  const auto& mode = p.maximizer.mode;
  const auto& sw = p.maximizer.switching;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const double tn = (k + 1 == steps) ? tf : (k + 1) * h;
    Vector next = ham.step(t, s, tn - t);
    if (mode && sw) {
      auto ma = mode(t, s.head(n), s.tail(n), p0);
      auto mb = mode(tn, next.head(n), next.tail(n), p0);
      if (ma != mb) {
        std::size_t j = 0;
        while (j < ma.size() && ma[j] == mb[j]) ++j;
        Vector ua = ham.control(t, s);
        auto sigma = [&](double th) {
          Vector y = th == 0.0 ? s : ham.step_frozen(t, s, th * (tn - t), ua);
          return sw(t + th * (tn - t), y.head(n), y.tail(n), p0)(j);
        };
        double lo = 0.0, hi = 1.0, slo = sigma(0.0), shi = sigma(1.0);
        if (slo * shi < 0) {
          for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi), sm = sigma(mid);
            if ((sm < 0) == (slo < 0)) {
              lo = mid;
              slo = sm;
            } else {
              hi = mid;
            }
          }
          double th = 0.5 * (lo + hi);
          double ts = t + th * (tn - t);
          Vector mid = ham.step_frozen(t, s, ts - t, ua);
          Vector ub = ham.control(tn, next);
          next = ham.step_frozen(ts, mid, tn - ts, ub);
          e.switch_times.push_back(ts);
        }
      }
    }
    if (!next.allFinite()) throw BlowupError(tn, "Hamiltonian system blew up");
    s = next;
    record(tn, s);
  }
  if (sw) {
    int run = 0;
    for (std::size_t k = 0; k < e.state.size(); ++k) {
      Vector phi = sw(e.state.times[k], e.state.states[k], e.adjoint.states[k], p0);
      run = phi.cwiseAbs().minCoeff() < 1e-9 ? run + 1 : 0;
      if (run >= 5) e.singular_arc = true;
    }
  }
  return e;
}

namespace {

struct Unknowns {
  Vector p;
  double tf;
};

Unknowns split(const OcProblem& pr, const Vector& z) {
  Unknowns u;
  u.p = z.head(pr.n);
  u.tf = pr.free_time ? z(pr.n) : pr.T;
  return u;
}

Vector terminal_residual(const OcProblem& pr, const Extremal& e, bool abnormal, const Vector& p_init) {
  const int n = pr.n;
  const Vector& x = e.state.back();
  const Vector& q = e.adjoint.back();
  const double tf = e.tf, p0 = e.p0;
  Vector gx = pr.g_x ? pr.g_x(tf, x) : Vector(Vector::Zero(n));
  std::vector<double> r;
  auto push = [&](const Vector& v) { r.insert(r.end(), v.data(), v.data() + v.size()); };
  switch (pr.terminal) {
    case TerminalKind::Fixed:
      push(x - pr.x1);
      break;
    case TerminalKind::Free:
      push(q - p0 * gx);
      break;
    case TerminalKind::Manifold: {
      push(pr.F(x));
      Matrix N = null_space(pr.F_x(x));
      push(N.transpose() * (q - p0 * gx));
      break;
    }
  }
  if (pr.free_time) {
    double gt = pr.g_t ? pr.g_t(tf, x) : 0.0;
    r.push_back(e.hamiltonian.back() + p0 * gt);
  }
  if (abnormal) r.push_back(p_init.squaredNorm() - 1.0);
  return Eigen::Map<Vector>(r.data(), static_cast<Eigen::Index>(r.size()));
}

}  // namespace

Vector shooting_residual(const OcProblem& pr, const Vector& z, const ShootOptions& opt) {
  auto u = split(pr, z);
  double p0 = opt.abnormal ? 0.0 : -1.0;
  Extremal e = integrate_extremal(pr, u.p, u.tf, p0, opt.steps);
  return terminal_residual(pr, e, opt.abnormal, u.p);
}

Matrix shooting_jacobian(const OcProblem& pr, const Vector& z, const ShootOptions& opt, double rel_step) {
  Vector r0 = shooting_residual(pr, z, opt);
  Matrix J(r0.size(), z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vector zz = z;
    double h = rel_step * (1 + std::abs(z(i)));
    zz(i) += h;
    J.col(i) = (shooting_residual(pr, zz, opt) - r0) / h;
  }
  return J;
}

Extremal pmp_shoot(const OcProblem& pr, const ShootGuess& guess, const ShootOptions& opt) {
  pr.check();
  if (guess.p.size() != pr.n) throw Error(ErrorKind::Dimension, "initial adjoint guess has wrong length");
  const int nz = pr.n + (pr.free_time ? 1 : 0);
  Vector z(nz);
  z.head(pr.n) = guess.p;
  if (pr.free_time) z(pr.n) = guess.T.value_or(pr.T);
  const double p0 = opt.abnormal ? 0.0 : -1.0;

  auto eval = [&](const Vector& zz, double& norm) -> Vector {
    if (pr.free_time && !(zz(pr.n) > 0)) {
      norm = INFINITY;
      return Vector();
    }
    try {
      Vector r = shooting_residual(pr, zz, opt);
      norm = r.allFinite() ? r.norm() : INFINITY;
      return r;
    } catch (const BlowupError&) {
      norm = INFINITY;
      return Vector();
    }
  };
  auto build = [&](const Vector& zz, const std::vector<double>& hist, int iters, bool ok) {
    auto u = split(pr, zz);
    Extremal e;
    try {
      e = integrate_extremal(pr, u.p, u.tf, p0, opt.steps);
      e.residual = terminal_residual(pr, e, opt.abnormal, u.p);
    } catch (const BlowupError&) {
      e.p0 = p0;
      e.tf = u.tf;
    }
    e.residual_history = hist;
    e.iterations = iters;
    e.converged = ok;
    return e;
  };

  double rn;
  Vector r = eval(z, rn);
  std::vector<double> hist{rn};
  if (!std::isfinite(rn)) throw ShootingError(build(z, hist, 0, false), "shooting: initial guess does not integrate");
  for (int it = 0; it < opt.newton_iters; ++it) {
    if (rn < opt.tol) return build(z, hist, it, true);
    Matrix J(r.size(), nz);
    for (int i = 0; i < nz; ++i) {
      Vector zz = z;
      double h = 1e-6 * (1 + std::abs(z(i)));
      zz(i) += h;
      double nn;
      Vector ri = eval(zz, nn);
      if (!std::isfinite(nn)) {
        zz(i) = z(i) - h;
        ri = eval(zz, nn);
        if (!std::isfinite(nn)) throw ShootingError(build(z, hist, it, false), "shooting: Jacobian probe blew up");
        J.col(i) = (r - ri) / h;
      } else {
        J.col(i) = (ri - r) / h;
      }
    }
    Vector dz = -J.completeOrthogonalDecomposition().solve(r);
    double alpha = 1.0;
    bool accepted = false;
    for (int half = 0; half <= 30; ++half) {
      Vector zt = z + alpha * dz;
      double nt;
      Vector rt = eval(zt, nt);
      if (nt < rn) {
        z = zt;
        r = rt;
        rn = nt;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    hist.push_back(rn);
    if (!accepted) {
      if (rn < opt.tol) return build(z, hist, it + 1, true);
      std::ostringstream os;
      os << "shooting stagnated at residual " << rn << " after " << it + 1 << " Newton steps";
      throw ShootingError(build(z, hist, it + 1, false), os.str());
    }
  }
  if (rn < opt.tol) return build(z, hist, opt.newton_iters, true);
  std::ostringstream os;
  os << "shooting did not converge: residual " << rn << " after " << opt.newton_iters << " Newton steps";
  throw ShootingError(build(z, hist, opt.newton_iters, false), os.str());
}

ExtremalDiagnostics check_extremal(const Extremal& e, const OcProblem& p) {
  ExtremalDiagnostics d;
  if (p.autonomous && !e.hamiltonian.empty()) {
    double mean = std::accumulate(e.hamiltonian.begin(), e.hamiltonian.end(), 0.0) / e.hamiltonian.size();
    for (double h : e.hamiltonian) d.hamiltonian_deviation = std::max(d.hamiltonian_deviation, std::abs(h - mean));
  }
  const int n = p.n;
  const Vector& x = e.state.back();
  const Vector& q = e.adjoint.back();
  Vector gx = p.g_x ? p.g_x(e.tf, x) : Vector(Vector::Zero(n));
  if (p.terminal == TerminalKind::Free) d.transversality = (q - e.p0 * gx).norm();
  if (p.terminal == TerminalKind::Manifold)
    d.transversality = (null_space(p.F_x(x)).transpose() * (q - e.p0 * gx)).norm();
  Vector q0(n + 1);
  q0.head(n) = e.adjoint.states.front();
  q0(n) = e.p0;
  d.nontriviality = q0.norm();
  if (p.free_time) {
    double gt = p.g_t ? p.g_t(e.tf, x) : 0.0;
    d.free_time_residual = std::abs(e.hamiltonian.back() + e.p0 * gt);
  }
  d.singular_arc = e.singular_arc;
  return d;
}

}  // namespace ctrl
