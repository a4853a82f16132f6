#include "ctrlkit/stabilize.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "ctrlkit/lincontrol.hpp"

namespace ctrl {

RouthReport routh(const Vector& p) {
  if (p.size() == 0 || p(0) == 0.0) throw Error(ErrorKind::ZeroLeading, "routh: zero leading coefficient");
  const int n = static_cast<int>(p.size()) - 1;
  const int w = n / 2 + 1;
  const double zero = 1e-12 * p.cwiseAbs().maxCoeff();
  std::vector<double> r0(w, 0.0), r1(w, 0.0);
  for (int i = 0; i <= n; ++i) (i % 2 ? r1 : r0)[i / 2] = p(i);
  RouthReport rep;
  rep.table.push_back(r0);
  rep.complete = true;
  if (n >= 1) rep.table.push_back(r1);
  for (int row = 2; row <= n; ++row) {
    const auto& a = rep.table[row - 2];
    const auto& b = rep.table[row - 1];
    if (std::abs(b[0]) <= zero) {
      rep.complete = false;
      break;
    }
    std::vector<double> c(w, 0.0);
    for (int j = 0; j + 1 < w; ++j) c[j] = (b[0] * a[j + 1] - a[0] * b[j + 1]) / b[0];
    rep.table.push_back(c);
  }
  if (rep.complete && std::abs(rep.table.back()[0]) <= zero) rep.complete = false;
  rep.first_column.resize(static_cast<Eigen::Index>(rep.table.size()));
  for (std::size_t i = 0; i < rep.table.size(); ++i) rep.first_column(i) = rep.table[i][0];
  if (rep.complete) {
    for (Eigen::Index i = 1; i < rep.first_column.size(); ++i)
      if ((rep.first_column(i) > 0) != (rep.first_column(i - 1) > 0)) ++rep.sign_changes;
    rep.hurwitz = rep.sign_changes == 0;
  }
  return rep;
}

HurwitzReport hurwitz(const Vector& p) {
  if (p.size() == 0 || !(p(0) > 0)) throw Error(ErrorKind::NormalizeFirst, "hurwitz: leading coefficient must be positive");
  const int n = static_cast<int>(p.size()) - 1;
  auto a = [&](int k) { return (k < 0 || k > n) ? 0.0 : p(k); };
  Matrix H(n, n);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) H(i - 1, j - 1) = a(2 * j - i);
  HurwitzReport rep;
  rep.minors.resize(n);
  rep.hurwitz = true;
  for (int i = 1; i <= n; ++i) {
    rep.minors(i - 1) = H.topLeftCorner(i, i).determinant();
    if (!(rep.minors(i - 1) > 0)) rep.hurwitz = false;
  }
  return rep;
}

namespace {

// Single-input placement on (A0, b). The coefficients of chi_{A0 + b k} are affine in k,
// so the residual measured in extended precision is fed back through P a few times.
Matrix place_single(const LtiSystem& sys, const Vector& target, const Matrix& Bfull, const Vector& y,
                    const Matrix& K0) {
  auto bf = brunovski_form(sys);
  const int n = sys.n();
  Matrix Kt(1, n);
  for (int i = 1; i <= n; ++i) Kt(0, i - 1) = bf.char_poly(n - i) - target(n + 1 - i);
  Matrix K1 = Kt * bf.P;
  auto residual = [&](const Matrix& k1) {
    Matrix K = K0 + y * k1;
    return Vector(characteristic_polynomial(Matrix(sys.A - Bfull * K0), Bfull, K).tail(n) - target.tail(n));
  };
  Vector d = residual(K1);
  for (int it = 0; it < 3 && d.cwiseAbs().maxCoeff() > 0; ++it) {
    Matrix dk(1, n);
    for (int i = 1; i <= n; ++i) dk(0, i - 1) = d(n - i);
    Matrix cand = K1 + dk * bf.P;
    Vector dc = residual(cand);
    if (!(dc.cwiseAbs().maxCoeff() < d.cwiseAbs().maxCoeff())) break;
    K1 = cand;
    d = dc;
  }
  return K1;
}

// Eigenvector assignment for m > 1: each target root gets an eigenvector from the kernel of
// [A - s I, B], and the choice is swept to keep the eigenvector matrix well conditioned.
std::optional<Matrix> place_eigenvectors(const LtiSystem& sys, std::vector<Complex> roots) {
  const int n = sys.n(), m = sys.m();
  std::sort(roots.begin(), roots.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() > b.imag();
  });
  std::vector<CMatrix> Z(n);
  std::vector<Eigen::HouseholderQR<CMatrix>> qr(n);
  std::vector<int> partner(n, -1);
  for (int i = 0; i < n; ++i) {
    if (roots[i].imag() < 0 && i > 0 && std::abs(roots[i] - std::conj(roots[i - 1])) < 1e-9 * (1 + std::abs(roots[i])))
      partner[i] = i - 1;
    CMatrix M(n, n + m);
    M.leftCols(n) = sys.A.cast<Complex>() - roots[i] * CMatrix::Identity(n, n);
    M.rightCols(m) = sys.B.cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(M, Eigen::ComputeFullV);
    Z[i] = svd.matrixV().rightCols(m);
    qr[i].compute(Z[i].topRows(n));
  }
  auto coords = [&](int i, const CVector& target) {
    // c minimizing |Z_top c - target|, normalized so that the eigenvector has unit length
    CVector c = qr[i].solve(target);
    double norm = (Z[i].topRows(n) * c).norm();
    if (!(norm > 0)) return CVector(CVector::Zero(m));
    return CVector(c / norm);
  };
  CMatrix C(m, n), V(n, n);
  for (int i = 0; i < n; ++i) {
    int same = 0;
    for (int j = 0; j < i; ++j) same += std::abs(roots[j] - roots[i]) < 1e-9 * (1 + std::abs(roots[i]));
    if (same >= m) return std::nullopt;
    CVector e = qr[i].householderQ() * CVector::Unit(n, same);
    C.col(i) = coords(i, e);
    V.col(i) = Z[i].topRows(n) * C.col(i);
  }
  for (int sweep = 0; sweep < 30; ++sweep)
    for (int i = 0; i < n; ++i) {
      if (partner[i] >= 0) continue;
      CMatrix others(n, n - 1);
      for (int j = 0, c = 0; j < n; ++j)
        if (j != i) others.col(c++) = V.col(j);
      Eigen::JacobiSVD<CMatrix> svd(others, Eigen::ComputeFullU);
      CVector y = svd.matrixU().col(n - 1);
      CVector c = coords(i, y);
      if (c.norm() == 0) continue;
      C.col(i) = c;
      V.col(i) = Z[i].topRows(n) * c;
      if (i + 1 < n && partner[i + 1] == i) {
        C.col(i + 1) = C.col(i).conjugate();
        V.col(i + 1) = V.col(i).conjugate();
      }
    }
  for (int i = 0; i < n; ++i)
    if (partner[i] >= 0) {
      C.col(i) = C.col(partner[i]).conjugate();
      V.col(i) = V.col(partner[i]).conjugate();
    }
  CMatrix W(m, n);
  for (int i = 0; i < n; ++i) W.col(i) = Z[i].bottomRows(m) * C.col(i);
  Eigen::FullPivLU<CMatrix> lu(V);
  if (!lu.isInvertible()) return std::nullopt;
  CMatrix K = W * lu.inverse();
  if (!K.allFinite()) return std::nullopt;
  return Matrix(K.real());
}

// Newton steps on the closed-loop spectrum: first-order eigenvalue shifts are linear in the gain
// correction, w_i B dK v_i / (w_i v_i), and the minimum-norm real dK is taken.
Matrix refine_spectrum(const LtiSystem& sys, Matrix K, const std::vector<Complex>& roots, const Vector& target) {
  const int n = sys.n(), m = sys.m();
  auto spectrum_err = [&](const Matrix& k) { return multiset_distance(eigenvalues_extended(sys.A, sys.B, k), roots); };
  auto coeff_err = [&](const Matrix& k) {
    return (characteristic_polynomial(sys.A, sys.B, k) - target).cwiseAbs().maxCoeff();
  };
  double err = spectrum_err(K), cerr = coeff_err(K);
  for (int it = 0; it < 4 && err > 0; ++it) {
    Matrix Acl = sys.A + sys.B * K;
    Eigen::ComplexEigenSolver<CMatrix> es(Acl.cast<Complex>());
    CMatrix V = es.eigenvectors();
    Eigen::FullPivLU<CMatrix> lu(V);
    if (!lu.isInvertible()) break;
    CMatrix Wl = lu.inverse();
    auto lam = eigenvalues_extended(sys.A, sys.B, K);
    // pair each computed eigenvalue (double) with its extended value and its target root
    std::vector<bool> used_ext(n, false), used_root(n, false);
    Matrix J(2 * n, m * n);
    Vector rhs(2 * n);
    for (int i = 0; i < n; ++i) {
      Complex z = es.eigenvalues()(i);
      int be = -1, br = -1;
      for (int j = 0; j < n; ++j) {
        if (!used_ext[j] && (be < 0 || std::abs(lam[j] - z) < std::abs(lam[be] - z))) be = j;
      }
      used_ext[be] = true;
      for (int j = 0; j < n; ++j)
        if (!used_root[j] && (br < 0 || std::abs(roots[j] - lam[be]) < std::abs(roots[br] - lam[be]))) br = j;
      used_root[br] = true;
      Complex d = roots[br] - lam[be];
      CVector wb = (Wl.row(i) * sys.B.cast<Complex>()).transpose();
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < n; ++b) {
          Complex g = wb(a) * V(b, i);
          J(2 * i, a * n + b) = g.real();
          J(2 * i + 1, a * n + b) = g.imag();
        }
      rhs(2 * i) = d.real();
      rhs(2 * i + 1) = d.imag();
    }
    Vector dk = J.completeOrthogonalDecomposition().solve(rhs);
    Matrix cand = K;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < n; ++b) cand(a, b) += dk(a * n + b);
    double cand_err = spectrum_err(cand), cand_cerr = coeff_err(cand);
    if (!(cand_err < err) || !(cand_cerr <= std::max(cerr, 1e-12 * target.cwiseAbs().maxCoeff()))) break;
    K = cand;
    err = cand_err;
    cerr = cand_cerr;
  }
  return K;
}

// roots of a monic target; clustered roots are only resolved in extended precision
std::vector<Complex> target_roots(const Vector& target) {
  const Eigen::Index n = target.size() - 1;
  Matrix C = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) C(0, j) = -target(j + 1);
  for (Eigen::Index i = 1; i < n; ++i) C(i, i - 1) = 1.0;
  return eigenvalues_extended(C);
}

double min_sv_normalized(const Matrix& X) {
  Matrix Y = X;
  for (Eigen::Index j = 0; j < Y.cols(); ++j) Y.col(j).normalize();
  return Eigen::JacobiSVD<Matrix>(Y).singularValues().minCoeff();
}

}  // namespace

PolePlacement pole_place(const LtiSystem& sys, const Vector& target_in, double tol) {
  sys.check();
  const int n = sys.n(), m = sys.m();
  if (target_in.size() != n + 1) throw Error(ErrorKind::Dimension, "pole_place: target degree must equal n");
  if (target_in(0) == 0.0) throw Error(ErrorKind::ZeroLeading, "pole_place: zero leading coefficient");
  Vector target = target_in / target_in(0);
  if (numerical_rank(kalman_matrix(sys.A, sys.B)) != n)
    throw Error(ErrorKind::NotControllable, "pole_place: pair is not controllable");
  PolePlacement out;
  if (m == 1) {
    out.K = place_single(sys, target, sys.B, Vector::Ones(1), Matrix::Zero(1, n));
    out.method = "single-input";
  } else {
    // reduce to a single input: x1 = B y, x_{k+1} = A x_k + B y_k
    Vector y = Vector::Zero(m);
    for (int i = 0; i < m; ++i)
      if (sys.B.col(i).norm() > 0) {
        y(i) = 1.0;
        break;
      }
    Matrix X(n, n), Y = Matrix::Zero(m, n);
    X.col(0) = sys.B * y;
    for (int k = 1; k < n; ++k) {
      double best = -1.0;
      Vector best_y = Vector::Zero(m);
      for (int c = -1; c < m; ++c) {
        Vector yc = Vector::Zero(m);
        if (c >= 0) yc(c) = 1.0;
        Vector cand = sys.A * X.col(k - 1) + sys.B * yc;
        if (cand.norm() == 0.0) continue;
        Matrix trial(n, k + 1);
        trial.leftCols(k) = X.leftCols(k);
        trial.col(k) = cand;
        double s = min_sv_normalized(trial);
        if (s > best * (1 + 1e-12)) {
          best = s;
          best_y = yc;
        }
      }
      Y.col(k - 1) = best_y;
      X.col(k) = sys.A * X.col(k - 1) + sys.B * best_y;
    }
    Matrix C = Y * X.inverse();
    LtiSystem reduced{sys.A + sys.B * C, sys.B * y, {}};
    Matrix K1 = place_single(reduced, target, sys.B, y, C);
    out.K = C + y * K1;
    out.y = y;
    out.method = "reduction";
    // the reduction can be badly conditioned; keep the eigenvector assignment when it lands closer
    auto roots = target_roots(target);
    if (auto Ke = place_eigenvectors(sys, roots)) {
      double reduced_err = multiset_distance(eigenvalues_extended(sys.A, sys.B, out.K), roots);
      double eig_err = multiset_distance(eigenvalues_extended(sys.A, sys.B, *Ke), roots);
      if (eig_err < reduced_err) {
        out.K = *Ke;
        out.y = Vector();
        out.method = "eigenvector";
      }
    }
  }
  out.K = refine_spectrum(sys, out.K, target_roots(target), target);
  out.closed_loop = eigenvalues_extended(sys.A, sys.B, out.K);
  out.closed_loop_poly = characteristic_polynomial(sys.A, sys.B, out.K);
  out.coeff_residual = (out.closed_loop_poly - target).cwiseAbs().maxCoeff();
  if (!(out.coeff_residual <= tol * (1.0 + target.cwiseAbs().maxCoeff()))) {
    std::ostringstream os;
    os << "pole_place: closed-loop polynomial misses target by " << out.coeff_residual;
    throw Error(ErrorKind::Numerical, os.str());
  }
  return out;
}

Matrix lyapunov_solve(const Matrix& A) {
  if (A.rows() != A.cols()) throw Error(ErrorKind::Dimension, "lyapunov_solve: A not square");
  const Eigen::Index n = A.rows();
  for (const auto& z : eigenvalues(A))
    if (!(z.real() < 0)) throw Error(ErrorKind::NotHurwitz, "lyapunov_solve: A is not Hurwitz");
  Matrix I = Matrix::Identity(n, n);
  Matrix L = Matrix::Zero(n * n, n * n);
  // column-major vec: vec(A^T P) = (I kron A^T) vec P, vec(P A) = (A^T kron I) vec P
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      L.block(i * n, j * n, n, n) += (i == j ? 1.0 : 0.0) * A.transpose();
      L.block(i * n, j * n, n, n) += A(j, i) * I;
    }
  Vector rhs = -Eigen::Map<const Vector>(I.data(), n * n);
  Vector v = L.partialPivLu().solve(rhs);
  return symmetrize(Eigen::Map<const Matrix>(v.data(), n, n));
}

namespace {
void require_equilibrium(const Dynamics& f, const Vector& xbar, const Vector& ubar, double eq_tol) {
  double res = f(xbar, ubar).norm();
  if (!(res <= eq_tol)) {
    std::ostringstream os;
    os << "linearize: not an equilibrium, |f(x,u)| = " << res;
    throw EquilibriumError(res, os.str());
  }
}
}  // namespace

LtiSystem linearize(const Dynamics& f, const DynamicsJacobian& jac, const Vector& xbar, const Vector& ubar,
                    double eq_tol) {
  require_equilibrium(f, xbar, ubar, eq_tol);
  LtiSystem s = jac(xbar, ubar);
  if (s.A.rows() != xbar.size() || s.A.cols() != xbar.size() || s.B.rows() != xbar.size() || s.B.cols() != ubar.size())
    throw Error(ErrorKind::Dimension, "linearize: jacobian shape mismatch");
  return s;
}

LtiSystem linearize(const Dynamics& f, const Vector& xbar, const Vector& ubar, double eq_tol) {
  require_equilibrium(f, xbar, ubar, eq_tol);
  const Eigen::Index n = xbar.size(), m = ubar.size();
  auto d4 = [](auto&& g, double v, double h) {
    return Vector((-g(v + 2 * h) + 8.0 * g(v + h) - 8.0 * g(v - h) + g(v - 2 * h)) / (12.0 * h));
  };
  LtiSystem s;
  s.A.resize(n, n);
  s.B.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    double h = 1e-5 * std::max(1.0, std::abs(xbar(i)));
    auto g = [&](double v) { Vector x = xbar; x(i) = v; return f(x, ubar); };
    s.A.col(i) = d4(g, xbar(i), h);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    double h = 1e-5 * std::max(1.0, std::abs(ubar(i)));
    auto g = [&](double v) { Vector u = ubar; u(i) = v; return f(xbar, u); };
    s.B.col(i) = d4(g, ubar(i), h);
  }
  return s;
}

FeedbackLaw jurdjevic_quinn_feedback(std::vector<Field> g, Field grad_V, std::optional<double> saturation) {
  return [g = std::move(g), grad_V = std::move(grad_V), saturation](const Vector& x) {
    Vector dV = grad_V(x);
    Vector u(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = -dV.dot(g[i](x));
      if (saturation) v = std::clamp(v, -*saturation, *saturation);
      u(i) = v;
    }
    return u;
  };
}

Dynamics control_affine(Field drift, std::vector<Field> g) {
  return [drift = std::move(drift), g = std::move(g)](const Vector& x, const Vector& u) {
    Vector d = drift(x);
    for (std::size_t i = 0; i < g.size(); ++i) d += u(i) * g[i](x);
    return d;
  };
}

ClosedLoopRun simulate_closed_loop(const Dynamics& f, const FeedbackLaw& law, const Vector& x0, double T, int steps,
                                   const ScalarField& V) {
  OdeProblem p;
  p.rhs = [&](double, const Vector& x) { return f(x, law(x)); };
  p.x0 = x0;
  p.t1 = T;
  p.steps = steps;
  ClosedLoopRun run;
  run.traj = integrate(p);
  for (const auto& x : run.traj.states) {
    run.u.push_back(law(x));
    if (V) run.V.push_back(V(x));
  }
  return run;
}

}  // namespace ctrl
