#include "ctrlkit/lincontrol.hpp"

#include <algorithm>
#include <cmath>

namespace ctrl {

Matrix kalman_matrix(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows(), m = B.cols();
  Matrix K(n, n * m);
  Matrix blk = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    K.middleCols(k * m, m) = blk;
    blk = A * blk;
  }
  return K;
}

KalmanReport kalman_test(const LtiSystem& sys, double tol) {
  sys.check();
  KalmanReport rep;
  rep.kalman_matrix = kalman_matrix(sys.A, sys.B);
  rep.rank = numerical_rank(rep.kalman_matrix, tol);
  rep.controllable = rep.rank == sys.n();
  rep.tolerance_used = tol;
  return rep;
}

HautusReport hautus_test(const LtiSystem& sys, double tol) {
  sys.check();
  const int n = sys.n(), m = sys.m();
  HautusReport rep;
  rep.controllable = true;
  for (const Complex& lam : eigenvalues(sys.A)) {
    CMatrix blk(n, n + m);
    blk.leftCols(n) = lam * CMatrix::Identity(n, n) - sys.A.cast<Complex>();
    blk.rightCols(m) = sys.B.cast<Complex>();
    int r = numerical_rank(blk, tol);
    rep.per_eigenvalue.push_back({lam, r});
    if (r != n) rep.controllable = false;
  }
  return rep;
}

Decomposition controllable_decomposition(const LtiSystem& sys, double tol) {
  sys.check();
  const int n = sys.n();
  Matrix K = kalman_matrix(sys.A, sys.B);
  Decomposition d;
  d.r = numerical_rank(K, tol);
  Eigen::JacobiSVD<Matrix> svd(K, Eigen::ComputeFullU);
  d.P = svd.matrixU().transpose();
  Matrix At = d.P * sys.A * d.P.transpose();
  Matrix Bt = d.P * sys.B;
  const int r = d.r;
  d.A1 = At.topLeftCorner(r, r);
  d.A3 = At.topRightCorner(r, n - r);
  d.A2 = At.bottomRightCorner(n - r, n - r);
  d.B1 = Bt.topRows(r);
  return d;
}

BrunovskiForm brunovski_form(const LtiSystem& sys, double tol) {
  sys.check();
  if (sys.m() != 1) throw Error(ErrorKind::UnsupportedShape, "brunovski_form: single-input systems only");
  const int n = sys.n();
  if (numerical_rank(kalman_matrix(sys.A, sys.B), tol) != n)
    throw Error(ErrorKind::NotControllable, "brunovski_form: pair is not controllable");
  BrunovskiForm bf;
  Vector chi = characteristic_polynomial(sys.A);
  bf.char_poly = chi.tail(n);
  Matrix F(n, n);
  F.col(n - 1) = sys.B.col(0);
  for (int k = n - 2; k >= 0; --k) F.col(k) = sys.A * F.col(k + 1) + bf.char_poly(n - 2 - k) * sys.B.col(0);
  bf.P = F.inverse();
  bf.companion = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) bf.companion(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) bf.companion(n - 1, j) = -bf.char_poly(n - 1 - j);
  return bf;
}

namespace {

// R(T, t_k) for t_k = k T / steps, k = 0..steps.
std::vector<Matrix> backward_transitions(const LtvSystem& sys, double T, int steps) {
  const int n = sys.n;
  std::vector<Matrix> R(steps + 1);
  R[steps] = Matrix::Identity(n, n);
  const double h = T / steps;
  if (sys.constant_A) {
    for (int k = steps - 1; k >= 0; --k) R[k] = expm((T - k * h) * (*sys.constant_A));
    return R;
  }
  // d/dt R(T,t) = -R(T,t) A(t)
  Rhs f = [&](double t, const Vector& v) {
    Eigen::Map<const Matrix> M(v.data(), n, n);
    Matrix d = -M * sys.A(t);
    return Vector(Eigen::Map<const Vector>(d.data(), n * n));
  };
  Vector v = Eigen::Map<const Vector>(R[steps].data(), n * n);
  for (int k = steps - 1; k >= 0; --k) {
    v = rk4_step(f, (k + 1) * h, v, -h);
    if (!v.allFinite()) throw BlowupError(k * h, "gramian: transition matrix blowup");
    R[k] = Eigen::Map<const Matrix>(v.data(), n, n);
  }
  return R;
}

void check_grid(double T, int steps) {
  if (!(T > 0)) throw Error(ErrorKind::Grid, "horizon T must be positive");
  if (steps < 2 || steps % 2) throw Error(ErrorKind::Grid, "Simpson needs an even number of intervals");
}

GramianReport finish_gramian(Matrix G, double T, double tol) {
  GramianReport rep;
  rep.T = T;
  rep.G = symmetrize(G);
  Eigen::SelfAdjointEigenSolver<Matrix> es(rep.G);
  rep.eigenvalues = es.eigenvalues();
  rep.C_T = rep.eigenvalues.size() ? rep.eigenvalues(0) : 0.0;
  rep.invertible = rep.C_T > tol;
  return rep;
}

}  // namespace

GramianReport gramian(const LtvSystem& sys, double T, int steps, double tol) {
  check_grid(T, steps);
  auto R = backward_transitions(sys, T, steps);
  auto w = simpson_weights(steps + 1, T / steps);
  Matrix G = Matrix::Zero(sys.n, sys.n);
  for (int k = 0; k <= steps; ++k) {
    Matrix RB = R[k] * sys.B(k * T / steps);
    G += w[k] * RB * RB.transpose();
  }
  return finish_gramian(G, T, tol);
}

GramianReport gramian(const LtiSystem& sys, double T, int steps, double tol) {
  return gramian(LtvSystem::from_lti(sys), T, steps, tol);
}

LtvKalmanReport ltv_kalman_test(const LtvSystem& sys, double t, int depth, double tol, bool allow_fd) {
  if (depth < 1) throw Error(ErrorKind::Configuration, "ltv_kalman_test: depth must be >= 1");
  if (!sys.dB && !allow_fd)
    throw Error(ErrorKind::Configuration, "ltv_kalman_test: dB/dt not supplied and finite differences disabled");
  using MFun = std::function<Matrix(double)>;
  const int n = sys.n, m = sys.m;
  auto stack = [&](double scale) {
    auto fd = [scale](MFun f) -> MFun {
      return [f, scale](double s) {
        double h = scale * std::max(1.0, std::abs(s));
        return Matrix((-f(s + 2 * h) + 8.0 * f(s + h) - 8.0 * f(s - h) + f(s - 2 * h)) / (12.0 * h));
      };
    };
    MFun Bk = sys.B;
    MFun dBk = sys.dB ? sys.dB : fd(sys.B);
    Matrix cols(n, (depth + 1) * m);
    cols.leftCols(m) = Bk(t);
    for (int k = 1; k <= depth; ++k) {
      MFun A = sys.A, prev = Bk, dprev = dBk;
      Bk = [A, prev, dprev](double s) { return Matrix(A(s) * prev(s) - dprev(s)); };
      dBk = fd(Bk);
      cols.middleCols(k * m, m) = Bk(t);
    }
    return cols;
  };
  // nested differences amplify rounding; singular values below the step-to-step discrepancy are not trusted
  Matrix cols = stack(1e-3), coarse = stack(2e-3);
  double noise = (cols - coarse).norm();
  Eigen::JacobiSVD<Matrix> svd(cols);
  const auto& sv = svd.singularValues();
  double cut = sv.size() ? std::max(tol * sv(0), 10 * noise) : 0;
  LtvKalmanReport rep;
  rep.columns = cols;
  rep.rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rep.rank += sv(i) > cut;
  rep.satisfied = rep.rank == n;
  return rep;
}

Vector lie_bracket(const VectorField& X, const VectorField& Y, const Vector& x) {
  return Y.jacobian(x) * X.value(x) - X.jacobian(x) * Y.value(x);
}

VectorField bracket_field(const VectorField& X, const VectorField& Y, double h) {
  VectorField Z;
  Z.value = [X, Y](const Vector& x) { return lie_bracket(X, Y, x); };
  auto val = Z.value;
  Z.jacobian = [val, h](const Vector& x) {
    const Eigen::Index n = x.size();
    Matrix J(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      J.col(i) = (val(xp) - val(xm)) / (2 * h);
    }
    return J;
  };
  return Z;
}

LarcReport larc_rank(const VectorFieldSet& fs, const Vector& x, int depth, double tol) {
  if (depth < 1) throw Error(ErrorKind::Configuration, "larc_rank: depth must be >= 1");
  std::vector<VectorField> all = fs.fields;
  std::vector<VectorField> level = fs.fields;
  for (int d = 2; d <= depth; ++d) {
    std::vector<VectorField> next;
    for (std::size_t i = 0; i < fs.fields.size(); ++i)
      for (std::size_t j = 0; j < level.size(); ++j) {
        // at length 2 only i < j is new; longer brackets are left-normed [f_i, Y]
        if (d == 2 && j <= i) continue;
        next.push_back(bracket_field(fs.fields[i], level[j]));
      }
    all.insert(all.end(), next.begin(), next.end());
    level = std::move(next);
  }
  Matrix cols(fs.n, static_cast<Eigen::Index>(all.size()));
  for (std::size_t k = 0; k < all.size(); ++k) cols.col(k) = all[k].value(x);
  LarcReport rep;
  rep.brackets = static_cast<int>(all.size());
  rep.rank = numerical_rank(cols, tol);
  rep.satisfied = rep.rank == fs.n;
  return rep;
}

Vector simulate_sampled(const LtvSystem& sys, const Vector& x0, double T, const std::vector<Vector>& u) {
  const int nodes = static_cast<int>(u.size());
  if (nodes < 3 || nodes % 2 == 0) throw Error(ErrorKind::Grid, "sampled control needs an odd node count");
  const int half = (nodes - 1) / 2;
  const double H = T / half;
  Vector x = x0;
  for (int k = 0; k < half; ++k) {
    double t = k * H;
    auto f = [&](double s, const Vector& y, const Vector& uu) {
      Vector d = sys.A(s) * y + sys.B(s) * uu;
      if (sys.r) d += sys.r(s);
      return d;
    };
    const Vector &u0 = u[2 * k], &um = u[2 * k + 1], &u1 = u[2 * k + 2];
    Vector k1 = f(t, x, u0);
    Vector k2 = f(t + H / 2, x + H / 2 * k1, um);
    Vector k3 = f(t + H / 2, x + H / 2 * k2, um);
    Vector k4 = f(t + H, x + H * k3, u1);
    x += H / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!x.allFinite()) throw BlowupError(t + H, "re-simulation blowup");
  }
  return x;
}

HumFinite hum_control_finite(const LtvSystem& sys, double T, const Vector& x0, const Vector& x1, int steps,
                             double tol) {
  check_grid(T, steps);
  if (x0.size() != sys.n || x1.size() != sys.n) throw Error(ErrorKind::Dimension, "hum: endpoint dimension");
  auto R = backward_transitions(sys, T, steps);
  auto w = simpson_weights(steps + 1, T / steps);
  const double h = T / steps;
  Matrix G = Matrix::Zero(sys.n, sys.n);
  Vector drift = Vector::Zero(sys.n);
  std::vector<Matrix> RB(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    RB[k] = R[k] * sys.B(k * h);
    G += w[k] * RB[k] * RB[k].transpose();
    if (sys.r) drift += w[k] * R[k] * sys.r(k * h);
  }
  HumFinite out;
  out.gramian = finish_gramian(G, T, tol);
  if (!out.gramian.invertible) throw Error(ErrorKind::NotControllable, "hum: Gramian is singular");
  out.x_star = R[0] * x0 + drift;
  out.psi = out.gramian.G.ldlt().solve(x1 - out.x_star);
  out.cost = out.psi.dot(out.gramian.G * out.psi);
  out.times.resize(steps + 1);
  out.u.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    out.times[k] = k * h;
    out.u[k] = RB[k].transpose() * out.psi;
  }
  out.endpoint = simulate_sampled(sys, x0, T, out.u);
  out.endpoint_error = (out.endpoint - x1).norm();
  return out;
}

HumFinite hum_control_finite(const LtiSystem& sys, double T, const Vector& x0, const Vector& x1, int steps,
                             double tol) {
  return hum_control_finite(LtvSystem::from_lti(sys), T, x0, x1, steps, tol);
}

}  // namespace ctrl
