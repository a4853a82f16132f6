#include "ctrlkit/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ctrl {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::IntegrationBlowup: return "integration-blowup";
    case ErrorKind::Grid: return "grid";
    case ErrorKind::NotControllable: return "not-controllable";
    case ErrorKind::UnsupportedShape: return "unsupported-shape";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::EquilibriumViolation: return "equilibrium-violation";
    case ErrorKind::NotHurwitz: return "not-hurwitz";
    case ErrorKind::NormalizeFirst: return "normalize-first";
    case ErrorKind::ZeroLeading: return "zero-leading-coefficient";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::IllPosed: return "ill-posed";
    case ErrorKind::TimeDirection: return "time-direction";
    case ErrorKind::KTooLarge: return "k-too-large";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::Input: return "input";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

Vector Trajectory::at(double t) const {
  if (times.empty()) throw Error(ErrorKind::Grid, "empty trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  double w = (t - times[i]) / (times[i + 1] - times[i]);
  return (1.0 - w) * states[i] + w * states[i + 1];
}

void Trajectory::check() const {
  if (times.size() != states.size()) throw Error(ErrorKind::Dimension, "trajectory: times/states size mismatch");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw Error(ErrorKind::Grid, "trajectory: times not increasing");
  for (const auto& s : states) {
    if (s.size() != states.front().size()) throw Error(ErrorKind::Dimension, "trajectory: ragged states");
    if (!s.allFinite()) throw Error(ErrorKind::Numerical, "trajectory: non-finite state");
  }
}

void LtiSystem::check() const {
  if (A.rows() != A.cols()) throw Error(ErrorKind::Dimension, "A must be square");
  if (B.rows() != A.rows()) throw Error(ErrorKind::Dimension, "B must have as many rows as A");
  if (r && r->size() != A.rows()) throw Error(ErrorKind::Dimension, "drift r has wrong length");
  if (!all_finite(A) || !all_finite(B)) throw Error(ErrorKind::Numerical, "non-finite system matrix");
}

LtvSystem LtvSystem::from_lti(const LtiSystem& s) {
  s.check();
  LtvSystem v;
  v.n = s.n();
  v.m = s.m();
  Matrix A = s.A, B = s.B;
  v.A = [A](double) { return A; };
  v.B = [B](double) { return B; };
  v.dB = [B](double) { return Matrix::Zero(B.rows(), B.cols()); };
  if (s.r) {
    Vector r = *s.r;
    v.r = [r](double) { return r; };
  }
  v.constant_A = A;
  return v;
}

Matrix expm(const Matrix& M) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::Dimension, "expm: matrix not square");
  const Eigen::Index n = M.rows();
  if (n == 0) return M;
  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const double theta13 = 5.371920351148152;
  double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw Error(ErrorKind::Numerical, "expm: non-finite input");
  if (norm1 == 0.0) return Matrix::Identity(n, n);
  int s = 0;
  if (norm1 > theta13) s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
  Matrix A = M / std::ldexp(1.0, s);
  Matrix I = Matrix::Identity(n, n);
  Matrix A2 = A * A, A4 = A2 * A2, A6 = A4 * A2;
  Matrix U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  Matrix V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  Matrix R = (V - U).partialPivLu().solve(V + U);
  for (int k = 0; k < s; ++k) R = R * R;
  return R;
}

Vector rk4_step(const Rhs& f, double t, const Vector& x, double h) {
  Vector k1 = f(t, x);
  Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {
[[noreturn]] void blowup(double t) {
  std::ostringstream os;
  os.precision(17);
  os << "integration blowup at t=" << t;
  throw BlowupError(t, os.str());
}
}  // namespace

Trajectory integrate(const OdeProblem& p) {
  if (p.steps < 1) throw Error(ErrorKind::Grid, "integrate: steps must be >= 1");
  if (!p.x0.allFinite()) blowup(p.t0);
  Trajectory tr;
  tr.times.reserve(p.steps + 1);
  tr.states.reserve(p.steps + 1);
  const double h = (p.t1 - p.t0) / p.steps;
  Vector x = p.x0;
  tr.times.push_back(p.t0);
  tr.states.push_back(x);
  for (int k = 0; k < p.steps; ++k) {
    double t = p.t0 + k * h;
    x = rk4_step(p.rhs, t, x, h);
    double tn = (k + 1 == p.steps) ? p.t1 : p.t0 + (k + 1) * h;
    if (!x.allFinite()) blowup(tn);
    tr.times.push_back(tn);
    tr.states.push_back(x);
  }
  return tr;
}

Vector integrate_endpoint(const Rhs& f, double t0, const Vector& x0, double t1, int steps) {
  if (steps < 1) throw Error(ErrorKind::Grid, "integrate: steps must be >= 1");
  const double h = (t1 - t0) / steps;
  Vector x = x0;
  for (int k = 0; k < steps; ++k) {
    x = rk4_step(f, t0 + k * h, x, h);
    if (!x.allFinite()) blowup(t0 + (k + 1) * h);
  }
  return x;
}

Matrix transition_matrix(const LtvSystem& sys, double t, double s, int steps) {
  const int n = sys.n;
  if (t == s) return Matrix::Identity(n, n);
  if (sys.constant_A) return expm((t - s) * (*sys.constant_A));
  Rhs f = [&](double tau, const Vector& v) {
    Eigen::Map<const Matrix> R(v.data(), n, n);
    Matrix dR = sys.A(tau) * R;
    return Vector(Eigen::Map<const Vector>(dR.data(), n * n));
  };
  Matrix I = Matrix::Identity(n, n);
  Vector v0 = Eigen::Map<const Vector>(I.data(), n * n);
  Vector v = integrate_endpoint(f, s, v0, t, steps);
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

int numerical_rank(const Matrix& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++r;
  return r;
}

int numerical_rank(const CMatrix& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++r;
  return r;
}

std::vector<double> simpson_weights(int count, double step) {
  if (count < 3 || count % 2 == 0) throw Error(ErrorKind::Grid, "Simpson quadrature needs an odd sample count >= 3");
  std::vector<double> w(count);
  for (int i = 0; i < count; ++i) {
    double c = (i == 0 || i == count - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    w[i] = c * step / 3.0;
  }
  return w;
}

double quadrature(std::span<const double> samples, double step) {
  if (!(step > 0)) throw Error(ErrorKind::Grid, "quadrature: step must be positive");
  auto w = simpson_weights(static_cast<int>(samples.size()), step);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) acc += w[i] * samples[i];
  return acc;
}

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

bool all_finite(const Matrix& M) { return M.allFinite(); }

Matrix null_space(const Matrix& M, double rel_tol) {
  const Eigen::Index n = M.cols();
  if (M.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  int r = numerical_rank(M, rel_tol);
  return svd.matrixV().rightCols(n - r);
}

std::vector<Complex> eigenvalues(const Matrix& M) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::Dimension, "eigenvalues: matrix not square");
  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "eigenvalue solver failed");
  std::vector<Complex> out(es.eigenvalues().data(), es.eigenvalues().data() + M.rows());
  return out;
}

std::vector<Complex> poly_roots(const Vector& c) {
  if (c.size() == 0 || c(0) == 0.0) throw Error(ErrorKind::ZeroLeading, "poly_roots: zero leading coefficient");
  const Eigen::Index n = c.size() - 1;
  if (n == 0) return {};
  Matrix C = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) C(0, j) = -c(j + 1) / c(0);
  for (Eigen::Index i = 1; i < n; ++i) C(i, i - 1) = 1.0;
  return eigenvalues(C);
}

Vector poly_from_roots(const std::vector<Complex>& roots) {
  std::vector<Complex> p{1.0};
  for (const auto& r : roots) {
    std::vector<Complex> q(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      q[i] += p[i];
      q[i + 1] -= r * p[i];
    }
    p = std::move(q);
  }
  Vector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out(i) = p[i].real();
  return out;
}

namespace {
bool augment(int u, const std::vector<std::vector<int>>& adj, std::vector<int>& match, std::vector<char>& seen) {
  for (int v : adj[u]) {
    if (seen[v]) continue;
    seen[v] = 1;
    if (match[v] < 0 || augment(match[v], adj, match, seen)) {
      match[v] = u;
      return true;
    }
  }
  return false;
}
}  // namespace

double multiset_distance(std::vector<Complex> a, std::vector<Complex> b) {
  if (a.size() != b.size()) return INFINITY;
  const int n = static_cast<int>(a.size());
  if (n == 0) return 0.0;
  std::vector<double> cand;
  for (auto& x : a)
    for (auto& y : b) cand.push_back(std::abs(x - y));
  std::sort(cand.begin(), cand.end());
  // bottleneck matching: smallest threshold admitting a perfect matching
  std::size_t lo = 0, hi = cand.size() - 1;
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    double thr = cand[mid];
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (std::abs(a[i] - b[j]) <= thr) adj[i].push_back(j);
    std::vector<int> match(n, -1);
    int matched = 0;
    for (int i = 0; i < n; ++i) {
      std::vector<char> seen(n, 0);
      if (augment(i, adj, match, seen)) ++matched;
    }
    if (matched == n) hi = mid; else lo = mid + 1;
  }
  return cand[lo];
}

}  // namespace ctrl
