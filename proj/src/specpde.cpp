#include "ctrlkit/specpde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctrlkit/errors.hpp"
#include "ctrlkit/lincontrol.hpp"
#include "ctrlkit/stabilize.hpp"
#include "extended.hpp"

namespace ctrl::pde {

using std::numbers::pi;

SineBasis::SineBasis(double L_, int N_) : L(L_), N(N_) {
  if (!(L > 0) || !std::isfinite(L)) throw InputError("L", "interval length must be positive");
  if (N < 1) throw InputError("N", "mode count must be at least 1");
}

double SineBasis::freq(int j) const { return j * pi / L; }
double SineBasis::mu(int j) const { return freq(j) * freq(j); }
double SineBasis::norm() const { return std::sqrt(2.0 / L); }

Vector SineBasis::mus() const {
  Vector m(N);
  for (int j = 1; j <= N; ++j) m(j - 1) = mu(j);
  return m;
}

WaveState WaveState::zero(int N) { return {Vector::Zero(N), Vector::Zero(N)}; }

WaveState WaveState::mode(int N, int j) {
  WaveState s = zero(N);
  s.a(j - 1) = 1.0;
  return s;
}

double IntervalUnion::measure() const {
  double m = 0;
  for (auto& [lo, hi] : parts) m += hi - lo;
  return m;
}

void IntervalUnion::check(double L) const {
  double prev = 0.0;
  for (auto& [lo, hi] : parts) {
    if (!(lo < hi)) throw InputError("omega", "interval endpoints must satisfy lo < hi");
    if (lo < prev || hi > L) throw InputError("omega", "intervals must be sorted, disjoint and inside (0, L)");
    prev = hi;
  }
}

namespace {

void check_state(const SineBasis& basis, const WaveState& s) {
  if (s.a.size() != basis.N || s.b.size() != basis.N)
    throw Error(ErrorKind::Dimension, "wave state size does not match the basis");
}

void check_steps(int steps) {
  if (steps < 2 || steps % 2) throw Error(ErrorKind::Grid, "Simpson quadrature needs an even positive step count");
}

// Antiderivative of sin(p pi x / L) sin(q pi x / L).
double sin_product_primitive(int p, int q, double L, double x) {
  if (p == q) return x / 2 - L / (4 * p * pi) * std::sin(2 * p * pi * x / L);
  int d = p - q, s = p + q;
  return 0.5 * (L / (d * pi) * std::sin(d * pi * x / L) - L / (s * pi) * std::sin(s * pi * x / L));
}

Matrix product_matrix(const IntervalUnion& omega, int N, double L) {
  Matrix M(N, N);
  for (int j = 1; j <= N; ++j)
    for (int k = j; k <= N; ++k) M(j - 1, k - 1) = M(k - 1, j - 1) = sin_product(omega, j, k, L);
  return M;
}

// Generator of the free wave on (a, b): a' = w b, b' = -w a.
Matrix rotation_generator(const SineBasis& basis) {
  const int N = basis.N;
  Matrix R = Matrix::Zero(2 * N, 2 * N);
  for (int j = 1; j <= N; ++j) {
    R(j - 1, N + j - 1) = basis.freq(j);
    R(N + j - 1, j - 1) = -basis.freq(j);
  }
  return R;
}

Vector stack(const WaveState& s) {
  Vector x(s.a.size() * 2);
  x << s.a, s.b;
  return x;
}

WaveState unstack(const Vector& x) {
  const auto N = x.size() / 2;
  return {x.head(N), x.tail(N)};
}

// S(s) c with c the boundary trace vector ((-1)^j, 0).
Vector boundary_profile(const SineBasis& basis, double s) {
  const int N = basis.N;
  Vector v(2 * N);
  for (int j = 1; j <= N; ++j) {
    double sign = j % 2 ? -1.0 : 1.0, w = basis.freq(j) * s;
    v(j - 1) = sign * std::cos(w);
    v(N + j - 1) = -sign * std::sin(w);
  }
  return v;
}

Vector pivot_weight(const SineBasis& basis, Pivot pivot) {
  const int N = basis.N;
  Vector w(2 * N);
  for (int j = 1; j <= N; ++j) {
    double v = pivot == Pivot::H10xL2 ? basis.L / 2 : basis.L / 2 / basis.mu(j);
    w(j - 1) = w(N + j - 1) = v;
  }
  return w;
}

}  // namespace

Vector heat_evolve(const SineBasis& basis, const Vector& coeffs, double t) {
  if (t < 0) throw Error(ErrorKind::TimeDirection, "heat evolution is only defined forward in time");
  if (coeffs.size() != basis.N) throw Error(ErrorKind::Dimension, "coefficient count does not match the basis");
  Vector out = coeffs;
  if (t == 0) return out;
  for (int j = 1; j <= basis.N; ++j) out(j - 1) *= std::exp(-basis.mu(j) * t);
  return out;
}

WaveState wave_evolve(const SineBasis& basis, const WaveState& s, double t) {
  check_state(basis, s);
  WaveState out = s;
  if (t == 0) return out;
  for (int j = 1; j <= basis.N; ++j) {
    double c = std::cos(basis.freq(j) * t), sn = std::sin(basis.freq(j) * t);
    out.a(j - 1) = s.a(j - 1) * c + s.b(j - 1) * sn;
    out.b(j - 1) = -s.a(j - 1) * sn + s.b(j - 1) * c;
  }
  return out;
}

double wave_energy(const SineBasis& basis, const WaveState& s) {
  check_state(basis, s);
  return basis.L / 2 * s.coefficient_energy();
}

double boundary_observation_energy(const SineBasis& basis, const WaveState& s, double T, int steps) {
  check_state(basis, s);
  if (!(T > 0)) throw InputError("T", "observation time must be positive");
  check_steps(steps);
  const double h = T / steps;
  auto w = simpson_weights(steps + 1, h);
  double total = 0;
  for (int k = 0; k <= steps; ++k) {
    double t = k * h, trace = 0;
    for (int j = 1; j <= basis.N; ++j) {
      double sign = j % 2 ? -1.0 : 1.0, arg = basis.freq(j) * t;
      trace += sign * (s.a(j - 1) * std::cos(arg) + s.b(j - 1) * std::sin(arg));
    }
    total += w[k] * trace * trace;
  }
  return total;
}

double sin_product(const IntervalUnion& omega, int j, int k, double L) {
  double total = 0;
  for (auto& [lo, hi] : omega.parts)
    total += sin_product_primitive(j, k, L, hi) - sin_product_primitive(j, k, L, lo);
  return total;
}

double sin2_mass(const IntervalUnion& omega, int j, const SineBasis& basis) {
  omega.check(basis.L);
  return sin_product(omega, j, j, basis.L);
}

double sin2_lower_bound(double measure, double L) { return 0.5 * (measure - L / pi * std::sin(pi * measure / L)); }

IntervalUnion sin2_optimal_set(double measure, int j, double L) {
  if (!(measure > 0) || measure > L) throw InputError("measure", "must lie in (0, L]");
  if (j < 1) throw InputError("j", "mode index starts at 1");
  const double r = measure / (2 * j);
  IntervalUnion out;
  out.parts.emplace_back(0.0, r);
  for (int k = 1; k < j; ++k) out.parts.emplace_back(k * L / j - r, k * L / j + r);
  out.parts.emplace_back(L - r, L);
  return out;
}

double internal_wave_observation(const SineBasis& basis, const WaveState& s, const IntervalUnion& omega, double T,
                                 int steps) {
  check_state(basis, s);
  omega.check(basis.L);
  if (!(T > 0)) throw InputError("T", "observation time must be positive");
  check_steps(steps);
  const Matrix M = product_matrix(omega, basis.N, basis.L);
  const double h = T / steps;
  auto w = simpson_weights(steps + 1, h);
  double total = 0;
  Vector c(basis.N);
  for (int k = 0; k <= steps; ++k) {
    double t = k * h;
    for (int j = 1; j <= basis.N; ++j) {
      double arg = basis.freq(j) * t;
      c(j - 1) = s.a(j - 1) * std::cos(arg) + s.b(j - 1) * std::sin(arg);
    }
    total += w[k] * c.dot(M * c);
  }
  return total;
}

WaveGramian wave_boundary_gramian(const SineBasis& basis, double T, int steps, Pivot pivot) {
  if (!(T > 0)) throw InputError("T", "control time must be positive");
  check_steps(steps);
  const int n2 = 2 * basis.N;
  const double h = T / steps;
  auto w = simpson_weights(steps + 1, h);
  WaveGramian out;
  out.G = Matrix::Zero(n2, n2);
  for (int k = 0; k <= steps; ++k) {
    Vector v = boundary_profile(basis, k * h);
    out.G.noalias() += w[k] * v * v.transpose();
  }
  out.G = symmetrize(out.G);
  out.weight = pivot_weight(basis, pivot);
  Vector s = out.weight.cwiseSqrt().cwiseInverse();
  Matrix scaled = s.asDiagonal() * out.G * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(scaled, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues()(0), hi = es.eigenvalues()(n2 - 1);
  out.min_singular = std::max(lo, 0.0);
  out.condition = lo > 0 ? hi / lo : INFINITY;
  return out;
}

HumWaveResult hum_wave_boundary(const SineBasis& basis, const WaveState& y0, const WaveState& y1, double T,
                                const HumWaveOptions& opt) {
  check_state(basis, y0);
  check_state(basis, y1);
  auto gram = wave_boundary_gramian(basis, T, opt.steps, opt.pivot);
  if (T < 2 * basis.L && !opt.force)
    throw IllPosedError(gram.min_singular, gram.condition,
                        "control time below 2L: boundary observability is lost (use force to override)");
  if (!(gram.condition <= opt.max_condition))
    throw IllPosedError(gram.min_singular, gram.condition, "wave Gramian is numerically singular");

  const int N = basis.N, n2 = 2 * N;
  const Vector W = gram.weight;
  const Vector d = stack(y1) - stack(wave_evolve(basis, y0, T));
  // G z = d with G = W^-1 G_E, solved through the pivot-scaled symmetric form
  Vector s = W.cwiseSqrt();
  Matrix scaled = s.cwiseInverse().asDiagonal() * gram.G * s.cwiseInverse().asDiagonal();
  Vector zvec = s.cwiseInverse().asDiagonal() * scaled.ldlt().solve(s.asDiagonal() * d);

  HumWaveResult out;
  out.z = unstack(zvec);
  out.condition = gram.condition;
  out.min_singular = gram.min_singular;
  const double h = T / opt.steps;
  auto w = simpson_weights(opt.steps + 1, h);
  out.input_map = Matrix(n2, opt.steps + 1);
  const Vector Binv = W.cwiseInverse();
  for (int k = 0; k <= opt.steps; ++k) {
    double t = k * h;
    Vector v = boundary_profile(basis, T - t);
    out.times.push_back(t);
    out.u.push_back(v.dot(zvec));
    out.input_map.col(k) = w[k] * Binv.cwiseProduct(v);
    out.control_norm2 += w[k] * out.u.back() * out.u.back();
  }
  out.gz_z = zvec.dot(gram.G * zvec);

  // re-simulate x' = R x + W^-1 c u(t) by RK4 with the control evaluated in closed form
  const Matrix R = rotation_generator(basis);
  const Vector c = boundary_profile(basis, 0.0);
  OdeProblem sim;
  sim.rhs = [&](double t, const Vector& x) {
    return Vector(R * x + Binv.cwiseProduct(c) * boundary_profile(basis, T - t).dot(zvec));
  };
  sim.x0 = stack(y0);
  sim.t1 = T;
  sim.steps = 4 * opt.steps;
  Vector xT = integrate_endpoint(sim.rhs, 0.0, sim.x0, T, sim.steps);
  out.endpoint = unstack(xT);
  out.endpoint_error = (xT - stack(y1)).cwiseAbs().maxCoeff();
  return out;
}

double Biorthogonal::theta(int k, double t) const {
  long double s = 0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    s += static_cast<long double>(C(i, k)) * std::exp(-static_cast<long double>(mu[i]) * t);
  return static_cast<double>(s);
}

namespace {
// beyond this the 113-bit inverse no longer carries double accuracy
constexpr double kGramConditionLimit = 1e28;
}

Biorthogonal biorthogonal_family(const std::vector<double>& mu, double T, int K, int max_K) {
  if (!(T > 0)) throw InputError("T", "horizon must be positive");
  if (K < 1 || K > static_cast<int>(mu.size())) throw InputError("K", "must lie between 1 and the exponent count");
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(mu[i] > -1e300) || !std::isfinite(mu[i])) throw InputError("exponents", "must be finite");
    for (std::size_t j = 0; j < i; ++j)
      if (mu[i] == mu[j]) throw InputError("exponents", "must be pairwise distinct");
  }
  std::vector<double> head(mu.begin(), mu.begin() + K);
  auto feasible_below = [&](int from) {
    int best = 0;
    for (int k = 1; k <= std::min(from, max_K); ++k) {
      auto g = exponential_gram_inverse(std::vector<double>(mu.begin(), mu.begin() + k), T);
      if (g.condition < kGramConditionLimit) best = k;
      else break;
    }
    return best;
  };
  if (K > max_K) throw KTooLargeError(feasible_below(K), "biorthogonal family size exceeds the cap");
  auto g = exponential_gram_inverse(head, T);
  if (!(g.condition < kGramConditionLimit))
    throw KTooLargeError(feasible_below(K - 1), "exponential Gram matrix is too ill-conditioned");
  return {head, T, g.C, g.condition};
}

MomentControl moment_heat_control(const IntervalUnion& omega, const Vector& y0, double T, int N, int steps,
                                  int x_samples) {
  omega.check(pi);
  if (omega.empty()) throw InputError("omega", "control region must be nonempty");
  if (!(T > 0)) throw InputError("T", "horizon must be positive");
  if (N < 1) throw InputError("N", "mode count must be at least 1");
  if (steps < 1 || x_samples < 2) throw Error(ErrorKind::Grid, "sample counts too small");
  std::vector<double> mu(N);
  for (int j = 1; j <= N; ++j) mu[j - 1] = double(j) * j;
  auto fam = biorthogonal_family(mu, T, N);

  const int modes = std::max<int>(N, y0.size());
  Vector a = Vector::Zero(modes);
  a.head(y0.size()) = y0;
  MomentControl out;
  out.gram_condition = fam.condition;
  out.denominators = Vector(N);
  for (int k = 1; k <= N; ++k) out.denominators(k - 1) = sin_product(omega, k, k, pi);
  const Matrix M = product_matrix(omega, modes, pi);

  // modal projection on sin(jx) carries 2/pi, so the series is rescaled by pi/2
  Vector scale(N);
  for (int k = 1; k <= N; ++k) scale(k - 1) = -(pi / 2) * a(k - 1) * std::exp(-double(k) * k * T) / out.denominators(k - 1);
  auto amplitude = [&](double t) {
    Vector c(N);
    for (int k = 0; k < N; ++k) c(k) = scale(k) == 0.0 ? 0.0 : scale(k) * fam.theta(k, T - t);
    return c;
  };

  const double h = T / steps;
  for (int i = 0; i < x_samples; ++i) out.xs.push_back(pi * i / (x_samples - 1));
  out.u = Matrix::Zero(steps + 1, x_samples);
  out.amplitude = Matrix(steps + 1, N);
  for (int k = 0; k <= steps; ++k) {
    double t = k * h;
    out.times.push_back(t);
    Vector c = amplitude(t);
    out.amplitude.row(k) = c.transpose();
    for (int i = 0; i < x_samples; ++i) {
      double x = out.xs[i];
      bool inside = std::any_of(omega.parts.begin(), omega.parts.end(),
                                [x](auto& p) { return x > p.first && x < p.second; });
      if (!inside) continue;
      double v = 0;
      for (int m = 1; m <= N; ++m) v += c(m - 1) * std::sin(m * x);
      out.u(k, i) = v;
    }
  }

  Rhs rhs = [&](double t, const Vector& y) {
    Vector c = Vector::Zero(modes);
    c.head(N) = amplitude(t);
    Vector dy = (2 / pi) * (M * c);
    for (int j = 1; j <= modes; ++j) dy(j - 1) -= double(j) * j * y(j - 1);
    return dy;
  };
  out.final_coeffs = integrate_endpoint(rhs, 0.0, a, T, steps);
  out.max_residual = out.final_coeffs.head(N).cwiseAbs().maxCoeff();
  return out;
}

DampingResult damping_decay_experiment(const SineBasis& basis, const IntervalUnion& damping, double T_fit,
                                       int samples, const WaveState* initial) {
  damping.check(basis.L);
  if (!(T_fit > 0)) throw InputError("T_fit", "fit horizon must be positive");
  check_steps(samples);
  const int N = basis.N, n2 = 2 * N;
  DampingResult out;
  out.damping = (2 / basis.L) * product_matrix(damping, N, basis.L);
  Matrix M0 = rotation_generator(basis);
  Matrix M = M0;
  M.bottomRightCorner(N, N) -= out.damping;

  Vector x0;
  if (initial) {
    check_state(basis, *initial);
    x0 = stack(*initial);
  } else {
    x0 = Vector::Ones(n2) / std::sqrt(double(n2));
  }
  const double h = T_fit / samples;
  const Matrix step = expm(h * M), step0 = expm(h * M0);
  auto w = simpson_weights(samples + 1, h);
  Vector x = x0, phi = x0;
  const double quarter = basis.L / 4;
  for (int k = 0; k <= samples; ++k) {
    out.times.push_back(k * h);
    out.energy.push_back(quarter * x.squaredNorm());
    Vector v = phi.tail(N);
    out.observability += w[k] * (basis.L / 2) * v.dot(out.damping * v);
    x = step * x;
    phi = step0 * phi;
  }

  // least squares for log E = alpha - delta t
  Matrix A(samples + 1, 2);
  Vector rhs(samples + 1);
  for (int k = 0; k <= samples; ++k) {
    A(k, 0) = 1.0;
    A(k, 1) = -out.times[k];
    rhs(k) = std::log(out.energy[k]);
  }
  Vector coef = A.colPivHouseholderQr().solve(rhs);
  out.delta = coef(1);
  out.C1 = 0;
  for (int k = 0; k <= samples; ++k)
    out.C1 = std::max(out.C1, out.energy[k] * std::exp(out.delta * out.times[k]) / out.energy[0]);
  return out;
}

SemilinearCoefficients semilinear_coefficients(double L, double f_prime_0, int n) {
  if (!(L > 0)) throw InputError("L", "interval length must be positive");
  if (n < 1) throw InputError("n", "mode count must be at least 1");
  SemilinearCoefficients c{Vector(n), Vector(n), Vector(n)};
  const double root = std::sqrt(2 / L);
  for (int j = 1; j <= n; ++j) {
    double w = j * pi / L;
    double moment = root * L * L * (j % 2 ? 1.0 : -1.0) / (j * pi);  // int_0^L x e_j
    c.lambda(j - 1) = f_prime_0 - w * w;
    c.a(j - 1) = f_prime_0 / L * moment;
    c.b(j - 1) = -moment / L;
  }
  return c;
}

Matrix semilinear_An(const SemilinearCoefficients& c) {
  const auto n = c.lambda.size();
  Matrix A = Matrix::Zero(n + 1, n + 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    A(j + 1, 0) = c.a(j);
    A(j + 1, j + 1) = c.lambda(j);
  }
  return A;
}

Vector semilinear_Bn(const SemilinearCoefficients& c) {
  Vector B(c.b.size() + 1);
  B << 1.0, c.b;
  return B;
}

namespace {
// Smallest doubling of 10 max(1, |f'(0)|) for which V is positive definite and its derivative along the
// linearized closed loop of the simulated truncation is negative definite.
double default_gamma(const SemilinearResult& r, const SemilinearCoefficients& all, double fp) {
  const int n = r.n, Ns = static_cast<int>(all.lambda.size());
  Matrix F = Matrix::Zero(Ns + 1, Ns + 1);
  Vector B(Ns + 1);
  B << 1.0, all.b;
  F.block(1, 0, Ns, 1) = all.a;
  for (int j = 0; j < Ns; ++j) F(j + 1, j + 1) = all.lambda(j);
  Matrix K = Matrix::Zero(1, Ns + 1);
  K.leftCols(n + 1) = r.K;
  F += B * K;
  Matrix D = Matrix::Zero(Ns + 1, Ns + 1);
  for (int j = 0; j < Ns; ++j) D(j + 1, j + 1) = -0.5 * all.lambda(j);
  double gamma = 10 * std::max(1.0, std::abs(fp));
  for (int it = 0; it < 60; ++it, gamma *= 2) {
    Matrix Q = D;
    Q.topLeftCorner(n + 1, n + 1) += gamma * r.P;
    Eigen::SelfAdjointEigenSolver<Matrix> pos(Q, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> dec(symmetrize(F.transpose() * Q + Q * F), Eigen::EigenvaluesOnly);
    if (pos.eigenvalues()(0) > 0 && dec.eigenvalues()(Ns) < 0) return gamma;
  }
  return gamma;
}
}  // namespace

SemilinearResult semilinear_stabilize(SemilinearPlant plant, const Vector& y0, double T_sim, int steps) {
  const double L = plant.L, fp = plant.f_prime_0;
  if (!(L > 0)) throw InputError("L", "interval length must be positive");
  if (!(T_sim > 0)) throw InputError("T_sim", "simulation horizon must be positive");
  if (!plant.f) plant.f = [fp](double y) { return fp * y; };
  const double f0 = plant.f(0.0);
  if (std::abs(f0) > 1e-12) throw EquilibriumError(std::abs(f0), "nonlinearity must vanish at 0");
  const double hd = 1e-5;
  double slope = (plant.f(hd) - plant.f(-hd)) / (2 * hd);
  if (std::abs(slope - fp) > 1e-4 * std::max(1.0, std::abs(fp)))
    throw InputError("f_prime_0", "does not match the slope of f at 0");

  if (plant.n <= 0) {
    int unstable = 0;
    while (fp - std::pow((unstable + 1) * pi / L, 2) > 0) ++unstable;
    plant.n = unstable + 2;
  }
  if (plant.N_sim <= 0) plant.N_sim = std::max(plant.n + 6, 12);
  if (plant.N_sim < plant.n) throw InputError("N_sim", "must be at least n");
  if (plant.x_samples < 3 || plant.x_samples % 2 == 0) throw Error(ErrorKind::Grid, "x_samples must be odd and >= 3");
  if (y0.size() > plant.N_sim) throw Error(ErrorKind::Dimension, "more initial coefficients than simulated modes");

  const int n = plant.n, Ns = plant.N_sim;
  SemilinearResult out;
  out.n = n;
  out.N_sim = Ns;
  auto coef = semilinear_coefficients(L, fp, n);
  out.An = semilinear_An(coef);
  out.Bn = semilinear_Bn(coef);
  out.kalman_det = kalman_matrix(out.An, out.Bn).determinant();

  Vector target = Vector::Zero(n + 2);
  for (int k = 0; k <= n + 1; ++k) target(k) = std::tgamma(n + 2.0) / (std::tgamma(k + 1.0) * std::tgamma(n + 2.0 - k));
  PolePlacement pp;
  try {
    pp = pole_place(LtiSystem{out.An, out.Bn, {}}, target);
  } catch (const Error& e) {
    throw Error(ErrorKind::Numerical, std::string("pole placement failed on a controllable truncation: ") + e.what());
  }
  out.K = pp.K;
  Matrix Acl = out.An + out.Bn * out.K;
  out.P = lyapunov_solve(Acl);
  out.closed_loop = Vector(n + 1);
  for (int i = 0; i <= n; ++i) out.closed_loop(i) = pp.closed_loop[i].real();

  auto all = semilinear_coefficients(L, fp, Ns);
  if (plant.gamma <= 0) plant.gamma = default_gamma(out, all, fp);
  out.gamma = plant.gamma;
  const int nx = plant.x_samples;
  const double hx = L / (nx - 1);
  auto wx = simpson_weights(nx, hx);
  Matrix E(Ns, nx);
  Vector xs(nx);
  for (int i = 0; i < nx; ++i) {
    xs(i) = i * hx;
    for (int j = 1; j <= Ns; ++j) E(j - 1, i) = std::sqrt(2 / L) * std::sin(j * pi * xs(i) / L);
  }
  Matrix Ew = E * Eigen::Map<const Vector>(wx.data(), nx).asDiagonal();
  const Vector Kr = out.K.row(0).transpose();

  // state (u, z_1 .. z_Ns)
  Rhs rhs = [&](double, const Vector& s) {
    const double u = s(0);
    const double v = Kr.dot(s.head(n + 1));
    Vector y = E.transpose() * s.tail(Ns) + xs * (u / L);
    for (int i = 0; i < nx; ++i) y(i) = plant.f(y(i));
    Vector ds(Ns + 1);
    ds(0) = v;
    ds.tail(Ns) = Ew * y + all.b * v;
    for (int j = 1; j <= Ns; ++j) ds(j) -= std::pow(j * pi / L, 2) * s(j);
    return ds;
  };
  auto V = [&](const Vector& s) {
    Vector X = s.head(n + 1);
    double val = plant.gamma * X.dot(out.P * X);
    for (int j = 1; j <= Ns; ++j) val -= 0.5 * all.lambda(j - 1) * s(j) * s(j);
    return val;
  };

  const double mu_max = std::pow(Ns * pi / L, 2);
  out.steps = std::max(steps, static_cast<int>(std::ceil(T_sim * mu_max / 2.0)));
  Vector s0 = Vector::Zero(Ns + 1);
  s0.segment(1, y0.size()) = y0;
  OdeProblem prob{rhs, 0.0, s0, T_sim, out.steps};
  Trajectory traj = integrate(prob);
  out.V_monotone = true;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector& s = traj.states[k];
    out.times.push_back(traj.times[k]);
    out.u.push_back(s(0));
    out.z.push_back(s.tail(Ns));
    out.V.push_back(V(s));
    if (k && out.V[k] > out.V[k - 1] + 1e-13 * std::abs(out.V[0])) out.V_monotone = false;
  }
  out.initial_size = s0.tail(Ns).norm() + std::abs(s0(0));
  out.final_size = traj.back().tail(Ns).norm() + std::abs(traj.back()(0));
  return out;
}

}  // namespace ctrl::pde
