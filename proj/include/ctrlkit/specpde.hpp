#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ctrlkit/numcore.hpp"

namespace ctrl::pde {

// Dirichlet sine basis on (0, L): phi_j = sqrt(2/L) sin(j pi x / L), mu_j = (j pi / L)^2.
struct SineBasis {
  double L = 1.0;
  int N = 0;

  SineBasis() = default;
  SineBasis(double L, int N);
  double freq(int j) const;  // j pi / L, j counted from 1
  double mu(int j) const;
  double norm() const;
  Vector mus() const;
};

struct WaveState {
  Vector a, b;

  static WaveState zero(int N);
  static WaveState mode(int N, int j);
  double coefficient_energy() const { return a.squaredNorm() + b.squaredNorm(); }
};

struct IntervalUnion {
  std::vector<std::pair<double, double>> parts;

  IntervalUnion() = default;
  explicit IntervalUnion(std::vector<std::pair<double, double>> p) : parts(std::move(p)) {}
  double measure() const;
  bool empty() const { return parts.empty(); }
  void check(double L) const;
};

Vector heat_evolve(const SineBasis& basis, const Vector& coeffs, double t);
WaveState wave_evolve(const SineBasis& basis, const WaveState& s, double t);

// (L/2) sum(a^2 + b^2): H1_0 x L2 energy in the boundary expansion, L2 x H-1 in the internal one.
double wave_energy(const SineBasis& basis, const WaveState& s);

// |d_x psi(t, L)|^2 integrated over (0, T) by Simpson with `steps` intervals.
double boundary_observation_energy(const SineBasis& basis, const WaveState& s, double T, int steps = 4000);

// integral over omega of sin(j pi x / L) sin(k pi x / L)
double sin_product(const IntervalUnion& omega, int j, int k, double L);
double sin2_mass(const IntervalUnion& omega, int j, const SineBasis& basis);
double sin2_lower_bound(double measure, double L);
IntervalUnion sin2_optimal_set(double measure, int j, double L);

double internal_wave_observation(const SineBasis& basis, const WaveState& s, const IntervalUnion& omega, double T,
                                 int steps = 4000);

enum class Pivot { H10xL2, L2xHm1 };

struct WaveGramian {
  Matrix G;      // Euclidean Gramian of the boundary observation on (a, b) coordinates
  Vector weight; // pivot inner product weight per coordinate
  double condition = 0.0;
  double min_singular = 0.0;
};

WaveGramian wave_boundary_gramian(const SineBasis& basis, double T, int steps = 4000, Pivot pivot = Pivot::L2xHm1);

struct HumWaveResult {
  WaveState z;
  std::vector<double> times, u;
  WaveState endpoint;
  double endpoint_error = 0.0;
  double control_norm2 = 0.0;  // Simpson integral of u^2
  double gz_z = 0.0;           // <G z, z> in the pivot inner product
  double condition = 0.0;
  double min_singular = 0.0;
  Matrix input_map;            // 2N x samples, Simpson-weighted input-to-state map
};

struct HumWaveOptions {
  int steps = 2000;
  Pivot pivot = Pivot::L2xHm1;
  bool force = false;
  double max_condition = 1e12;
};

HumWaveResult hum_wave_boundary(const SineBasis& basis, const WaveState& y0, const WaveState& y1, double T,
                                const HumWaveOptions& opt = {});

struct Biorthogonal {
  std::vector<double> mu;
  double T = 0.0;
  Matrix C;  // theta_k(t) = sum_i C(i, k) exp(-mu_i t)
  double condition = 0.0;

  double theta(int k, double t) const;
};

Biorthogonal biorthogonal_family(const std::vector<double>& mu, double T, int K, int max_K = 8);

struct MomentControl {
  std::vector<double> times, xs;
  Matrix u;             // rows: times, columns: xs (zero outside omega)
  Matrix amplitude;     // rows: times, columns: modes k; u = sum_k amplitude_k sin(k x)
  Vector denominators;  // integral over omega of sin^2(k x)
  Vector final_coeffs;
  double max_residual = 0.0;
  double gram_condition = 0.0;
};

// Heat equation on (0, pi). y0 holds coefficients on sin(j x).
MomentControl moment_heat_control(const IntervalUnion& omega, const Vector& y0, double T, int N, int steps = 4000,
                                  int x_samples = 101);

struct DampingResult {
  double delta = 0.0, C1 = 0.0, observability = 0.0;
  std::vector<double> times, energy;
  Matrix damping;  // Galerkin matrix (2/L) int_omega sin_j sin_k
};

DampingResult damping_decay_experiment(const SineBasis& basis, const IntervalUnion& damping, double T_fit,
                                       int samples = 1000, const WaveState* initial = nullptr);

struct SemilinearPlant {
  double L = 1.0;
  double f_prime_0 = 0.0;
  std::function<double(double)> f;
  int n = 0;       // 0 selects unstable modes + 2
  int N_sim = 0;   // 0 selects max(n + 6, 12)
  double gamma = 0.0;  // 0 selects the default weight
  int x_samples = 1201;
};

struct SemilinearCoefficients {
  Vector lambda, a, b;
};

SemilinearCoefficients semilinear_coefficients(double L, double f_prime_0, int n);
Matrix semilinear_An(const SemilinearCoefficients& c);
Vector semilinear_Bn(const SemilinearCoefficients& c);

struct SemilinearResult {
  int n = 0, N_sim = 0, steps = 0;
  double gamma = 0.0;
  Matrix An, Bn, K, P;
  double kalman_det = 0.0;
  Vector closed_loop;  // real parts of the closed-loop eigenvalues of A_n + B_n K_n
  std::vector<double> times, u, V;
  std::vector<Vector> z;
  double initial_size = 0.0, final_size = 0.0;
  bool V_monotone = false;
};

SemilinearResult semilinear_stabilize(SemilinearPlant plant, const Vector& y0, double T_sim, int steps = 0);

}  // namespace ctrl::pde
