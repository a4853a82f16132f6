// Extended-precision kernels. Kept in one translation unit because the
// multiprecision Eigen instantiations are slow to compile.
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <algorithm>

#include "ctrlkit/numcore.hpp"
#include "extended.hpp"

namespace ctrl {

using Quad = boost::multiprecision::cpp_bin_float_quad;
using QMatrix = Eigen::Matrix<Quad, Eigen::Dynamic, Eigen::Dynamic>;
using QVector = Eigen::Matrix<Quad, Eigen::Dynamic, 1>;

namespace {
QMatrix to_quad(const Matrix& M) {
  QMatrix Q(M.rows(), M.cols());
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) Q(i, j) = Quad(M(i, j));
  return Q;
}

// A + B K formed without rounding the product to double
QMatrix quad_closed_loop(const Matrix& A, const Matrix& B, const Matrix& K) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || K.rows() != B.cols() || K.cols() != A.cols())
    throw Error(ErrorKind::Dimension, "closed loop: shape mismatch");
  return to_quad(A) + to_quad(B) * to_quad(K);
}

std::vector<std::complex<Quad>> quad_eigenvalues(const QMatrix& Q) {
  const Eigen::Index n = Q.rows();
  Eigen::EigenSolver<QMatrix> es(Q, false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "extended eigenvalue solver failed");
  std::vector<std::complex<Quad>> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
  return out;
}
}  // namespace

namespace {
std::vector<Complex> to_double(const std::vector<std::complex<Quad>>& ev) {
  std::vector<Complex> out;
  for (const auto& z : ev) out.emplace_back(static_cast<double>(z.real()), static_cast<double>(z.imag()));
  return out;
}

Vector expand_roots(const std::vector<std::complex<Quad>>& ev) {
  std::vector<std::complex<Quad>> p{std::complex<Quad>(1)};
  for (const auto& r : ev) {
    std::vector<std::complex<Quad>> q(p.size() + 1, std::complex<Quad>(0));
    for (std::size_t i = 0; i < p.size(); ++i) {
      q[i] += p[i];
      q[i + 1] -= r * p[i];
    }
    p = std::move(q);
  }
  Vector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out(i) = static_cast<double>(p[i].real());
  return out;
}
}  // namespace

std::vector<Complex> eigenvalues_extended(const Matrix& M) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::Dimension, "eigenvalues: matrix not square");
  return to_double(quad_eigenvalues(to_quad(M)));
}

std::vector<Complex> eigenvalues_extended(const Matrix& A, const Matrix& B, const Matrix& K) {
  return to_double(quad_eigenvalues(quad_closed_loop(A, B, K)));
}

Vector characteristic_polynomial(const Matrix& M) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::Dimension, "eigenvalues: matrix not square");
  return expand_roots(quad_eigenvalues(to_quad(M)));
}

Vector characteristic_polynomial(const Matrix& A, const Matrix& B, const Matrix& K) {
  return expand_roots(quad_eigenvalues(quad_closed_loop(A, B, K)));
}

GramInverse exponential_gram_inverse(const std::vector<double>& mu, double T) {
  const Eigen::Index K = static_cast<Eigen::Index>(mu.size());
  QMatrix G(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j) {
      Quad s = Quad(mu[i]) + Quad(mu[j]);
      G(i, j) = (Quad(1) - boost::multiprecision::exp(-s * Quad(T))) / s;
    }
  Eigen::EigenSolver<QMatrix> es(G, false);
  GramInverse out;
  out.C = Matrix::Zero(K, K);
  if (es.info() != Eigen::Success) {
    out.condition = INFINITY;
    return out;
  }
  Quad lmin = es.eigenvalues()(0).real(), lmax = lmin;
  for (Eigen::Index i = 1; i < K; ++i) {
    lmin = std::min(lmin, Quad(es.eigenvalues()(i).real()));
    lmax = std::max(lmax, Quad(es.eigenvalues()(i).real()));
  }
  if (lmin <= 0) {
    out.condition = INFINITY;
    return out;
  }
  out.condition = static_cast<double>(lmax / lmin);
  QMatrix C = G.partialPivLu().inverse();
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j) out.C(i, j) = static_cast<double>(C(i, j));
  return out;
}

}  // namespace ctrl
