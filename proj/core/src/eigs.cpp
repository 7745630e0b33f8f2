#include "cmcflow/eigs.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>
#include <stdexcept>

namespace cmcflow {

namespace {

EigResult finalize(const SpMat& A, const VecX& m, MatX X) {
  // Rayleigh quotients, M-normalization and residuals.
  const int k = static_cast<int>(X.cols());
  EigResult out;
  out.values.resize(k);
  out.residuals.resize(k);
  for (int j = 0; j < k; ++j) {
    VecX x = X.col(j);
    const double mn = std::sqrt(x.dot(m.cwiseProduct(x)));
    x /= mn;
    const double lam = x.dot(A * x);
    out.values[j] = lam;
    out.residuals[j] = (A * x - lam * m.cwiseProduct(x)).norm();
    X.col(j) = x;
  }
  // Sort ascending.
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return out.values[a] < out.values[b]; });
  EigResult sorted;
  sorted.values.resize(k);
  sorted.residuals.resize(k);
  sorted.vectors.resize(X.rows(), k);
  for (int j = 0; j < k; ++j) {
    sorted.values[j] = out.values[order[j]];
    sorted.residuals[j] = out.residuals[order[j]];
    sorted.vectors.col(j) = X.col(order[j]);
  }
  return sorted;
}

EigResult dense_solve(const SpMat& A, const VecX& m, int k) {
  const int n = static_cast<int>(A.rows());
  const VecX is = m.cwiseSqrt().cwiseInverse();
  MatX B = MatX(A);
  B = is.asDiagonal() * B * is.asDiagonal();
  B = 0.5 * (B + B.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> es(B);
  MatX X(n, k);
  for (int j = 0; j < k; ++j) X.col(j) = is.cwiseProduct(es.eigenvectors().col(j));
  return finalize(A, m, std::move(X));
}

}  // namespace

EigResult smallest_eigenpairs(const SpMat& A, const VecX& m, int k, int dense_threshold,
                              std::uint64_t seed) {
  const int n = static_cast<int>(A.rows());
  if (k <= 0 || k > n) throw std::invalid_argument("eigencount out of range");
  if (n <= dense_threshold) return dense_solve(A, m, k);

  // Shift below the spectrum: factor A - σM and push σ down until the
  // inertia shows no eigenvalue below it.
  SpMat M(n, n);
  {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(n);
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, m[i]);
    M.setFromTriplets(t.begin(), t.end());
  }
  double sigma = -8.0;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  for (int attempt = 0; attempt < 12; ++attempt) {
    SpMat K = A - SpMat(sigma * M);
    ldlt.compute(K);
    if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) break;
    sigma *= 4.0;
    if (attempt == 11) throw std::runtime_error("eigensolver could not bracket the spectrum");
  }

  // M-inner-product Lanczos on (A - σM)⁻¹ M with full reorthogonalization.
  const int max_dim = std::min(n, std::max(4 * k + 40, 80));
  MatX V(n, max_dim);
  VecX alpha(max_dim), beta(max_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  v /= std::sqrt(v.dot(m.cwiseProduct(v)));
  V.col(0) = v;

  int dim = 0;
  double beta_last = 0.0;
  for (int j = 0; j < max_dim; ++j) {
    VecX w = ldlt.solve(m.cwiseProduct(V.col(j)));
    alpha[j] = w.dot(m.cwiseProduct(V.col(j)));
    // Full reorthogonalization (twice for safety).
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= j; ++i) {
        w -= V.col(i).dot(m.cwiseProduct(w)) * V.col(i);
      }
    }
    const double b = std::sqrt(std::max(0.0, w.dot(m.cwiseProduct(w))));
    dim = j + 1;
    beta[j] = b;
    beta_last = b;
    if (b < 1e-14) break;
    if (j + 1 < max_dim) V.col(j + 1) = w / b;

    // Convergence test every few steps once we have enough directions.
    if (dim >= std::max(2 * k, 10) && (dim % 5 == 0 || dim == max_dim)) {
      Eigen::SelfAdjointEigenSolver<MatX> tri;
      MatX T = MatX::Zero(dim, dim);
      for (int i = 0; i < dim; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < dim) T(i, i + 1) = T(i + 1, i) = beta[i];
      }
      tri.compute(T);
      // Largest θ of the shift-inverted operator ↔ smallest λ.
      bool ok = true;
      for (int t = 0; t < k; ++t) {
        const int col = dim - 1 - t;
        const double bound = std::abs(beta_last * tri.eigenvectors()(dim - 1, col));
        const double theta = tri.eigenvalues()[col];
        if (bound > 1e-12 * std::max(1.0, std::abs(theta))) ok = false;
      }
      if (ok) break;
    }
  }

  MatX T = MatX::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    T(i, i) = alpha[i];
    if (i + 1 < dim) T(i, i + 1) = T(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<MatX> tri(T);
  MatX X(n, k);
  for (int t = 0; t < k; ++t) {
    const int col = dim - 1 - t;  // largest θ first
    X.col(t) = V.leftCols(dim) * tri.eigenvectors().col(col);
  }

  // Polish by shift-inverted subspace iteration with Rayleigh-Ritz until the
  // pencil residuals reach solver accuracy.
  for (int round = 0; round < 60; ++round) {
    EigResult probe = finalize(A, m, X);
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      worst = std::max(worst, probe.residuals[j] / (1.0 + std::abs(probe.values[j])));
    }
    if (worst < 1e-10) break;
    MatX Y(n, k);
    for (int j = 0; j < k; ++j) Y.col(j) = ldlt.solve(m.cwiseProduct(X.col(j)));
    // M-orthonormalize.
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < j; ++i) {
        Y.col(j) -= Y.col(i).dot(m.cwiseProduct(Y.col(j))) * Y.col(i);
      }
      const double nj = std::sqrt(Y.col(j).dot(m.cwiseProduct(Y.col(j))));
      if (nj < 1e-300) continue;
      Y.col(j) /= nj;
    }
    // Rayleigh-Ritz in the refined subspace.
    MatX Asmall(k, k);
    for (int j = 0; j < k; ++j) {
      const VecX Ay = A * Y.col(j);
      for (int i = 0; i < k; ++i) Asmall(i, j) = Y.col(i).dot(Ay);
    }
    Asmall = 0.5 * (Asmall + Asmall.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatX> small(Asmall);
    X = Y * small.eigenvectors();
  }
  return finalize(A, m, std::move(X));
}

}  // namespace cmcflow
