#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "epcal/mesh.hpp"

namespace epcal {

using SparseMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// P1 cotangent stiffness matrix (natural/Neumann boundary conditions).
/// Optional per-triangle coefficient scales each element contribution,
/// giving the weak form of div(c grad u).
inline SparseMat cotan_stiffness(const TriMesh& mesh,
                                 const std::vector<double>* tri_coeff = nullptr) {
  const int n = mesh.n_vertices();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.n_triangles() * 12);
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double c = tri_coeff ? (*tri_coeff)[t] : 1.0;
    for (int e = 0; e < 3; ++e) {
      const int i = tri[(e + 1) % 3];
      const int j = tri[(e + 2) % 3];
      const int k = tri[e];  // vertex opposite edge (i,j)
      const Vec3 u = mesh.vertices[i] - mesh.vertices[k];
      const Vec3 v = mesh.vertices[j] - mesh.vertices[k];
      const double cross = u.cross(v).norm();
      require(cross > 1e-14, "degenerate triangle in stiffness assembly");
      const double w = 0.5 * c * u.dot(v) / cross;  // cot(angle at k) / 2
      trips.emplace_back(i, j, -w);
      trips.emplace_back(j, i, -w);
      trips.emplace_back(i, i, w);
      trips.emplace_back(j, j, w);
    }
  }
  SparseMat s(n, n);
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

/// Barycentric lumped mass: each vertex gets one third of incident
/// triangle areas (mm^2).
inline Vector lumped_mass(const TriMesh& mesh) {
  Vector m = Vector::Zero(mesh.n_vertices());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const double a3 = mesh.triangle_area(t) / 3.0;
    for (int v : mesh.triangles[t]) m[v] += a3;
  }
  return m;
}

/// The K smallest Laplace-Beltrami eigenpairs of a mesh.
/// Eigenfunctions are columns of `functions`, M-orthonormal
/// (phi_i' M phi_j = delta_ij), eigenvalues nondecreasing in 1/mm^2.
struct Eigenbasis {
  Vector eigenvalues;   // K, nondecreasing
  Matrix functions;     // n x K
  Vector mass;          // lumped mass diagonal, mm^2
  int K() const { return static_cast<int>(eigenvalues.size()); }
  int n_vertices() const { return static_cast<int>(functions.rows()); }
  double total_mass() const { return mass.sum(); }
  /// Magnitude of the constant first eigenfunction, 1/sqrt(total mass).
  double phi1_magnitude() const { return 1.0 / std::sqrt(total_mass()); }
};

/// Shift-invert Lanczos for the generalized problem S phi = lambda M phi
/// with diagonal M. Full reorthogonalization; restarts with a larger
/// Krylov subspace until the K smallest pairs have residuals below tol.
inline Eigenbasis solve_eigenbasis(const TriMesh& mesh, int K,
                                   double tol = 1e-9) {
  const int n = mesh.n_vertices();
  require(K >= 1 && K < n, "K must satisfy 1 <= K < vertex count");
  require(mesh.is_connected(), "mesh is disconnected");

  const SparseMat s = cotan_stiffness(mesh);
  const Vector m = lumped_mass(mesh);
  const Vector m_sqrt = m.array().sqrt();
  const Vector m_isqrt = m_sqrt.cwiseInverse();

  // negative shift keeps S - sigma*M positive definite (S is PSD)
  const double scale = s.diagonal().cwiseQuotient(m).mean();
  const double sigma = -1e-3 * scale;

  SparseMat shifted = s;
  SparseMat m_diag(n, n);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n);
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, m[i]);
    m_diag.setFromTriplets(trips.begin(), trips.end());
  }
  shifted -= sigma * m_diag;
  Eigen::SimplicialLDLT<SparseMat> solver(shifted);
  require(solver.info() == Eigen::Success,
          "factorization of shifted stiffness failed");

  // Op y = M^{1/2} (S - sigma M)^{-1} M^{1/2} y, symmetric in standard form
  auto apply_op = [&](const Vector& y) -> Vector {
    Vector rhs = m_sqrt.cwiseProduct(y);
    Vector x = solver.solve(rhs);
    return m_sqrt.cwiseProduct(x);
  };

  const int max_restarts = 10 * K;
  int steps = std::min(n, std::max(2 * K + 20, 40));
  Rng rng(20240901);

  for (int attempt = 0; attempt <= max_restarts; ++attempt) {
    const int mdim = std::min(steps, n);
    Matrix basis(n, mdim);
    Vector alpha(mdim), beta(mdim);
    Vector q = Vector::NullaryExpr(n, [&](Eigen::Index) { return rng.normal(); });
    q.normalize();
    basis.col(0) = q;
    Vector q_prev = Vector::Zero(n);
    double beta_prev = 0.0;
    int built = mdim;
    for (int j = 0; j < mdim; ++j) {
      Vector w = apply_op(basis.col(j));
      alpha[j] = basis.col(j).dot(w);
      w -= alpha[j] * basis.col(j);
      if (j > 0) w -= beta_prev * q_prev;
      // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass)
        w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
      const double b = w.norm();
      beta[j] = b;
      if (j + 1 < mdim) {
        if (b < 1e-14) {
          built = j + 1;  // invariant subspace found
          break;
        }
        q_prev = basis.col(j);
        beta_prev = b;
        basis.col(j + 1) = w / b;
      }
    }

    Matrix tri = Matrix::Zero(built, built);
    for (int j = 0; j < built; ++j) {
      tri(j, j) = alpha[j];
      if (j + 1 < built) {
        tri(j, j + 1) = beta[j];
        tri(j + 1, j) = beta[j];
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(tri);
    // largest Ritz values of Op correspond to smallest lambda
    const int avail = built;
    if (avail < K) {
      steps = std::min(n, steps * 2);
      continue;
    }
    Matrix ritz_vecs(n, K);
    Vector lambdas(K);
    for (int k = 0; k < K; ++k) {
      const int idx = avail - 1 - k;  // descending Ritz values
      const double mu = es.eigenvalues()[idx];
      lambdas[k] = sigma + 1.0 / mu;
      ritz_vecs.col(k) =
          basis.leftCols(built) * es.eigenvectors().col(idx);
    }

    // residual check in the generalized problem
    bool converged = true;
    Matrix phi(n, K);
    for (int k = 0; k < K; ++k) {
      phi.col(k) = m_isqrt.cwiseProduct(ritz_vecs.col(k));
      const Vector sp = s * phi.col(k);
      const Vector mp = m.cwiseProduct(phi.col(k));
      const double rel = (sp - lambdas[k] * mp).norm() /
                         std::max(sp.norm(), scale * mp.norm());
      if (rel > tol) {
        converged = false;
        break;
      }
    }
    if (!converged) {
      steps = std::min(n, steps + std::max(20, steps / 2));
      if (steps == n && attempt > 2)
        throw Error("eigensolver failed to converge");
      continue;
    }

    // sign convention: first entry of significant magnitude positive
    for (int k = 0; k < K; ++k) {
      const double thresh = 1e-12 * phi.col(k).cwiseAbs().maxCoeff();
      for (int i = 0; i < n; ++i) {
        if (std::abs(phi(i, k)) > thresh) {
          if (phi(i, k) < 0) phi.col(k) = -phi.col(k);
          break;
        }
      }
    }

    Eigenbasis out;
    out.eigenvalues = lambdas;
    out.functions = phi;
    out.mass = m;
    // clamp tiny negative round-off on the constant mode
    if (std::abs(out.eigenvalues[0]) < 1e-10 * std::max(1.0, scale))
      out.eigenvalues[0] = std::max(out.eigenvalues[0], 0.0);
    return out;
  }
  throw Error("eigensolver non-convergence within restart budget");
}

}  // namespace epcal
