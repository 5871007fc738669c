#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <utility>

#include "tubeox/fem.hpp"

namespace tubeox {

struct LinearSolveReport {
  std::string method;
  int factorizations = 0;
  int iterations = 0;
  /// ‖Ax − b‖₂ / ‖b‖₂ recomputed from the returned x (absolute if b = 0).
  double relative_residual = 0.0;
  bool converged = false;
  std::string note;
};

/// ‖Ax − b‖₂ / ‖b‖₂, or ‖Ax − b‖₂ when b = 0.
double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b);

/// Sparse LU (UMFPACK, AMD ordering, threshold partial pivoting). The
/// symbolic analysis is kept so matrices with the same pattern can be
/// refactored cheaply.
class LuFactorization {
 public:
  LuFactorization();
  explicit LuFactorization(const SparseMatrix& a);
  ~LuFactorization();
  LuFactorization(LuFactorization&&) noexcept;
  LuFactorization& operator=(LuFactorization&&) noexcept;

  /// Numeric factorization; redoes the symbolic step only if the pattern changed.
  void factor(const SparseMatrix& a);
  bool ready() const;
  Vector solve(const Vector& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Direct solve. SingularMatrixError on singularity, SolverError if the
/// recomputed relative residual exceeds 1e-10.
std::pair<Vector, LinearSolveReport> lu_solve(const SparseMatrix& a, const Vector& b);

/// Same, reusing an existing factorization of `a`.
std::pair<Vector, LinearSolveReport> lu_solve(const LuFactorization& lu, const SparseMatrix& a, const Vector& b);

/// Incomplete LU with the sparsity of A.
class Ilu0 {
 public:
  explicit Ilu0(const SparseMatrix& a);
  Vector apply(const Vector& r) const;

 private:
  SparseMatrix lu_;
  std::vector<std::size_t> diag_;
};

enum class LinearMethod { Lu, Gmres };

struct GmresOptions {
  double tol = 1e-10;
  int restart = 50;
  int max_iterations = 2000;
  bool precondition = true;
  /// Solve by LU when GMRES breaks down or stalls instead of reporting failure.
  bool fallback_to_lu = false;
};

/// Restarted, right-preconditioned GMRES. Non-convergence is reported in the
/// report (converged = false), never hidden.
std::pair<Vector, LinearSolveReport> gmres_solve(const SparseMatrix& a, const Vector& b,
                                                 const GmresOptions& opts = {});

void write_matrix_market(const SparseMatrix& a, std::ostream& out);
void write_matrix_market(const SparseMatrix& a, const std::string& path);

}  // namespace tubeox
