#include "tubeox/linsolve.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <umfpack.h>

#include "tubeox/errors.hpp"

namespace tubeox {

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double r = (a.multiply(x) - b).norm();
  const double nb = b.norm();
  return nb > 0 ? r / nb : r;
}

// UMFPACK works on compressed columns; the CSR arrays of A are the CSC arrays
// of Aᵀ, so solves use the transposed system.
struct LuFactorization::Impl {
  std::vector<int> ap, ai;
  std::vector<double> ax;
  std::size_t n = 0;
  void* symbolic = nullptr;
  void* numeric = nullptr;
  double control[UMFPACK_CONTROL];

  Impl() {
    umfpack_di_defaults(control);
    control[UMFPACK_ORDERING] = UMFPACK_ORDERING_AMD;
  }
  ~Impl() { release(); }
  void release() {
    if (numeric) umfpack_di_free_numeric(&numeric);
    if (symbolic) umfpack_di_free_symbolic(&symbolic);
    numeric = symbolic = nullptr;
  }

  bool same_pattern(const SparseMatrix& a) const {
    if (!symbolic || a.rows != n || a.nnz() != ai.size()) return false;
    for (std::size_t i = 0; i <= n; ++i)
      if (static_cast<std::size_t>(ap[i]) != a.row_ptr[i]) return false;
    return std::equal(ai.begin(), ai.end(), a.col.begin());
  }

  [[noreturn]] void singular() const {
    // Report the first zero pivot of U, mapped back to a row of A.
    std::vector<double> udiag(n);
    std::vector<int> q(n);
    umfpack_di_get_numeric(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, q.data(), udiag.data(),
                           nullptr, nullptr, numeric);
    std::size_t k = 0;
    while (k < n && udiag[k] != 0.0) ++k;
    const std::size_t row = k < n ? static_cast<std::size_t>(q[k]) : n;
    throw SingularMatrixError(k, fmt::format("matrix is singular: zero pivot {} (row {})", k, row));
  }

  void factor(const SparseMatrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("LU needs a square matrix");
    double info[UMFPACK_INFO];
    if (!same_pattern(a)) {
      release();
      n = a.rows;
      ap.assign(a.row_ptr.begin(), a.row_ptr.end());
      ai = a.col;
      ax = a.val;
      const int n_int = static_cast<int>(n);
      const int status = umfpack_di_symbolic(n_int, n_int, ap.data(), ai.data(), ax.data(), &symbolic, control, info);
      if (status != UMFPACK_OK) {
        if (status == UMFPACK_ERROR_out_of_memory) throw SolverError("LU analysis ran out of memory");
        throw SingularMatrixError(0, fmt::format("LU analysis failed (UMFPACK status {})", status));
      }
    } else {
      ax = a.val;
      if (numeric) umfpack_di_free_numeric(&numeric);
      numeric = nullptr;
    }
    const int status = umfpack_di_numeric(ap.data(), ai.data(), ax.data(), symbolic, &numeric, control, info);
    if (status == UMFPACK_WARNING_singular_matrix) singular();
    if (status != UMFPACK_OK) {
      if (status == UMFPACK_ERROR_out_of_memory) throw SolverError("LU factorization ran out of memory");
      throw SolverError(fmt::format("LU factorization failed (UMFPACK status {})", status));
    }
  }

  Vector solve(const Vector& b) const {
    if (!numeric) throw std::logic_error("LU solve before factorization");
    Vector x(b.size());
    double info[UMFPACK_INFO];
    const int status =
        umfpack_di_solve(UMFPACK_At, ap.data(), ai.data(), ax.data(), x.data(), b.data(), numeric, control, info);
    if (status == UMFPACK_WARNING_singular_matrix) singular();
    if (status != UMFPACK_OK) throw SolverError(fmt::format("LU solve failed (UMFPACK status {})", status));
    return x;
  }
};

LuFactorization::LuFactorization() : impl_(std::make_unique<Impl>()) {}
LuFactorization::LuFactorization(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) { factor(a); }
LuFactorization::~LuFactorization() = default;
LuFactorization::LuFactorization(LuFactorization&&) noexcept = default;
LuFactorization& LuFactorization::operator=(LuFactorization&&) noexcept = default;

void LuFactorization::factor(const SparseMatrix& a) { impl_->factor(a); }
bool LuFactorization::ready() const { return impl_->numeric != nullptr; }
Vector LuFactorization::solve(const Vector& b) const { return impl_->solve(b); }

std::pair<Vector, LinearSolveReport> lu_solve(const LuFactorization& lu, const SparseMatrix& a, const Vector& b) {
  if (static_cast<std::size_t>(b.size()) != a.rows) throw std::invalid_argument("right-hand side size mismatch");
  LinearSolveReport rep;
  rep.method = "lu";
  Vector x = lu.solve(b);
  rep.relative_residual = relative_residual(a, x, b);
  // One step of iterative refinement when the first solve is loose.
  if (rep.relative_residual > 1e-12) {
    const Vector r = b - a.multiply(x);
    const Vector x2 = x + lu.solve(r);
    const double r2 = relative_residual(a, x2, b);
    if (r2 < rep.relative_residual) {
      x = x2;
      rep.relative_residual = r2;
      rep.iterations = 1;
    }
  }
  if (!std::isfinite(rep.relative_residual)) throw SingularMatrixError(0, "LU produced a non-finite solution");
  if (rep.relative_residual > 1e-10)
    throw SolverError(fmt::format("LU residual {:.3e} exceeds 1e-10", rep.relative_residual));
  rep.converged = true;
  return {std::move(x), rep};
}

std::pair<Vector, LinearSolveReport> lu_solve(const SparseMatrix& a, const Vector& b) {
  LuFactorization lu(a);
  auto out = lu_solve(lu, a, b);
  out.second.factorizations = 1;
  return out;
}

// ---------------------------------------------------------------- ILU(0)

Ilu0::Ilu0(const SparseMatrix& a) : lu_(a), diag_(a.rows) {
  const std::size_t n = a.rows;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = lu_.find(i, static_cast<int>(i));
    if (k < 0) throw SingularMatrixError(i, fmt::format("ILU(0): row {} has no diagonal entry", i));
    diag_[i] = static_cast<std::size_t>(k);
  }
  std::vector<std::ptrdiff_t> pos(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) pos[lu_.col[k]] = static_cast<std::ptrdiff_t>(k);
    for (std::size_t k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) {
      const int j = lu_.col[k];
      if (j >= static_cast<int>(i)) break;
      const double pivot = lu_.val[diag_[j]];
      if (pivot == 0.0) throw SingularMatrixError(j, fmt::format("ILU(0): zero pivot at row {}", j));
      const double l = lu_.val[k] / pivot;
      lu_.val[k] = l;
      for (std::size_t m = diag_[j] + 1; m < lu_.row_ptr[j + 1]; ++m)
        if (pos[lu_.col[m]] >= 0) lu_.val[pos[lu_.col[m]]] -= l * lu_.val[m];
    }
    for (std::size_t k = lu_.row_ptr[i]; k < lu_.row_ptr[i + 1]; ++k) pos[lu_.col[k]] = -1;
    if (lu_.val[diag_[i]] == 0.0) throw SingularMatrixError(i, fmt::format("ILU(0): zero pivot at row {}", i));
  }
}

Vector Ilu0::apply(const Vector& r) const {
  const std::size_t n = lu_.rows;
  Vector y = r;
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[static_cast<Eigen::Index>(i)];
    for (std::size_t k = lu_.row_ptr[i]; k < diag_[i]; ++k) s -= lu_.val[k] * y[lu_.col[k]];
    y[static_cast<Eigen::Index>(i)] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[static_cast<Eigen::Index>(ii)];
    for (std::size_t k = diag_[ii] + 1; k < lu_.row_ptr[ii + 1]; ++k) s -= lu_.val[k] * y[lu_.col[k]];
    y[static_cast<Eigen::Index>(ii)] = s / lu_.val[diag_[ii]];
  }
  return y;
}

// ---------------------------------------------------------------- GMRES

std::pair<Vector, LinearSolveReport> gmres_solve(const SparseMatrix& a, const Vector& b, const GmresOptions& opts) {
  if (!(opts.tol > 0)) throw std::invalid_argument("GMRES tolerance must be positive");
  if (a.rows != a.cols || static_cast<std::size_t>(b.size()) != a.rows)
    throw std::invalid_argument("GMRES needs a square system");
  const auto n = static_cast<Eigen::Index>(a.rows);
  LinearSolveReport rep;
  rep.method = opts.precondition ? "gmres+ilu0" : "gmres";

  auto fallback = [&](const std::string& why) -> std::pair<Vector, LinearSolveReport> {
    auto [x, lrep] = lu_solve(a, b);
    lrep.method = rep.method + "->lu";
    lrep.iterations = rep.iterations;
    lrep.note = why;
    return {std::move(x), lrep};
  };

  std::unique_ptr<Ilu0> ilu;
  if (opts.precondition) {
    try {
      ilu = std::make_unique<Ilu0>(a);
    } catch (const SingularMatrixError& e) {
      if (opts.fallback_to_lu) return fallback(e.what());
      throw;
    }
  }
  auto precond = [&](const Vector& v) { return ilu ? ilu->apply(v) : v; };

  Vector x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const int m = std::max(1, opts.restart);
  bool breakdown = false;
  while (rep.iterations < opts.max_iterations) {
    Vector r = b - a.multiply(x);
    double beta = r.norm();
    if (beta / bnorm <= opts.tol) break;
    std::vector<Vector> v{r / beta};
    std::vector<Vector> z;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g[0] = beta;
    std::vector<double> cs(m), sn(m);
    int k = 0;
    for (; k < m && rep.iterations < opts.max_iterations; ++k) {
      ++rep.iterations;
      z.push_back(precond(v[k]));
      Vector w = a.multiply(z[k]);
      for (int i = 0; i <= k; ++i) {
        h(i, k) = w.dot(v[i]);
        w -= h(i, k) * v[i];
      }
      h(k + 1, k) = w.norm();
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double den = std::hypot(h(k, k), h(k + 1, k));
      if (den == 0.0 || !std::isfinite(den)) {
        breakdown = true;
        break;
      }
      cs[k] = h(k, k) / den;
      sn[k] = h(k + 1, k) / den;
      const double hk1 = h(k + 1, k);
      h(k, k) = den;
      h(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) / bnorm <= opts.tol) {
        ++k;
        break;
      }
      if (hk1 == 0.0) {
        ++k;
        break;
      }
      v.push_back(w / hk1);
    }
    if (k > 0) {
      const Eigen::VectorXd y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
      for (int i = 0; i < k; ++i) x += y[i] * z[i];
    }
    if (breakdown) break;
  }
  rep.relative_residual = relative_residual(a, x, b);
  rep.converged = std::isfinite(rep.relative_residual) && rep.relative_residual <= opts.tol;
  if (!rep.converged) {
    rep.note = breakdown ? "breakdown" : "iteration limit reached";
    if (opts.fallback_to_lu) return fallback(rep.note);
  }
  return {std::move(x), rep};
}

void write_matrix_market(const SparseMatrix& a, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows << ' ' << a.cols << ' ' << a.nnz() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      out << i + 1 << ' ' << a.col[k] + 1 << ' ' << a.val[k] << '\n';
}

void write_matrix_market(const SparseMatrix& a, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_matrix_market(a, f);
  if (!f) throw IoError("failed writing " + path);
}

}  // namespace tubeox
