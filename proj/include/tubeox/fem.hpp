#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tubeox/mesh.hpp"

namespace tubeox {

using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------- quadrature

/// Points in barycentric coordinates on the reference triangle; weights sum to 1/2.
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Cheapest built-in rule exact for polynomials of `degree` (supported up to 5).
const QuadratureRule& triangle_rule(int degree);

/// Gauss-Legendre rule on [0, 1] with n points (n = 1..4); weights sum to 1.
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};
const LineRule& line_rule(int n);

// ---------------------------------------------------------------- elements

enum class ElementKind { P1, P2 };

/// Basis values and gradients with respect to reference coordinates
/// (xi, eta) = (L1, L2). Only the first `count` entries are used.
struct ShapeValues {
  int count = 0;
  std::array<double, 6> value{};
  std::array<Vec2, 6> grad{};
};

ShapeValues shape_eval(ElementKind kind, const std::array<double, 3>& bary);

/// Affine map of a straight-sided triangle.
struct ElementGeometry {
  std::array<Vec2, 3> v;
  double det = 0.0;  // twice the area
  double j00 = 0, j01 = 0, j10 = 0, j11 = 0;

  Vec2 map(const std::array<double, 3>& bary) const {
    return bary[0] * v[0] + bary[1] * v[1] + bary[2] * v[2];
  }
  Vec2 physical_gradient(Vec2 ref) const {
    return {(j11 * ref.x - j10 * ref.y) / det, (-j01 * ref.x + j00 * ref.y) / det};
  }
  double area() const { return 0.5 * det; }
};

/// Throws SingularElementError when the triangle is degenerate or inverted.
ElementGeometry element_geometry(const Mesh& mesh, std::size_t t);

/// Shape data at the points of a rule, tabulated once per rule.
struct Tabulation {
  const QuadratureRule* rule = nullptr;
  std::vector<ShapeValues> p1;
  std::vector<ShapeValues> p2;
};
const Tabulation& tabulate(int degree);

// ---------------------------------------------------------------- dof maps

enum class FieldKind { P1Scalar, P2Scalar, P2Vector, BoundaryP1 };

/// Global numbering of one field. P1 uses vertex indices, P2 uses P2Mesh node
/// indices (vertices first, then edge nodes), P2Vector stacks the two
/// components (component c of node i is c * nodes + i), and BoundaryP1
/// numbers the selected boundary vertices in the order given.
struct DofMap {
  FieldKind kind = FieldKind::P1Scalar;
  std::size_t nodes = 0;
  std::size_t total = 0;
  /// BoundaryP1 only: vertex of each dof and the inverse table (-1 if absent).
  std::vector<int> vertex_of;
  std::vector<int> dof_of_vertex;

  static DofMap p1(const P2Mesh& mesh);
  static DofMap p2(const P2Mesh& mesh);
  static DofMap p2_vector(const P2Mesh& mesh);
  static DofMap boundary_p1(const P2Mesh& mesh, const BoundaryNodes& nodes);

  int dof(int node, int component = 0) const;
  /// Local dofs of triangle t for one component (3 or 6 entries).
  std::vector<int> element_dofs(const P2Mesh& mesh, std::size_t t, int component = 0) const;
};

// ---------------------------------------------------------------- sparse matrix

/// Compressed sparse row matrix; column indices strictly increase within a row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }
  /// Position of (i, j) in `val`, or -1 if not in the pattern.
  std::ptrdiff_t find(std::size_t i, int j) const;
  double at(std::size_t i, int j) const;
  /// Adds to an existing entry; throws std::out_of_range outside the pattern.
  void add(std::size_t i, int j, double v);
  void set_zero();
  Vector multiply(const Vector& x) const;
  SparseMatrix transpose() const;
  Eigen::MatrixXd to_dense() const;
  /// a * this + b * other; patterns are merged.
  SparseMatrix combine(double a, const SparseMatrix& other, double b) const;

  static SparseMatrix identity(std::size_t n);
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    const std::vector<std::tuple<int, int, double>>& entries);
};

/// Symbolic pass: collects the pattern, then builds a zero-valued matrix.
class SparsityBuilder {
 public:
  SparsityBuilder(std::size_t rows, std::size_t cols);
  void add_block(std::span<const int> row_dofs, std::span<const int> col_dofs);
  void add(int i, int j);
  SparseMatrix build() const;

 private:
  std::size_t cols_;
  std::vector<std::vector<int>> rows_;
};

/// Adds local(r, c) to A(rows[r], cols[c]).
void scatter(SparseMatrix& a, std::span<const int> rows, std::span<const int> cols, const Eigen::MatrixXd& local);

// ---------------------------------------------------------------- forms

/// P2 vector field evaluated pointwise; wraps a velocity dof vector.
struct VelocityField {
  const P2Mesh* mesh = nullptr;
  const Vector* dofs = nullptr;  // P2Vector layout

  Vec2 at_element(std::size_t t, const ShapeValues& p2) const;
};

enum class FormKind {
  Mass,          // ∫ k φj φi
  Diffusion,     // ∫ k ∇φj·∇φi
  Convection,    // ∫ (u·∇φj) φi
  BoundaryMass,  // ∫_Γ k φj φi over tagged edges
  OutflowFlux,   // ∫_Γ (u·n) φj φi over tagged edges
};

struct Form {
  FormKind kind = FormKind::Mass;
  double coefficient = 1.0;
  /// 0 picks an exact degree for affine elements.
  int quadrature_degree = 0;
  std::vector<BoundaryTag> tags;
  VelocityField velocity;
};

/// Scalar bilinear form on a P1Scalar or P2Scalar map.
SparseMatrix assemble(const Form& form, const P2Mesh& mesh, const DofMap& map);

/// ∫ f φi for a scalar map.
Vector assemble_load(const P2Mesh& mesh, const DofMap& map, const std::function<double(Vec2)>& f, int degree = 5);

// ---------------------------------------------------------------- constraints

using Constraints = std::map<int, double>;

/// Adds (dof, value) pairs to `c`; ConstraintError if a dof is already fixed
/// to a value differing by more than 1e-12.
void add_constraints(Constraints& c, std::span<const std::pair<int, double>> entries);
void add_constraint(Constraints& c, int dof, double value);

/// Symmetric elimination with lifting: constrained rows and columns are
/// zeroed, the diagonal set to 1 and the right-hand side set to the value.
void apply_dirichlet(SparseMatrix& a, Vector& b, const Constraints& c);

/// Zeroes constrained entries of a residual-like vector.
void zero_constrained(Vector& r, const Constraints& c);

}  // namespace tubeox
