#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "relaynet/linalg.hpp"

// Small dense conic programs: nonnegative orthant, second-order cones and real
// symmetric PSD blocks, solved by a homogeneous self-dual primal-dual
// interior-point method with Nesterov-Todd scaling.
namespace relaynet::conic {

struct LinearTerm {
  int var;
  double coef;
};

/// constant + sum coef * x[var]
struct AffineScalar {
  double constant = 0.0;
  std::vector<LinearTerm> terms;

  AffineScalar() = default;
  explicit AffineScalar(double c) : constant(c) {}

  AffineScalar& add(int var, double coef) {
    if (coef != 0.0) terms.push_back({var, coef});
    return *this;
  }
  double evaluate(const RVector& x) const;
};

struct SymEntry {
  int row;
  int col;
  double value;
};

/// Real symmetric affine matrix expression. Coefficients are stored with both
/// triangles present.
struct SymAffineMatrix {
  int dim = 0;
  RMatrix constant;
  std::vector<std::pair<int, std::vector<SymEntry>>> terms;

  RMatrix evaluate(const RVector& x) const;
};

/// Complex Hermitian affine matrix expression: constant + sum x[var] * coeff.
/// The variables are real; complex matrix unknowns are split by the caller
/// into real and imaginary parts.
class HermitianAffineMatrix {
 public:
  explicit HermitianAffineMatrix(int dim);

  int dim() const { return dim_; }
  CMatrix& constant() { return constant_; }
  const CMatrix& constant() const { return constant_; }

  /// Accumulates coeff into the coefficient of x[var].
  void add_term(int var, const CMatrix& coeff);
  /// Adds coeff at block offset (r, c) plus its adjoint at (c, r), so the
  /// caller only describes one off-diagonal block. Diagonal blocks (r == c)
  /// receive coeff + coeff^H.
  void add_block_pair(int var, Eigen::Index r, Eigen::Index c, const CMatrix& coeff);

  const std::vector<std::pair<int, CMatrix>>& terms() const { return terms_; }
  CMatrix evaluate(const RVector& x) const;

 private:
  int dim_;
  CMatrix constant_;
  std::vector<std::pair<int, CMatrix>> terms_;
  std::vector<int> slot_;  // var -> index in terms_, grown on demand
};

/// Real embedding [[Re, -Im], [Im, Re]]; X >= 0 iff the embedding is >= 0.
/// Throws Error(NotHermitian) if the constant or any coefficient is not
/// Hermitian.
SymAffineMatrix embed_hermitian(const HermitianAffineMatrix& lmi);
RMatrix embed_hermitian(const CMatrix& h);

/// ||v||_2 <= t
struct SocConstraint {
  std::vector<AffineScalar> v;
  AffineScalar t;
};

struct ConicProgram {
  int var_count = 0;
  RVector objective;                     // minimize objective . x
  std::vector<AffineScalar> nonneg;      // expression >= 0
  std::vector<AffineScalar> equalities;  // expression == 0
  std::vector<SocConstraint> socs;
  std::vector<SymAffineMatrix> psd_blocks;

  int add_variable();
  int add_variables(int count);
  void set_objective(int var, double coef);
  void add_psd(SymAffineMatrix block) { psd_blocks.push_back(std::move(block)); }
  void add_hermitian_psd(const HermitianAffineMatrix& lmi) { psd_blocks.push_back(embed_hermitian(lmi)); }

  /// Throws Error(InvalidArgument) on references to undeclared variables,
  /// zero-sized blocks or non-finite data.
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter, NumericalFailure };
const char* to_string(SolveStatus s);

struct IterateRecord {
  double primal_objective;
  double dual_objective;
  double primal_residual;
  double dual_residual;
  double gap;
  double step;
};

struct ConicSolution {
  RVector primal_values;
  double objective_value = 0.0;
  double dual_objective = 0.0;
  double duality_gap = 0.0;
  double kkt_residual = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  int iterations = 0;
  std::string diagnostics;
  std::vector<IterateRecord> history;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

struct SolverSettings {
  double gap_tol = 1e-8;          // relative gap target
  double abs_gap_tol = 1e-8;      // absolute gap target
  double feas_tol = 1e-8;         // relative residual target
  double accept_tol = 1e-7;       // fallback acceptance when progress stalls
  int max_iterations = 200;
  double step_fraction = 0.99;
};

ConicSolution solve(const ConicProgram& program, const SolverSettings& settings = {});

/// Plain-text standard-form listing with 17 significant digits.
void dump_program(const ConicProgram& program, std::ostream& os);

/// Largest violation of the program's constraints at x (positive = violated):
/// max over -nonneg, |eq|, ||v||-t and -lambda_min(psd).
double max_violation(const ConicProgram& program, const RVector& x);

}  // namespace relaynet::conic
