#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace polyint {

/// State x in R^N. Entries are validated finite on construction and
/// negative zeros are normalized to +0.0, so that bitwise comparison of
/// states is well defined.
class StateVector {
  public:
    StateVector() = default;
    explicit StateVector(std::vector<double> values);

    /// Wraps evaluator output without validation (derivatives may blow up;
    /// the circuit engine reports that itself).
    static StateVector unchecked(std::vector<double> values);

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

  private:
    std::vector<double> values_;
};

/// Bit-for-bit equality (memcmp on the representation, not operator==).
bool bit_equal(double a, double b);
bool bit_equal(const StateVector& a, const StateVector& b);

/// Exponent vector (d_0 .. d_{N-1}) of one monomial. Degree >= 2 monomials
/// become hidden product nodes when compiled.
struct Monomial {
    std::vector<int> exponents;

    int degree() const;
    std::string text() const;  // "1", "x0", "x0^2*x2"

    friend bool operator==(const Monomial&, const Monomial&) = default;
};

/// Graded-lexicographic order: lower total degree first; within equal
/// degree, higher exponent on the lowest-indexed variable first, so
/// x0^2 < x0*x1 < x0*x2 < x1^2.
bool grlex_less(const Monomial& a, const Monomial& b);

struct Term {
    int output_index = 0;
    double coefficient = 0.0;
    Monomial monomial;
};

/// Polynomial right-hand side dx/dt = f(x): N outputs, each a sum of
/// coefficient * monomial contributions of degree <= D.
///
/// Terms are stored in canonical order (ascending output index, then grlex
/// on the monomial). Duplicate (output, monomial) pairs are merged by
/// summation in input order, zero coefficients are dropped. The canonical
/// order is the operation-order contract every evaluator in this project
/// follows, which is what makes bitwise equivalence between the direct
/// evaluation and the compiled circuits testable.
class PolynomialSystem {
  public:
    PolynomialSystem(int n_vars, int max_degree, std::vector<Term> terms);

    int n_vars() const { return n_vars_; }
    int max_degree() const { return max_degree_; }
    const std::vector<Term>& terms() const { return terms_; }

  private:
    int n_vars_ = 0;
    int max_degree_ = 0;
    std::vector<Term> terms_;
};

/// binomial(n_vars + max_degree, max_degree): the number of distinct
/// monomials of degree <= max_degree in n_vars variables. Exact integer
/// arithmetic; throws std::overflow_error instead of wrapping.
std::int64_t monomial_count(int n_vars, int max_degree);

/// All monomials of degree <= max_degree over n_vars variables, in grlex
/// order. Size equals monomial_count(n_vars, max_degree).
std::vector<Monomial> enumerate_monomials(int n_vars, int max_degree);

/// f(x), accumulated strictly in canonical term order. Each term is
/// coefficient * product(x_j^d_j) with the power expanded as repeated
/// multiplication in ascending j, starting from 1.0; each output
/// accumulates from 0.0 in term order. Compiled circuits reproduce this
/// operation order exactly.
StateVector eval_derivative(const PolynomialSystem& sys, const StateVector& x);
void eval_derivative_raw(const PolynomialSystem& sys, std::span<const double> x,
                         std::span<double> out);

/// The Lorenz-63 system: dx0 = sigma*(x1 - x0), dx1 = rho*x0 - x1 - x0*x2,
/// dx2 = -beta*x2 + x0*x1. With nonzero parameters this has 7 terms, two of
/// degree 2.
PolynomialSystem lorenz63(double sigma, double rho, double beta);

/// Parse a system description; see README for the exact grammar. Unknown
/// fields are rejected; errors carry line/column positions.
PolynomialSystem system_from_json(const std::string& text);
std::string system_to_json(const PolynomialSystem& sys);
PolynomialSystem load_system(const std::filesystem::path& path);

}  // namespace polyint
