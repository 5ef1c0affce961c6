#include "polyint/polyode.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace polyint {

namespace {

double normalize_zero(double v) { return v == 0.0 ? 0.0 : v; }

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

StateVector::StateVector(std::vector<double> values) : values_(std::move(values)) {
    for (auto& v : values_) {
        require(std::isfinite(v), "StateVector entries must be finite");
        v = normalize_zero(v);
    }
}

StateVector StateVector::unchecked(std::vector<double> values) {
    StateVector x;
    x.values_ = std::move(values);
    return x;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool bit_equal(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!bit_equal(a[i], b[i])) return false;
    return true;
}

int Monomial::degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

std::string Monomial::text() const {
    std::string s;
    for (std::size_t j = 0; j < exponents.size(); ++j) {
        if (exponents[j] == 0) continue;
        if (!s.empty()) s += "*";
        s += "x" + std::to_string(j);
        if (exponents[j] > 1) s += "^" + std::to_string(exponents[j]);
    }
    return s.empty() ? "1" : s;
}

bool grlex_less(const Monomial& a, const Monomial& b) {
    const int da = a.degree();
    const int db = b.degree();
    if (da != db) return da < db;
    // Equal degree: the monomial spending more of it on earlier variables
    // comes first.
    return std::lexicographical_compare(b.exponents.begin(), b.exponents.end(),
                                        a.exponents.begin(), a.exponents.end());
}

PolynomialSystem::PolynomialSystem(int n_vars, int max_degree, std::vector<Term> terms)
    : n_vars_(n_vars), max_degree_(max_degree) {
    require(n_vars >= 1, "n_vars must be >= 1");
    require(max_degree >= 0, "max_degree must be >= 0");
    for (const auto& t : terms) {
        require(t.output_index >= 0 && t.output_index < n_vars,
                "term output index out of range");
        require(std::isfinite(t.coefficient), "term coefficient must be finite");
        require(static_cast<int>(t.monomial.exponents.size()) == n_vars,
                "exponent vector length must equal n_vars");
        for (int e : t.monomial.exponents) require(e >= 0, "exponents must be >= 0");
        require(t.monomial.degree() <= max_degree, "monomial degree exceeds max_degree");
    }

    // Merge duplicate (output, monomial) pairs by summation in input order,
    // then drop zeros and sort canonically.
    std::vector<Term> merged;
    for (const auto& t : terms) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](const Term& m) {
            return m.output_index == t.output_index && m.monomial == t.monomial;
        });
        if (it == merged.end())
            merged.push_back(t);
        else
            it->coefficient += t.coefficient;
    }
    std::erase_if(merged, [](const Term& t) { return t.coefficient == 0.0; });
    std::sort(merged.begin(), merged.end(), [](const Term& a, const Term& b) {
        if (a.output_index != b.output_index) return a.output_index < b.output_index;
        return grlex_less(a.monomial, b.monomial);
    });
    terms_ = std::move(merged);
}

std::int64_t monomial_count(int n_vars, int max_degree) {
    require(n_vars >= 1, "n_vars must be >= 1");
    require(max_degree >= 0, "max_degree must be >= 0");
    // binomial(n+d, d) via the multiplicative formula; each intermediate is
    // exact. Overflow is detected, never wrapped.
    const std::int64_t n = n_vars;
    const std::int64_t d = max_degree;
    std::int64_t result = 1;
    for (std::int64_t i = 1; i <= d; ++i) {
        std::int64_t next;
        if (__builtin_mul_overflow(result, n + i, &next))
            throw std::overflow_error("monomial_count overflows 64-bit integer");
        result = next / i;  // exact: product of i consecutive integers is divisible by i!
    }
    return result;
}

std::vector<Monomial> enumerate_monomials(int n_vars, int max_degree) {
    require(n_vars >= 1, "n_vars must be >= 1");
    require(max_degree >= 0, "max_degree must be >= 0");
    std::vector<Monomial> result;
    std::vector<int> exps(n_vars, 0);
    // All compositions of `degree` into n_vars parts, emitted in grlex order.
    auto emit = [&](auto&& self, int var, int remaining) -> void {
        if (var == n_vars - 1) {
            exps[var] = remaining;
            result.push_back(Monomial{exps});
            exps[var] = 0;
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            exps[var] = e;
            self(self, var + 1, remaining - e);
        }
        exps[var] = 0;
    };
    for (int degree = 0; degree <= max_degree; ++degree) emit(emit, 0, degree);
    return result;
}

void eval_derivative_raw(const PolynomialSystem& sys, std::span<const double> x,
                         std::span<double> out) {
    const int n = sys.n_vars();
    for (int i = 0; i < n; ++i) out[i] = 0.0;
    for (const auto& t : sys.terms()) {
        double m = 1.0;
        const auto& exps = t.monomial.exponents;
        for (int j = 0; j < n; ++j)
            for (int e = 0; e < exps[j]; ++e) m *= x[j];
        out[t.output_index] += t.coefficient * m;
    }
}

StateVector eval_derivative(const PolynomialSystem& sys, const StateVector& x) {
    require(static_cast<int>(x.size()) == sys.n_vars(), "state length must equal n_vars");
    std::vector<double> out(sys.n_vars());
    eval_derivative_raw(sys, x.values(), out);
    return StateVector::unchecked(std::move(out));
}

PolynomialSystem lorenz63(double sigma, double rho, double beta) {
    require(std::isfinite(sigma) && std::isfinite(rho) && std::isfinite(beta),
            "lorenz63 parameters must be finite");
    auto mono = [](int a, int b, int c) { return Monomial{{a, b, c}}; };
    std::vector<Term> terms = {
        {0, -sigma, mono(1, 0, 0)}, {0, sigma, mono(0, 1, 0)},   // dx0 = sigma*(x1 - x0)
        {1, rho, mono(1, 0, 0)},    {1, -1.0, mono(0, 1, 0)},    // dx1 = rho*x0 - x1 - x0*x2
        {1, -1.0, mono(1, 0, 1)},
        {2, -beta, mono(0, 0, 1)},  {2, 1.0, mono(1, 1, 0)},     // dx2 = -beta*x2 + x0*x1
    };
    return PolynomialSystem(3, 2, std::move(terms));
}

namespace {

using nlohmann::json;

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

void reject_unknown_fields(const json& obj, std::initializer_list<const char*> known,
                           const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }) == known.end())
            throw std::invalid_argument("unknown field \"" + key + "\" in " + where);
    }
}

}  // namespace

PolynomialSystem system_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::ostringstream msg;
        msg << "system parse error at line " << line << ", column " << col << ": " << e.what();
        throw std::invalid_argument(msg.str());
    }
    if (!doc.is_object()) throw std::invalid_argument("system description must be an object");
    reject_unknown_fields(doc, {"n_vars", "max_degree", "terms"}, "system");
    if (!doc.contains("n_vars") || !doc.contains("max_degree") || !doc.contains("terms"))
        throw std::invalid_argument("system requires fields n_vars, max_degree, terms");
    if (!doc["n_vars"].is_number_integer() || !doc["max_degree"].is_number_integer())
        throw std::invalid_argument("n_vars and max_degree must be integers");
    const int n_vars = doc["n_vars"].get<int>();
    const int max_degree = doc["max_degree"].get<int>();
    if (!doc["terms"].is_array()) throw std::invalid_argument("terms must be a list");

    std::vector<Term> terms;
    std::size_t index = 0;
    for (const auto& item : doc["terms"]) {
        const std::string where = "terms[" + std::to_string(index) + "]";
        if (!item.is_object()) throw std::invalid_argument(where + " must be an object");
        reject_unknown_fields(item, {"output", "coeff", "exponents"}, where);
        if (!item.contains("output") || !item.contains("coeff") || !item.contains("exponents"))
            throw std::invalid_argument(where + " requires fields output, coeff, exponents");
        if (!item["output"].is_number_integer())
            throw std::invalid_argument(where + ".output must be an integer");
        if (!item["coeff"].is_number())
            throw std::invalid_argument(where + ".coeff must be a number");
        if (!item["exponents"].is_array())
            throw std::invalid_argument(where + ".exponents must be a list");
        Term t;
        t.output_index = item["output"].get<int>();
        t.coefficient = item["coeff"].get<double>();
        for (const auto& e : item["exponents"]) {
            if (!e.is_number_integer())
                throw std::invalid_argument(where + ".exponents entries must be integers");
            t.monomial.exponents.push_back(e.get<int>());
        }
        terms.push_back(std::move(t));
        ++index;
    }
    return PolynomialSystem(n_vars, max_degree, std::move(terms));
}

std::string system_to_json(const PolynomialSystem& sys) {
    json doc;
    doc["n_vars"] = sys.n_vars();
    doc["max_degree"] = sys.max_degree();
    doc["terms"] = json::array();
    for (const auto& t : sys.terms()) {
        json item;
        item["output"] = t.output_index;
        item["coeff"] = t.coefficient;
        item["exponents"] = t.monomial.exponents;
        doc["terms"].push_back(std::move(item));
    }
    return doc.dump(2);
}

PolynomialSystem load_system(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open system file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return system_from_json(buf.str());
}

}  // namespace polyint
