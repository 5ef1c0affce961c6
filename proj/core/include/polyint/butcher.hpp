#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace polyint {

/// Coefficients of an explicit Runge-Kutta method: strictly
/// lower-triangular stage matrix a, weights b, stage count s, and the fixed
/// step size h the built circuit will use.
struct ButcherTableau {
    int s = 0;
    std::vector<std::vector<double>> a;  // s x s, a[i][j] = 0 for j >= i
    std::vector<double> b;               // s
    double h = 0.0;

    static ButcherTableau euler(double h);
    static ButcherTableau midpoint(double h);
    static ButcherTableau rk4(double h);
    static ButcherTableau preset(std::string_view name, double h);
    static bool is_preset(std::string_view name);
};

/// Throws std::invalid_argument on bad shape, non-strictly-lower a, or
/// non-finite/non-positive h.
void validate(const ButcherTableau& tab);

/// Warning text when sum(b) != 1 (an inconsistent method), else nullopt.
std::optional<std::string> consistency_warning(const ButcherTableau& tab);

/// The ratio encoding of sum(b_i k_i) needs every b_i nonzero.
bool ratio_encodable(const ButcherTableau& tab);

/// [b_1/b_2, ..., b_{s-1}/b_s, b_s, 0], length s+1.
std::vector<double> ratio_array(const ButcherTableau& tab);

/// How the stage-weight sum is wired: Ratio uses the rotating ratio array
/// (requires all b_i nonzero), Direct multiplies each k_i by b_i as it is
/// accumulated. Auto picks Ratio when possible and falls back to Direct
/// with a warning.
enum class WeightEncoding { Auto, Ratio, Direct };

/// File format: {"s": int, "a": [row-major strictly-lower entries], "b":
/// [s numbers]}; h is supplied by the caller. Presets are also accepted in
/// place of a file by name.
ButcherTableau tableau_from_json(const std::string& text, double h);
std::string tableau_to_json(const ButcherTableau& tab);
ButcherTableau load_tableau(const std::filesystem::path& path, double h);

}  // namespace polyint
