#include "polyint/butcher.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace polyint {

namespace {

ButcherTableau make(int s, std::vector<std::vector<double>> a, std::vector<double> b, double h) {
    ButcherTableau tab{s, std::move(a), std::move(b), h};
    validate(tab);
    return tab;
}

}  // namespace

ButcherTableau ButcherTableau::euler(double h) { return make(1, {{0.0}}, {1.0}, h); }

ButcherTableau ButcherTableau::midpoint(double h) {
    return make(2, {{0.0, 0.0}, {0.5, 0.0}}, {0.0, 1.0}, h);
}

ButcherTableau ButcherTableau::rk4(double h) {
    return make(4,
                {{0.0, 0.0, 0.0, 0.0},
                 {0.5, 0.0, 0.0, 0.0},
                 {0.0, 0.5, 0.0, 0.0},
                 {0.0, 0.0, 1.0, 0.0}},
                {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0}, h);
}

ButcherTableau ButcherTableau::preset(std::string_view name, double h) {
    if (name == "euler") return euler(h);
    if (name == "midpoint") return midpoint(h);
    if (name == "rk4") return rk4(h);
    throw std::invalid_argument("unknown tableau preset: " + std::string(name));
}

bool ButcherTableau::is_preset(std::string_view name) {
    return name == "euler" || name == "midpoint" || name == "rk4";
}

void validate(const ButcherTableau& tab) {
    if (tab.s < 1) throw std::invalid_argument("tableau needs at least one stage");
    if (static_cast<int>(tab.a.size()) != tab.s || static_cast<int>(tab.b.size()) != tab.s)
        throw std::invalid_argument("tableau shape mismatch");
    for (int i = 0; i < tab.s; ++i) {
        if (static_cast<int>(tab.a[i].size()) != tab.s)
            throw std::invalid_argument("tableau shape mismatch");
        for (int j = i; j < tab.s; ++j)
            if (tab.a[i][j] != 0.0)
                throw std::invalid_argument("explicit tableau must be strictly lower triangular");
        for (int j = 0; j < tab.s; ++j)
            if (!std::isfinite(tab.a[i][j]))
                throw std::invalid_argument("tableau entries must be finite");
    }
    for (double w : tab.b)
        if (!std::isfinite(w)) throw std::invalid_argument("tableau weights must be finite");
    if (!(tab.h > 0.0) || !std::isfinite(tab.h))
        throw std::invalid_argument("step size must be positive and finite");
}

std::optional<std::string> consistency_warning(const ButcherTableau& tab) {
    double sum = 0.0;
    for (double w : tab.b) sum += w;
    if (std::fabs(sum - 1.0) <= 1e-12) return std::nullopt;
    std::ostringstream msg;
    msg.precision(17);
    msg << "tableau weights sum to " << sum << ", not 1: the method is inconsistent";
    return msg.str();
}

bool ratio_encodable(const ButcherTableau& tab) {
    for (double w : tab.b)
        if (w == 0.0) return false;
    return true;
}

std::vector<double> ratio_array(const ButcherTableau& tab) {
    if (!ratio_encodable(tab))
        throw std::invalid_argument("ratio array undefined: tableau has a zero weight");
    std::vector<double> values;
    for (int i = 0; i + 1 < tab.s; ++i) values.push_back(tab.b[i] / tab.b[i + 1]);
    values.push_back(tab.b[tab.s - 1]);
    values.push_back(0.0);
    return values;
}

ButcherTableau tableau_from_json(const std::string& text, double h) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("tableau parse error: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("s") || !doc.contains("a") || !doc.contains("b"))
        throw std::invalid_argument("tableau requires fields s, a, b");
    for (const auto& [key, value] : doc.items())
        if (key != "s" && key != "a" && key != "b")
            throw std::invalid_argument("unknown field \"" + key + "\" in tableau");
    const int s = doc["s"].get<int>();
    if (s < 1) throw std::invalid_argument("tableau needs at least one stage");
    const auto flat = doc["a"].get<std::vector<double>>();
    if (static_cast<int>(flat.size()) != s * (s - 1) / 2)
        throw std::invalid_argument("tableau field a must hold the s*(s-1)/2 strictly-lower "
                                    "entries row-major");
    std::vector<std::vector<double>> a(s, std::vector<double>(s, 0.0));
    std::size_t k = 0;
    for (int i = 1; i < s; ++i)
        for (int j = 0; j < i; ++j) a[i][j] = flat[k++];
    return make(s, std::move(a), doc["b"].get<std::vector<double>>(), h);
}

std::string tableau_to_json(const ButcherTableau& tab) {
    using nlohmann::json;
    json doc;
    doc["s"] = tab.s;
    std::vector<double> flat;
    for (int i = 1; i < tab.s; ++i)
        for (int j = 0; j < i; ++j) flat.push_back(tab.a[i][j]);
    doc["a"] = flat;
    doc["b"] = tab.b;
    return doc.dump(2);
}

ButcherTableau load_tableau(const std::filesystem::path& path, double h) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open tableau file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return tableau_from_json(buf.str(), h);
}

}  // namespace polyint
