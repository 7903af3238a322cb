#include "sdelab/catalog.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sdelab/errors.hpp"

namespace sdelab {

using nlohmann::json;

SdeModel CatalogEntry::model() const { return make_model(drift, diffusion, x0, horizon, name); }

namespace {

CatalogEntry localized_indicator() {
    const auto base = make_model(PiecewisePolynomial::step(0.0, 0.0, 1.0),
                                 PiecewisePolynomial::constant(1.0), 0.0, 1.0, "indicator-drift");
    const auto local = localize_model(base, 0.0, LocalizationRadii{});
    CatalogEntry e;
    e.name = "indicator-drift-localized";
    e.description = "mu* = eta1 * 1_[0,inf), sigma* = eta1 + eta2 around xi = 0, radii (0.1, 0.2, 0.3, 0.4, 0.5)";
    e.role = "localized counterpart for the pathwise coincidence check";
    e.criteria = {9};
    e.drift = dynamic_cast<const PiecewisePolynomial&>(*local.drift);
    e.diffusion = dynamic_cast<const PiecewisePolynomial&>(*local.diffusion);
    e.x0 = 0.0;
    e.horizon = 1.0;
    return e;
}

std::vector<CatalogEntry> make_catalog() {
    std::vector<CatalogEntry> out;
    out.push_back({"indicator-drift",
                   "mu(x) = 1_[0,inf)(x), sigma = 1, x0 = 0, T = 1; jump of height 1 at xi = 0",
                   "final-time and global rate experiments with a discontinuous drift",
                   {1, 2, 4, 5, 6, 7, 8, 9, 10},
                   PiecewisePolynomial::step(0.0, 0.0, 1.0),
                   PiecewisePolynomial::constant(1.0),
                   0.0,
                   1.0});
    out.push_back({"ou", "mu(x) = -x, sigma = 1, x0 = 0, T = 1",
                   "Lipschitz baseline with closed-form coupling variances",
                   {2, 3, 4, 6, 11},
                   PiecewisePolynomial::polynomial({0.0, -1.0}),
                   PiecewisePolynomial::constant(1.0),
                   0.0,
                   1.0});
    out.push_back({"brownian", "mu = 0, sigma = 1, x0 = 0, T = 1",
                   "additive noise: exactness and zero-distance checks, Gaussian density sanity case",
                   {3, 10},
                   PiecewisePolynomial::constant(0.0),
                   PiecewisePolynomial::constant(1.0),
                   0.0,
                   1.0});
    out.push_back(localized_indicator());
    out.push_back({"affine-diffusion-jump", "mu(x) = 1_[0,inf)(x), sigma(x) = 2 + x, x0 = 0, T = 1",
                   "jump removal with a state-dependent diffusion",
                   {8},
                   PiecewisePolynomial::step(0.0, 0.0, 1.0),
                   PiecewisePolynomial::polynomial({2.0, 1.0}),
                   0.0,
                   1.0});
    return out;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw ValidationError("model field '" + field + "': " + why);
}

double number_field(const json& j, const std::string& key) {
    if (!j.contains(key)) bad_field(key, "missing");
    if (!j.at(key).is_number()) bad_field(key, "must be a number");
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v)) bad_field(key, "must be finite");
    return v;
}

}  // namespace

const std::vector<CatalogEntry>& builtin_models() {
    static const std::vector<CatalogEntry> catalog = make_catalog();
    return catalog;
}

const CatalogEntry& find_model(const std::string& name) {
    for (const auto& e : builtin_models()) {
        if (e.name == name) return e;
    }
    throw ValidationError("unknown model '" + name + "'");
}

json coefficient_to_json(const PiecewisePolynomial& f) {
    json values = json::array();
    for (const auto& v : f.breakpoint_values()) {
        values.push_back(v ? json(*v) : json(nullptr));
    }
    return json{{"breakpoints", f.knots()}, {"pieces", f.pieces()}, {"breakpoint_values", values}};
}

PiecewisePolynomial coefficient_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("coefficient must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key != "breakpoints" && key != "pieces" && key != "breakpoint_values") {
            bad_field(key, "unknown coefficient field");
        }
    }
    std::vector<double> bps;
    std::vector<std::vector<double>> pieces;
    std::vector<std::optional<double>> values;
    try {
        if (j.contains("breakpoints")) bps = j.at("breakpoints").get<std::vector<double>>();
        if (!j.contains("pieces")) bad_field("pieces", "missing");
        pieces = j.at("pieces").get<std::vector<std::vector<double>>>();
        if (j.contains("breakpoint_values")) {
            for (const auto& v : j.at("breakpoint_values")) {
                if (v.is_null()) {
                    values.emplace_back();
                } else {
                    values.emplace_back(v.get<double>());
                }
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed coefficient: ") + e.what());
    }
    return PiecewisePolynomial(std::move(bps), std::move(pieces), std::move(values));
}

json entry_to_json(const CatalogEntry& entry) {
    return json{{"name", entry.name},
                {"drift", coefficient_to_json(entry.drift)},
                {"diffusion", coefficient_to_json(entry.diffusion)},
                {"x0", entry.x0},
                {"horizon", entry.horizon}};
}

CatalogEntry entry_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("model must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key != "name" && key != "drift" && key != "diffusion" && key != "x0" && key != "horizon" &&
            key != "description") {
            bad_field(key, "unknown model field");
        }
    }
    CatalogEntry e;
    if (j.contains("name")) {
        if (!j.at("name").is_string()) bad_field("name", "must be a string");
        e.name = j.at("name").get<std::string>();
    }
    if (j.contains("description") && j.at("description").is_string()) {
        e.description = j.at("description").get<std::string>();
    }
    if (!j.contains("drift")) bad_field("drift", "missing");
    if (!j.contains("diffusion")) bad_field("diffusion", "missing");
    const auto coefficient = [&](const std::string& field) {
        try {
            return coefficient_from_json(j.at(field));
        } catch (const ValidationError& err) {
            bad_field(field, err.what());
        }
    };
    e.drift = coefficient("drift");
    e.diffusion = coefficient("diffusion");
    e.x0 = number_field(j, "x0");
    e.horizon = number_field(j, "horizon");
    if (!(e.horizon > 0.0)) bad_field("horizon", "must be positive");
    return e;
}

CatalogEntry load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("model file '" + path + "' is not valid JSON: " + e.what());
    }
    return entry_from_json(j);
}

json transform_to_json(const TransformG& g) {
    std::vector<double> centers, alpha, nu;
    for (const auto& b : g.bumps()) {
        centers.push_back(b.center);
        alpha.push_back(b.strength);
        nu.push_back(b.radius);
    }
    return json{{"breakpoints", centers}, {"alpha", alpha}, {"nu", nu}, {"profile_power", g.profile_power()}};
}

TransformG transform_from_json(const json& j) {
    try {
        const auto centers = j.at("breakpoints").get<std::vector<double>>();
        const auto alpha = j.at("alpha").get<std::vector<double>>();
        const auto nu = j.at("nu").get<std::vector<double>>();
        const int power = j.value("profile_power", 4);
        if (centers.size() != alpha.size() || centers.size() != nu.size()) {
            throw ValidationError("transform arrays differ in length");
        }
        std::vector<JumpBump> bumps;
        for (std::size_t i = 0; i < centers.size(); ++i) bumps.push_back({centers[i], alpha[i], nu[i]});
        return TransformG(std::move(bumps), power);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed transform: ") + e.what());
    }
}

}  // namespace sdelab
