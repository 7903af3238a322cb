#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "sdelab/coefficients.hpp"
#include "sdelab/transforms.hpp"

namespace sdelab {

struct CatalogEntry {
    std::string name;
    std::string description;
    std::string role;                 // which experiments use it
    std::vector<int> criteria;        // acceptance criteria served
    PiecewisePolynomial drift = PiecewisePolynomial::constant(0.0);
    PiecewisePolynomial diffusion = PiecewisePolynomial::constant(1.0);
    double x0 = 0.0;
    double horizon = 1.0;

    SdeModel model() const;
};

/// indicator-drift, ou, brownian, indicator-drift-localized, affine-diffusion-jump.
const std::vector<CatalogEntry>& builtin_models();
const CatalogEntry& find_model(const std::string& name);

// JSON model format:
// {"name": ..., "drift": {"breakpoints": [...], "pieces": [[c0, c1, ...], ...],
//  "breakpoint_values": [v or null, ...]}, "diffusion": {...}, "x0": ..., "horizon": ...}

nlohmann::json coefficient_to_json(const PiecewisePolynomial& f);
PiecewisePolynomial coefficient_from_json(const nlohmann::json& j);

nlohmann::json entry_to_json(const CatalogEntry& entry);
/// ValidationError with the offending field on malformed input.
CatalogEntry entry_from_json(const nlohmann::json& j);
CatalogEntry load_model_file(const std::string& path);

/// {"breakpoints": [...], "alpha": [...], "nu": [...], "profile_power": k}
nlohmann::json transform_to_json(const TransformG& g);
TransformG transform_from_json(const nlohmann::json& j);

}  // namespace sdelab
