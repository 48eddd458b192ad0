#pragma once

#include <filesystem>

#include <json.hpp>

#include "secest/decomposition.hpp"

namespace secest {

/// Everything `simulate` needs, as persisted by `design`.
struct DesignBundle {
    SystemModel model;
    SpectralDesign spectral;
    SensorDecomposition decomposition;
};

/// Design file layout: {"format": "secest-design", "version": 1, "model": {...},
/// "spectral": {...}, "decomposition": {...}}. Complex entries are [re, im] pairs.
nlohmann::json design_to_json(const DesignBundle& bundle);
DesignBundle design_from_json(const nlohmann::json& doc);

void save_design(const std::filesystem::path& path, const DesignBundle& bundle);
DesignBundle load_design(const std::filesystem::path& path);

nlohmann::json cmatrix_to_json(const CMatrix& M);
CMatrix cmatrix_from_json(const nlohmann::json& value, const std::string& key);

}  // namespace secest
