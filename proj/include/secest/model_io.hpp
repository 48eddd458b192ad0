#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "secest/model.hpp"

namespace secest {

/// Parses a model file. Keys: "A", "C", "Q", "R", "Sigma" (required), "B", "K_lqr",
/// "sensor_labels", "state_basis" (optional). Matrices are row-major nested arrays; a flat array is accepted
/// for B (one column) and K_lqr (one row). Unknown keys, ragged rows, non-numeric or
/// non-finite entries raise ParseError. Shape consistency is left to validate_model.
SystemModel parse_model(const nlohmann::json& doc);
SystemModel load_model(const std::filesystem::path& path);

nlohmann::json model_to_json(const SystemModel& model);

/// Matrix <-> nested-array helpers shared with the design file.
Matrix matrix_from_json(const nlohmann::json& value, const std::string& key);
nlohmann::json matrix_to_json(const Matrix& M);

/// Reads a whole file; ParseError if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace secest
