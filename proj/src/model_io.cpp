#include "secest/model_io.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace secest {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 9> kModelKeys = {"A",     "B",     "C",           "Q",          "R",
                                                   "Sigma", "K_lqr", "sensor_labels", "state_basis"};

double number_at(const json& v, const std::string& key, size_t r, size_t c)
{
    if (!v.is_number()) {
        throw ParseError("'" + key + "' entry (" + std::to_string(r) + ", " + std::to_string(c) +
                         ") is not a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ParseError("'" + key + "' entry (" + std::to_string(r) + ", " + std::to_string(c) + ") is not finite");
    }
    return x;
}

}  // namespace

Matrix matrix_from_json(const json& value, const std::string& key)
{
    if (!value.is_array()) throw ParseError("'" + key + "' must be an array of rows");
    const size_t rows = value.size();
    if (rows == 0) return Matrix(0, 0);
    if (!value[0].is_array()) throw ParseError("'" + key + "' must be a nested array (row-major)");
    const size_t cols = value[0].size();
    Matrix M(static_cast<Index>(rows), static_cast<Index>(cols));
    for (size_t r = 0; r < rows; ++r) {
        const auto& row = value[r];
        if (!row.is_array()) throw ParseError("'" + key + "' row " + std::to_string(r) + " is not an array");
        if (row.size() != cols) {
            throw ParseError("'" + key + "' is not rectangular: row " + std::to_string(r) + " has " +
                             std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
        }
        for (size_t c = 0; c < cols; ++c)
            M(static_cast<Index>(r), static_cast<Index>(c)) = number_at(row[c], key, r, c);
    }
    return M;
}

json matrix_to_json(const Matrix& M)
{
    json rows = json::array();
    for (Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

bool is_flat_numeric(const json& v)
{
    return v.is_array() && !v.empty() && !v[0].is_array();
}

Matrix flat_to_matrix(const json& v, const std::string& key, bool as_column)
{
    Matrix M = as_column ? Matrix(static_cast<Index>(v.size()), 1) : Matrix(1, static_cast<Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) M(static_cast<Index>(i)) = number_at(v[i], key, 0, i);
    return M;
}

}  // namespace

SystemModel parse_model(const json& doc)
{
    if (!doc.is_object()) throw ParseError("model file must contain a JSON object");
    for (const auto& item : doc.items()) {
        bool known = false;
        for (const char* k : kModelKeys) known = known || item.key() == k;
        if (!known) throw ParseError("unknown key '" + item.key() + "' in model file");
    }
    for (const char* k : {"A", "C", "Q", "R", "Sigma"}) {
        if (!doc.contains(k)) throw ParseError(std::string("missing required key '") + k + "'");
    }

    SystemModel model;
    model.A = matrix_from_json(doc.at("A"), "A");
    model.C = matrix_from_json(doc.at("C"), "C");
    model.Q = matrix_from_json(doc.at("Q"), "Q");
    model.R = matrix_from_json(doc.at("R"), "R");
    model.Sigma = matrix_from_json(doc.at("Sigma"), "Sigma");
    const Index n = model.A.rows();

    if (doc.contains("B")) {
        const auto& b = doc.at("B");
        model.B = is_flat_numeric(b) ? flat_to_matrix(b, "B", true) : matrix_from_json(b, "B");
    }
    if (doc.contains("K_lqr")) {
        const auto& k = doc.at("K_lqr");
        model.K_lqr = is_flat_numeric(k) ? flat_to_matrix(k, "K_lqr", false) : matrix_from_json(k, "K_lqr");
    }
    const Index q = doc.contains("B") ? model.B.cols() : (doc.contains("K_lqr") ? model.K_lqr.rows() : 0);
    if (!doc.contains("B")) model.B = Matrix::Zero(n, q);
    if (!doc.contains("K_lqr") || model.K_lqr.size() == 0) model.K_lqr = Matrix::Zero(q, n);
    if (model.B.size() == 0) model.B = Matrix::Zero(n, q);

    if (doc.contains("state_basis")) model.state_basis = matrix_from_json(doc.at("state_basis"), "state_basis");
    if (doc.contains("sensor_labels")) {
        const auto& labels = doc.at("sensor_labels");
        if (!labels.is_array()) throw ParseError("'sensor_labels' must be an array of strings");
        for (const auto& l : labels) {
            if (!l.is_string()) throw ParseError("'sensor_labels' must be an array of strings");
            model.sensor_labels.push_back(l.get<std::string>());
        }
    }
    return model;
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SystemModel load_model(const std::filesystem::path& path)
{
    const std::string text = read_text_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
    return parse_model(doc);
}

json model_to_json(const SystemModel& model)
{
    json doc;
    doc["A"] = matrix_to_json(model.A);
    if (model.inputs() > 0) doc["B"] = matrix_to_json(model.B);
    doc["C"] = matrix_to_json(model.C);
    doc["Q"] = matrix_to_json(model.Q);
    doc["R"] = matrix_to_json(model.R);
    doc["Sigma"] = matrix_to_json(model.Sigma);
    if (model.inputs() > 0) doc["K_lqr"] = matrix_to_json(model.K_lqr);
    if (!model.sensor_labels.empty()) doc["sensor_labels"] = model.sensor_labels;
    if (model.state_basis.size() != 0) doc["state_basis"] = matrix_to_json(model.state_basis);
    return doc;
}

}  // namespace secest
