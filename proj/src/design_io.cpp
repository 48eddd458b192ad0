#include "secest/design_io.hpp"

#include <cmath>
#include <fstream>

#include "secest/model_io.hpp"

namespace secest {

using nlohmann::json;

namespace {

constexpr const char* format_tag = "secest-design";
constexpr int format_version = 1;

Complex complex_from_json(const json& v, const std::string& key)
{
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ParseError("'" + key + "': complex entries must be [re, im] pairs");
    const Complex c(v[0].get<double>(), v[1].get<double>());
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw ParseError("'" + key + "': non-finite entry");
    return c;
}

json cvector_to_json(const CVector& v)
{
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
    return out;
}

CVector cvector_from_json(const json& value, const std::string& key)
{
    if (!value.is_array()) throw ParseError("'" + key + "' must be an array");
    CVector v(static_cast<Index>(value.size()));
    for (size_t i = 0; i < value.size(); ++i) v(static_cast<Index>(i)) = complex_from_json(value[i], key);
    return v;
}

json vector_to_json(const Vector& v)
{
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const json& value, const std::string& key)
{
    if (!value.is_array()) throw ParseError("'" + key + "' must be an array");
    Vector v(static_cast<Index>(value.size()));
    for (size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number()) throw ParseError("'" + key + "': non-numeric entry");
        v(static_cast<Index>(i)) = value[i].get<double>();
    }
    return v;
}

const json& field(const json& obj, const std::string& key)
{
    if (!obj.is_object() || !obj.contains(key)) throw ParseError("design file: missing key '" + key + "'");
    return obj.at(key);
}

template <class M, class F>
std::vector<M> list_from_json(const json& value, const std::string& key, F&& convert)
{
    if (!value.is_array()) throw ParseError("'" + key + "' must be an array");
    std::vector<M> out;
    for (const auto& item : value) out.push_back(convert(item, key));
    return out;
}

}  // namespace

json cmatrix_to_json(const CMatrix& M)
{
    json rows = json::array();
    for (Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < M.cols(); ++c) row.push_back({M(r, c).real(), M(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix cmatrix_from_json(const json& value, const std::string& key)
{
    if (!value.is_array()) throw ParseError("'" + key + "' must be an array of rows");
    const size_t rows = value.size();
    const size_t cols = rows > 0 && value[0].is_array() ? value[0].size() : 0;
    CMatrix M(static_cast<Index>(rows), static_cast<Index>(cols));
    for (size_t r = 0; r < rows; ++r) {
        if (!value[r].is_array() || value[r].size() != cols) throw ParseError("'" + key + "': ragged rows");
        for (size_t c = 0; c < cols; ++c)
            M(static_cast<Index>(r), static_cast<Index>(c)) = complex_from_json(value[r][c], key);
    }
    return M;
}

json design_to_json(const DesignBundle& b)
{
    const SpectralDesign& s = b.spectral;
    const SensorDecomposition& d = b.decomposition;
    json spectral = {
        {"P", matrix_to_json(s.P)},
        {"P_plus", matrix_to_json(s.P_plus)},
        {"K", matrix_to_json(s.K)},
        {"charpoly", vector_to_json(s.charpoly)},
        {"V", cmatrix_to_json(s.V)},
        {"Pi", cvector_to_json(s.Pi)},
        {"riccati_residual", s.riccati_residual},
        {"eig_residual", s.eig_residual},
    };
    json G = json::array(), H = json::array(), P = json::array(), F = json::array();
    for (const auto& g : d.G) G.push_back(cmatrix_to_json(g));
    for (const auto& h : d.H) H.push_back(matrix_to_json(h));
    for (const auto& p : d.P) P.push_back(cmatrix_to_json(p));
    for (const auto& f : d.F) F.push_back(cmatrix_to_json(f));
    json decomposition = {
        {"G", G}, {"H", H}, {"P", P}, {"F", F},
        {"Qtilde", cmatrix_to_json(d.Qtilde)},
        {"Wtilde", cmatrix_to_json(d.Wtilde)},
        {"Mtilde", cmatrix_to_json(d.Mtilde)},
    };
    return {{"format", format_tag},
            {"version", format_version},
            {"model", model_to_json(b.model)},
            {"spectral", spectral},
            {"decomposition", decomposition}};
}

DesignBundle design_from_json(const json& doc)
{
    if (!doc.is_object() || !doc.contains("format") || doc.at("format") != format_tag)
        throw ParseError("not a design file (missing \"format\": \"secest-design\")");
    if (field(doc, "version") != format_version) throw ParseError("unsupported design file version");

    DesignBundle b;
    b.model = parse_model(field(doc, "model"));
    require_valid(b.model);

    const json& s = field(doc, "spectral");
    b.spectral.P = matrix_from_json(field(s, "P"), "P");
    b.spectral.P_plus = matrix_from_json(field(s, "P_plus"), "P_plus");
    b.spectral.K = matrix_from_json(field(s, "K"), "K");
    b.spectral.charpoly = vector_from_json(field(s, "charpoly"), "charpoly");
    b.spectral.V = cmatrix_from_json(field(s, "V"), "V");
    b.spectral.Pi = cvector_from_json(field(s, "Pi"), "Pi");
    b.spectral.riccati_residual = field(s, "riccati_residual").get<double>();
    b.spectral.eig_residual = field(s, "eig_residual").get<double>();
    b.spectral.assumption1_ok = true;

    const Index n = b.model.states();
    const Index m = b.model.sensors();
    if (b.spectral.K.rows() != n || b.spectral.K.cols() != m || b.spectral.V.rows() != n ||
        b.spectral.V.cols() != n || b.spectral.Pi.size() != n || b.spectral.charpoly.size() != n + 1)
        throw ParseError("design file: spectral matrices do not match the model dimensions");

    const json& d = field(doc, "decomposition");
    auto G = list_from_json<CMatrix>(field(d, "G"), "G", cmatrix_from_json);
    auto H = list_from_json<Matrix>(field(d, "H"), "H", matrix_from_json);
    auto P = list_from_json<CMatrix>(field(d, "P"), "P", cmatrix_from_json);
    auto F = list_from_json<CMatrix>(field(d, "F"), "F", cmatrix_from_json);
    if (static_cast<Index>(G.size()) != m) throw ParseError("design file: G list does not match the sensor count");
    for (Index i = 0; i < m; ++i) {
        const auto k = static_cast<size_t>(i);
        if (G[k].rows() != n || G[k].cols() != n || H[k].rows() != n || H[k].cols() != n || P[k].rows() != n ||
            P[k].cols() != n || F[k].rows() != n || F[k].cols() != n)
            throw ParseError("design file: per-sensor matrices must be n x n");
    }
    CMatrix Qt = cmatrix_from_json(field(d, "Qtilde"), "Qtilde");
    CMatrix Wt = cmatrix_from_json(field(d, "Wtilde"), "Wtilde");
    CMatrix Mt = cmatrix_from_json(field(d, "Mtilde"), "Mtilde");
    if (Mt.rows() != n * m || Mt.cols() != n * m) throw ParseError("design file: Mtilde must be nm x nm");
    b.decomposition = assemble_decomposition(std::move(G), std::move(H), std::move(P), std::move(F), std::move(Qt),
                                             std::move(Wt), std::move(Mt));
    return b;
}

void save_design(const std::filesystem::path& path, const DesignBundle& bundle)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path.string() + "' for writing");
    out << design_to_json(bundle).dump(2) << '\n';
    if (!out) throw ParseError("failed writing '" + path.string() + "'");
}

DesignBundle load_design(const std::filesystem::path& path)
{
    const std::string text = read_text_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return design_from_json(doc);
}

}  // namespace secest
