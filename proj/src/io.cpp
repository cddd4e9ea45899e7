#include "specgram/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace specgram {

namespace {

using nlohmann::json;

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_array())
        throw ConfigError("profile JSON: missing array '" + key + "'");
    Eigen::VectorXd v(j[key].size());
    Eigen::Index k = 0;
    for (const auto& x : j[key]) {
        if (!x.is_number()) throw ConfigError("profile JSON: '" + key + "' has a non-number");
        v[k++] = x.get<double>();
    }
    return v;
}

}  // namespace

std::string fmt_g(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M, const Metadata& meta) {
    std::ofstream out = open_out(path);
    for (const auto& [key, value] : meta) out << "# " << key << ": " << value << "\n";
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) out << ",";
            out << fmt_g(M(i, j));
        }
        out << "\n";
    }
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

void write_vector_csv(const std::string& path, const Eigen::VectorXd& v, const Metadata& meta) {
    write_matrix_csv(path, v, meta);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError("'" + path + "': bad numeric cell '" + cell + "'");
            }
        }
        if (row.empty()) continue;
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw ConfigError("'" + path + "': ragged rows (" + std::to_string(row.size()) +
                              " vs " + std::to_string(width) + " columns)");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("'" + path + "': no data rows");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return M;
}

VarianceProfile load_profile_json(const std::string& path) {
    std::ifstream in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "': JSON parse error: " + e.what());
    }
    if (!j.contains("type") || !j["type"].is_string())
        throw ConfigError("'" + path + "': profile JSON needs a string 'type'");
    const std::string type = j["type"].get<std::string>();
    if (type == "constant") {
        if (!j.contains("p") || !j.contains("n") || !j.contains("value"))
            throw ConfigError("'" + path + "': constant profile needs p, n, value");
        return VarianceProfile::constant(j["p"].get<int>(), j["n"].get<int>(),
                                         j["value"].get<double>());
    }
    if (type == "separable")
        return make_separable_profile(vector_from_json(j, "d"), vector_from_json(j, "d_tilde"));
    if (type == "dense") {
        if (j.contains("csv")) {
            std::filesystem::path base = std::filesystem::path(path).parent_path();
            return VarianceProfile::dense(
                read_matrix_csv((base / j["csv"].get<std::string>()).string()));
        }
        if (!j.contains("sigma2") || !j["sigma2"].is_array())
            throw ConfigError("'" + path + "': dense profile needs 'sigma2' rows or 'csv'");
        const auto& rows = j["sigma2"];
        if (rows.empty()) throw ConfigError("'" + path + "': empty sigma2");
        Eigen::MatrixXd M(rows.size(), rows[0].size());
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != M.cols())
                throw ConfigError("'" + path + "': ragged sigma2 rows");
            for (Eigen::Index k = 0; k < M.cols(); ++k)
                M(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
        return VarianceProfile::dense(std::move(M));
    }
    throw ConfigError("'" + path + "': unknown profile type '" + type + "'");
}

VarianceProfile load_profile(const std::string& path) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0)
        return load_profile_json(path);
    return VarianceProfile::dense(read_matrix_csv(path));
}

}  // namespace specgram
