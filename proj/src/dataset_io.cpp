#include "ipgp/dataset_io.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ipgp {

using nlohmann::json;

namespace {

json matrix_cols_to_json(const mat& m) {
    json cols = json::array();
    for (Index l = 0; l < m.cols(); ++l) {
        json col = json::array();
        for (Index i = 0; i < m.rows(); ++i) col.push_back(m(i, l));
        cols.push_back(std::move(col));
    }
    return cols;
}

mat matrix_cols_from_json(const json& cols, Index rows) {
    mat m(rows, static_cast<Index>(cols.size()));
    for (Index l = 0; l < m.cols(); ++l) {
        const auto& col = cols[static_cast<size_t>(l)];
        if (static_cast<Index>(col.size()) != rows)
            throw std::runtime_error("dataset: inconsistent snapshot length");
        for (Index i = 0; i < rows; ++i) m(i, l) = col[static_cast<size_t>(i)].get<double>();
    }
    return m;
}

} // namespace

std::string dataset_to_json(const TrajectoryDataset& data) {
    json j;
    j["d"] = data.d;
    j["N"] = data.N;
    j["M"] = data.M;
    j["L"] = data.L;
    json times = json::array();
    for (Index l = 0; l < data.times.size(); ++l) times.push_back(data.times[l]);
    j["times"] = std::move(times);
    j["noise_sigma"] = data.noise_sigma;
    json Y = json::array(), Z = json::array();
    for (const auto& Ym : data.Y) Y.push_back(matrix_cols_to_json(Ym));
    for (const auto& Zm : data.Z) Z.push_back(matrix_cols_to_json(Zm));
    j["Y"] = std::move(Y);
    j["Z"] = std::move(Z);
    return j.dump();
}

TrajectoryDataset dataset_from_json(const std::string& text) {
    const json j = json::parse(text);
    TrajectoryDataset data;
    data.d = j.at("d").get<int>();
    data.N = j.at("N").get<int>();
    data.M = j.at("M").get<int>();
    data.L = j.at("L").get<int>();
    data.noise_sigma = j.at("noise_sigma").get<double>();
    const auto& times = j.at("times");
    if (static_cast<int>(times.size()) != data.L)
        throw std::runtime_error("dataset: times length != L");
    data.times.resize(data.L);
    for (int l = 0; l < data.L; ++l) data.times[l] = times[static_cast<size_t>(l)].get<double>();
    for (int l = 1; l < data.L; ++l)
        if (!(data.times[l] > data.times[l - 1]))
            throw std::runtime_error("dataset: times not strictly increasing");

    const auto& Y = j.at("Y");
    const auto& Z = j.at("Z");
    if (static_cast<int>(Y.size()) != data.M || static_cast<int>(Z.size()) != data.M)
        throw std::runtime_error("dataset: trajectory count != M");
    const Index dN = static_cast<Index>(data.d) * data.N;
    for (int m = 0; m < data.M; ++m) {
        mat Ym = matrix_cols_from_json(Y[static_cast<size_t>(m)], 2 * dN);
        mat Zm = matrix_cols_from_json(Z[static_cast<size_t>(m)], dN);
        if (Ym.cols() != data.L || Zm.cols() != data.L)
            throw std::runtime_error("dataset: snapshot count != L");
        if (!Ym.allFinite()) throw std::runtime_error("dataset: non-finite state entries");
        data.Y.push_back(std::move(Ym));
        data.Z.push_back(std::move(Zm));
    }
    return data;
}

void save_dataset(const TrajectoryDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << dataset_to_json(data);
    if (!out) throw std::runtime_error("write failed: " + path);
}

TrajectoryDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return dataset_from_json(ss.str());
}

mat load_frames_csv(const std::string& path, int d) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("frames csv: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("frames csv: no data");
    const Index cols = static_cast<Index>(rows.front().size());
    if (cols % d != 0) throw std::runtime_error("frames csv: column count not a multiple of d");
    mat frames(cols, static_cast<Index>(rows.size()));
    for (Index t = 0; t < frames.cols(); ++t)
        for (Index i = 0; i < cols; ++i) frames(i, t) = rows[static_cast<size_t>(t)][static_cast<size_t>(i)];
    return frames;
}

void normalize_frames(mat& frames, int d) {
    for (int k = 0; k < d; ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (Index i = k; i < frames.rows(); i += d) {
            lo = std::min(lo, frames.row(i).minCoeff());
            hi = std::max(hi, frames.row(i).maxCoeff());
        }
        if (hi > lo)
            for (Index i = k; i < frames.rows(); i += d)
                frames.row(i) = (frames.row(i).array() - lo) / (hi - lo);
    }
}

} // namespace ipgp
