#pragma once

#include <Eigen/Dense>
#include <json.hpp>

namespace topicreg {

/// Row-major nested arrays; doubles round-trip at full precision.
inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j)
{
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(r);
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw nlohmann::json::other_error::create(501, "ragged matrix", &j);
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = row.at(c).get<double>();
    }
    return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v(i));
    return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = j.at(i).get<double>();
    return v;
}

}  // namespace topicreg
