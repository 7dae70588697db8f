#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "ccg/density.hpp"
#include "ccg/identify.hpp"
#include "ccg/matrix_set.hpp"
#include "ccg/mvee.hpp"
#include "ccg/propagate.hpp"

namespace ccg {

using nlohmann::json;

inline json matrix_to_json(const MatrixX<double>& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MatrixX<double> matrix_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("matrix_from_json: expected an array of rows");
    const Index rows = static_cast<Index>(j.size());
    if (rows == 0) return MatrixX<double>(0, 0);
    const Index cols = static_cast<Index>(j.at(0).size());
    MatrixX<double> m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j.at(i).size()) != cols)
            throw std::invalid_argument("matrix_from_json: ragged rows");
        for (Index jj = 0; jj < cols; ++jj) m(i, jj) = j.at(i).at(jj).get<double>();
    }
    return m;
}

inline json vector_to_json(const VectorX<double>& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline VectorX<double> vector_from_json(const json& j) {
    VectorX<double> v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

inline json groups_to_json(const std::vector<NormGroup>& groups) {
    json out = json::array();
    for (const auto& g : groups) {
        json item;
        item["indices"] = g.indices;
        item["p"] = norm_name(g.p);
        out.push_back(std::move(item));
    }
    return out;
}

inline std::vector<NormGroup> groups_from_json(const json& j) {
    std::vector<NormGroup> groups;
    for (const auto& item : j) {
        NormGroup g;
        for (const auto& idx : item.at("indices")) g.indices.push_back(idx.get<Index>());
        const std::string p = item.at("p").get<std::string>();
        if (p == "1") g.p = Norm::one;
        else if (p == "2") g.p = Norm::two;
        else if (p == "inf") g.p = Norm::inf;
        else throw std::invalid_argument("groups_from_json: unknown norm " + p);
        groups.push_back(std::move(g));
    }
    return groups;
}

inline json ccg_to_json(const Ccg<double>& e) {
    json out;
    out["center"] = vector_to_json(e.center);
    out["generators"] = matrix_to_json(e.generators);
    out["groups"] = groups_to_json(e.groups);
    if (e.constrained()) {
        out["A"] = matrix_to_json(MatrixX<double>(e.constraint_lhs));
        out["b"] = vector_to_json(e.constraint_rhs);
    }
    return out;
}

inline Ccg<double> ccg_from_json(const json& j) {
    const VectorX<double> center = vector_from_json(j.at("center"));
    const MatrixX<double> gens = matrix_from_json(j.at("generators"));
    const auto groups = groups_from_json(j.at("groups"));
    if (j.contains("A")) {
        const MatrixX<double> a = matrix_from_json(j.at("A"));
        return Ccg<double>::make(center, gens, groups, a.sparseView(1.0, 1e-300),
                                 vector_from_json(j.at("b")));
    }
    return Ccg<double>::make(center, gens, groups);
}

inline json cmcg_to_json(const Cmcg<double>& n) {
    json out = ccg_to_json(n.coefficients);
    out["shape"] = {n.rows, n.cols};
    return out;
}

inline Cmcg<double> cmcg_from_json(const json& j) {
    const Index rows = j.at("shape").at(0).get<Index>();
    const Index cols = j.at("shape").at(1).get<Index>();
    return Cmcg<double>::from_vectorized(rows, cols, ccg_from_json(j));
}

inline json ellipsoid_to_json(const Ellipsoid<double>& e) {
    json out;
    out["center"] = vector_to_json(e.center);
    out["shape"] = matrix_to_json(e.shape);
    return out;
}

inline json hdr_to_json(const HdrRegion& r) {
    json intervals = json::array();
    for (const auto& i : r.intervals) intervals.push_back({i.lo, i.hi});
    json out;
    out["intervals"] = std::move(intervals);
    out["threshold"] = r.threshold;
    out["coverage"] = r.coverage;
    return out;
}

inline json trajectory_to_json(const Trajectory& traj) {
    json states = json::array();
    for (Index k = 0; k < traj.states.cols(); ++k)
        states.push_back(vector_to_json(traj.states.col(k)));
    json inputs = json::array();
    for (Index k = 0; k < traj.inputs.cols(); ++k)
        inputs.push_back(vector_to_json(traj.inputs.col(k)));
    json out;
    out["states"] = std::move(states);
    out["inputs"] = std::move(inputs);
    return out;
}

inline Trajectory trajectory_from_json(const json& j) {
    const auto& states = j.at("states");
    const auto& inputs = j.at("inputs");
    if (states.empty()) throw std::invalid_argument("trajectory_from_json: no states");
    Trajectory traj;
    traj.states.resize(static_cast<Index>(states.at(0).size()), static_cast<Index>(states.size()));
    for (std::size_t k = 0; k < states.size(); ++k)
        traj.states.col(static_cast<Index>(k)) = vector_from_json(states.at(k));
    const Index m = inputs.empty() ? 0 : static_cast<Index>(inputs.at(0).size());
    traj.inputs.resize(m, static_cast<Index>(inputs.size()));
    for (std::size_t k = 0; k < inputs.size(); ++k)
        traj.inputs.col(static_cast<Index>(k)) = vector_from_json(inputs.at(k));
    traj.validate();
    return traj;
}

inline json tube_meta_to_json(const ReachTube& tube) {
    json out;
    out["steps"] = tube.steps.size();
    out["offline_seconds"] = tube.offline_seconds;
    out["total_seconds"] = tube.total_seconds();
    json per_step = json::array();
    for (std::size_t k = 0; k < tube.steps.size(); ++k) {
        json s;
        s["step"] = k + 1;
        s["generators"] = tube.steps[k].num_generators();
        s["constraints"] = tube.steps[k].constraint_lhs.rows();
        s["seconds"] = tube.step_seconds[k];
        s["volume"] = tube.volumes[k];
        per_step.push_back(std::move(s));
    }
    out["per_step"] = std::move(per_step);
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << content;
}

inline json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    json j;
    f >> j;
    return j;
}

}  // namespace ccg
