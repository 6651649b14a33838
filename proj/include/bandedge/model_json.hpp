#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "bandedge/model.hpp"

namespace bandedge {

// Model document schema (see README):
// {"L": 1, "hop": [1.0], "pot": [0.0],
//  "disorder": {"kind": "uniform", "hop_amp": [0.0], "pot_amp": [1.0]},
//  "lambda": 0.1}
inline ModelInstance model_from_json(const nlohmann::json& j) {
    ModelInstance m;
    m.background.L = j.at("L").get<int>();
    m.background.hop = j.at("hop").get<std::vector<double>>();
    m.background.pot = j.at("pot").get<std::vector<double>>();
    const auto& d = j.at("disorder");
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "uniform")
        m.disorder.law = DisorderLaw::UniformIID;
    else if (kind == "zero")
        m.disorder.law = DisorderLaw::Zero;
    else
        throw std::invalid_argument("model_from_json: unknown disorder kind '" + kind + "'");
    m.disorder.hop_amp = d.at("hop_amp").get<std::vector<double>>();
    m.disorder.pot_amp = d.at("pot_amp").get<std::vector<double>>();
    m.lambda = j.value("lambda", 0.0);
    m.validate();
    return m;
}

inline nlohmann::json model_to_json(const ModelInstance& m) {
    nlohmann::json d{
        {"kind", m.disorder.law == DisorderLaw::UniformIID ? "uniform" : "zero"},
        {"hop_amp", m.disorder.hop_amp},
        {"pot_amp", m.disorder.pot_amp},
    };
    return nlohmann::json{{"L", m.background.L}, {"hop", m.background.hop},     {"pot", m.background.pot},
                          {"disorder", d},       {"lambda", m.lambda}};
}

inline ModelInstance load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace bandedge
