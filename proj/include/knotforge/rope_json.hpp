#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "knotforge/error.hpp"
#include "knotforge/rope.hpp"

namespace knotforge {

using json = nlohmann::json;

inline json to_json_value(const RopeParams& p) {
    return json{{"n_links", p.n_links},
                {"link_length", p.link_length},
                {"rope_radius", p.rope_radius},
                {"workspace_half_extent", p.workspace_half_extent},
                {"z_max_limit", p.z_max_limit}};
}

namespace detail {

template <class T>
T require(const json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string(what) + ": missing \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string(what) + ": bad \"" + key + "\": " + e.what());
    }
}

inline double require_number(const json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string(what) + ": missing \"" + key + "\"");
    if (!j.at(key).is_number()) throw SchemaError(std::string(what) + ": \"" + key + "\" must be a number");
    return j.at(key).get<double>();
}

}  // namespace detail

/// Unknown optional fields fall back to `defaults`.
inline RopeParams rope_params_from_json(const json& j, const RopeParams& defaults = {}) {
    if (!j.is_object()) throw SchemaError("params: expected an object");
    RopeParams p = defaults;
    if (!j.contains("n_links") || !j.at("n_links").is_number_integer()) throw SchemaError("params: \"n_links\" must be an integer");
    p.n_links = j.at("n_links").get<int>();
    p.link_length = detail::require_number(j, "link_length", "params");
    p.rope_radius = detail::require_number(j, "rope_radius", "params");
    if (j.contains("workspace_half_extent")) p.workspace_half_extent = detail::require_number(j, "workspace_half_extent", "params");
    if (j.contains("z_max_limit")) p.z_max_limit = detail::require_number(j, "z_max_limit", "params");
    return p;
}

inline json to_json_value(const RopeConfig& q) {
    json pos = json::array();
    for (const auto& x : q.positions) pos.push_back(json::array({x.x(), x.y(), x.z()}));
    return json{{"params", to_json_value(q.params)}, {"positions", std::move(pos)}, {"orientations", q.orientations}};
}

inline RopeConfig rope_config_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("rope state: expected an object");
    if (!j.contains("params")) throw SchemaError("rope state: missing \"params\"");
    if (!j.contains("positions")) throw SchemaError("rope state: missing \"positions\"");
    RopeConfig q;
    q.params = rope_params_from_json(j.at("params"));
    const json& pos = j.at("positions");
    if (!pos.is_array()) throw SchemaError("rope state: \"positions\" must be an array");
    for (const auto& triple : pos) {
        if (!triple.is_array() || triple.size() != 3) throw SchemaError("rope state: each position must be [x,y,z]");
        for (const auto& c : triple)
            if (!c.is_number()) throw SchemaError("rope state: position components must be numbers");
        q.positions.emplace_back(triple[0].get<double>(), triple[1].get<double>(), triple[2].get<double>());
    }
    if (!j.contains("orientations") || j.at("orientations").is_null()) {
        if (static_cast<int>(q.positions.size()) != q.params.n_joints())
            throw SchemaError("rope state: positions length must be n_links + 1");
        q.orientations = reconstruct_orientations(q.positions);
    } else {
        const json& o = j.at("orientations");
        if (!o.is_array()) throw SchemaError("rope state: \"orientations\" must be an array or null");
        for (const auto& v : o) {
            if (!v.is_number()) throw SchemaError("rope state: orientations must be numbers");
            q.orientations.push_back(v.get<double>());
        }
    }
    auto v = config_violations(q);
    if (!v.empty()) throw SchemaError("rope state: " + v.front());
    return q;
}

inline json to_json_value(const Curve& c) {
    return json{{"link", c.link}, {"x", c.x}, {"y", c.y}, {"z_max", c.z_max}};
}

inline Curve curve_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("curve: expected an object");
    Curve c;
    if (!j.contains("link") || !j.at("link").is_number_integer()) throw SchemaError("curve: \"link\" must be an integer");
    c.link = j.at("link").get<int>();
    c.x = detail::require_number(j, "x", "curve");
    c.y = detail::require_number(j, "y", "curve");
    c.z_max = detail::require_number(j, "z_max", "curve");
    return c;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j, int indent = 2) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(indent) << '\n';
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace knotforge
