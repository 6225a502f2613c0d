#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyap/expr.hpp"
#include "lyap/system.hpp"

namespace lyap {

// System-definition document:
// {
//   "n": 2, "m": 1,
//   "params": {"alpha": -0.2},
//   "drift": ["...", ...],                     n expressions
//   "inputs": [["...", ...], ...],             m columns of n expressions
//   "certificates": [{"name": .., "body": .., "claims": {..},
//                     "diffeo": {"forward": [..], "inverse": [..]}}]
// }
// UTF-8, numbers as decimal literals. "diffeo" is optional and backs
// g-convexity claims.
struct SystemFile {
  SystemDef system;
  std::vector<ScalarCertificate> certificates;
};

inline SystemFile parse_system_json(const nlohmann::json& j) {
  SystemFile out;
  if (!j.contains("n") || !j.contains("drift"))
    throw std::runtime_error("system file: required fields n and drift missing");
  out.system.n = j.at("n").get<int>();
  out.system.m = j.value("m", 0);
  if (j.contains("params"))
    for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
      out.system.params[it.key()] = it.value().get<double>();
  // drift and input columns are functions of the state only
  const Dims dims{out.system.n, 0};
  for (const auto& d : j.at("drift"))
    out.system.drift.push_back(parse_expression(d.get<std::string>(), dims, out.system.params));
  if (static_cast<int>(out.system.drift.size()) != out.system.n)
    throw std::runtime_error("system file: drift must have n entries");
  if (j.contains("inputs")) {
    for (const auto& col : j.at("inputs")) {
      std::vector<Expr> column;
      for (const auto& entry : col)
        column.push_back(parse_expression(entry.get<std::string>(), dims, out.system.params));
      if (static_cast<int>(column.size()) != out.system.n)
        throw std::runtime_error("system file: each input column must have n entries");
      out.system.inputs.push_back(std::move(column));
    }
    if (static_cast<int>(out.system.inputs.size()) != out.system.m)
      throw std::runtime_error("system file: inputs must have m columns");
  } else if (out.system.m != 0) {
    throw std::runtime_error("system file: m > 0 but no inputs given");
  }
  if (j.contains("certificates")) {
    for (const auto& cj : j.at("certificates")) {
      ScalarCertificate cert;
      cert.n = out.system.n;
      cert.name = cj.value("name", "V");
      cert.body = parse_expression(cj.at("body").get<std::string>(),
                                   Dims{out.system.n, 0}, out.system.params);
      if (cj.contains("claims"))
        for (auto it = cj.at("claims").begin(); it != cj.at("claims").end(); ++it)
          cert.claims[it.key()] = it.value().get<std::string>();
      if (cj.contains("diffeo")) {
        DiffeoDef phi;
        for (const auto& e : cj.at("diffeo").at("forward"))
          phi.forward.push_back(parse_expression(e.get<std::string>(),
                                                 Dims{out.system.n, 0}, out.system.params));
        for (const auto& e : cj.at("diffeo").at("inverse"))
          phi.inverse.push_back(parse_expression(e.get<std::string>(),
                                                 Dims{out.system.n, 0}, out.system.params));
        cert.diffeo = std::move(phi);
      }
      out.certificates.push_back(std::move(cert));
    }
  }
  return out;
}

inline nlohmann::json to_json(const SystemFile& f) {
  nlohmann::json j;
  j["n"] = f.system.n;
  j["m"] = f.system.m;
  j["params"] = nlohmann::json::object();
  for (const auto& [k, v] : f.system.params) j["params"][k] = v;
  j["drift"] = nlohmann::json::array();
  for (const auto& d : f.system.drift) j["drift"].push_back(to_string(d));
  j["inputs"] = nlohmann::json::array();
  for (const auto& col : f.system.inputs) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& e : col) c.push_back(to_string(e));
    j["inputs"].push_back(c);
  }
  j["certificates"] = nlohmann::json::array();
  for (const auto& cert : f.certificates) {
    nlohmann::json cj;
    cj["name"] = cert.name;
    cj["body"] = to_string(cert.body);
    cj["claims"] = nlohmann::json::object();
    for (const auto& [k, v] : cert.claims) cj["claims"][k] = v;
    if (cert.diffeo) {
      nlohmann::json dj;
      dj["forward"] = nlohmann::json::array();
      for (const auto& e : cert.diffeo->forward) dj["forward"].push_back(to_string(e));
      dj["inverse"] = nlohmann::json::array();
      for (const auto& e : cert.diffeo->inverse) dj["inverse"].push_back(to_string(e));
      cj["diffeo"] = dj;
    }
    j["certificates"].push_back(cj);
  }
  return j;
}

inline SystemFile load_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open system file: " + path);
  nlohmann::json j;
  in >> j;
  return parse_system_json(j);
}

inline void save_system_file(const SystemFile& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write system file: " + path);
  out << to_json(f).dump(2) << "\n";
}

}  // namespace lyap
