#pragma once

// Versioned JSON model documents: the network spec plus every parameter
// tensor's shape and row-major values. Doubles are written in shortest
// round-trip form, so load(save(m)) reproduces every bit.

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gcrnn/errors.hpp"
#include "gcrnn/model.hpp"

namespace gcrnn {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const Network& net) {
  const NetworkSpec& s = net.spec;
  nlohmann::json doc;
  doc["format"] = "gcrnn-model";
  doc["version"] = kModelFormatVersion;
  doc["spec"] = {{"architecture", to_string(s.architecture)},
                 {"task", to_string(s.task)},
                 {"n_nodes", s.n_nodes},
                 {"in_features", s.in_features},
                 {"out_features", s.out_features},
                 {"t_in", s.t_in},
                 {"t_out", s.t_out},
                 {"state_features", s.state_features},
                 {"gate_features", s.gate_features},
                 {"taps", s.taps},
                 {"baseline_hidden", s.baseline_hidden}};
  nlohmann::json params = nlohmann::json::array();
  for (auto& p : parameters(const_cast<Network&>(net))) {
    std::vector<double> values(p.tensor->data(), p.tensor->data() + p.tensor->numel());
    params.push_back({{"name", p.name}, {"shape", p.tensor->shape()}, {"values", values}});
  }
  doc["parameters"] = std::move(params);
  return doc;
}

inline Network network_from_json(const nlohmann::json& doc) {
  try {
    detail::require(doc.at("format") == "gcrnn-model", "model document: unexpected format tag");
    const int version = doc.at("version").get<int>();
    detail::require(version == kModelFormatVersion, "model document: unsupported version " + std::to_string(version));
    const auto& js = doc.at("spec");
    NetworkSpec s;
    s.architecture = parse_architecture(js.at("architecture").get<std::string>());
    s.task = parse_task(js.at("task").get<std::string>());
    s.n_nodes = js.at("n_nodes").get<std::size_t>();
    s.in_features = js.at("in_features").get<std::size_t>();
    s.out_features = js.at("out_features").get<std::size_t>();
    s.t_in = js.at("t_in").get<std::size_t>();
    s.t_out = js.at("t_out").get<std::size_t>();
    s.state_features = js.at("state_features").get<std::size_t>();
    s.gate_features = js.at("gate_features").get<std::size_t>();
    s.taps = js.at("taps").get<std::size_t>();
    s.baseline_hidden = js.at("baseline_hidden").get<std::size_t>();

    Network net = make_network(s);
    auto slots = parameters(net);
    const auto& stored = doc.at("parameters");
    detail::require(stored.size() == slots.size(), "model document: expected " + std::to_string(slots.size()) +
                                                       " parameter tensors, found " + std::to_string(stored.size()));
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& entry = stored[i];
      detail::require(entry.at("name") == slots[i].name, "model document: expected parameter '" + slots[i].name +
                                                             "', found '" + entry.at("name").get<std::string>() + "'");
      auto shape = entry.at("shape").get<Shape>();
      detail::require(shape == slots[i].tensor->shape(), "model document: parameter '" + slots[i].name + "' has shape " +
                                                             shape_string(shape) + ", expected " +
                                                             shape_string(slots[i].tensor->shape()));
      auto values = entry.at("values").get<std::vector<double>>();
      detail::require(values.size() == slots[i].tensor->numel(), "model document: wrong value count for '" +
                                                                     slots[i].name + "'");
      std::copy(values.begin(), values.end(), slots[i].tensor->data());
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model document: ") + e.what(), 0);
  }
}

inline void save_network(const std::string& path, const Network& net) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << to_json(net).dump(1) << '\n';
}

inline Network load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
  return network_from_json(doc);
}

}  // namespace gcrnn
