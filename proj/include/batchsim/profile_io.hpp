#pragma once

// Profile file ingestion. Schema (times in milliseconds):
//
// {
//   "max_batch": 90,
//   "components": [
//     {"id": "googlenet_body",
//      "layers": [
//        {"name": "conv1", "output_bits": 2400000,
//         "runtime_ms": [[1, 2.5], [10, 3.0], [90, 9.0]]},
//        ...]}],
//   "dnns": [
//     {"id": "googlenet", "stages": ["googlenet_body"]}]
// }
//
// Every layer must carry a batch-size-1 measurement; other batch sizes are
// interpolated at lookup time.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "batchsim/cost_model.hpp"

namespace batchsim {

inline ProfileSet parse_profile(const nlohmann::json& doc, const std::string& origin) {
  ProfileSet ps;
  if (!doc.contains("components") || !doc.contains("dnns")) {
    throw std::runtime_error(origin + ": profile must declare components[] and dnns[]");
  }
  ps.max_batch = doc.value("max_batch", 90);
  if (ps.max_batch < 1) throw std::runtime_error(origin + ": max_batch must be >= 1");

  for (const auto& comp : doc.at("components")) {
    SharedComponent sc;
    sc.id = comp.at("id").get<std::string>();
    const auto& layers = comp.at("layers");
    sc.cost = CostTable(static_cast<int>(layers.size()), ps.max_batch);
    int layer_index = 0;
    for (const auto& layer : layers) {
      ++layer_index;
      const std::string layer_name =
          layer.value("name", "layer" + std::to_string(layer_index));
      bool has_b1 = false;
      for (const auto& point : layer.at("runtime_ms")) {
        const int batch = point.at(0).get<int>();
        const double ms = point.at(1).get<double>();
        if (batch < 1) {
          throw std::runtime_error(origin + ": component " + sc.id + " layer " + layer_name +
                                   " has batch size < 1");
        }
        if (ms <= 0) {
          throw std::runtime_error(origin + ": component " + sc.id + " layer " + layer_name +
                                   " has non-positive runtime");
        }
        if (batch == 1) has_b1 = true;
        sc.cost.add_point(layer_index, batch, ms);
      }
      if (!has_b1) {
        throw std::runtime_error(origin + ": component " + sc.id + " layer " + layer_name +
                                 " is missing the batch-size-1 measurement");
      }
      sc.output_bits.push_back(layer.value("output_bits", std::int64_t{0}));
    }
    sc.cost.finalize();
    ps.components.push_back(std::move(sc));
  }

  for (const auto& dnn : doc.at("dnns")) {
    const std::string name = dnn.at("id").get<std::string>();
    std::vector<StageRef> stages;
    int next_layer = 1;
    for (const auto& stage : dnn.at("stages")) {
      const std::string comp_id = stage.get<std::string>();
      int comp_idx = -1;
      for (std::size_t c = 0; c < ps.components.size(); ++c) {
        if (ps.components[c].id == comp_id) {
          comp_idx = static_cast<int>(c);
          break;
        }
      }
      if (comp_idx < 0) {
        throw std::runtime_error(origin + ": dnn " + name + " references undeclared component '" +
                                 comp_id + "'");
      }
      stages.push_back({comp_idx, next_layer});
      next_layer += ps.components[static_cast<std::size_t>(comp_idx)].num_layers();
    }
    if (stages.empty()) {
      throw std::runtime_error(origin + ": dnn " + name + " has no stages");
    }
    ps.dnns.emplace_back(name, std::move(stages), next_layer - 1);
  }
  return ps;
}

inline ProfileSet load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": profile parse error: " + e.what());
  }
  return parse_profile(doc, path);
}

inline ProfileSet load_profile_string(const std::string& text, const std::string& origin = "<string>") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(origin + ": profile parse error: " + e.what());
  }
  return parse_profile(doc, origin);
}

}  // namespace batchsim
