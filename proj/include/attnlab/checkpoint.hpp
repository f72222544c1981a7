#ifndef ATTNLAB_CHECKPOINT_HPP
#define ATTNLAB_CHECKPOINT_HPP

#include <fstream>
#include <optional>
#include <string>

#include "attnlab/model.hpp"
#include "attnlab/tasks.hpp"
#include "json.hpp"

namespace attnlab {

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == rows, what + ": wrong row count");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols, what + ": wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) {
      require(row[static_cast<std::size_t>(c)].is_number(), what + ": non-numeric entry");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

inline json config_to_json(const ModelConfig& c) {
  return {{"d_token", c.d_token},       {"n_positions", c.n_positions},
          {"d_hidden", c.d_hidden},     {"n_layers", c.n_layers},
          {"heads_per_layer", c.heads_per_layer}, {"activation", to_string(c.activation)},
          {"n_classes", c.n_classes}};
}

inline ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_token = j.at("d_token").get<int>();
  c.n_positions = j.at("n_positions").get<int>();
  c.d_hidden = j.at("d_hidden").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.heads_per_layer = j.at("heads_per_layer").get<std::vector<int>>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.n_classes = j.at("n_classes").get<int>();
  c.validate();
  return c;
}

/// Versioned document {version, config, layers, w_out}; an optional vocabulary is kept for tokenizing demos.
inline json model_to_json(const Model& m, const std::optional<Vocabulary>& vocab = std::nullopt) {
  json layers = json::array();
  for (const auto& layer : m.layers) {
    json heads = json::array();
    for (const auto& h : layer) heads.push_back({{"w_qk", matrix_to_json(h.w_qk)}, {"w_v", matrix_to_json(h.w_v)}});
    layers.push_back(std::move(heads));
  }
  json j = {{"version", 1}, {"config", config_to_json(m.config)}, {"layers", layers}, {"w_out", matrix_to_json(m.w_out)}};
  if (vocab) j["vocabulary"] = {{"n_question", vocab->n_question}, {"n_answer", vocab->n_answer}};
  return j;
}

inline Model model_from_json(const json& j) {
  require(j.is_object(), "checkpoint: not a JSON object");
  require(j.value("version", 0) == 1, "checkpoint: unsupported version");
  Model m;
  m.config = config_from_json(j.at("config"));
  const json& layers = j.at("layers");
  require(layers.is_array() && static_cast<int>(layers.size()) == m.config.n_layers, "checkpoint: layer count mismatch");
  const auto d = static_cast<Eigen::Index>(m.config.d_hidden);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require(layers[l].is_array() && static_cast<int>(layers[l].size()) == m.config.heads_per_layer[l],
            "checkpoint: head count mismatch");
    Layer layer;
    for (const auto& h : layers[l]) {
      layer.push_back({matrix_from_json(h.at("w_qk"), d, d, "checkpoint w_qk"),
                       matrix_from_json(h.at("w_v"), d, d, "checkpoint w_v")});
    }
    m.layers.push_back(std::move(layer));
  }
  m.w_out = matrix_from_json(j.at("w_out"), m.config.n_classes, d, "checkpoint w_out");
  m.validate();
  return m;
}

inline std::optional<Vocabulary> vocabulary_from_json(const json& j) {
  if (!j.contains("vocabulary")) return std::nullopt;
  return Vocabulary{j["vocabulary"].at("n_question").get<int>(), j["vocabulary"].at("n_answer").get<int>()};
}

inline void save_model(const std::string& path, const Model& m, const std::optional<Vocabulary>& vocab = std::nullopt) {
  std::ofstream os(path);
  require(static_cast<bool>(os), "cannot open for writing: " + path);
  os << model_to_json(m, vocab).dump() << '\n';
  require(static_cast<bool>(os), "write failed: " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "cannot open for reading: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw PreconditionError("invalid JSON in " + path + ": " + e.what());
  }
}

inline Model load_model(const std::string& path) {
  try {
    return model_from_json(load_json(path));
  } catch (const json::exception& e) {
    throw PreconditionError("invalid checkpoint " + path + ": " + e.what());
  }
}

}  // namespace attnlab

#endif  // ATTNLAB_CHECKPOINT_HPP
