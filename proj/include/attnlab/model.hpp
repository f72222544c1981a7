#ifndef ATTNLAB_MODEL_HPP
#define ATTNLAB_MODEL_HPP

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnlab/linalg.hpp"

namespace attnlab {

enum class Activation { relu, softmax };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "softmax"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "softmax") return Activation::softmax;
  throw PreconditionError("unknown activation: " + std::string(s));
}

/// Shape of an attention-only transformer.
///
/// The hidden stream has d_hidden rows laid out as
/// [token block (d_token) ; positional one-hot (n_positions) ; zero padding].
struct ModelConfig {
  int d_token = 0;
  int n_positions = 0;
  int d_hidden = 0;
  int n_layers = 0;
  std::vector<int> heads_per_layer;
  Activation activation = Activation::relu;
  int n_classes = 0;

  int positional_offset() const { return d_token; }

  void validate() const {
    require(d_token >= 1, "ModelConfig: d_token must be >= 1");
    require(n_positions >= 1, "ModelConfig: n_positions must be >= 1");
    require(n_classes >= 1, "ModelConfig: n_classes must be >= 1");
    require(n_layers >= 0, "ModelConfig: n_layers must be >= 0");
    require(d_hidden >= d_token + n_positions,
            "ModelConfig: d_hidden must be >= d_token + n_positions");
    require(static_cast<int>(heads_per_layer.size()) == n_layers,
            "ModelConfig: heads_per_layer length must equal n_layers");
    for (int m : heads_per_layer) require(m >= 1, "ModelConfig: every layer needs >= 1 head");
  }

  bool operator==(const ModelConfig&) const = default;
};

/// One attention head, parameterized by the combined query-key matrix.
struct HeadWeights {
  Matrix w_qk;
  Matrix w_v;

  static HeadWeights zeros(int d_hidden) {
    return {Matrix::Zero(d_hidden, d_hidden), Matrix::Zero(d_hidden, d_hidden)};
  }
};

using Layer = std::vector<HeadWeights>;

/// Hidden stream H: d_hidden x (number of tokens).
struct Representation {
  Matrix data;

  int rows() const { return static_cast<int>(data.rows()); }
  int cols() const { return static_cast<int>(data.cols()); }
  Vector column(int j) const { return data.col(j); }
};

struct Model {
  ModelConfig config;
  std::vector<Layer> layers;
  Matrix w_out;  // n_classes x d_hidden

  static Model zeros(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.config = cfg;
    for (int l = 0; l < cfg.n_layers; ++l) {
      m.layers.emplace_back(static_cast<std::size_t>(cfg.heads_per_layer[static_cast<std::size_t>(l)]),
                            HeadWeights::zeros(cfg.d_hidden));
    }
    m.w_out = Matrix::Zero(cfg.n_classes, cfg.d_hidden);
    return m;
  }

  void validate() const {
    config.validate();
    require(static_cast<int>(layers.size()) == config.n_layers, "Model: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      require(static_cast<int>(layers[l].size()) == config.heads_per_layer[l],
              "Model: head count mismatch in layer " + std::to_string(l));
      for (const auto& h : layers[l]) {
        require(h.w_qk.rows() == config.d_hidden && h.w_qk.cols() == config.d_hidden,
                "Model: w_qk must be d_hidden x d_hidden");
        require(h.w_v.rows() == config.d_hidden && h.w_v.cols() == config.d_hidden,
                "Model: w_v must be d_hidden x d_hidden");
        require(h.w_qk.allFinite() && h.w_v.allFinite(), "Model: non-finite head weights");
      }
    }
    require(w_out.rows() == config.n_classes && w_out.cols() == config.d_hidden,
            "Model: w_out must be n_classes x d_hidden");
    require(w_out.allFinite(), "Model: non-finite classifier weights");
  }
};

/// Builds H^(0): column j is [x_j ; p_j ; 0] with p_j the j-th one-hot of length n_positions.
inline Representation encode_input(std::span<const Vector> token_vectors, const ModelConfig& cfg) {
  const int len = static_cast<int>(token_vectors.size());
  require_dims(len >= 1, "encode_input: empty sequence");
  require_dims(len <= cfg.n_positions, "encode_input: sequence longer than n_positions");
  require_dims(cfg.d_hidden >= cfg.d_token + cfg.n_positions, "encode_input: d_hidden too small");
  Representation h{Matrix::Zero(cfg.d_hidden, len)};
  for (int j = 0; j < len; ++j) {
    const auto& x = token_vectors[static_cast<std::size_t>(j)];
    require_dims(x.size() == cfg.d_token, "encode_input: token vector has wrong dimension");
    h.data.col(j).head(cfg.d_token) = x;
    h.data(cfg.d_token + j, j) = 1.0;
  }
  return h;
}

/// Encodes token ids as one-hot token vectors.
inline Representation encode_tokens(std::span<const int> tokens, const ModelConfig& cfg) {
  std::vector<Vector> vecs;
  vecs.reserve(tokens.size());
  for (int t : tokens) {
    require_dims(t >= 0 && t < cfg.d_token, "encode_tokens: token id out of range");
    Vector x = Vector::Zero(cfg.d_token);
    x[t] = 1.0;
    vecs.push_back(std::move(x));
  }
  return encode_input(vecs, cfg);
}

/// sigma(H^T W_QK H). Entry (j, k) is the weight with which position k reads position j.
/// Softmax normalizes each column (each query position).
inline Matrix attention_scores(const Matrix& h, const Matrix& w_qk) {
  require_dims(w_qk.rows() == h.rows() && w_qk.cols() == h.rows(), "attention: w_qk shape");
  return h.transpose() * w_qk * h;
}

inline Matrix activate(const Matrix& scores, Activation act) {
  if (act == Activation::relu) return scores.cwiseMax(0.0);
  Matrix a(scores.rows(), scores.cols());
  for (Eigen::Index k = 0; k < scores.cols(); ++k) {
    const double mx = scores.col(k).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < scores.rows(); ++j) {
      a(j, k) = std::exp(scores(j, k) - mx);
      z += a(j, k);
    }
    a.col(k) /= z;
  }
  return a;
}

inline Matrix attention_map(const Matrix& h, const HeadWeights& head, Activation act) {
  return activate(attention_scores(h, head.w_qk), act);
}

/// H + (1/m) sum_i W_V_i H sigma(H^T W_QK_i H).
inline Representation layer_forward(const Representation& h, const Layer& layer, Activation act) {
  require_dims(!layer.empty(), "layer_forward: layer without heads");
  Matrix acc = Matrix::Zero(h.data.rows(), h.data.cols());
  for (const auto& head : layer) {
    require_dims(head.w_v.rows() == h.data.rows() && head.w_v.cols() == h.data.rows(),
                 "layer_forward: w_v shape");
    acc.noalias() += head.w_v * (h.data * attention_map(h.data, head, act));
  }
  return {h.data + acc / static_cast<double>(layer.size())};
}

/// Hidden streams H^(0) .. H^(L).
inline std::vector<Representation> hidden_states(const Model& model, std::span<const int> tokens) {
  std::vector<Representation> hs;
  hs.reserve(model.layers.size() + 1);
  hs.push_back(encode_tokens(tokens, model.config));
  for (const auto& layer : model.layers) {
    hs.push_back(layer_forward(hs.back(), layer, model.config.activation));
  }
  return hs;
}

inline Representation final_hidden(const Model& model, std::span<const int> tokens) {
  Representation h = encode_tokens(tokens, model.config);
  for (const auto& layer : model.layers) h = layer_forward(h, layer, model.config.activation);
  return h;
}

/// o = W_O h_{n-1}^(L).
inline Vector forward(const Model& model, std::span<const int> tokens) {
  const Representation h = final_hidden(model, tokens);
  require_dims(model.w_out.cols() == h.rows(), "forward: w_out shape");
  return model.w_out * h.data.col(h.cols() - 1);
}

inline int predict(const Model& model, std::span<const int> tokens) {
  return argmax(forward(model, tokens));
}

struct AttentionMap {
  int layer = 0;
  int head = 0;
  Matrix alpha;  // n x n, post-activation
};

inline std::vector<AttentionMap> attention_maps(const Model& model, std::span<const int> tokens) {
  std::vector<AttentionMap> maps;
  Representation h = encode_tokens(tokens, model.config);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (std::size_t i = 0; i < model.layers[l].size(); ++i) {
      maps.push_back({static_cast<int>(l), static_cast<int>(i),
                      attention_map(h.data, model.layers[l][i], model.config.activation)});
    }
    h = layer_forward(h, model.layers[l], model.config.activation);
  }
  return maps;
}

}  // namespace attnlab

#endif  // ATTNLAB_MODEL_HPP
