#pragma once

#include "hhar/hierarchy.hpp"
#include "hhar/param_store.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hhar {

/// Which label graphs exist. None replaces the graph layer with a plain
/// linear map in both encoders.
enum class HierarchyMode { None, Predefined, Adaptive, Both };

std::string to_string(HierarchyMode m);
HierarchyMode hierarchy_mode_from_string(const std::string& s);

struct ModelConfig {
  Index feature_dim = 0;  // d: input feature width
  Index label_count = 0;  // N: hierarchy nodes
  Index d_l = 64;         // label embedding width
  Index d_c = 64;         // graph-layer output width
  Index d_x = 64;         // data embedding width
  Index d_h = 64;         // projection width of the phi heads
  Index d_f = 16;         // adaptive-graph node embedding width

  HierarchyMode hierarchy = HierarchyMode::Both;
  bool feature_propagation = true;
  bool with_align = true;        // label encoder + both phi heads
  bool with_contrastive = true;  // phi_x head

  bool uses_predefined() const {
    return hierarchy == HierarchyMode::Predefined ||
           hierarchy == HierarchyMode::Both;
  }
  bool uses_adaptive_graph() const {
    return hierarchy == HierarchyMode::Adaptive ||
           hierarchy == HierarchyMode::Both;
  }
  /// The adaptive graph is materialized only where some encoder consumes it.
  bool adaptive_consumed() const {
    return uses_adaptive_graph() && (feature_propagation || with_align);
  }
  bool has_label_encoder() const { return with_align; }
  bool has_phi_x() const { return with_align || with_contrastive; }
  /// W'_p doubles as the data path's linear map when graphs are off.
  bool has_data_pre() const {
    return !(feature_propagation && hierarchy == HierarchyMode::Adaptive);
  }

  void validate() const;
};

/// All trainable weights plus the terminal-eligibility mask used by
/// single-label prediction. Tensors not used by the configured variant stay
/// undefined and are not registered in the store.
struct ModelParams {
  ModelConfig config;
  ParamStore store;

  Tensor label_table;  // E: N x d_l
  Tensor w_label_pre;  // W_p: d_l x d_c (also the linear map when mode None)
  Tensor w_label_adp;  // W_adp: d_l x d_c
  Tensor w_data_pre;   // W'_p: d_c x d_c
  Tensor w_data_adp;   // W'_adp: d_c x d_c
  Tensor w_embed;      // d x d_x
  Tensor b_embed;      // d_x
  Tensor w_res;        // d_x x (N * d_c), reshaped per example
  Tensor phi_x_w;      // d_c x d_h
  Tensor phi_x_b;      // d_h
  Tensor phi_l_w;      // d_c x d_h
  Tensor phi_l_b;      // d_h
  Tensor cls_w;        // d_c x 1, shared across label nodes
  Tensor cls_b;        // 1
  Tensor e1;           // shared with GraphPair::source_embed
  Tensor e2;           // shared with GraphPair::target_embed

  /// Nodes eligible as single-label predictions: leaves plus any node
  /// observed as a terminal during training.
  std::vector<std::uint8_t> terminal_eligible;
};

/// Draws all weights for the configured variant. The adaptive-graph
/// embeddings are adopted from `graphs` (and registered) when consumed.
ModelParams init_params(const ModelConfig& config, const GraphPair& graphs,
                        Rng& rng);

/// Graph tensors for one forward pass. Both encoders must receive the same
/// instance so the label and data paths share the identical graph objects.
struct GraphTensors {
  Tensor predefined;  // constant, defined when the mode uses it
  Tensor adaptive;    // differentiable, defined when the mode uses it
};

GraphTensors make_graphs(const ModelParams& params, const GraphPair& graphs);

/// Label embeddings E_L (N x d_c) from the configured graph layer.
Tensor label_encoder_forward(const ModelParams& params,
                             const GraphTensors& graphs);

/// Data embeddings E_X (n x N x d_c): feature embedding, expansion onto the
/// label-node axis, then graph propagation with the shared graphs.
Tensor data_encoder_forward(const ModelParams& params,
                            const GraphTensors& graphs, const Tensor& x);

/// Per-node probabilities (n x N): shared linear map d_c -> 1 plus sigmoid.
Tensor classify(const ModelParams& params, const Tensor& e_x);

enum class PredictMode { Single, Multi };

struct Prediction {
  /// Chosen terminal per example (Single mode only; empty in Multi mode).
  std::vector<Index> terminals;
  /// Binary label set per example over all N nodes. Multi mode thresholds
  /// probabilities at 0.5 (strict); Single mode expands the terminal's path.
  std::vector<std::vector<std::uint8_t>> label_sets;
};

Prediction predict(const ModelParams& params, const GraphPair& graphs,
                   const LabelHierarchy& hierarchy, const Matrix& x,
                   PredictMode mode);

/// Binary checkpoint: versioned header with a config echo, then named
/// parameter blocks (name, shape, row-major 64-bit little-endian values).
/// Round-trips are bit-exact.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace hhar
