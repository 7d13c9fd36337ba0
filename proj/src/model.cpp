#include "hhar/model.hpp"

#include "hhar/text.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hhar {

std::string to_string(HierarchyMode m) {
  switch (m) {
    case HierarchyMode::None: return "none";
    case HierarchyMode::Predefined: return "predefined";
    case HierarchyMode::Adaptive: return "adaptive";
    case HierarchyMode::Both: return "both";
  }
  return "both";
}

HierarchyMode hierarchy_mode_from_string(const std::string& s) {
  if (s == "none") return HierarchyMode::None;
  if (s == "predefined") return HierarchyMode::Predefined;
  if (s == "adaptive") return HierarchyMode::Adaptive;
  if (s == "both") return HierarchyMode::Both;
  throw std::invalid_argument("unknown hierarchy mode '" + s +
                              "' (none|predefined|adaptive|both)");
}

void ModelConfig::validate() const {
  if (feature_dim < 1) throw std::invalid_argument("model: feature_dim < 1");
  if (label_count < 1) throw std::invalid_argument("model: label_count < 1");
  for (Index w : {d_l, d_c, d_x, d_h, d_f})
    if (w < 1) throw std::invalid_argument("model: width < 1");
}

ModelParams init_params(const ModelConfig& config, const GraphPair& graphs,
                        Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  const Index n = config.label_count;

  if (config.has_label_encoder()) {
    p.label_table = p.store.add(
        "E", init_uniform(Shape{n, config.d_l},
                          1.0 / std::sqrt(static_cast<Real>(config.d_l)),
                          rng));
    if (config.uses_predefined() || config.hierarchy == HierarchyMode::None)
      p.w_label_pre =
          p.store.add("W_p", init_weight(config.d_l, config.d_c, rng));
    if (config.uses_adaptive_graph())
      p.w_label_adp =
          p.store.add("W_adp", init_weight(config.d_l, config.d_c, rng));
  }

  if (config.has_data_pre())
    p.w_data_pre =
        p.store.add("W_p_data", init_weight(config.d_c, config.d_c, rng));
  if (config.feature_propagation && config.uses_adaptive_graph())
    p.w_data_adp =
        p.store.add("W_adp_data", init_weight(config.d_c, config.d_c, rng));

  p.w_embed =
      p.store.add("W_embed", init_weight(config.feature_dim, config.d_x, rng));
  p.b_embed = p.store.add(
      "b_embed", Tensor::variable(Shape{config.d_x},
                                  Matrix::Zero(config.d_x, 1)));
  p.w_res =
      p.store.add("W_res", init_weight(config.d_x, n * config.d_c, rng));

  if (config.has_phi_x()) {
    p.phi_x_w = p.store.add("phi_x_w", init_weight(config.d_c, config.d_h, rng));
    p.phi_x_b = p.store.add(
        "phi_x_b",
        Tensor::variable(Shape{config.d_h}, Matrix::Zero(config.d_h, 1)));
  }
  if (config.with_align) {
    p.phi_l_w = p.store.add("phi_l_w", init_weight(config.d_c, config.d_h, rng));
    p.phi_l_b = p.store.add(
        "phi_l_b",
        Tensor::variable(Shape{config.d_h}, Matrix::Zero(config.d_h, 1)));
  }

  p.cls_w = p.store.add("cls_w", init_weight(config.d_c, 1, rng));
  p.cls_b = p.store.add(
      "cls_b", Tensor::variable(Shape{1}, Matrix::Zero(1, 1)));

  if (config.adaptive_consumed()) {
    const Shape want{n, config.d_f};
    if (graphs.source_embed.shape() != want)
      throw std::invalid_argument(
          "init_params: graph embeddings have shape " +
          graphs.source_embed.shape().str() + ", expected " + want.str());
    p.e1 = p.store.add("E1", graphs.source_embed);
    p.e2 = p.store.add("E2", graphs.target_embed);
  }

  p.terminal_eligible.assign(n, 0);
  return p;
}

GraphTensors make_graphs(const ModelParams& params, const GraphPair& graphs) {
  GraphTensors g;
  if (params.config.uses_predefined())
    g.predefined = Tensor::constant(graphs.normalized);
  if (params.config.adaptive_consumed())
    g.adaptive = adaptive_adjacency(params.e1, params.e2);
  return g;
}

namespace {

/// sigma(G_pre * t * W_pre + G_adp * t * W_adp) with whichever terms the
/// variant keeps; plain sigma(t * W_pre) when no graph exists.
Tensor graph_layer(const GraphTensors& graphs, const Tensor& t,
                   const Tensor& w_pre, const Tensor& w_adp) {
  std::vector<Tensor> terms;
  if (graphs.predefined.defined())
    terms.push_back(matmul(matmul(graphs.predefined, t), w_pre));
  if (graphs.adaptive.defined() && w_adp.defined())
    terms.push_back(matmul(matmul(graphs.adaptive, t), w_adp));
  if (terms.empty()) terms.push_back(matmul(t, w_pre));
  return relu(terms.size() == 1 ? terms.front() : add_n(terms));
}

}  // namespace

Tensor label_encoder_forward(const ModelParams& params,
                             const GraphTensors& graphs) {
  if (!params.config.has_label_encoder())
    throw std::logic_error("label encoder absent in this variant");
  return graph_layer(graphs, params.label_table, params.w_label_pre,
                     params.w_label_adp);
}

Tensor data_encoder_forward(const ModelParams& params,
                            const GraphTensors& graphs, const Tensor& x) {
  const ModelConfig& c = params.config;
  if (x.rank() != 2 || x.shape().dim(1) != c.feature_dim)
    throw std::invalid_argument("data encoder: feature width of input " +
                                x.shape().str() + " does not match d=" +
                                std::to_string(c.feature_dim));
  Tensor e_d = relu(add_rows(matmul(x, params.w_embed), params.b_embed));
  Tensor v =
      unflatten_rows(matmul(e_d, params.w_res), c.label_count, c.d_c);
  if (!c.feature_propagation)
    return relu(matmul(v, params.w_data_pre));
  return graph_layer(graphs, v, params.w_data_pre, params.w_data_adp);
}

Tensor classify(const ModelParams& params, const Tensor& e_x) {
  if (e_x.rank() != 3 || e_x.shape().dim(1) != params.config.label_count ||
      e_x.shape().dim(2) != params.config.d_c)
    throw std::invalid_argument("classify: expected n x N x d_c input, got " +
                                e_x.shape().str());
  Tensor logits = add_scalar(squeeze_last(matmul(e_x, params.cls_w)),
                             params.cls_b);
  return sigmoid(logits);
}

Prediction predict(const ModelParams& params, const GraphPair& graphs,
                   const LabelHierarchy& hierarchy, const Matrix& x,
                   PredictMode mode) {
  bool finite = true;
  params.store.for_each([&](const std::string&, const Tensor& t) {
    finite = finite && t.value().allFinite();
  });
  if (!finite)
    throw std::runtime_error("predict: non-finite model parameters");

  GraphTensors g = make_graphs(params, graphs);
  Tensor e_x = data_encoder_forward(params, g, Tensor::constant(x));
  Matrix probs = classify(params, e_x).value();

  const Index n = probs.rows();
  const Index labels = probs.cols();
  Prediction out;
  out.label_sets.resize(n);

  if (mode == PredictMode::Multi) {
    for (Index i = 0; i < n; ++i) {
      out.label_sets[i].assign(labels, 0);
      for (Index j = 0; j < labels; ++j)
        out.label_sets[i][j] = probs(i, j) > 0.5 ? 1 : 0;
    }
    return out;
  }

  // Single: argmax over terminal-eligible nodes (ties -> smallest index),
  // expanded to the full root path.
  std::vector<Index> eligible;
  for (Index v = 0; v < labels; ++v) {
    const bool trained_terminal = v < static_cast<Index>(
                                          params.terminal_eligible.size()) &&
                                  params.terminal_eligible[v] != 0;
    if (hierarchy.is_leaf(v) || trained_terminal) eligible.push_back(v);
  }
  out.terminals.resize(n);
  for (Index i = 0; i < n; ++i) {
    Index best = eligible.front();
    for (Index v : eligible)
      if (probs(i, v) > probs(i, best)) best = v;
    out.terminals[i] = best;
    const Vector path = hierarchy.expand_label_set(best);
    out.label_sets[i].assign(labels, 0);
    for (Index j = 0; j < labels; ++j)
      out.label_sets[i][j] = path(j) != 0.0 ? 1 : 0;
  }
  return out;
}

// ---- Checkpoint io ---------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'H', 'H', 'A', 'R', 'C', 'K', 'P', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto len = read_le<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

void write_block(std::ostream& out, const std::string& name,
                 const Shape& shape, const Matrix& storage) {
  write_string(out, name);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.rank()));
  for (int i = 0; i < shape.rank(); ++i)
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.dim(i)));
  for (Index r = 0; r < storage.rows(); ++r)
    for (Index c = 0; c < storage.cols(); ++c) write_le<Real>(out, storage(r, c));
}

std::string config_meta(const ModelConfig& c) {
  std::ostringstream os;
  os << "feature_dim=" << c.feature_dim << '\n'
     << "label_count=" << c.label_count << '\n'
     << "d_l=" << c.d_l << '\n'
     << "d_c=" << c.d_c << '\n'
     << "d_x=" << c.d_x << '\n'
     << "d_h=" << c.d_h << '\n'
     << "d_f=" << c.d_f << '\n'
     << "hierarchy=" << to_string(c.hierarchy) << '\n'
     << "feature_propagation=" << (c.feature_propagation ? 1 : 0) << '\n'
     << "with_align=" << (c.with_align ? 1 : 0) << '\n'
     << "with_contrastive=" << (c.with_contrastive ? 1 : 0) << '\n';
  return os.str();
}

ModelConfig parse_config_meta(const std::string& meta) {
  ModelConfig c;
  std::istringstream is(meta);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    long long iv = 0;
    if (key == "hierarchy") {
      c.hierarchy = hierarchy_mode_from_string(value);
      continue;
    }
    if (!parse_int(value, iv))
      throw std::runtime_error("checkpoint: bad meta line '" + line + "'");
    if (key == "feature_dim") c.feature_dim = iv;
    else if (key == "label_count") c.label_count = iv;
    else if (key == "d_l") c.d_l = iv;
    else if (key == "d_c") c.d_c = iv;
    else if (key == "d_x") c.d_x = iv;
    else if (key == "d_h") c.d_h = iv;
    else if (key == "d_f") c.d_f = iv;
    else if (key == "feature_propagation") c.feature_propagation = iv != 0;
    else if (key == "with_align") c.with_align = iv != 0;
    else if (key == "with_contrastive") c.with_contrastive = iv != 0;
    else throw std::runtime_error("checkpoint: unknown meta key '" + key + "'");
  }
  return c;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::invalid_argument("checkpoint: cannot write '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  write_string(out, config_meta(params.config));

  const auto names = params.store.names();
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(names.size() + 1));
  for (const auto& name : names) {
    const Tensor& t = params.store.get(name);
    write_block(out, name, t.shape(), t.value());
  }
  Matrix mask(static_cast<Index>(params.terminal_eligible.size()), 1);
  for (Index i = 0; i < mask.rows(); ++i)
    mask(i, 0) = params.terminal_eligible[static_cast<std::size_t>(i)] ? 1.0
                                                                       : 0.0;
  write_block(out, "terminal_eligible", Shape{mask.rows()}, mask);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("checkpoint: cannot open '" + path + "'");
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");

  ModelParams p;
  p.config = parse_config_meta(read_string(in));
  p.config.validate();

  const auto block_count = read_le<std::uint32_t>(in);
  std::map<std::string, Tensor> blocks;
  for (std::uint32_t b = 0; b < block_count; ++b) {
    const std::string name = read_string(in);
    const auto rank = read_le<std::uint32_t>(in);
    if (rank < 1 || rank > 3)
      throw std::runtime_error("checkpoint: bad rank for '" + name + "'");
    std::vector<Index> dims(rank);
    for (auto& d : dims) d = static_cast<Index>(read_le<std::uint32_t>(in));
    Shape shape = rank == 1 ? Shape{dims[0]}
                  : rank == 2 ? Shape{dims[0], dims[1]}
                              : Shape{dims[0], dims[1], dims[2]};
    Matrix storage(shape.storage_rows(), shape.storage_cols());
    for (Index r = 0; r < storage.rows(); ++r)
      for (Index c = 0; c < storage.cols(); ++c)
        storage(r, c) = read_le<Real>(in);
    blocks.emplace(name, Tensor::variable(shape, std::move(storage)));
  }

  auto take = [&](const char* name, Tensor& slot, bool required) {
    auto it = blocks.find(name);
    if (it == blocks.end()) {
      if (required)
        throw std::runtime_error(std::string("checkpoint: missing block '") +
                                 name + "'");
      return;
    }
    slot = p.store.add(name, it->second);
    blocks.erase(it);
  };

  const ModelConfig& c = p.config;
  take("E", p.label_table, c.has_label_encoder());
  take("W_p", p.w_label_pre,
       c.has_label_encoder() &&
           (c.uses_predefined() || c.hierarchy == HierarchyMode::None));
  take("W_adp", p.w_label_adp,
       c.has_label_encoder() && c.uses_adaptive_graph());
  take("W_p_data", p.w_data_pre, c.has_data_pre());
  take("W_adp_data", p.w_data_adp,
       c.feature_propagation && c.uses_adaptive_graph());
  take("W_embed", p.w_embed, true);
  take("b_embed", p.b_embed, true);
  take("W_res", p.w_res, true);
  take("phi_x_w", p.phi_x_w, c.has_phi_x());
  take("phi_x_b", p.phi_x_b, c.has_phi_x());
  take("phi_l_w", p.phi_l_w, c.with_align);
  take("phi_l_b", p.phi_l_b, c.with_align);
  take("cls_w", p.cls_w, true);
  take("cls_b", p.cls_b, true);
  take("E1", p.e1, c.adaptive_consumed());
  take("E2", p.e2, c.adaptive_consumed());

  auto mask_it = blocks.find("terminal_eligible");
  if (mask_it == blocks.end())
    throw std::runtime_error("checkpoint: missing terminal_eligible block");
  const Matrix& mask = mask_it->second.value();
  p.terminal_eligible.resize(static_cast<std::size_t>(mask.rows()));
  for (Index i = 0; i < mask.rows(); ++i)
    p.terminal_eligible[static_cast<std::size_t>(i)] =
        mask(i, 0) != 0.0 ? 1 : 0;
  blocks.erase(mask_it);

  if (!blocks.empty())
    throw std::runtime_error("checkpoint: unexpected block '" +
                             blocks.begin()->first + "'");
  return p;
}

}  // namespace hhar
