#include "orinf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "orinf/errors.hpp"
#include "orinf/rng.hpp"

namespace orinf {

namespace {

constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kShuffleStream = 0x22;
constexpr int kCheckpointVersion = 1;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kIdentity:
      return z;
  }
  return z;
}

// Derivative expressed through the post-activation value.
double activate_deriv(Activation a, double out) {
  switch (a) {
    case Activation::kRelu:
      return out > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - out * out;
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

void softmax_rows_inplace(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double mx = r[0];
    for (double v : r) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
}

// Forward pass keeping every post-activation layer output.
// activations[0] is the input, activations[L] the model output.
std::vector<Matrix> forward_all(const WhiteBoxModel& model, const Matrix& inputs) {
  const auto& cfg = model.config;
  std::vector<Matrix> activations;
  activations.reserve(cfg.num_dense_layers() + 1);
  activations.push_back(inputs);
  for (std::size_t l = 0; l < cfg.num_dense_layers(); ++l) {
    Matrix z = matmul(activations.back(), model.weights[l]);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < z.cols(); ++j) r[j] += model.biases[l][j];
    }
    const bool last = (l + 1 == cfg.num_dense_layers());
    if (!last) {
      for (double& v : z.data()) v = activate(cfg.activation, v);
    } else if (cfg.output_kind == OutputKind::kSoftmaxClassifier) {
      softmax_rows_inplace(z);
    }
    activations.push_back(std::move(z));
  }
  return activations;
}

void check_labels(const ModelConfig& cfg, const LabeledData& data) {
  if (data.features.rows() == 0) throw InputError("train: empty sample matrix");
  if (data.features.cols() != cfg.input_width()) {
    throw ConfigError("train: data width " + std::to_string(data.features.cols()) +
                      " does not match layer_sizes[0] = " + std::to_string(cfg.input_width()));
  }
  if (data.labels.size() != data.features.rows()) {
    throw ConfigError("train: " + std::to_string(data.labels.size()) + " labels for " +
                      std::to_string(data.features.rows()) + " samples");
  }
  if (cfg.output_kind == OutputKind::kSoftmaxClassifier) {
    for (double y : data.labels) {
      if (y != std::floor(y) || y < 0.0 || y >= static_cast<double>(cfg.output_width())) {
        throw ConfigError("train: classifier labels must be class indices below " +
                          std::to_string(cfg.output_width()));
      }
    }
  } else {
    for (double y : data.labels) {
      if (!std::isfinite(y)) throw ConfigError("train: non-finite regression label");
    }
  }
}

// Mean data loss over the rows of `outputs` given the labels.
double data_loss(const ModelConfig& cfg, const Matrix& outputs, const std::vector<double>& labels) {
  double total = 0.0;
  const std::size_t n = outputs.rows();
  if (cfg.output_kind == OutputKind::kSoftmaxClassifier) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto cls = static_cast<std::size_t>(labels[i]);
      total += -std::log(std::max(outputs.at(i, cls), 1e-300));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = outputs.at(i, 0) - labels[i];
      total += d * d;
    }
  }
  return total / static_cast<double>(n);
}

double decay_term(const WhiteBoxModel& model) {
  if (model.config.weight_decay == 0.0) return 0.0;
  double ss = 0.0;
  for (const auto& w : model.weights) {
    for (double v : w.data()) ss += v * v;
  }
  return 0.5 * model.config.weight_decay * ss;
}

// Backprop of (data loss + decay) for the given rows. Assumes shapes are
// already validated.
Gradients gradients_for(const WhiteBoxModel& model, const Matrix& x, const std::vector<double>& y) {
  const auto& cfg = model.config;
  const std::size_t layers = cfg.num_dense_layers();
  const std::size_t n = x.rows();
  const auto acts = forward_all(model, x);

  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);

  // delta at the output layer.
  Matrix delta = acts.back();
  if (cfg.output_kind == OutputKind::kSoftmaxClassifier) {
    for (std::size_t i = 0; i < n; ++i) {
      delta.at(i, static_cast<std::size_t>(y[i])) -= 1.0;
    }
    for (double& v : delta.data()) v /= static_cast<double>(n);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      delta.at(i, 0) = 2.0 * (delta.at(i, 0) - y[i]) / static_cast<double>(n);
    }
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& a_prev = acts[l];
    Matrix dw(model.weights[l].rows(), model.weights[l].cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < dw.rows(); ++r) {
        const double av = a_prev.at(i, r);
        if (av == 0.0) continue;
        for (std::size_t c = 0; c < dw.cols(); ++c) dw.at(r, c) += av * delta.at(i, c);
      }
    }
    if (cfg.weight_decay != 0.0) {
      const auto& w = model.weights[l];
      for (std::size_t k = 0; k < dw.data().size(); ++k) {
        dw.data()[k] += cfg.weight_decay * w.data()[k];
      }
    }
    std::vector<double> db(model.biases[l].size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < db.size(); ++c) db[c] += delta.at(i, c);
    }
    g.weights[l] = std::move(dw);
    g.biases[l] = std::move(db);

    if (l > 0) {
      Matrix prev_delta(n, model.weights[l].rows(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < model.weights[l].rows(); ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < model.weights[l].cols(); ++c) {
            s += delta.at(i, c) * model.weights[l].at(r, c);
          }
          prev_delta.at(i, r) = s * activate_deriv(cfg.activation, acts[l].at(i, r));
        }
      }
      delta = std::move(prev_delta);
    }
  }
  return g;
}

// One SGD pass over the data in the order given by `order`, updating the
// model in place. Returns the mean pre-update batch loss (data term only).
double sgd_epoch(WhiteBoxModel& model, const LabeledData& data,
                 const std::vector<std::size_t>& order, double lr) {
  const auto& cfg = model.config;
  const std::size_t n = order.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t end = std::min(n, start + bs);
    std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
    Matrix bx = data.features.take_rows(idx);
    std::vector<double> by(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) by[i] = data.labels[idx[i]];

    const auto outputs = forward_all(model, bx).back();
    loss_sum += data_loss(cfg, outputs, by);
    ++batches;

    const Gradients g = gradients_for(model, bx, by);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      auto& w = model.weights[l].data();
      const auto& dw = g.weights[l].data();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * dw[k];
      auto& b = model.biases[l];
      for (std::size_t k = 0; k < b.size(); ++k) b[k] -= lr * g.biases[l][k];
    }
  }
  return loss_sum / static_cast<double>(batches);
}

void run_epochs(WhiteBoxModel& model, const LabeledData& data, int epochs, double lr,
                std::uint64_t shuffle_seed) {
  Rng shuffle_rng(shuffle_seed);
  for (int ep = 0; ep < epochs; ++ep) {
    const auto order = shuffle_rng.permutation(data.features.rows());
    const double ep_loss = sgd_epoch(model, data, order, lr);
    if (!std::isfinite(ep_loss)) {
      throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(ep + 1));
    }
  }
  model.trained_epochs += epochs;
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["layer_sizes"] = c.layer_sizes;
  j["activation"] = activation_name(c.activation);
  j["output_kind"] = output_kind_name(c.output_kind);
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  c.activation = activation_from_name(j.at("activation").get<std::string>());
  c.output_kind = output_kind_from_name(j.at("output_kind").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void ModelConfig::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("layer_sizes needs at least input and output");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ConfigError("layer_sizes entries must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (output_kind == OutputKind::kSoftmaxClassifier && layer_sizes.back() < 2) {
    throw ConfigError("softmax classifier needs an output width of at least 2");
  }
  if (output_kind == OutputKind::kLinearRegressor && layer_sizes.back() != 1) {
    throw ConfigError("linear regressor expects an output width of 1");
  }
}

WhiteBoxModel init_model(const ModelConfig& config) {
  config.validate();
  WhiteBoxModel m;
  m.config = config;
  Rng rng(mix_seed(config.seed, kInitStream));
  for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
    const std::size_t fan_in = config.layer_sizes[l];
    const std::size_t fan_out = config.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

WhiteBoxModel train(const ModelConfig& config, const LabeledData& data) {
  WhiteBoxModel model = init_model(config);
  check_labels(config, data);
  run_epochs(model, data, config.epochs, config.learning_rate, mix_seed(config.seed, kShuffleStream));
  return model;
}

WhiteBoxModel incremental_train(const WhiteBoxModel& base, const LabeledData& data, int epochs,
                                std::optional<double> learning_rate) {
  if (base.trained_epochs < 1) throw ConfigError("incremental_train: base model is untrained");
  if (epochs < 1) throw ConfigError("incremental_train: epochs must be >= 1");
  if (learning_rate && !(*learning_rate >= 0.0)) {
    throw ConfigError("incremental_train: learning rate override must be >= 0");
  }
  check_labels(base.config, data);

  WhiteBoxModel model = base;
  model.provenance = {Provenance::Kind::kIncremental, model_digest(base)};
  const double lr = learning_rate.value_or(base.config.learning_rate);
  // Shuffle stream keyed off the epoch counter so repeated incremental calls
  // do not replay the same batch order.
  run_epochs(model, data, epochs, lr,
             mix_seed(mix_seed(base.config.seed, kShuffleStream), static_cast<std::uint64_t>(base.trained_epochs)));
  return model;
}

std::size_t layer_param_count(const ModelConfig& config, int layer_index) {
  if (layer_index == 0) return 0;
  const auto l = static_cast<std::size_t>(layer_index);
  return config.layer_sizes[l - 1] * config.layer_sizes[l] + config.layer_sizes[l];
}

LayerType layer_type_of(const ModelConfig& config, int layer_index) {
  if (layer_index == 0) return LayerType::kInput;
  if (static_cast<std::size_t>(layer_index) == config.num_dense_layers()) return LayerType::kOutput;
  return LayerType::kDense;
}

LayerAccessMatrix layer_access(const WhiteBoxModel& model, int layer_index, const Matrix& inputs) {
  const auto& cfg = model.config;
  const int max_index = static_cast<int>(cfg.num_dense_layers());
  if (layer_index < 0 || layer_index > max_index) {
    throw AccessError("layer_access: index " + std::to_string(layer_index) + " outside [0, " +
                      std::to_string(max_index) + "]");
  }
  if (inputs.cols() != cfg.input_width()) {
    throw ConfigError("layer_access: input width " + std::to_string(inputs.cols()) +
                      " does not match the model input width " + std::to_string(cfg.input_width()));
  }
  LayerAccessMatrix out;
  out.layer_index = layer_index;
  out.layer_depth = layer_index;
  out.param_count = layer_param_count(cfg, layer_index);
  out.layer_type = layer_type_of(cfg, layer_index);
  if (layer_index == 0) {
    out.values = inputs;
    return out;
  }
  // Forward only as far as needed.
  Matrix current = inputs;
  for (int l = 0; l < layer_index; ++l) {
    Matrix z = matmul(current, model.weights[static_cast<std::size_t>(l)]);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < z.cols(); ++j) r[j] += model.biases[static_cast<std::size_t>(l)][j];
    }
    const bool last = (l + 1 == max_index);
    if (!last) {
      for (double& v : z.data()) v = activate(cfg.activation, v);
    } else if (cfg.output_kind == OutputKind::kSoftmaxClassifier) {
      softmax_rows_inplace(z);
    }
    current = std::move(z);
  }
  out.values = std::move(current);
  return out;
}

double compute_loss(const WhiteBoxModel& model, const LabeledData& data) {
  check_labels(model.config, data);
  const auto outputs = forward_all(model, data.features).back();
  return data_loss(model.config, outputs, data.labels) + decay_term(model);
}

Gradients compute_gradients(const WhiteBoxModel& model, const LabeledData& data) {
  check_labels(model.config, data);
  return gradients_for(model, data.features, data.labels);
}

double classification_accuracy(const WhiteBoxModel& model, const LabeledData& data) {
  if (model.config.output_kind != OutputKind::kSoftmaxClassifier) {
    throw ConfigError("classification_accuracy: model is not a classifier");
  }
  check_labels(model.config, data);
  const auto outputs = forward_all(model, data.features).back();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < outputs.rows(); ++i) {
    auto r = outputs.row(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < r.size(); ++j) {
      if (r[j] > r[arg]) arg = j;
    }
    if (arg == static_cast<std::size_t>(data.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(outputs.rows());
}

std::string save_model(const WhiteBoxModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "orinf-model";
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(model.config);
  j["trained_epochs"] = model.trained_epochs;
  if (model.provenance.kind == Provenance::Kind::kScratch) {
    j["provenance"] = {{"kind", "scratch"}};
  } else {
    j["provenance"] = {{"kind", "incremental"}, {"base", model.provenance.base_id}};
  }
  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  for (const auto& w : model.weights) weights.push_back(w.data());
  j["weights"] = std::move(weights);
  j["biases"] = model.biases;
  return j.dump();
}

WhiteBoxModel load_model(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(std::string("checkpoint parse failed: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "orinf-model") {
      throw SerializationError("checkpoint format tag mismatch");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw SerializationError("unsupported checkpoint version " + j.at("version").dump());
    }
    WhiteBoxModel m;
    m.config = config_from_json(j.at("config"));
    m.config.validate();
    m.trained_epochs = j.at("trained_epochs").get<int>();
    const auto& prov = j.at("provenance");
    if (prov.at("kind").get<std::string>() == "scratch") {
      m.provenance = {Provenance::Kind::kScratch, ""};
    } else {
      m.provenance = {Provenance::Kind::kIncremental, prov.at("base").get<std::string>()};
    }
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != m.config.num_dense_layers() || biases.size() != m.config.num_dense_layers()) {
      throw SerializationError("checkpoint layer count does not match its config");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const std::size_t fan_in = m.config.layer_sizes[l];
      const std::size_t fan_out = m.config.layer_sizes[l + 1];
      auto flat = weights[l].get<std::vector<double>>();
      if (flat.size() != fan_in * fan_out) {
        throw SerializationError("checkpoint weight matrix " + std::to_string(l) + " has wrong shape");
      }
      Matrix w(fan_in, fan_out);
      w.data() = std::move(flat);
      m.weights.push_back(std::move(w));
      auto b = biases[l].get<std::vector<double>>();
      if (b.size() != fan_out) {
        throw SerializationError("checkpoint bias vector " + std::to_string(l) + " has wrong shape");
      }
      m.biases.push_back(std::move(b));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::string model_digest(const WhiteBoxModel& model) {
  const std::uint64_t h = fnv1a64(save_model(model));
  std::ostringstream oss;
  oss << std::hex << h;
  return oss.str();
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kIdentity:
      return "identity";
  }
  return "relu";
}

const char* output_kind_name(OutputKind k) {
  return k == OutputKind::kSoftmaxClassifier ? "softmax-classifier" : "linear-regressor";
}

const char* layer_type_name(LayerType t) {
  switch (t) {
    case LayerType::kInput:
      return "input";
    case LayerType::kDense:
      return "dense";
    case LayerType::kActivation:
      return "activation";
    case LayerType::kOutput:
      return "output";
  }
  return "dense";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

OutputKind output_kind_from_name(const std::string& name) {
  if (name == "softmax-classifier") return OutputKind::kSoftmaxClassifier;
  if (name == "linear-regressor") return OutputKind::kLinearRegressor;
  throw ConfigError("unknown output kind '" + name + "'");
}

LayerType layer_type_from_name(const std::string& name) {
  if (name == "input") return LayerType::kInput;
  if (name == "dense") return LayerType::kDense;
  if (name == "activation") return LayerType::kActivation;
  if (name == "output") return LayerType::kOutput;
  throw ConfigError("unknown layer type '" + name + "'");
}

}  // namespace orinf
