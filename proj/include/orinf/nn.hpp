#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orinf/matrix.hpp"

namespace orinf {

enum class Activation { kRelu, kTanh, kIdentity };
enum class OutputKind { kSoftmaxClassifier, kLinearRegressor };

// Hyperparameters of a feedforward network. layer_sizes runs from the input
// width to the output width; every dense layer except the last applies
// `activation`, the last applies softmax (classifier) or nothing (regressor).
struct ModelConfig {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::kRelu;
  OutputKind output_kind = OutputKind::kSoftmaxClassifier;
  double learning_rate = 0.01;
  int epochs = 1;
  int batch_size = 32;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_dense_layers() const { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }
  std::size_t input_width() const { return layer_sizes.front(); }
  std::size_t output_width() const { return layer_sizes.back(); }

  void validate() const;  // throws ConfigError
};

struct Provenance {
  enum class Kind { kScratch, kIncremental };
  Kind kind = Kind::kScratch;
  std::string base_id;  // digest of the base model when incremental
};

// Features plus one target per row: a class index (stored as a double) for
// classifiers, a real value for regressors.
struct LabeledData {
  Matrix features;
  std::vector<double> labels;
};

enum class LayerType { kInput, kDense, kActivation, kOutput };

// One referenced layer's outputs for a sample set, with the metadata the
// layer-analysis code consumes.
struct LayerAccessMatrix {
  int layer_index = 0;
  int layer_depth = 0;
  std::size_t param_count = 0;
  LayerType layer_type = LayerType::kInput;
  Matrix values;  // num_samples x layer_width
};

// A feedforward network with every weight exposed. weights[l] has shape
// layer_sizes[l] x layer_sizes[l+1]; biases[l] has layer_sizes[l+1] entries.
struct WhiteBoxModel {
  ModelConfig config;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  int trained_epochs = 0;
  Provenance provenance;
};

// Glorot-uniform initialized, untrained model. Deterministic per config.seed.
WhiteBoxModel init_model(const ModelConfig& config);

// Full training run: seeded shuffles, mini-batch SGD with optional weight
// decay. Deterministic for a fixed (config, data). Throws DivergenceError
// naming the epoch if the loss goes non-finite.
WhiteBoxModel train(const ModelConfig& config, const LabeledData& data);

// Continue training from `base` for exactly `epochs` more epochs; `base` is
// left untouched and the result records it in provenance. The learning rate
// may be overridden without touching the rest of the config.
WhiteBoxModel incremental_train(const WhiteBoxModel& base, const LabeledData& data, int epochs,
                                std::optional<double> learning_rate = std::nullopt);

// Referenced-layer tap. Index 0 returns the inputs unchanged (the
// preprocessed embedding); index l in [1, L] returns the post-activation
// output of dense layer l, where L applies the output nonlinearity.
LayerAccessMatrix layer_access(const WhiteBoxModel& model, int layer_index, const Matrix& inputs);

// Parameter count of one dense layer: fan_in * fan_out + fan_out. Zero for
// the input tap.
std::size_t layer_param_count(const ModelConfig& config, int layer_index);
LayerType layer_type_of(const ModelConfig& config, int layer_index);

// Training objective: mean cross-entropy (classifier) or mean squared error
// (regressor), plus 0.5 * weight_decay * sum of squared weights (biases are
// not decayed). compute_gradients returns the analytic gradient of exactly
// this quantity, which is what the finite-difference checks probe.
double compute_loss(const WhiteBoxModel& model, const LabeledData& data);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};
Gradients compute_gradients(const WhiteBoxModel& model, const LabeledData& data);

// Fraction of rows whose argmax matches the label (classifiers only).
double classification_accuracy(const WhiteBoxModel& model, const LabeledData& data);

// Checkpoint container: versioned JSON with config, provenance and row-major
// weights. load(save(m)) reproduces m exactly; see README for the layout.
std::string save_model(const WhiteBoxModel& model);
WhiteBoxModel load_model(const std::string& bytes);

// Stable content id (hash of the checkpoint bytes), used for provenance.
std::string model_digest(const WhiteBoxModel& model);

const char* activation_name(Activation a);
const char* output_kind_name(OutputKind k);
const char* layer_type_name(LayerType t);
Activation activation_from_name(const std::string& name);
OutputKind output_kind_from_name(const std::string& name);
LayerType layer_type_from_name(const std::string& name);

}  // namespace orinf
