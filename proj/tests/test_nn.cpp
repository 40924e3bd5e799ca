#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "orinf/errors.hpp"
#include "orinf/nn.hpp"
#include "orinf/rng.hpp"

using namespace orinf;

namespace {

LabeledData xor_data() {
  LabeledData d;
  d.features = Matrix::from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  d.labels = {0, 1, 1, 0};
  return d;
}

ModelConfig xor_config() {
  ModelConfig cfg;
  cfg.layer_sizes = {2, 16, 2};
  cfg.activation = Activation::kTanh;
  cfg.output_kind = OutputKind::kSoftmaxClassifier;
  cfg.learning_rate = 0.5;
  cfg.epochs = 500;
  cfg.batch_size = 4;
  cfg.seed = 11;
  return cfg;
}

// Identity-activation regressor with hand-set weights, for exact taps.
WhiteBoxModel diag_model() {
  ModelConfig cfg;
  cfg.layer_sizes = {2, 2, 1};
  cfg.activation = Activation::kIdentity;
  cfg.output_kind = OutputKind::kLinearRegressor;
  cfg.learning_rate = 0.1;
  cfg.epochs = 1;
  WhiteBoxModel m = init_model(cfg);
  m.weights[0] = Matrix::from_rows({{2, 0}, {0, 3}});
  m.biases[0] = {0, 0};
  m.weights[1] = Matrix::from_rows({{1}, {1}});
  m.biases[1] = {0};
  return m;
}

LabeledData random_regression(std::size_t n, std::size_t d, std::size_t out, std::uint64_t seed) {
  Rng rng(seed);
  LabeledData data;
  data.features = Matrix(n, d);
  for (double& v : data.features.data()) v = rng.normal();
  if (out != 1) throw std::logic_error("single-output helper");
  data.labels.resize(n);
  for (double& v : data.labels) v = rng.normal();
  return data;
}

}  // namespace

TEST_CASE("xor training reaches perfect accuracy") {
  const WhiteBoxModel m = train(xor_config(), xor_data());
  CHECK(classification_accuracy(m, xor_data()) == 1.0);
  CHECK(m.trained_epochs == 500);
  CHECK(m.provenance.kind == Provenance::Kind::kScratch);
}

TEST_CASE("training is deterministic for a fixed config") {
  const WhiteBoxModel a = train(xor_config(), xor_data());
  const WhiteBoxModel b = train(xor_config(), xor_data());
  REQUIRE(a.weights.size() == b.weights.size());
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l] == b.biases[l]);
  }
  CHECK(save_model(a) == save_model(b));
}

TEST_CASE("layer access taps the expected values") {
  const WhiteBoxModel m = diag_model();
  const Matrix input = Matrix::from_rows({{1, 1}});

  const LayerAccessMatrix tap0 = layer_access(m, 0, input);
  CHECK(tap0.values == input);
  CHECK(tap0.layer_type == LayerType::kInput);
  CHECK(tap0.param_count == 0);

  const LayerAccessMatrix tap1 = layer_access(m, 1, input);
  CHECK(tap1.values.at(0, 0) == 2.0);
  CHECK(tap1.values.at(0, 1) == 3.0);
  CHECK(tap1.layer_depth == 1);
  CHECK(tap1.param_count == 6);  // 2*2 weights + 2 biases

  const LayerAccessMatrix tap2 = layer_access(m, 2, input);
  CHECK(tap2.values.at(0, 0) == 5.0);  // identity output head sums the taps
  CHECK(tap2.layer_type == LayerType::kOutput);
}

TEST_CASE("layer access rejects out-of-range indices") {
  const WhiteBoxModel m = diag_model();
  const Matrix input = Matrix::from_rows({{1, 1}});
  CHECK_THROWS_AS(layer_access(m, -1, input), AccessError);
  CHECK_THROWS_AS(layer_access(m, 3, input), AccessError);
}

TEST_CASE("hidden taps are post-activation") {
  ModelConfig cfg;
  cfg.layer_sizes = {1, 1, 1};
  cfg.activation = Activation::kRelu;
  cfg.output_kind = OutputKind::kLinearRegressor;
  WhiteBoxModel m = init_model(cfg);
  m.weights[0] = Matrix::from_rows({{1.0}});
  m.biases[0] = {-2.0};
  m.weights[1] = Matrix::from_rows({{1.0}});
  m.biases[1] = {0.0};
  const Matrix input = Matrix::from_rows({{1.0}});
  // Pre-activation is -1; relu clamps the tap to 0.
  CHECK(layer_access(m, 1, input).values.at(0, 0) == 0.0);
}

TEST_CASE("config validation rejects degenerate settings") {
  ModelConfig cfg = xor_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = xor_config();
  cfg.layer_sizes = {4};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = xor_config();
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = xor_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("incremental training with zero learning rate is the identity") {
  const WhiteBoxModel base = train(xor_config(), xor_data());
  const WhiteBoxModel next = incremental_train(base, xor_data(), 5, 0.0);
  for (std::size_t l = 0; l < base.weights.size(); ++l) {
    CHECK(next.weights[l] == base.weights[l]);
    CHECK(next.biases[l] == base.biases[l]);
  }
  CHECK(next.trained_epochs == base.trained_epochs + 5);
}

TEST_CASE("incremental training records provenance") {
  const WhiteBoxModel base = train(xor_config(), xor_data());
  const WhiteBoxModel next = incremental_train(base, xor_data(), 3);
  CHECK(next.provenance.kind == Provenance::Kind::kIncremental);
  CHECK(next.provenance.base_id == model_digest(base));
  // The base is untouched.
  CHECK(base.provenance.kind == Provenance::Kind::kScratch);
}

TEST_CASE("checkpoint round trip is exact") {
  const WhiteBoxModel m = train(xor_config(), xor_data());
  const std::string bytes = save_model(m);
  const WhiteBoxModel back = load_model(bytes);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    CHECK(back.weights[l] == m.weights[l]);
    CHECK(back.biases[l] == m.biases[l]);
  }
  CHECK(back.trained_epochs == m.trained_epochs);
  CHECK(back.config.layer_sizes == m.config.layer_sizes);
  CHECK(model_digest(back) == model_digest(m));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const WhiteBoxModel m = diag_model();
  std::string bytes = save_model(m);
  CHECK_THROWS_AS(load_model(bytes.substr(0, bytes.size() / 2)), SerializationError);
  CHECK_THROWS_AS(load_model("{}"), SerializationError);
  CHECK_THROWS_AS(load_model("not json"), SerializationError);
}

TEST_CASE("divergent training names the epoch") {
  ModelConfig cfg;
  cfg.layer_sizes = {1, 1};
  cfg.activation = Activation::kIdentity;
  cfg.output_kind = OutputKind::kLinearRegressor;
  cfg.learning_rate = 1e12;
  cfg.epochs = 50;
  cfg.batch_size = 2;
  cfg.seed = 3;
  LabeledData data;
  data.features = Matrix::from_rows({{1e3}, {-1e3}});
  data.labels = {1e3, -1e3};
  CHECK_THROWS_WITH_AS(train(cfg, data), doctest::Contains("epoch"), DivergenceError);
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    ModelConfig cfg;
    cfg.layer_sizes = trial == 2 ? std::vector<std::size_t>{3, 4, 1}
                                 : std::vector<std::size_t>{3, 4, 2};
    cfg.activation = trial == 0 ? Activation::kTanh : Activation::kRelu;
    cfg.output_kind =
        trial == 2 ? OutputKind::kLinearRegressor : OutputKind::kSoftmaxClassifier;
    cfg.weight_decay = trial == 1 ? 0.1 : 0.0;
    cfg.seed = 100 + static_cast<std::uint64_t>(trial);
    WhiteBoxModel m = init_model(cfg);
    LabeledData data;
    data.features = Matrix(6, 3);
    for (double& v : data.features.data()) v = rng.normal();
    data.labels.resize(6);
    for (double& v : data.labels) {
      v = cfg.output_kind == OutputKind::kSoftmaxClassifier
              ? static_cast<double>(rng.below(2))
              : rng.normal();
    }
    const Gradients analytic = compute_gradients(m, data);
    const Gradients fd = oracle::fd_gradients(m, data, 1e-6);
    CHECK(oracle::gradient_gap(analytic, fd) < 1e-6);
  }
}

TEST_CASE("weight decay penalizes weights but not biases") {
  ModelConfig cfg;
  cfg.layer_sizes = {1, 1};
  cfg.activation = Activation::kIdentity;
  cfg.output_kind = OutputKind::kLinearRegressor;
  cfg.weight_decay = 2.0;
  WhiteBoxModel m = init_model(cfg);
  m.weights[0] = Matrix::from_rows({{3.0}});
  m.biases[0] = {5.0};
  LabeledData data;
  data.features = Matrix::from_rows({{0.0}});
  data.labels = {5.0};  // prediction equals label, so the data term is zero
  CHECK(compute_loss(m, data) == doctest::Approx(0.5 * 2.0 * 9.0).epsilon(1e-12));
}

TEST_CASE("regression training reduces the loss") {
  ModelConfig cfg;
  cfg.layer_sizes = {4, 8, 1};
  cfg.activation = Activation::kTanh;
  cfg.output_kind = OutputKind::kLinearRegressor;
  cfg.learning_rate = 0.05;
  cfg.epochs = 80;
  cfg.batch_size = 8;
  cfg.seed = 5;
  const LabeledData data = random_regression(32, 4, 1, 9);
  const WhiteBoxModel before = init_model(cfg);
  const WhiteBoxModel after = train(cfg, data);
  CHECK(compute_loss(after, data) < compute_loss(before, data));
}

TEST_CASE("training rejects mismatched feature width") {
  ModelConfig cfg = xor_config();
  LabeledData data;
  data.features = Matrix::from_rows({{1, 2, 3}});
  data.labels = {0};
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
}

TEST_CASE("classifier labels must be valid class indices") {
  ModelConfig cfg = xor_config();
  LabeledData data = xor_data();
  data.labels[1] = 7;  // only 2 classes
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
}

TEST_CASE("model digest distinguishes different models") {
  const WhiteBoxModel a = train(xor_config(), xor_data());
  ModelConfig cfg = xor_config();
  cfg.seed = 12;
  const WhiteBoxModel b = train(cfg, xor_data());
  CHECK(model_digest(a) != model_digest(b));
}

TEST_CASE("layer metadata helpers agree with the architecture") {
  ModelConfig cfg;
  cfg.layer_sizes = {5, 7, 3};
  CHECK(layer_param_count(cfg, 0) == 0);
  CHECK(layer_param_count(cfg, 1) == 5 * 7 + 7);
  CHECK(layer_param_count(cfg, 2) == 7 * 3 + 3);
  CHECK(layer_type_of(cfg, 0) == LayerType::kInput);
  CHECK(layer_type_of(cfg, 1) == LayerType::kDense);
  CHECK(layer_type_of(cfg, 2) == LayerType::kOutput);
}
