#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "orinf/featurize.hpp"
#include "orinf/nn.hpp"
#include "orinf/origin_data.hpp"

namespace orinf {

enum class ShadowMode { kScratch, kIncremental };
enum class MetaKind { kLogistic, kMlp };
enum class InferenceBagging { kBagged, kSingleBag };

struct MetaHyper {
  // Logistic: full-batch gradient descent on standardized embeddings.
  int iterations = 400;
  double learning_rate = 0.5;
  double l2 = 0.01;
  // MLP meta-model (used with compound embeddings).
  std::vector<std::size_t> mlp_hidden = {32};
  int mlp_epochs = 200;
  double mlp_learning_rate = 0.05;
  int mlp_batch_size = 32;
};

// One full experiment: who the shadow is, which layer is referenced, how
// bags are built and how the verdict threshold is applied.
struct ExperimentConfig {
  ModelConfig target_model;
  std::optional<ModelConfig> shadow_model;  // defaults to the target architecture
  ShadowMode shadow_mode = ShadowMode::kScratch;
  int incremental_epochs = 10;
  int shadow_ensemble = 1;

  int layer_index = 1;
  FeatSpec feat;
  std::size_t bag_size = 32;
  double threshold = 0.5;
  InferenceBagging bagging = InferenceBagging::kBagged;

  double member_fraction = 0.5;
  double intra_ratio = 0.5;

  MetaKind meta_kind = MetaKind::kLogistic;
  MetaHyper meta;

  std::uint64_t partition_seed = 1;
  std::uint64_t bag_seed = 2;
  std::uint64_t shadow_seed = 3;
  std::uint64_t meta_seed = 4;

  ModelConfig shadow_config() const;  // target config with overrides applied
  void validate() const;
};

// Binary classifier over bag embeddings. Inputs are standardized with
// statistics frozen from the training set.
struct MetaModel {
  MetaKind kind = MetaKind::kLogistic;
  std::size_t input_width = 0;
  std::uint64_t training_seed = 0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<double> weights;  // logistic
  double bias = 0.0;
  std::optional<WhiteBoxModel> mlp;

  double predict(std::span<const double> embedding) const;  // probability of membership
};

std::string save_meta(const MetaModel& meta);
MetaModel load_meta(const std::string& bytes);

struct InferenceVerdict {
  OriginId origin;
  double probability = 0.0;
  std::vector<double> per_bag_probabilities;
  double threshold = 0.5;
  bool member = false;
};

// Bookkeeping from build_shadow, used by the manifest and the disjointness
// checks. Indices are positions in the proxy dataset.
struct ShadowAudit {
  std::vector<std::set<OriginId>> member_origins;     // per ensemble shadow
  std::vector<std::set<OriginId>> nonmember_origins;  // per ensemble shadow
  std::vector<std::size_t> shadow_train_indices;      // union over shadows
  std::vector<std::size_t> positive_source_indices;   // union over shadows
};

struct ShadowOutput {
  std::vector<WhiteBoxModel> shadows;
  std::vector<BagEmbedding> meta_training_set;
  FeatSpec frozen_feat;  // histogram range resolved
  ShadowAudit audit;
};

// Shadow side of the pipeline: origin quotient, member/non-member split,
// per-origin train/held-out split, shadow training (from scratch or
// incrementally from the target), and embedding generation for the
// meta-model. With shadow_ensemble > 1 the embeddings of independently
// seeded shadows are unioned.
ShadowOutput build_shadow(const OriginDataset& proxy, const ExperimentConfig& cfg,
                          const WhiteBoxModel* target = nullptr);

MetaModel train_meta(const std::vector<BagEmbedding>& embeddings, MetaKind kind,
                     std::uint64_t seed, const MetaHyper& hyper = {});

// One origin's auxiliary samples, as handed to inference.
struct AuxGroup {
  OriginId origin;
  Matrix features;
  std::vector<double> labels;
  std::vector<double> lengths;  // empty when the dataset has no length channel
};

std::vector<AuxGroup> make_aux_groups(const OriginDataset& aux);

// Scores one origin: referenced-layer access on the target, bagging with the
// frozen featurization, per-bag meta probabilities, mean aggregation, and
// the >= threshold membership rule.
InferenceVerdict infer_origin(const WhiteBoxModel& target, const AuxGroup& aux,
                              const ExperimentConfig& cfg, const FeatSpec& frozen_feat,
                              const MetaModel& meta);

// Fair-coin verdict per origin, seeded.
std::vector<InferenceVerdict> baseline_random(const std::vector<OriginId>& origins,
                                              std::uint64_t seed, double threshold);

// Sample-level membership-inference baseline: the same scoring path with the
// bag size forced to 1. The meta-model must itself have been trained on
// single-sample bags.
InferenceVerdict baseline_sample_mi(const WhiteBoxModel& target, const AuxGroup& aux,
                                    const ExperimentConfig& cfg, const FeatSpec& frozen_feat,
                                    const MetaModel& meta);

struct InferenceRun {
  ShadowOutput shadow;
  MetaModel meta;
  std::vector<InferenceVerdict> verdicts;  // sorted by origin id
};

// Full run: build_shadow, train_meta, then one verdict per aux origin.
InferenceRun run_origin_inference(const WhiteBoxModel& target, const OriginDataset& proxy,
                                  const OriginDataset& aux, const ExperimentConfig& cfg);

// Desk-scale experiment preparation: origin filtering, the
// target/proxy/extra plan, target training on the member origins' training
// halves, and the aux evaluation set (target origins' held-out halves as
// positives, extra origins in full as negatives).
struct ExperimentAssets {
  PartitionPlan plan;
  WhiteBoxModel target;
  std::vector<std::size_t> target_train_indices;  // into the filtered dataset
  OriginDataset filtered;
  OriginDataset proxy;
  OriginDataset aux;
  std::map<OriginId, bool> truth;  // aux origin -> was a training origin of f
};

ExperimentAssets prepare_experiment(const OriginDataset& full, const PartitionConfig& partition,
                                    const ModelConfig& target_cfg, std::ostream* warnings = nullptr);

const char* shadow_mode_name(ShadowMode m);
ShadowMode shadow_mode_from_name(const std::string& name);
const char* meta_kind_name(MetaKind k);
MetaKind meta_kind_from_name(const std::string& name);

}  // namespace orinf
