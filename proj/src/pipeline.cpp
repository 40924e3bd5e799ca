#include "orinf/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "orinf/errors.hpp"
#include "orinf/rng.hpp"

namespace orinf {

namespace {

constexpr std::uint64_t kInterStream = 0x41;
constexpr std::uint64_t kIntraStream = 0x42;
constexpr std::uint64_t kShadowBagStream = 0x43;
constexpr std::uint64_t kInferBagStream = 0x44;
constexpr std::uint64_t kTargetIntraStream = 0x45;
constexpr int kMetaVersion = 1;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// True when the referenced layer is the classifier's output layer, which is
// the only place the text-statistics channel is defined.
bool text_channel_applicable(const ExperimentConfig& cfg) {
  const ModelConfig shadow_cfg = cfg.shadow_config();
  return static_cast<std::size_t>(cfg.layer_index) == shadow_cfg.num_dense_layers() &&
         shadow_cfg.output_kind == OutputKind::kSoftmaxClassifier;
}

bool wants_text(const ExperimentConfig& cfg, bool have_lengths) {
  if (cfg.feat.kind == FeatKind::kTextStats) {
    if (!text_channel_applicable(cfg)) {
      throw ConfigError("text_stats featurization requires the last layer of a classifier");
    }
    if (!have_lengths) {
      throw ConfigError("text_stats featurization requires a length column in the dataset");
    }
    return true;
  }
  if (cfg.feat.kind == FeatKind::kCompound) {
    return text_channel_applicable(cfg) && have_lengths;
  }
  return false;
}

std::vector<double> argmax_rows(const Matrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < r.size(); ++j) {
      if (r[j] > r[arg]) arg = j;
    }
    out[i] = static_cast<double>(arg);
  }
  return out;
}

struct PendingGroup {
  OriginId origin;
  int membership = 0;
  LayerAccessMatrix access;
  std::optional<TextSideInfo> side;
};

// Access rows for one origin's samples in shuffled order, with the aligned
// text side channel when requested. `pred_source` supplies the last-layer
// outputs used for the prediction term.
PendingGroup make_group(const WhiteBoxModel& model, const OriginDataset& ds,
                        const std::vector<std::size_t>& indices, int layer_index, int membership,
                        bool with_text, std::uint64_t shuffle_seed) {
  std::vector<std::size_t> order(indices);
  Rng rng(shuffle_seed);
  rng.shuffle(order);

  PendingGroup g;
  g.origin = ds.samples[order.front()].origin;
  g.membership = membership;
  Matrix rows(order.size(), ds.feature_width);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& f = ds.samples[order[i]].features;
    auto dst = rows.row(i);
    std::copy(f.begin(), f.end(), dst.begin());
  }
  g.access = layer_access(model, layer_index, rows);
  if (with_text) {
    TextSideInfo side;
    side.lengths.reserve(order.size());
    side.labels.reserve(order.size());
    for (std::size_t idx : order) {
      side.lengths.push_back(ds.lengths[idx]);
      side.labels.push_back(ds.samples[idx].label);
    }
    // Predictions come from the output layer, which is the referenced layer
    // whenever the text channel is applicable.
    side.predictions = argmax_rows(g.access.values);
    g.side = std::move(side);
  }
  return g;
}

void freeze_histogram_range(FeatSpec& feat, const std::vector<PendingGroup>& groups) {
  const bool needs = feat.kind == FeatKind::kHistogram || feat.kind == FeatKind::kCompound;
  if (!needs || feat.histogram_range) return;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& g : groups) {
    for (double v : g.access.values.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo < hi)) hi = lo + 1.0;  // degenerate constant outputs still need bins
  feat.histogram_range = {lo, hi};
}

}  // namespace

ModelConfig ExperimentConfig::shadow_config() const {
  ModelConfig cfg = shadow_model.value_or(target_model);
  return cfg;
}

void ExperimentConfig::validate() const {
  target_model.validate();
  if (shadow_model) shadow_model->validate();
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
  if (!(member_fraction > 0.0 && member_fraction < 1.0)) {
    throw ConfigError("member_fraction must be in (0, 1)");
  }
  if (!(intra_ratio > 0.0 && intra_ratio < 1.0)) throw ConfigError("intra_ratio must be in (0, 1)");
  if (bag_size < 1) throw ConfigError("bag_size must be >= 1");
  if (shadow_ensemble < 1) throw ConfigError("shadow_ensemble must be >= 1");
  if (shadow_mode == ShadowMode::kIncremental && incremental_epochs < 1) {
    throw ConfigError("incremental_epochs must be >= 1");
  }
  const ModelConfig shadow_cfg = shadow_config();
  if (layer_index < 0 || static_cast<std::size_t>(layer_index) > shadow_cfg.num_dense_layers()) {
    throw ConfigError("layer_index outside the shadow model's tap range");
  }
  feat.validate();
}

ShadowOutput build_shadow(const OriginDataset& proxy, const ExperimentConfig& cfg,
                          const WhiteBoxModel* target) {
  cfg.validate();
  proxy.validate();
  if (cfg.shadow_mode == ShadowMode::kIncremental && target == nullptr) {
    throw ConfigError("incremental shadow mode needs the target model");
  }
  const auto groups = quotient(proxy);
  if (groups.size() < 4) {
    throw InputError("build_shadow: need at least 4 proxy origins, got " +
                     std::to_string(groups.size()));
  }
  std::vector<OriginId> origins;
  for (const auto& [origin, idx] : groups) origins.push_back(origin);

  const bool with_text = wants_text(cfg, proxy.has_lengths());

  ShadowOutput out;
  std::vector<PendingGroup> pending;

  for (int k = 0; k < cfg.shadow_ensemble; ++k) {
    const auto ku = static_cast<std::uint64_t>(k);
    const auto [member, nonmember] =
        inter_split(origins, cfg.member_fraction, mix_seed(mix_seed(cfg.partition_seed, kInterStream), ku));

    std::vector<std::size_t> train_indices;
    std::map<OriginId, std::vector<std::size_t>> held;
    for (const auto& origin : member) {
      const auto& group = groups.at(origin);
      auto [train, held_out] = intra_split(
          group, cfg.intra_ratio, mix_seed(mix_seed(cfg.partition_seed, kIntraStream), mix_seed(fnv1a64(origin.value), ku)));
      train_indices.insert(train_indices.end(), train.begin(), train.end());
      held[origin] = std::move(held_out);
    }
    std::sort(train_indices.begin(), train_indices.end());

    ModelConfig shadow_cfg = cfg.shadow_config();
    shadow_cfg.seed = mix_seed(cfg.shadow_seed, ku);
    const LabeledData train_data = to_labeled(proxy, train_indices);
    WhiteBoxModel shadow;
    if (cfg.shadow_mode == ShadowMode::kScratch) {
      shadow = train(shadow_cfg, train_data);
    } else {
      std::optional<double> lr_override;
      if (cfg.shadow_model) lr_override = cfg.shadow_model->learning_rate;
      shadow = incremental_train(*target, train_data, cfg.incremental_epochs, lr_override);
    }

    // Positive embeddings: held-out data of member origins. Negative:
    // non-member origins in full.
    for (const auto& origin : member) {
      pending.push_back(make_group(shadow, proxy, held.at(origin), cfg.layer_index, 1, with_text,
                                   mix_seed(mix_seed(cfg.bag_seed, kShadowBagStream),
                                            mix_seed(fnv1a64(origin.value), ku))));
      out.audit.positive_source_indices.insert(out.audit.positive_source_indices.end(),
                                               held.at(origin).begin(), held.at(origin).end());
    }
    for (const auto& origin : nonmember) {
      pending.push_back(make_group(shadow, proxy, groups.at(origin), cfg.layer_index, 0, with_text,
                                   mix_seed(mix_seed(cfg.bag_seed, kShadowBagStream),
                                            mix_seed(fnv1a64(origin.value), ku))));
    }

    out.audit.member_origins.emplace_back(member.begin(), member.end());
    out.audit.nonmember_origins.emplace_back(nonmember.begin(), nonmember.end());
    out.audit.shadow_train_indices.insert(out.audit.shadow_train_indices.end(),
                                          train_indices.begin(), train_indices.end());
    out.shadows.push_back(std::move(shadow));
  }

  // Bins must be fixed before any embedding exists, and from shadow-side
  // outputs only.
  out.frozen_feat = cfg.feat;
  freeze_histogram_range(out.frozen_feat, pending);

  for (const auto& g : pending) {
    auto bags = gen_data(out.frozen_feat, g.access, cfg.bag_size, g.membership, g.origin,
                         g.side ? &*g.side : nullptr);
    out.meta_training_set.insert(out.meta_training_set.end(), bags.begin(), bags.end());
  }
  return out;
}

MetaModel train_meta(const std::vector<BagEmbedding>& embeddings, MetaKind kind,
                     std::uint64_t seed, const MetaHyper& hyper) {
  if (embeddings.empty()) throw InputError("train_meta: empty embedding set");
  const std::size_t d = embeddings.front().features.size();
  bool pos = false, neg = false;
  for (const auto& e : embeddings) {
    if (e.features.size() != d) throw InputError("train_meta: inconsistent embedding widths");
    (e.membership == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) throw InputError("train_meta: need both membership classes");

  MetaModel meta;
  meta.kind = kind;
  meta.input_width = d;
  meta.training_seed = seed;
  meta.feature_mean.assign(d, 0.0);
  meta.feature_scale.assign(d, 1.0);

  const std::size_t n = embeddings.size();
  for (const auto& e : embeddings) {
    for (std::size_t j = 0; j < d; ++j) meta.feature_mean[j] += e.features[j];
  }
  for (double& m : meta.feature_mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (const auto& e : embeddings) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = e.features[j] - meta.feature_mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    meta.feature_scale[j] = std::max(std::sqrt(var[j] / static_cast<double>(n)), 1e-8);
  }

  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      x.at(i, j) = (embeddings[i].features[j] - meta.feature_mean[j]) / meta.feature_scale[j];
    }
  }

  if (kind == MetaKind::kLogistic) {
    // Zero-initialized full-batch gradient descent; no randomness involved.
    meta.weights.assign(d, 0.0);
    meta.bias = 0.0;
    for (int it = 0; it < hyper.iterations; ++it) {
      std::vector<double> grad_w(d, 0.0);
      double grad_b = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double z = meta.bias;
        auto r = x.row(i);
        for (std::size_t j = 0; j < d; ++j) z += meta.weights[j] * r[j];
        const double err = sigmoid(z) - static_cast<double>(embeddings[i].membership);
        for (std::size_t j = 0; j < d; ++j) grad_w[j] += err * r[j];
        grad_b += err;
      }
      for (std::size_t j = 0; j < d; ++j) {
        grad_w[j] = grad_w[j] / static_cast<double>(n) + hyper.l2 * meta.weights[j];
        meta.weights[j] -= hyper.learning_rate * grad_w[j];
      }
      meta.bias -= hyper.learning_rate * grad_b / static_cast<double>(n);
    }
  } else {
    ModelConfig cfg;
    cfg.layer_sizes = {d};
    cfg.layer_sizes.insert(cfg.layer_sizes.end(), hyper.mlp_hidden.begin(), hyper.mlp_hidden.end());
    cfg.layer_sizes.push_back(2);
    cfg.activation = Activation::kRelu;
    cfg.output_kind = OutputKind::kSoftmaxClassifier;
    cfg.learning_rate = hyper.mlp_learning_rate;
    cfg.epochs = hyper.mlp_epochs;
    cfg.batch_size = hyper.mlp_batch_size;
    cfg.seed = seed;
    LabeledData data;
    data.features = std::move(x);
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) data.labels[i] = embeddings[i].membership;
    meta.mlp = train(cfg, data);
  }
  return meta;
}

double MetaModel::predict(std::span<const double> embedding) const {
  if (embedding.size() != input_width) {
    throw ConfigError("meta-model expects embeddings of width " + std::to_string(input_width) +
                      ", got " + std::to_string(embedding.size()));
  }
  std::vector<double> z(input_width);
  for (std::size_t j = 0; j < input_width; ++j) {
    z[j] = (embedding[j] - feature_mean[j]) / feature_scale[j];
  }
  if (kind == MetaKind::kLogistic) {
    double s = bias;
    for (std::size_t j = 0; j < input_width; ++j) s += weights[j] * z[j];
    return sigmoid(s);
  }
  Matrix row(1, input_width);
  std::copy(z.begin(), z.end(), row.row(0).begin());
  const auto out = layer_access(*mlp, static_cast<int>(mlp->config.num_dense_layers()), row);
  return out.values.at(0, 1);
}

std::string save_meta(const MetaModel& meta) {
  nlohmann::ordered_json j;
  j["format"] = "orinf-meta";
  j["version"] = kMetaVersion;
  j["kind"] = meta_kind_name(meta.kind);
  j["input_width"] = meta.input_width;
  j["training_seed"] = meta.training_seed;
  j["feature_mean"] = meta.feature_mean;
  j["feature_scale"] = meta.feature_scale;
  if (meta.kind == MetaKind::kLogistic) {
    j["weights"] = meta.weights;
    j["bias"] = meta.bias;
  } else {
    j["mlp"] = nlohmann::json::parse(save_model(*meta.mlp));
  }
  return j.dump();
}

MetaModel load_meta(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(std::string("meta-model parse failed: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "orinf-meta" ||
        j.at("version").get<int>() != kMetaVersion) {
      throw SerializationError("meta-model container mismatch");
    }
    MetaModel meta;
    meta.kind = meta_kind_from_name(j.at("kind").get<std::string>());
    meta.input_width = j.at("input_width").get<std::size_t>();
    meta.training_seed = j.at("training_seed").get<std::uint64_t>();
    meta.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    meta.feature_scale = j.at("feature_scale").get<std::vector<double>>();
    if (meta.kind == MetaKind::kLogistic) {
      meta.weights = j.at("weights").get<std::vector<double>>();
      meta.bias = j.at("bias").get<double>();
    } else {
      meta.mlp = load_model(j.at("mlp").dump());
    }
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(std::string("malformed meta-model: ") + e.what());
  }
}

std::vector<AuxGroup> make_aux_groups(const OriginDataset& aux) {
  aux.validate();
  const auto groups = quotient(aux);
  std::vector<AuxGroup> out;
  out.reserve(groups.size());
  for (const auto& [origin, idx] : groups) {
    AuxGroup g;
    g.origin = origin;
    g.features = Matrix(idx.size(), aux.feature_width);
    g.labels.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& s = aux.samples[idx[i]];
      auto dst = g.features.row(i);
      std::copy(s.features.begin(), s.features.end(), dst.begin());
      g.labels.push_back(s.label);
      if (aux.has_lengths()) g.lengths.push_back(aux.lengths[idx[i]]);
    }
    out.push_back(std::move(g));
  }
  return out;
}

InferenceVerdict infer_origin(const WhiteBoxModel& target, const AuxGroup& aux,
                              const ExperimentConfig& cfg, const FeatSpec& frozen_feat,
                              const MetaModel& meta) {
  if (aux.features.rows() == 0) throw InputError("infer_origin: empty auxiliary set");
  const bool with_text = wants_text(cfg, !aux.lengths.empty());

  std::vector<std::size_t> order(aux.features.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(mix_seed(cfg.bag_seed, kInferBagStream), fnv1a64(aux.origin.value)));
  rng.shuffle(order);

  const Matrix rows = aux.features.take_rows(order);
  LayerAccessMatrix access = layer_access(target, cfg.layer_index, rows);

  std::optional<TextSideInfo> side;
  if (with_text) {
    TextSideInfo s;
    for (std::size_t i : order) {
      s.lengths.push_back(aux.lengths[i]);
      s.labels.push_back(aux.labels[i]);
    }
    s.predictions = argmax_rows(access.values);
    side = std::move(s);
  }

  const std::size_t b = cfg.bagging == InferenceBagging::kSingleBag
                            ? access.values.rows()
                            : cfg.bag_size;
  const auto bags = gen_data(frozen_feat, access, b, 0, aux.origin, side ? &*side : nullptr);

  InferenceVerdict verdict;
  verdict.origin = aux.origin;
  verdict.threshold = cfg.threshold;
  verdict.per_bag_probabilities.reserve(bags.size());
  double sum = 0.0;
  for (const auto& bag : bags) {
    const double p = meta.predict(bag.features);
    verdict.per_bag_probabilities.push_back(p);
    sum += p;
  }
  verdict.probability = sum / static_cast<double>(bags.size());
  verdict.member = verdict.probability >= cfg.threshold;
  return verdict;
}

std::vector<InferenceVerdict> baseline_random(const std::vector<OriginId>& origins,
                                              std::uint64_t seed, double threshold) {
  std::vector<OriginId> sorted(origins);
  std::sort(sorted.begin(), sorted.end());
  Rng rng(seed);
  std::vector<InferenceVerdict> out;
  out.reserve(sorted.size());
  for (const auto& origin : sorted) {
    const bool coin = rng.next_u64() & 1;
    InferenceVerdict v;
    v.origin = origin;
    v.probability = coin ? 1.0 : 0.0;
    v.threshold = threshold;
    v.member = coin;
    out.push_back(std::move(v));
  }
  return out;
}

InferenceVerdict baseline_sample_mi(const WhiteBoxModel& target, const AuxGroup& aux,
                                    const ExperimentConfig& cfg, const FeatSpec& frozen_feat,
                                    const MetaModel& meta) {
  ExperimentConfig mi_cfg = cfg;
  mi_cfg.bag_size = 1;
  mi_cfg.bagging = InferenceBagging::kBagged;
  return infer_origin(target, aux, mi_cfg, frozen_feat, meta);
}

InferenceRun run_origin_inference(const WhiteBoxModel& target, const OriginDataset& proxy,
                                  const OriginDataset& aux, const ExperimentConfig& cfg) {
  InferenceRun run;
  run.shadow = build_shadow(proxy, cfg, cfg.shadow_mode == ShadowMode::kIncremental ? &target : nullptr);
  run.meta = train_meta(run.shadow.meta_training_set, cfg.meta_kind, cfg.meta_seed, cfg.meta);
  for (const auto& group : make_aux_groups(aux)) {
    run.verdicts.push_back(infer_origin(target, group, cfg, run.shadow.frozen_feat, run.meta));
  }
  return run;
}

ExperimentAssets prepare_experiment(const OriginDataset& full, const PartitionConfig& partition,
                                    const ModelConfig& target_cfg, std::ostream* warnings) {
  ExperimentAssets assets;
  assets.filtered = filter_small_origins(full, partition.min_samples_per_origin, warnings);
  assets.plan = make_partition_plan(origin_list(assets.filtered), partition);

  const auto groups = quotient(assets.filtered);
  std::map<OriginId, std::vector<std::size_t>> held;
  for (const auto& origin : assets.plan.target_origins) {
    auto [train, held_out] =
        intra_split(groups.at(origin), assets.plan.intra_ratio,
                    mix_seed(mix_seed(partition.seed, kTargetIntraStream), fnv1a64(origin.value)));
    assets.target_train_indices.insert(assets.target_train_indices.end(), train.begin(), train.end());
    held[origin] = std::move(held_out);
  }
  std::sort(assets.target_train_indices.begin(), assets.target_train_indices.end());
  assets.target = train(target_cfg, to_labeled(assets.filtered, assets.target_train_indices));

  assets.proxy = subset_by_origins(assets.filtered, assets.plan.proxy_origins());

  // Aux evaluation set: held-out halves of target origins (members) plus
  // held-out halves of extra origins (guaranteed non-members). Extras get
  // the same split so that group size carries no membership information.
  assets.aux.feature_width = assets.filtered.feature_width;
  auto append = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx) {
      assets.aux.samples.push_back(assets.filtered.samples[i]);
      if (assets.filtered.has_lengths()) assets.aux.lengths.push_back(assets.filtered.lengths[i]);
    }
  };
  for (const auto& origin : assets.plan.target_origins) {
    append(held.at(origin));
    assets.truth[origin] = true;
  }
  for (const auto& origin : assets.plan.extra_origins) {
    auto [unused, held_out] =
        intra_split(groups.at(origin), assets.plan.intra_ratio,
                    mix_seed(mix_seed(partition.seed, kTargetIntraStream), fnv1a64(origin.value)));
    append(held_out);
    assets.truth[origin] = false;
  }
  return assets;
}

const char* shadow_mode_name(ShadowMode m) {
  return m == ShadowMode::kScratch ? "scratch" : "incremental";
}

ShadowMode shadow_mode_from_name(const std::string& name) {
  if (name == "scratch") return ShadowMode::kScratch;
  if (name == "incremental") return ShadowMode::kIncremental;
  throw ConfigError("unknown shadow mode '" + name + "'");
}

const char* meta_kind_name(MetaKind k) { return k == MetaKind::kLogistic ? "logistic" : "mlp"; }

MetaKind meta_kind_from_name(const std::string& name) {
  if (name == "logistic") return MetaKind::kLogistic;
  if (name == "mlp") return MetaKind::kMlp;
  throw ConfigError("unknown meta-model kind '" + name + "'");
}

}  // namespace orinf
