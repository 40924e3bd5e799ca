#include "orinf/config.hpp"

#include <fstream>
#include <sstream>

#include "orinf/errors.hpp"
#include "orinf/rng.hpp"

namespace orinf {
namespace {

// Seed streams for config sections that do not pin their own seed.
constexpr std::uint64_t kSeedSynth = 0x51;
constexpr std::uint64_t kSeedPartition = 0x53;
constexpr std::uint64_t kSeedExpPartition = 0x54;
constexpr std::uint64_t kSeedExpBag = 0x55;
constexpr std::uint64_t kSeedExpShadow = 0x56;
constexpr std::uint64_t kSeedExpMeta = 0x57;
constexpr std::uint64_t kSeedShadowModel = 0x58;

std::string dotted(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

template <typename T>
T typed(const Json& obj, const std::string& key, const std::string& section, const char* what) {
  const Json& v = require_key(obj, key, section);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + dotted(section, key) + "' must be " + what);
  }
}

template <typename T>
T typed_or(const Json& obj, const std::string& key, const std::string& section, const char* what,
           T fallback) {
  if (!obj.contains(key)) return fallback;
  return typed<T>(obj, key, section, what);
}

}  // namespace

Json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

const Json& require_key(const Json& obj, const std::string& key, const std::string& section) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError("missing config key '" + dotted(section, key) + "'");
  }
  return obj.at(key);
}

std::string get_string(const Json& obj, const std::string& key, const std::string& section) {
  return typed<std::string>(obj, key, section, "a string");
}

double get_double(const Json& obj, const std::string& key, const std::string& section) {
  return typed<double>(obj, key, section, "a number");
}

int get_int(const Json& obj, const std::string& key, const std::string& section) {
  return typed<int>(obj, key, section, "an integer");
}

std::uint64_t get_u64(const Json& obj, const std::string& key, const std::string& section) {
  return typed<std::uint64_t>(obj, key, section, "a non-negative integer");
}

bool get_bool(const Json& obj, const std::string& key, const std::string& section) {
  return typed<bool>(obj, key, section, "a boolean");
}

SynthSpec parse_synth_spec(const Json& section, std::uint64_t master_seed) {
  SynthSpec spec;
  const std::string s = "synth";
  spec.num_origins = typed<std::size_t>(section, "num_origins", s, "an integer");
  spec.samples_per_origin_min =
      typed<std::size_t>(section, "samples_per_origin_min", s, "an integer");
  spec.samples_per_origin_max =
      typed<std::size_t>(section, "samples_per_origin_max", s, "an integer");
  spec.feature_width = typed<std::size_t>(section, "feature_width", s, "an integer");
  spec.origin_signal_strength = get_double(section, "origin_signal_strength", s);
  spec.noise_std = typed_or<double>(section, "noise_std", s, "a number", 0.0);
  spec.emit_lengths = typed_or<bool>(section, "emit_lengths", s, "a boolean", false);
  spec.seed = typed_or<std::uint64_t>(section, "seed", s, "a non-negative integer",
                                      mix_seed(master_seed, kSeedSynth));
  if (section.contains("label_rule")) {
    const Json& lr = section.at("label_rule");
    const std::string ls = "synth.label_rule";
    const std::string kind = typed_or<std::string>(lr, "kind", ls, "a string", "classification");
    if (kind == "classification") {
      spec.label_rule.kind = LabelRule::Kind::kClassification;
    } else if (kind == "regression") {
      spec.label_rule.kind = LabelRule::Kind::kRegression;
    } else {
      throw ConfigError("config key 'synth.label_rule.kind' must be classification or regression");
    }
    spec.label_rule.num_classes = typed_or<int>(lr, "num_classes", ls, "an integer", 2);
    spec.label_rule.origin_mix = typed_or<double>(lr, "origin_mix", ls, "a number", 0.0);
  }
  spec.validate();
  return spec;
}

ModelConfig parse_model_config(const Json& section, std::uint64_t default_seed) {
  ModelConfig cfg;
  const std::string s = "model";
  cfg.layer_sizes = typed<std::vector<std::size_t>>(section, "layer_sizes", s,
                                                    "an array of layer widths");
  cfg.activation =
      activation_from_name(typed_or<std::string>(section, "activation", s, "a string", "relu"));
  cfg.output_kind = output_kind_from_name(
      typed_or<std::string>(section, "output", s, "a string", "softmax-classifier"));
  cfg.learning_rate = get_double(section, "learning_rate", s);
  cfg.epochs = get_int(section, "epochs", s);
  cfg.batch_size = typed_or<int>(section, "batch_size", s, "an integer", 32);
  cfg.weight_decay = typed_or<double>(section, "weight_decay", s, "a number", 0.0);
  cfg.seed = typed_or<std::uint64_t>(section, "seed", s, "a non-negative integer", default_seed);
  cfg.validate();
  return cfg;
}

PartitionConfig parse_partition_config(const Json& section, std::uint64_t master_seed) {
  PartitionConfig cfg;
  const std::string s = "partition";
  cfg.target_fraction = typed_or<double>(section, "target_fraction", s, "a number", 0.3);
  cfg.proxy_fraction = typed_or<double>(section, "proxy_fraction", s, "a number", 0.4);
  cfg.member_fraction = typed_or<double>(section, "member_fraction", s, "a number", 0.5);
  cfg.intra_ratio = typed_or<double>(section, "intra_ratio", s, "a number", 0.5);
  cfg.min_samples_per_origin =
      typed_or<std::size_t>(section, "min_samples_per_origin", s, "an integer", 10);
  cfg.seed = typed_or<std::uint64_t>(section, "seed", s, "a non-negative integer",
                                     mix_seed(master_seed, kSeedPartition));
  cfg.validate();
  return cfg;
}

FeatSpec parse_feat_spec(const Json& section) {
  FeatSpec spec;
  const std::string s = "inference.featurization";
  spec.kind = feat_kind_from_name(typed_or<std::string>(section, "kind", s, "a string", "statistics"));
  spec.histogram_bins = typed_or<std::size_t>(section, "histogram_bins", s, "an integer", 32);
  if (section.contains("histogram_range")) {
    const auto range =
        typed<std::vector<double>>(section, "histogram_range", s, "an array [low, high]");
    if (range.size() != 2) {
      throw ConfigError("config key 'inference.featurization.histogram_range' must be [low, high]");
    }
    spec.histogram_range = std::make_pair(range[0], range[1]);
  }
  spec.validate();
  return spec;
}

DelimitedSchema parse_schema(const Json& section) {
  DelimitedSchema schema;
  const std::string s = "data.schema";
  schema.origin_column = typed_or<std::string>(section, "origin_column", s, "a string", "origin");
  schema.label_column = typed_or<std::string>(section, "label_column", s, "a string", "label");
  schema.feature_columns = typed_or<std::vector<std::string>>(section, "feature_columns", s,
                                                              "an array of column names", {});
  if (section.contains("length_column")) {
    schema.length_column = get_string(section, "length_column", s);
  }
  return schema;
}

MetaHyper parse_meta_hyper(const Json& section) {
  MetaHyper hyper;
  const std::string s = "inference.meta";
  hyper.iterations = typed_or<int>(section, "iterations", s, "an integer", hyper.iterations);
  hyper.learning_rate =
      typed_or<double>(section, "learning_rate", s, "a number", hyper.learning_rate);
  hyper.l2 = typed_or<double>(section, "l2", s, "a number", hyper.l2);
  hyper.mlp_hidden = typed_or<std::vector<std::size_t>>(section, "mlp_hidden", s,
                                                        "an array of widths", hyper.mlp_hidden);
  hyper.mlp_epochs = typed_or<int>(section, "mlp_epochs", s, "an integer", hyper.mlp_epochs);
  hyper.mlp_learning_rate =
      typed_or<double>(section, "mlp_learning_rate", s, "a number", hyper.mlp_learning_rate);
  hyper.mlp_batch_size =
      typed_or<int>(section, "mlp_batch_size", s, "an integer", hyper.mlp_batch_size);
  return hyper;
}

ExperimentConfig parse_experiment_config(const Json& root, const ModelConfig& target_model,
                                         std::uint64_t master_seed) {
  ExperimentConfig cfg;
  cfg.target_model = target_model;
  const Json& inf = require_key(root, "inference", "");
  const std::string s = "inference";

  if (root.contains("shadow_model")) {
    cfg.shadow_model =
        parse_model_config(root.at("shadow_model"), mix_seed(master_seed, kSeedShadowModel));
  }
  cfg.shadow_mode = shadow_mode_from_name(
      typed_or<std::string>(inf, "shadow_mode", s, "a string", "scratch"));
  cfg.incremental_epochs =
      typed_or<int>(inf, "incremental_epochs", s, "an integer", cfg.incremental_epochs);
  cfg.shadow_ensemble = typed_or<int>(inf, "shadow_ensemble", s, "an integer", 1);

  cfg.layer_index = typed_or<int>(inf, "layer_index", s, "an integer", 1);
  if (inf.contains("featurization")) {
    cfg.feat = parse_feat_spec(inf.at("featurization"));
  }
  cfg.bag_size = typed_or<std::size_t>(inf, "bag_size", s, "an integer", cfg.bag_size);
  cfg.threshold = typed_or<double>(inf, "threshold", s, "a number", cfg.threshold);
  const std::string bagging =
      typed_or<std::string>(inf, "bagging", s, "a string", "bagged");
  if (bagging == "bagged") {
    cfg.bagging = InferenceBagging::kBagged;
  } else if (bagging == "single-bag") {
    cfg.bagging = InferenceBagging::kSingleBag;
  } else {
    throw ConfigError("config key 'inference.bagging' must be bagged or single-bag");
  }

  cfg.member_fraction =
      typed_or<double>(inf, "member_fraction", s, "a number", cfg.member_fraction);
  cfg.intra_ratio = typed_or<double>(inf, "intra_ratio", s, "a number", cfg.intra_ratio);

  cfg.meta_kind =
      meta_kind_from_name(typed_or<std::string>(inf, "meta_kind", s, "a string", "logistic"));
  if (inf.contains("meta")) cfg.meta = parse_meta_hyper(inf.at("meta"));

  cfg.partition_seed = typed_or<std::uint64_t>(inf, "partition_seed", s, "a non-negative integer",
                                               mix_seed(master_seed, kSeedExpPartition));
  cfg.bag_seed = typed_or<std::uint64_t>(inf, "bag_seed", s, "a non-negative integer",
                                         mix_seed(master_seed, kSeedExpBag));
  cfg.shadow_seed = typed_or<std::uint64_t>(inf, "shadow_seed", s, "a non-negative integer",
                                            mix_seed(master_seed, kSeedExpShadow));
  cfg.meta_seed = typed_or<std::uint64_t>(inf, "meta_seed", s, "a non-negative integer",
                                          mix_seed(master_seed, kSeedExpMeta));
  cfg.validate();
  return cfg;
}

std::uint64_t master_seed_of(const Json& root) {
  return typed_or<std::uint64_t>(root, "seed", "", "a non-negative integer", 0x5eed);
}

std::string config_hash(const Json& root) {
  const std::uint64_t h = fnv1a64(root.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace orinf
