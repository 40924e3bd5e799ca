#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "orinf/nn.hpp"
#include "orinf/origin_data.hpp"
#include "orinf/pipeline.hpp"

namespace orinf {

using Json = nlohmann::ordered_json;

// Reads and parses a JSON config file. Parse failures carry the path.
Json load_config_file(const std::filesystem::path& path);

// Keyed lookup helpers; missing keys and type mismatches raise ConfigError
// naming the dotted key path.
const Json& require_key(const Json& obj, const std::string& key, const std::string& section);

std::string get_string(const Json& obj, const std::string& key, const std::string& section);
double get_double(const Json& obj, const std::string& key, const std::string& section);
int get_int(const Json& obj, const std::string& key, const std::string& section);
std::uint64_t get_u64(const Json& obj, const std::string& key, const std::string& section);
bool get_bool(const Json& obj, const std::string& key, const std::string& section);

// Section parsers. Defaults marked in the README; a missing `seed` falls
// back to a stream derived from the master seed so that one top-level seed
// reproduces the whole run.
SynthSpec parse_synth_spec(const Json& section, std::uint64_t master_seed);
ModelConfig parse_model_config(const Json& section, std::uint64_t default_seed);
PartitionConfig parse_partition_config(const Json& section, std::uint64_t master_seed);
FeatSpec parse_feat_spec(const Json& section);
DelimitedSchema parse_schema(const Json& section);
MetaHyper parse_meta_hyper(const Json& section);

// Builds the experiment settings from the `inference` section plus the
// optional `shadow_model` override. The target architecture comes from the
// loaded checkpoint, not from the config file.
ExperimentConfig parse_experiment_config(const Json& root, const ModelConfig& target_model,
                                         std::uint64_t master_seed);

std::uint64_t master_seed_of(const Json& root);

// Hash of the resolved config (after flag overrides), hex encoded. This is
// what manifests store and reruns compare.
std::string config_hash(const Json& root);

}  // namespace orinf
