#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "orinf/matrix.hpp"
#include "orinf/nn.hpp"

namespace orinf {

// Identity token of a data origin (generator or subject). Two samples with
// equal tokens are equivalent under the origin relation; the pipeline never
// looks inside the token.
struct OriginId {
  std::string value;
  auto operator<=>(const OriginId&) const = default;
};

struct Sample {
  std::vector<double> features;
  double label = 0.0;
  OriginId origin;
};

// Samples grouped by origin identity. `lengths` is an optional per-sample
// side channel (text length proxy) aligned with `samples`; empty when absent.
struct OriginDataset {
  std::size_t feature_width = 0;
  std::vector<Sample> samples;
  std::vector<double> lengths;

  bool has_lengths() const { return !lengths.empty(); }
  void validate() const;  // throws InputError on broken invariants
};

using OriginGroups = std::map<OriginId, std::vector<std::size_t>>;

// Quotient of the dataset by origin equality: origin -> sample indices, in
// row order. Keys are exactly the distinct origins.
OriginGroups quotient(const OriginDataset& dataset);

std::vector<OriginId> origin_list(const OriginDataset& dataset);

// Shared rounding rule for every split in the project: round half up, then
// clamp so both sides stay non-empty.
std::size_t split_count(double fraction, std::size_t n);

// Origin-level member/non-member split. Input order does not matter; origins
// are canonicalized by sorting before the seeded shuffle.
std::pair<std::vector<OriginId>, std::vector<OriginId>> inter_split(
    const std::vector<OriginId>& origins, double member_fraction, std::uint64_t seed);

// Sample-level split within one origin group into (training, held-out); the
// held-out side shares the origin but no samples with the training side.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> intra_split(
    const std::vector<std::size_t>& group, double train_fraction, std::uint64_t seed);

struct LabelRule {
  enum class Kind { kClassification, kRegression };
  Kind kind = Kind::kClassification;
  int num_classes = 2;
  // Weight of the origin latent vs the sample itself in the label score.
  // Raising it strengthens the correlation between origin membership and the
  // task labels.
  double origin_mix = 0.0;
};

struct SynthSpec {
  std::size_t num_origins = 0;
  std::size_t samples_per_origin_min = 0;
  std::size_t samples_per_origin_max = 0;
  std::size_t feature_width = 0;
  double origin_signal_strength = 0.5;  // in [0, 1]
  double noise_std = 0.0;
  LabelRule label_rule;
  bool emit_lengths = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Synthetic benchmark data with a planted per-origin latent:
//   x = strength * u_origin + (1 - strength) * g_sample + gaussian noise.
// Labels come from a fixed random projection of (1 - mix) * x + mix * u,
// bucketed into balanced classes (classification) or used raw (regression).
// Byte-for-byte reproducible per seed.
OriginDataset synth_generate(const SynthSpec& spec);

struct DelimitedSchema {
  std::string origin_column = "origin";
  std::string label_column = "label";
  // Explicit feature column names; empty means every column not assigned
  // another role, in header order. Files carrying extra non-numeric columns
  // (e.g. several origin id columns) must list features explicitly.
  std::vector<std::string> feature_columns;
  std::optional<std::string> length_column;
};

// Comma-separated UTF-8 text with a header row. Row order is preserved;
// errors cite the file line and column name.
OriginDataset load_delimited(const std::filesystem::path& path, const DelimitedSchema& schema);

// Canonical layout: origin,label[,length],f0..f{d-1}.
void save_delimited(const OriginDataset& dataset, const std::filesystem::path& path);

// Drops origins with fewer than min_samples samples; each drop is reported
// to `warnings` when given.
OriginDataset filter_small_origins(const OriginDataset& dataset, std::size_t min_samples,
                                   std::ostream* warnings = nullptr);

OriginDataset subset_by_origins(const OriginDataset& dataset, const std::set<OriginId>& keep);

// Origin-level roles for one experiment. The four sets are pairwise
// disjoint; member and non-member together are the proxy pool.
struct PartitionPlan {
  std::set<OriginId> target_origins;
  std::set<OriginId> proxy_member_origins;
  std::set<OriginId> proxy_nonmember_origins;
  std::set<OriginId> extra_origins;
  double intra_ratio = 0.5;
  std::uint64_t seed = 0;

  std::set<OriginId> proxy_origins() const;
  void validate() const;
};

struct PartitionConfig {
  double target_fraction = 0.3;
  double proxy_fraction = 0.4;  // remainder becomes the extra pool
  double member_fraction = 0.5;
  double intra_ratio = 0.5;
  std::size_t min_samples_per_origin = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

PartitionPlan make_partition_plan(const std::vector<OriginId>& origins, const PartitionConfig& cfg);

// Rows of the named samples as (features, labels) for model training.
LabeledData to_labeled(const OriginDataset& dataset, const std::vector<std::size_t>& indices);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace orinf
