#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "orinf/matrix.hpp"
#include "orinf/nn.hpp"
#include "orinf/origin_data.hpp"

namespace orinf {

enum class FeatKind { kMeanMedian, kStatistics, kTextStats, kHistogram, kCompound };

// Embedding recipe for one experiment. The histogram range is frozen from
// the shadow-side layer outputs before meta-model training so the bins are
// fixed and identical at inference time; gen_data refuses to run a
// histogram-bearing spec whose range is still unset.
struct FeatSpec {
  FeatKind kind = FeatKind::kStatistics;
  int histogram_bins = 32;
  std::optional<std::pair<double, double>> histogram_range;

  void validate() const;
};

// Fixed-length embedding of one bag, labeled with the bag's origin
// membership on the shadow side.
struct BagEmbedding {
  std::vector<double> features;
  int membership = 0;  // 0 or 1
  OriginId origin;
  std::size_t bag_index = 0;
};

// Per-row side channel for the text-statistics extractor, aligned with the
// access matrix rows: input lengths, predicted classes and ground truth.
struct TextSideInfo {
  std::vector<double> lengths;
  std::vector<double> predictions;
  std::vector<double> labels;
};

// Partitions rows into n groups whose sizes differ by at most one,
// preserving row order (any shuffling is the caller's job).
std::vector<Matrix> split_even(const Matrix& rows, std::size_t n);

// Per-column mean then per-column median, statistic-major:
// [mean(c0..), median(c0..)]; length 2 * columns.
std::vector<double> feat_mean_median(const Matrix& bag);

// Twelve order/dispersion statistics per column, statistic-major:
// max, min, mean, 20/25/40/50/60/75/80th percentile, variance (population),
// standard deviation; length 12 * columns. Percentiles interpolate linearly
// between closest ranks at rank p/100 * (n - 1).
std::vector<double> feat_statistics(const Matrix& bag);

// [mean length, max length, min length, mean |prediction - label|].
std::vector<double> feat_text_stats(std::span<const double> lengths,
                                    std::span<const double> predictions,
                                    std::span<const double> labels);

// Relative frequencies over equal-width bins spanning histogram_range;
// out-of-range values land in the edge bins. Sums to 1.
std::vector<double> feat_histogram(const Matrix& bag, const FeatSpec& spec);

// Dispatch on spec.kind. Compound concatenates mean_median, statistics and
// histogram in that order, appending text_stats when side info is present.
std::vector<double> apply_feat(const FeatSpec& spec, const Matrix& bag, const TextSideInfo* side);

std::size_t embedding_width(const FeatSpec& spec, std::size_t layer_width, bool with_text);

// Bag generation: a single embedding when the access rows fit in one bag,
// otherwise ceil(rows / bag_size) embeddings over an even split. Every
// embedding carries the membership label. Rows are consumed in the order
// given; the pipeline shuffles them with the experiment seed beforehand.
std::vector<BagEmbedding> gen_data(const FeatSpec& spec, const LayerAccessMatrix& access,
                                   std::size_t bag_size, int membership, const OriginId& origin,
                                   const TextSideInfo* side = nullptr);

// Shared percentile rule; `sorted` must be ascending and non-empty.
double percentile_sorted(std::span<const double> sorted, double p);

const char* feat_kind_name(FeatKind k);
FeatKind feat_kind_from_name(const std::string& name);

}  // namespace orinf
