#include "orinf/featurize.hpp"

#include <algorithm>
#include <cmath>

#include "orinf/errors.hpp"

namespace orinf {

namespace {

constexpr double kPercentiles[] = {20.0, 25.0, 40.0, 50.0, 60.0, 75.0, 80.0};

std::vector<double> column_values(const Matrix& bag, std::size_t c) {
  std::vector<double> v(bag.rows());
  for (std::size_t i = 0; i < bag.rows(); ++i) v[i] = bag.at(i, c);
  return v;
}

void require_nonempty(const Matrix& bag, const char* who) {
  if (bag.rows() == 0 || bag.cols() == 0) {
    throw InputError(std::string(who) + ": empty bag");
  }
}

}  // namespace

void FeatSpec::validate() const {
  const bool needs_hist = kind == FeatKind::kHistogram || kind == FeatKind::kCompound;
  if (needs_hist) {
    if (histogram_bins < 2) throw ConfigError("featurization: histogram_bins must be >= 2");
    if (histogram_range && !(histogram_range->first < histogram_range->second)) {
      throw ConfigError("featurization: histogram range low must be below high");
    }
  }
}

double percentile_sorted(std::span<const double> sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) throw InputError("percentile of an empty set");
  if (n == 1) return sorted[0];
  const double rank = p / 100.0 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  if (lo == hi) return sorted[lo];
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<Matrix> split_even(const Matrix& rows, std::size_t n) {
  if (n == 0) throw InputError("split_even: n must be positive");
  if (n > rows.rows()) {
    throw InputError("split_even: cannot split " + std::to_string(rows.rows()) + " rows into " +
                     std::to_string(n) + " groups");
  }
  const std::size_t base = rows.rows() / n;
  const std::size_t rem = rows.rows() % n;
  std::vector<Matrix> groups;
  groups.reserve(n);
  std::size_t start = 0;
  for (std::size_t g = 0; g < n; ++g) {
    const std::size_t size = base + (g < rem ? 1 : 0);
    Matrix part(size, rows.cols());
    for (std::size_t i = 0; i < size; ++i) {
      auto src = rows.row(start + i);
      auto dst = part.row(i);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    groups.push_back(std::move(part));
    start += size;
  }
  return groups;
}

std::vector<double> feat_mean_median(const Matrix& bag) {
  require_nonempty(bag, "feat_mean_median");
  const std::size_t cols = bag.cols();
  std::vector<double> out;
  out.reserve(2 * cols);
  std::vector<double> medians(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    auto v = column_values(bag, c);
    double sum = 0.0;
    for (double x : v) sum += x;
    out.push_back(sum / static_cast<double>(v.size()));
    std::sort(v.begin(), v.end());
    medians[c] = percentile_sorted(v, 50.0);
  }
  out.insert(out.end(), medians.begin(), medians.end());
  return out;
}

std::vector<double> feat_statistics(const Matrix& bag) {
  require_nonempty(bag, "feat_statistics");
  const std::size_t cols = bag.cols();
  constexpr std::size_t kStats = 12;
  std::vector<double> out(kStats * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    auto v = column_values(bag, c);
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double variance = ss / n;  // population convention

    std::size_t k = 0;
    out[k++ * cols + c] = v.back();   // max
    out[k++ * cols + c] = v.front();  // min
    out[k++ * cols + c] = mean;
    for (double p : kPercentiles) out[k++ * cols + c] = percentile_sorted(v, p);
    out[k++ * cols + c] = variance;
    out[k++ * cols + c] = std::sqrt(variance);
  }
  return out;
}

std::vector<double> feat_text_stats(std::span<const double> lengths,
                                    std::span<const double> predictions,
                                    std::span<const double> labels) {
  if (lengths.empty()) throw InputError("feat_text_stats: empty bag");
  if (lengths.size() != predictions.size() || lengths.size() != labels.size()) {
    throw InputError("feat_text_stats: lengths, predictions and labels differ in size");
  }
  double sum = 0.0, mx = lengths[0], mn = lengths[0], err = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    sum += lengths[i];
    mx = std::max(mx, lengths[i]);
    mn = std::min(mn, lengths[i]);
    err += std::abs(predictions[i] - labels[i]);
  }
  const double n = static_cast<double>(lengths.size());
  return {sum / n, mx, mn, err / n};
}

std::vector<double> feat_histogram(const Matrix& bag, const FeatSpec& spec) {
  require_nonempty(bag, "feat_histogram");
  if (!spec.histogram_range) {
    throw ConfigError("feat_histogram: histogram range has not been frozen");
  }
  const auto [lo, hi] = *spec.histogram_range;
  if (!(lo < hi)) throw ConfigError("feat_histogram: invalid range");
  const auto bins = static_cast<std::size_t>(spec.histogram_bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double v : bag.data()) {
    auto idx = static_cast<std::ptrdiff_t>(std::floor((v - lo) / width));
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  const double total = static_cast<double>(bag.data().size());
  for (double& c : counts) c /= total;
  return counts;
}

std::vector<double> apply_feat(const FeatSpec& spec, const Matrix& bag, const TextSideInfo* side) {
  spec.validate();
  switch (spec.kind) {
    case FeatKind::kMeanMedian:
      return feat_mean_median(bag);
    case FeatKind::kStatistics:
      return feat_statistics(bag);
    case FeatKind::kHistogram:
      return feat_histogram(bag, spec);
    case FeatKind::kTextStats: {
      if (!side) throw ConfigError("text_stats featurization needs the text side channel");
      return feat_text_stats(side->lengths, side->predictions, side->labels);
    }
    case FeatKind::kCompound: {
      // Fixed concatenation order; versioned with the embedding layout.
      std::vector<double> out = feat_mean_median(bag);
      const auto stats = feat_statistics(bag);
      out.insert(out.end(), stats.begin(), stats.end());
      const auto hist = feat_histogram(bag, spec);
      out.insert(out.end(), hist.begin(), hist.end());
      if (side) {
        const auto text = feat_text_stats(side->lengths, side->predictions, side->labels);
        out.insert(out.end(), text.begin(), text.end());
      }
      return out;
    }
  }
  throw ConfigError("unknown featurization kind");
}

std::size_t embedding_width(const FeatSpec& spec, std::size_t layer_width, bool with_text) {
  switch (spec.kind) {
    case FeatKind::kMeanMedian:
      return 2 * layer_width;
    case FeatKind::kStatistics:
      return 12 * layer_width;
    case FeatKind::kHistogram:
      return static_cast<std::size_t>(spec.histogram_bins);
    case FeatKind::kTextStats:
      return 4;
    case FeatKind::kCompound:
      return 14 * layer_width + static_cast<std::size_t>(spec.histogram_bins) + (with_text ? 4 : 0);
  }
  throw ConfigError("unknown featurization kind");
}

std::vector<BagEmbedding> gen_data(const FeatSpec& spec, const LayerAccessMatrix& access,
                                   std::size_t bag_size, int membership, const OriginId& origin,
                                   const TextSideInfo* side) {
  if (bag_size < 1) throw InputError("gen_data: bag size must be >= 1");
  if (access.values.rows() == 0) throw InputError("gen_data: empty access matrix");
  if (membership != 0 && membership != 1) throw InputError("gen_data: membership must be 0 or 1");
  if (side && side->lengths.size() != access.values.rows()) {
    throw InputError("gen_data: side channel does not match the access rows");
  }

  const std::size_t rows = access.values.rows();
  std::vector<BagEmbedding> out;

  auto emit = [&](const Matrix& bag, std::size_t row_offset, std::size_t bag_index) {
    TextSideInfo bag_side;
    const TextSideInfo* side_ptr = nullptr;
    if (side) {
      const std::size_t sz = bag.rows();
      bag_side.lengths.assign(side->lengths.begin() + static_cast<std::ptrdiff_t>(row_offset),
                              side->lengths.begin() + static_cast<std::ptrdiff_t>(row_offset + sz));
      bag_side.predictions.assign(side->predictions.begin() + static_cast<std::ptrdiff_t>(row_offset),
                                  side->predictions.begin() + static_cast<std::ptrdiff_t>(row_offset + sz));
      bag_side.labels.assign(side->labels.begin() + static_cast<std::ptrdiff_t>(row_offset),
                             side->labels.begin() + static_cast<std::ptrdiff_t>(row_offset + sz));
      side_ptr = &bag_side;
    }
    BagEmbedding emb;
    emb.features = apply_feat(spec, bag, side_ptr);
    emb.membership = membership;
    emb.origin = origin;
    emb.bag_index = bag_index;
    out.push_back(std::move(emb));
  };

  if (rows <= bag_size) {
    emit(access.values, 0, 0);
    return out;
  }
  const std::size_t n = (rows + bag_size - 1) / bag_size;
  const auto groups = split_even(access.values, n);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    emit(groups[g], offset, g);
    offset += groups[g].rows();
  }
  return out;
}

const char* feat_kind_name(FeatKind k) {
  switch (k) {
    case FeatKind::kMeanMedian:
      return "mean_median";
    case FeatKind::kStatistics:
      return "statistics";
    case FeatKind::kTextStats:
      return "text_stats";
    case FeatKind::kHistogram:
      return "histogram";
    case FeatKind::kCompound:
      return "compound";
  }
  return "statistics";
}

FeatKind feat_kind_from_name(const std::string& name) {
  if (name == "mean_median") return FeatKind::kMeanMedian;
  if (name == "statistics") return FeatKind::kStatistics;
  if (name == "text_stats") return FeatKind::kTextStats;
  if (name == "histogram") return FeatKind::kHistogram;
  if (name == "compound") return FeatKind::kCompound;
  throw ConfigError("unknown featurization kind '" + name + "'");
}

}  // namespace orinf
