#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orinf/nn.hpp"
#include "orinf/origin_data.hpp"
#include "orinf/pipeline.hpp"

namespace orinf {

// Fraction of matching membership decisions.
double accuracy(const std::vector<bool>& predicted, const std::vector<bool>& truth);

// Data coverage coefficient: the fraction of origins whose whole auxiliary
// set fits in a single bag of the given size.
double coverage(std::size_t bag_size, const std::map<OriginId, std::size_t>& origin_sizes);

struct CoverageCurve {
  std::vector<std::pair<std::size_t, double>> points;  // (bag size, coverage)
};

CoverageCurve coverage_curve(const std::map<OriginId, std::size_t>& origin_sizes,
                             const std::vector<std::size_t>& bag_sizes);

// Product-moment correlation. Constant input is rejected rather than mapped
// to zero.
double pearson(std::span<const double> x, std::span<const double> y);

// One sweep cell: which layer was referenced, its shape metadata, the bag
// size and the measured accuracy.
struct LayerAccuracyRecord {
  int layer_index = 0;
  int layer_depth = 0;
  std::size_t param_count = 0;
  LayerType layer_type = LayerType::kDense;
  std::size_t bag_size = 0;
  double accuracy = 0.0;
};

struct LayerFit {
  double intercept = 0.0;
  double coef_depth = 0.0;
  double coef_params = 0.0;
  double residual_norm = 0.0;
};

// Least-squares fit of accuracy on (depth, parameter count).
LayerFit linfit_layer(const std::vector<LayerAccuracyRecord>& records);

struct ClassCorrelation {
  std::string label_class;  // class index, or "label" for scalar tasks
  double r = 0.0;
  bool degenerate = false;  // constant side, correlation undefined
};

// Correlation between origin-membership and task labels over the aux
// samples; one entry per class for classification tasks.
std::vector<ClassCorrelation> label_membership_correlation(
    const OriginDataset& aux, const std::map<OriginId, bool>& truth, bool classification);

struct ProbabilityStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t member_verdicts = 0;
};

struct RunEvaluation {
  std::optional<double> accuracy;  // absent without ground truth
  std::size_t num_origins = 0;
  ProbabilityStats probability_stats;
  CoverageCurve coverage;
  std::vector<ClassCorrelation> label_correlations;
  std::vector<LayerAccuracyRecord> layer_records;
  std::optional<double> corr_depth_accuracy;
  std::optional<double> corr_params_accuracy;
  std::optional<LayerFit> layer_fit;
};

// Consolidated report: accuracy when truth is known, probability statistics
// otherwise, the coverage curve for the aux partition, per-class
// label/membership correlations, and the layer analyses when sweep records
// are supplied.
RunEvaluation evaluate_run(const std::vector<InferenceVerdict>& verdicts,
                           const std::optional<std::map<OriginId, bool>>& truth,
                           const OriginDataset& aux,
                           const std::vector<LayerAccuracyRecord>& layer_records = {},
                           bool classification = true);

std::string evaluation_to_json(const RunEvaluation& eval);
std::string coverage_to_csv(const CoverageCurve& curve);
std::string layer_records_to_csv(const std::vector<LayerAccuracyRecord>& records);
std::vector<LayerAccuracyRecord> layer_records_from_csv(const std::string& text);

}  // namespace orinf
