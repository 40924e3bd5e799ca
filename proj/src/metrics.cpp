#include "orinf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <sstream>

#include "json.hpp"
#include "orinf/errors.hpp"

namespace orinf {
namespace {

struct Moments {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  Moments m;
  const auto n = static_cast<double>(x.size());
  for (double v : x) m.mean_x += v;
  for (double v : y) m.mean_y += v;
  m.mean_x /= n;
  m.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x;
    const double dy = y[i] - m.mean_y;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

// Solves a symmetric 3x3 system by Gaussian elimination with partial
// pivoting. Throws when the matrix is numerically singular.
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < 1e-12) {
      throw DegenerateInputError("layer fit is rank deficient: predictors are collinear");
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 3; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return x;
}

}  // namespace

double accuracy(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) {
    throw InputError("accuracy: prediction and truth lengths differ");
  }
  if (predicted.empty()) throw InputError("accuracy: no verdicts");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double coverage(std::size_t bag_size, const std::map<OriginId, std::size_t>& origin_sizes) {
  if (origin_sizes.empty()) throw InputError("coverage: no origins");
  std::size_t covered = 0;
  for (const auto& [id, size] : origin_sizes) {
    if (size <= bag_size) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(origin_sizes.size());
}

CoverageCurve coverage_curve(const std::map<OriginId, std::size_t>& origin_sizes,
                             const std::vector<std::size_t>& bag_sizes) {
  CoverageCurve curve;
  std::set<std::size_t> sizes(bag_sizes.begin(), bag_sizes.end());
  for (std::size_t b : sizes) {
    curve.points.emplace_back(b, coverage(b, origin_sizes));
  }
  return curve;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson: length mismatch");
  if (x.size() < 2) throw InputError("pearson: need at least two points");
  const Moments m = moments(x, y);
  if (m.sxx <= 0.0 || m.syy <= 0.0) {
    throw DegenerateInputError("pearson: correlation undefined for constant input");
  }
  return m.sxy / std::sqrt(m.sxx * m.syy);
}

LayerFit linfit_layer(const std::vector<LayerAccuracyRecord>& records) {
  if (records.size() < 3) {
    throw DegenerateInputError("layer fit: need at least three records");
  }
  // Normal equations for acc ~ 1 + depth + params.
  std::array<std::array<double, 3>, 3> xtx{};
  std::array<double, 3> xty{};
  for (const auto& rec : records) {
    const std::array<double, 3> row{1.0, static_cast<double>(rec.layer_depth),
                                    static_cast<double>(rec.param_count)};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) xtx[i][j] += row[i] * row[j];
      xty[i] += row[i] * rec.accuracy;
    }
  }
  const auto beta = solve3(xtx, xty);
  LayerFit fit;
  fit.intercept = beta[0];
  fit.coef_depth = beta[1];
  fit.coef_params = beta[2];
  double ss = 0.0;
  for (const auto& rec : records) {
    const double pred = beta[0] + beta[1] * static_cast<double>(rec.layer_depth) +
                        beta[2] * static_cast<double>(rec.param_count);
    const double resid = rec.accuracy - pred;
    ss += resid * resid;
  }
  fit.residual_norm = std::sqrt(ss);
  return fit;
}

std::vector<ClassCorrelation> label_membership_correlation(
    const OriginDataset& aux, const std::map<OriginId, bool>& truth, bool classification) {
  std::vector<double> membership;
  membership.reserve(aux.samples.size());
  std::vector<double> labels;
  labels.reserve(aux.samples.size());
  for (const auto& sample : aux.samples) {
    const auto it = truth.find(sample.origin);
    if (it == truth.end()) continue;  // origins without a verdict are skipped
    membership.push_back(it->second ? 1.0 : 0.0);
    labels.push_back(sample.label);
  }
  std::vector<ClassCorrelation> out;
  if (membership.size() < 2) return out;
  if (!classification) {
    ClassCorrelation c;
    c.label_class = "label";
    try {
      c.r = pearson(labels, membership);
    } catch (const DegenerateInputError&) {
      c.degenerate = true;
    }
    out.push_back(c);
    return out;
  }
  std::set<long long> classes;
  for (double v : labels) classes.insert(std::llround(v));
  for (long long cls : classes) {
    ClassCorrelation c;
    c.label_class = std::to_string(cls);
    std::vector<double> indicator(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      indicator[i] = std::llround(labels[i]) == cls ? 1.0 : 0.0;
    }
    try {
      c.r = pearson(indicator, membership);
    } catch (const DegenerateInputError&) {
      c.degenerate = true;
    }
    out.push_back(c);
  }
  return out;
}

RunEvaluation evaluate_run(const std::vector<InferenceVerdict>& verdicts,
                           const std::optional<std::map<OriginId, bool>>& truth,
                           const OriginDataset& aux,
                           const std::vector<LayerAccuracyRecord>& layer_records,
                           bool classification) {
  if (verdicts.empty()) throw InputError("evaluate_run: no verdicts");
  RunEvaluation eval;
  eval.num_origins = verdicts.size();

  ProbabilityStats& ps = eval.probability_stats;
  ps.min = verdicts.front().probability;
  ps.max = verdicts.front().probability;
  for (const auto& v : verdicts) {
    ps.mean += v.probability;
    ps.min = std::min(ps.min, v.probability);
    ps.max = std::max(ps.max, v.probability);
    if (v.member) ++ps.member_verdicts;
  }
  ps.mean /= static_cast<double>(verdicts.size());

  if (truth.has_value()) {
    std::vector<bool> predicted;
    std::vector<bool> actual;
    predicted.reserve(verdicts.size());
    actual.reserve(verdicts.size());
    for (const auto& v : verdicts) {
      const auto it = truth->find(v.origin);
      if (it == truth->end()) {
        throw InputError("evaluate_run: no ground truth for origin '" + v.origin.value + "'");
      }
      predicted.push_back(v.member);
      actual.push_back(it->second);
    }
    eval.accuracy = accuracy(predicted, actual);
    eval.label_correlations = label_membership_correlation(aux, *truth, classification);
  }

  std::map<OriginId, std::size_t> sizes;
  for (const auto& [id, rows] : quotient(aux)) sizes[id] = rows.size();
  if (!sizes.empty()) {
    std::vector<std::size_t> bag_sizes{1, 2, 4, 8, 16, 32, 64, 128};
    std::size_t largest = 0;
    for (const auto& [id, n] : sizes) largest = std::max(largest, n);
    bag_sizes.push_back(largest);
    eval.coverage = coverage_curve(sizes, bag_sizes);
  }

  eval.layer_records = layer_records;
  if (layer_records.size() >= 2) {
    std::vector<double> depths;
    std::vector<double> params;
    std::vector<double> accs;
    for (const auto& rec : layer_records) {
      depths.push_back(static_cast<double>(rec.layer_depth));
      params.push_back(static_cast<double>(rec.param_count));
      accs.push_back(rec.accuracy);
    }
    try {
      eval.corr_depth_accuracy = pearson(depths, accs);
    } catch (const DegenerateInputError&) {
    }
    try {
      eval.corr_params_accuracy = pearson(params, accs);
    } catch (const DegenerateInputError&) {
    }
    if (layer_records.size() >= 3) {
      try {
        eval.layer_fit = linfit_layer(layer_records);
      } catch (const DegenerateInputError&) {
      }
    }
  }
  return eval;
}

std::string evaluation_to_json(const RunEvaluation& eval) {
  nlohmann::ordered_json j;
  j["num_origins"] = eval.num_origins;
  if (eval.accuracy.has_value()) j["accuracy"] = *eval.accuracy;
  j["probability"] = {
      {"mean", eval.probability_stats.mean},
      {"min", eval.probability_stats.min},
      {"max", eval.probability_stats.max},
      {"member_verdicts", eval.probability_stats.member_verdicts},
  };
  auto& cov = j["coverage"] = nlohmann::ordered_json::array();
  for (const auto& [b, xi] : eval.coverage.points) {
    cov.push_back({{"bag_size", b}, {"coverage", xi}});
  }
  if (!eval.label_correlations.empty()) {
    auto& corr = j["label_correlations"] = nlohmann::ordered_json::array();
    for (const auto& c : eval.label_correlations) {
      nlohmann::ordered_json e;
      e["class"] = c.label_class;
      if (c.degenerate) {
        e["r"] = nullptr;
      } else {
        e["r"] = c.r;
      }
      corr.push_back(e);
    }
  }
  if (!eval.layer_records.empty()) {
    auto& recs = j["layer_records"] = nlohmann::ordered_json::array();
    for (const auto& rec : eval.layer_records) {
      recs.push_back({{"layer_index", rec.layer_index},
                      {"layer_depth", rec.layer_depth},
                      {"param_count", rec.param_count},
                      {"layer_type", layer_type_name(rec.layer_type)},
                      {"bag_size", rec.bag_size},
                      {"accuracy", rec.accuracy}});
    }
  }
  if (eval.corr_depth_accuracy.has_value()) j["corr_depth_accuracy"] = *eval.corr_depth_accuracy;
  if (eval.corr_params_accuracy.has_value()) {
    j["corr_params_accuracy"] = *eval.corr_params_accuracy;
  }
  if (eval.layer_fit.has_value()) {
    j["layer_fit"] = {{"intercept", eval.layer_fit->intercept},
                      {"coef_depth", eval.layer_fit->coef_depth},
                      {"coef_params", eval.layer_fit->coef_params},
                      {"residual_norm", eval.layer_fit->residual_norm}};
  }
  return j.dump(2) + "\n";
}

std::string coverage_to_csv(const CoverageCurve& curve) {
  std::ostringstream out;
  out << "bag_size,coverage\n";
  for (const auto& [b, xi] : curve.points) {
    out << b << ',' << format_double(xi) << '\n';
  }
  return out.str();
}

std::string layer_records_to_csv(const std::vector<LayerAccuracyRecord>& records) {
  std::ostringstream out;
  out << "layer_index,layer_depth,param_count,layer_type,bag_size,accuracy\n";
  for (const auto& rec : records) {
    out << rec.layer_index << ',' << rec.layer_depth << ',' << rec.param_count << ','
        << layer_type_name(rec.layer_type) << ',' << rec.bag_size << ','
        << format_double(rec.accuracy) << '\n';
  }
  return out.str();
}

std::vector<LayerAccuracyRecord> layer_records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IngestError("layer record table is empty");
  std::vector<LayerAccuracyRecord> records;
  std::size_t line_no = 1;
  const auto cell_error = [&](const std::string& column, const std::string& value) {
    return IngestError("row " + std::to_string(line_no) + ", column '" + column +
                       "': expected a number, got '" + value + "'");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    cells.push_back(cur);
    if (cells.size() != 6) {
      throw IngestError("row " + std::to_string(line_no) + ": expected 6 cells, got " +
                        std::to_string(cells.size()));
    }
    LayerAccuracyRecord rec;
    try {
      rec.layer_index = std::stoi(cells[0]);
    } catch (const std::exception&) {
      throw cell_error("layer_index", cells[0]);
    }
    try {
      rec.layer_depth = std::stoi(cells[1]);
    } catch (const std::exception&) {
      throw cell_error("layer_depth", cells[1]);
    }
    try {
      rec.param_count = static_cast<std::size_t>(std::stoull(cells[2]));
    } catch (const std::exception&) {
      throw cell_error("param_count", cells[2]);
    }
    rec.layer_type = layer_type_from_name(cells[3]);
    try {
      rec.bag_size = static_cast<std::size_t>(std::stoull(cells[4]));
    } catch (const std::exception&) {
      throw cell_error("bag_size", cells[4]);
    }
    try {
      rec.accuracy = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw cell_error("accuracy", cells[5]);
    }
    records.push_back(rec);
  }
  return records;
}

}  // namespace orinf
