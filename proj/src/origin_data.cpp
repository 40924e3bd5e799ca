#include "orinf/origin_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "orinf/errors.hpp"
#include "orinf/rng.hpp"

namespace orinf {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

namespace {

constexpr std::uint64_t kLatentStream = 0x31;
constexpr std::uint64_t kSizeStream = 0x32;
constexpr std::uint64_t kSampleStream = 0x33;
constexpr std::uint64_t kProjectionStream = 0x34;
constexpr std::uint64_t kMemberStream = 0x35;

double parse_double(std::string_view cell, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw IngestError("row " + std::to_string(line) + ", column '" + column +
                      "': expected a number, got '" + std::string(cell) + "'");
  }
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

void check_token_writable(const std::string& token) {
  if (token.empty()) throw InputError("origin token is empty");
  if (token.find_first_of(",\n\r") != std::string::npos) {
    throw InputError("origin token '" + token + "' contains a delimiter");
  }
}

}  // namespace

void OriginDataset::validate() const {
  for (const auto& s : samples) {
    if (s.features.size() != feature_width) {
      throw InputError("sample feature width " + std::to_string(s.features.size()) +
                       " differs from dataset width " + std::to_string(feature_width));
    }
    if (s.origin.value.empty()) throw InputError("sample with empty origin id");
  }
  if (!lengths.empty() && lengths.size() != samples.size()) {
    throw InputError("length channel size does not match sample count");
  }
}

OriginGroups quotient(const OriginDataset& dataset) {
  if (dataset.samples.empty()) throw InputError("quotient: empty dataset");
  OriginGroups groups;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    groups[dataset.samples[i].origin].push_back(i);
  }
  return groups;
}

std::vector<OriginId> origin_list(const OriginDataset& dataset) {
  std::set<OriginId> seen;
  for (const auto& s : dataset.samples) seen.insert(s.origin);
  return {seen.begin(), seen.end()};
}

std::size_t split_count(double fraction, std::size_t n) {
  const auto raw = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
  return std::clamp<std::size_t>(raw, 1, n - 1);
}

std::pair<std::vector<OriginId>, std::vector<OriginId>> inter_split(
    const std::vector<OriginId>& origins, double member_fraction, std::uint64_t seed) {
  if (origins.size() < 2) throw InputError("inter_split: need at least 2 origins");
  if (!(member_fraction > 0.0 && member_fraction < 1.0)) {
    throw InputError("inter_split: member_fraction must be in (0, 1)");
  }
  std::vector<OriginId> pool(origins);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (pool.size() < 2) throw InputError("inter_split: need at least 2 distinct origins");

  Rng rng(seed);
  rng.shuffle(pool);
  const std::size_t members = split_count(member_fraction, pool.size());
  std::vector<OriginId> member(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(members));
  std::vector<OriginId> nonmember(pool.begin() + static_cast<std::ptrdiff_t>(members), pool.end());
  std::sort(member.begin(), member.end());
  std::sort(nonmember.begin(), nonmember.end());
  return {std::move(member), std::move(nonmember)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> intra_split(
    const std::vector<std::size_t>& group, double train_fraction, std::uint64_t seed) {
  if (group.size() < 2) {
    throw InputError("intra_split: group of " + std::to_string(group.size()) +
                     " cannot be split without sample overlap");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("intra_split: train_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> pool(group);
  Rng rng(seed);
  rng.shuffle(pool);
  const std::size_t train_n = split_count(train_fraction, pool.size());
  std::vector<std::size_t> train(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(train_n));
  std::vector<std::size_t> held(pool.begin() + static_cast<std::ptrdiff_t>(train_n), pool.end());
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {std::move(train), std::move(held)};
}

void SynthSpec::validate() const {
  if (num_origins < 4) throw InputError("synth: num_origins must be >= 4");
  if (feature_width < 2) throw InputError("synth: feature_width must be >= 2");
  if (samples_per_origin_min < 1 || samples_per_origin_max < samples_per_origin_min) {
    throw InputError("synth: invalid samples_per_origin range");
  }
  if (origin_signal_strength < 0.0 || origin_signal_strength > 1.0) {
    throw InputError("synth: origin_signal_strength must be in [0, 1]");
  }
  if (noise_std < 0.0) throw InputError("synth: noise_std must be >= 0");
  if (label_rule.kind == LabelRule::Kind::kClassification && label_rule.num_classes < 2) {
    throw InputError("synth: num_classes must be >= 2");
  }
  if (label_rule.origin_mix < 0.0 || label_rule.origin_mix > 1.0) {
    throw InputError("synth: origin_mix must be in [0, 1]");
  }
}

OriginDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t d = spec.feature_width;

  Rng proj_rng(mix_seed(spec.seed, kProjectionStream));
  std::vector<double> w_label(d), w_len(d);
  double norm = 0.0;
  for (double& v : w_label) v = proj_rng.normal();
  for (double v : w_label) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : w_label) v /= norm;
  for (double& v : w_len) v = proj_rng.normal();

  int id_width = 1;
  for (std::size_t n = spec.num_origins; n >= 10; n /= 10) ++id_width;

  OriginDataset ds;
  ds.feature_width = d;
  std::vector<double> scores;

  Rng latent_rng(mix_seed(spec.seed, kLatentStream));
  Rng size_rng(mix_seed(spec.seed, kSizeStream));
  Rng sample_rng(mix_seed(spec.seed, kSampleStream));

  const double s = spec.origin_signal_strength;
  for (std::size_t v = 0; v < spec.num_origins; ++v) {
    std::ostringstream id;
    id << "o";
    for (int w = static_cast<int>(std::to_string(v + 1).size()); w < id_width; ++w) id << '0';
    id << (v + 1);
    const OriginId origin{id.str()};

    std::vector<double> latent(d);
    for (double& x : latent) x = latent_rng.normal();

    const std::size_t count =
        spec.samples_per_origin_min +
        static_cast<std::size_t>(size_rng.below(spec.samples_per_origin_max - spec.samples_per_origin_min + 1));

    for (std::size_t k = 0; k < count; ++k) {
      Sample sample;
      sample.origin = origin;
      sample.features.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        const double global = sample_rng.normal();
        const double noise = spec.noise_std > 0.0 ? spec.noise_std * sample_rng.normal() : 0.0;
        sample.features[j] = s * latent[j] + (1.0 - s) * global + noise;
      }
      double score = 0.0;
      const double mix = spec.label_rule.origin_mix;
      for (std::size_t j = 0; j < d; ++j) {
        score += w_label[j] * ((1.0 - mix) * sample.features[j] + mix * latent[j]);
      }
      scores.push_back(score);
      sample.label = score;  // classification labels assigned below
      ds.samples.push_back(std::move(sample));

      if (spec.emit_lengths) {
        double len_score = 0.0;
        for (std::size_t j = 0; j < d; ++j) len_score += w_len[j] * latent[j];
        const double len = 30.0 + 10.0 * len_score + 4.0 * sample_rng.normal();
        ds.lengths.push_back(std::clamp(std::round(len), 5.0, 400.0));
      }
    }
  }

  if (spec.label_rule.kind == LabelRule::Kind::kClassification) {
    // Balanced classes via empirical quantile thresholds of the score.
    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end());
    const int classes = spec.label_rule.num_classes;
    std::vector<double> thresholds;
    for (int c = 1; c < classes; ++c) {
      const std::size_t rank = sorted.size() * static_cast<std::size_t>(c) / static_cast<std::size_t>(classes);
      thresholds.push_back(sorted[rank]);
    }
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      int cls = 0;
      while (cls < classes - 1 && scores[i] >= thresholds[static_cast<std::size_t>(cls)]) ++cls;
      ds.samples[i].label = static_cast<double>(cls);
    }
  }

  ds.validate();
  return ds;
}

OriginDataset load_delimited(const std::filesystem::path& path, const DelimitedSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestError("'" + path.string() + "' is empty");

  const auto header = split_line(line);
  auto find_column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw IngestError("'" + path.string() + "' is missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t origin_col = find_column(schema.origin_column);
  const std::size_t label_col = find_column(schema.label_column);
  std::optional<std::size_t> length_col;
  if (schema.length_column) length_col = find_column(*schema.length_column);

  std::vector<std::size_t> feature_cols;
  if (!schema.feature_columns.empty()) {
    for (const auto& name : schema.feature_columns) feature_cols.push_back(find_column(name));
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == origin_col || c == label_col) continue;
      if (length_col && c == *length_col) continue;
      feature_cols.push_back(c);
    }
  }
  if (feature_cols.empty()) throw IngestError("'" + path.string() + "' declares no feature columns");

  OriginDataset ds;
  ds.feature_width = feature_cols.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw IngestError("row " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    Sample sample;
    sample.origin.value = cells[origin_col];
    if (sample.origin.value.empty()) {
      throw IngestError("row " + std::to_string(line_no) + ", column '" + schema.origin_column +
                        "': empty origin id");
    }
    sample.label = parse_double(cells[label_col], line_no, schema.label_column);
    sample.features.reserve(feature_cols.size());
    for (std::size_t c : feature_cols) {
      sample.features.push_back(parse_double(cells[c], line_no, header[c]));
    }
    if (length_col) {
      ds.lengths.push_back(parse_double(cells[*length_col], line_no, *schema.length_column));
    }
    ds.samples.push_back(std::move(sample));
  }
  if (ds.samples.empty()) throw IngestError("'" + path.string() + "' has no data rows");
  ds.validate();
  return ds;
}

void save_delimited(const OriginDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "origin,label";
  if (dataset.has_lengths()) out << ",length";
  for (std::size_t j = 0; j < dataset.feature_width; ++j) out << ",f" << j;
  out << "\n";
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    check_token_writable(s.origin.value);
    out << s.origin.value << "," << format_double(s.label);
    if (dataset.has_lengths()) out << "," << format_double(dataset.lengths[i]);
    for (double f : s.features) out << "," << format_double(f);
    out << "\n";
  }
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

OriginDataset filter_small_origins(const OriginDataset& dataset, std::size_t min_samples,
                                   std::ostream* warnings) {
  const auto groups = quotient(dataset);
  std::set<OriginId> keep;
  for (const auto& [origin, idx] : groups) {
    if (idx.size() >= min_samples) {
      keep.insert(origin);
    } else if (warnings) {
      *warnings << "warning: dropping origin '" << origin.value << "' (" << idx.size()
                << " samples < " << min_samples << ")\n";
    }
  }
  if (keep.empty()) throw InputError("filter_small_origins: no origin meets the minimum size");
  return subset_by_origins(dataset, keep);
}

OriginDataset subset_by_origins(const OriginDataset& dataset, const std::set<OriginId>& keep) {
  OriginDataset out;
  out.feature_width = dataset.feature_width;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    if (keep.count(dataset.samples[i].origin)) {
      out.samples.push_back(dataset.samples[i]);
      if (dataset.has_lengths()) out.lengths.push_back(dataset.lengths[i]);
    }
  }
  return out;
}

std::set<OriginId> PartitionPlan::proxy_origins() const {
  std::set<OriginId> all(proxy_member_origins);
  all.insert(proxy_nonmember_origins.begin(), proxy_nonmember_origins.end());
  return all;
}

void PartitionPlan::validate() const {
  const std::vector<const std::set<OriginId>*> sets = {&target_origins, &proxy_member_origins,
                                                       &proxy_nonmember_origins, &extra_origins};
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      for (const auto& o : *sets[a]) {
        if (sets[b]->count(o)) {
          throw InputError("partition plan: origin '" + o.value + "' appears in two roles");
        }
      }
    }
  }
  if (!(intra_ratio > 0.0 && intra_ratio < 1.0)) {
    throw InputError("partition plan: intra_ratio must be in (0, 1)");
  }
}

void PartitionConfig::validate() const {
  if (!(target_fraction > 0.0 && proxy_fraction > 0.0)) {
    throw InputError("partition: fractions must be positive");
  }
  if (target_fraction + proxy_fraction >= 1.0) {
    throw InputError("partition: target_fraction + proxy_fraction must leave room for extra origins");
  }
  if (!(member_fraction > 0.0 && member_fraction < 1.0)) {
    throw InputError("partition: member_fraction must be in (0, 1)");
  }
  if (!(intra_ratio > 0.0 && intra_ratio < 1.0)) {
    throw InputError("partition: intra_ratio must be in (0, 1)");
  }
}

PartitionPlan make_partition_plan(const std::vector<OriginId>& origins, const PartitionConfig& cfg) {
  cfg.validate();
  if (origins.size() < 4) throw InputError("partition: need at least 4 origins");
  std::vector<OriginId> pool(origins);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  Rng rng(cfg.seed);
  rng.shuffle(pool);
  const std::size_t n = pool.size();
  std::size_t n_target = split_count(cfg.target_fraction, n);
  std::size_t n_proxy = split_count(cfg.proxy_fraction, n);
  // Keep at least two proxy origins (the member/non-member split needs both
  // sides) and at least one target and one extra origin.
  n_proxy = std::max<std::size_t>(n_proxy, 2);
  while (n_target + n_proxy + 1 > n) {
    if (n_target > 1) {
      --n_target;
    } else if (n_proxy > 2) {
      --n_proxy;
    } else {
      throw InputError("partition: too few origins for a target/proxy/extra split");
    }
  }

  PartitionPlan plan;
  plan.intra_ratio = cfg.intra_ratio;
  plan.seed = cfg.seed;
  std::size_t i = 0;
  for (; i < n_target; ++i) plan.target_origins.insert(pool[i]);
  std::vector<OriginId> proxy_pool;
  for (; i < n_target + n_proxy; ++i) proxy_pool.push_back(pool[i]);
  for (; i < n; ++i) plan.extra_origins.insert(pool[i]);

  auto [member, nonmember] = inter_split(proxy_pool, cfg.member_fraction, mix_seed(cfg.seed, kMemberStream));
  plan.proxy_member_origins.insert(member.begin(), member.end());
  plan.proxy_nonmember_origins.insert(nonmember.begin(), nonmember.end());
  plan.validate();
  return plan;
}

LabeledData to_labeled(const OriginDataset& dataset, const std::vector<std::size_t>& indices) {
  LabeledData out;
  out.features = Matrix(indices.size(), dataset.feature_width);
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = dataset.samples[indices[i]];
    auto dst = out.features.row(i);
    for (std::size_t j = 0; j < dataset.feature_width; ++j) dst[j] = s.features[j];
    out.labels[i] = s.label;
  }
  return out;
}

}  // namespace orinf
