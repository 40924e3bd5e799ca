#include "orinf/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "orinf/config.hpp"
#include "orinf/errors.hpp"
#include "orinf/rng.hpp"

namespace orinf {
namespace {

constexpr std::uint64_t kSeedModelStream = 0x52;
constexpr int kManifestVersion = 1;
constexpr int kVerdictVersion = 1;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << bytes;
  if (!out) throw InputError("write failed for: " + path.string());
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_csv_line(std::string line) {
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
  return cells;
}

// Config after flag overrides, plus where this run writes its outputs.
struct RunContext {
  Json config;
  std::filesystem::path run_dir;
  std::uint64_t master_seed = 0;
  std::string hash;
};

RunContext resolve(const CliOptions& opts, const std::string& command) {
  Json cfg = load_config_file(opts.config_path);
  if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  if (opts.seed) cfg["seed"] = *opts.seed;
  if (opts.out_dir) cfg["out_dir"] = opts.out_dir->string();
  if (opts.workers && command == "sweep") {
    if (!cfg.contains("sweep") || !cfg["sweep"].is_object()) cfg["sweep"] = Json::object();
    cfg["sweep"]["workers"] = *opts.workers;
  }

  RunContext ctx;
  ctx.master_seed = master_seed_of(cfg);
  ctx.hash = config_hash(cfg);

  std::filesystem::path root;
  if (cfg.contains("out_dir")) {
    root = get_string(cfg, "out_dir", "");
  } else if (const char* env = std::getenv("ORINF_OUT_ROOT")) {
    root = env;
  } else {
    root = "runs";
  }
  const std::string run_name = cfg.contains("run_name") ? get_string(cfg, "run_name", "")
                                                        : command + "-" + ctx.hash;
  ctx.run_dir = root / run_name;
  std::filesystem::create_directories(ctx.run_dir);
  ctx.config = std::move(cfg);
  return ctx;
}

using PathList = std::vector<std::pair<std::string, std::filesystem::path>>;

// Written last: every path it lists is already on disk.
std::filesystem::path write_manifest(const RunContext& ctx, const std::string& command,
                                     const PathList& inputs, const PathList& artifacts,
                                     const Json& seeds, const Json& details = Json::object()) {
  Json m;
  m["format"] = "orinf-manifest";
  m["version"] = kManifestVersion;
  m["command"] = command;
  m["config_hash"] = ctx.hash;
  m["seeds"] = seeds;
  Json jin = Json::object();
  for (const auto& [name, path] : inputs) jin[name] = path.string();
  m["inputs"] = jin;
  Json jart = Json::object();
  for (const auto& [name, path] : artifacts) {
    if (!std::filesystem::exists(path)) {
      throw InputError("manifest artifact missing on disk: " + path.string());
    }
    jart[name] = path.string();
  }
  m["artifacts"] = jart;
  if (!details.empty()) m["details"] = details;
  m["config"] = ctx.config;
  m["created_utc"] = utc_now();
  const auto path = ctx.run_dir / "manifest.json";
  write_file(path, m.dump(2) + "\n");
  return path;
}

// Canonical files carry the length channel in a column named "length";
// explicit schemas in the config win.
OriginDataset load_dataset(const std::filesystem::path& path, const Json* schema_section) {
  if (!std::filesystem::exists(path)) throw InputError("missing dataset: " + path.string());
  DelimitedSchema schema;
  if (schema_section) {
    schema = parse_schema(*schema_section);
  } else {
    std::ifstream in(path);
    std::string header;
    if (in && std::getline(in, header)) {
      for (const auto& cell : split_csv_line(header)) {
        if (cell == "length") {
          schema.length_column = "length";
          break;
        }
      }
    }
  }
  return load_delimited(path, schema);
}

Json feat_to_json(const FeatSpec& spec) {
  Json j;
  j["kind"] = feat_kind_name(spec.kind);
  j["histogram_bins"] = spec.histogram_bins;
  if (spec.histogram_range) {
    j["histogram_range"] = {spec.histogram_range->first, spec.histogram_range->second};
  }
  return j;
}

struct InferInputs {
  std::filesystem::path checkpoint_path;
  std::filesystem::path proxy_path;
  std::filesystem::path aux_path;
  std::optional<std::filesystem::path> truth_path;
  WhiteBoxModel target;
  OriginDataset proxy;
  OriginDataset aux;
};

InferInputs load_infer_inputs(const Json& root) {
  const Json& paths = require_key(root, "paths", "");
  InferInputs in;
  in.checkpoint_path = get_string(paths, "target_checkpoint", "paths");
  in.proxy_path = get_string(paths, "proxy_dataset", "paths");
  in.aux_path = get_string(paths, "aux_dataset", "paths");
  if (paths.contains("truth")) in.truth_path = get_string(paths, "truth", "paths");

  if (!std::filesystem::exists(in.checkpoint_path)) {
    throw InputError("missing checkpoint: " + in.checkpoint_path.string());
  }
  in.target = load_model(read_file(in.checkpoint_path));
  const Json* schema = paths.contains("schema") ? &paths.at("schema") : nullptr;
  in.proxy = load_dataset(in.proxy_path, schema);
  in.aux = load_dataset(in.aux_path, schema);
  return in;
}

// Everything that can be rejected without training anything.
void check_compatibility(const InferInputs& in, const ExperimentConfig& cfg) {
  const std::size_t want = in.target.config.input_width();
  if (in.proxy.feature_width != want) {
    throw ConfigError("proxy dataset width " + std::to_string(in.proxy.feature_width) +
                      " does not match target input width " + std::to_string(want));
  }
  if (in.aux.feature_width != want) {
    throw ConfigError("aux dataset width " + std::to_string(in.aux.feature_width) +
                      " does not match target input width " + std::to_string(want));
  }
  if (cfg.feat.kind == FeatKind::kTextStats) {
    if (!in.proxy.has_lengths() || !in.aux.has_lengths()) {
      throw ConfigError("text featurization needs a length channel in proxy and aux datasets");
    }
  }
}

Json experiment_seeds(const ExperimentConfig& cfg) {
  return Json{{"partition", cfg.partition_seed},
              {"bag", cfg.bag_seed},
              {"shadow", cfg.shadow_seed},
              {"meta", cfg.meta_seed}};
}

double accuracy_against(const std::vector<InferenceVerdict>& verdicts,
                        const std::map<OriginId, bool>& truth) {
  std::vector<bool> predicted;
  std::vector<bool> actual;
  for (const auto& v : verdicts) {
    const auto it = truth.find(v.origin);
    if (it == truth.end()) {
      throw InputError("no ground truth for origin '" + v.origin.value + "'");
    }
    predicted.push_back(v.member);
    actual.push_back(it->second);
  }
  return accuracy(predicted, actual);
}

std::string sanitize_cell(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

}  // namespace

std::string verdicts_to_json(const std::vector<InferenceVerdict>& verdicts,
                             const ExperimentConfig& cfg) {
  Json j;
  j["format"] = "orinf-verdicts";
  j["version"] = kVerdictVersion;
  Json settings;
  settings["layer_index"] = cfg.layer_index;
  settings["featurization"] = feat_to_json(cfg.feat);
  settings["bag_size"] = cfg.bag_size;
  settings["bagging"] = cfg.bagging == InferenceBagging::kBagged ? "bagged" : "single-bag";
  settings["threshold"] = cfg.threshold;
  settings["meta_kind"] = meta_kind_name(cfg.meta_kind);
  settings["shadow_mode"] = shadow_mode_name(cfg.shadow_mode);
  j["settings"] = settings;
  auto& origins = j["origins"] = Json::array();
  for (const auto& v : verdicts) {
    Json e;
    e["origin"] = v.origin.value;
    e["probability"] = v.probability;
    e["member"] = v.member;
    e["per_bag"] = v.per_bag_probabilities;
    origins.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::vector<InferenceVerdict> verdicts_from_json(const std::string& bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw SerializationError(std::string("verdict report is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "orinf-verdicts") {
      throw SerializationError("not a verdict report");
    }
    const double threshold = j.at("settings").at("threshold").get<double>();
    std::vector<InferenceVerdict> verdicts;
    for (const auto& e : j.at("origins")) {
      InferenceVerdict v;
      v.origin.value = e.at("origin").get<std::string>();
      v.probability = e.at("probability").get<double>();
      v.member = e.at("member").get<bool>();
      v.per_bag_probabilities = e.at("per_bag").get<std::vector<double>>();
      v.threshold = threshold;
      verdicts.push_back(std::move(v));
    }
    return verdicts;
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(std::string("malformed verdict report: ") + e.what());
  }
}

void save_truth(const std::map<OriginId, bool>& truth, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "origin,member\n";
  for (const auto& [origin, member] : truth) {
    out << origin.value << ',' << (member ? 1 : 0) << '\n';
  }
  write_file(path, out.str());
}

std::map<OriginId, bool> load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestError("'" + path.string() + "' is empty");
  const auto header = split_csv_line(line);
  std::size_t origin_col = header.size();
  std::size_t member_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "origin") origin_col = c;
    if (header[c] == "member") member_col = c;
  }
  if (origin_col == header.size() || member_col == header.size()) {
    throw IngestError("'" + path.string() + "' needs 'origin' and 'member' columns");
  }
  std::map<OriginId, bool> truth;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IngestError("row " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
    }
    const std::string& flag = cells[member_col];
    if (flag != "0" && flag != "1") {
      throw IngestError("row " + std::to_string(line_no) +
                        ", column 'member': expected 0 or 1, got '" + flag + "'");
    }
    truth[OriginId{cells[origin_col]}] = flag == "1";
  }
  if (truth.empty()) throw IngestError("'" + path.string() + "' has no data rows");
  return truth;
}

int cmd_synth(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RunContext ctx = resolve(opts, "synth");
    const SynthSpec spec =
        parse_synth_spec(require_key(ctx.config, "synth", ""), ctx.master_seed);
    const OriginDataset ds = synth_generate(spec);
    const auto data_path = ctx.run_dir / "dataset.csv";
    save_delimited(ds, data_path);
    write_manifest(ctx, "synth", {}, {{"dataset", data_path}}, Json{{"synth", spec.seed}},
                   Json{{"num_origins", spec.num_origins}, {"num_samples", ds.samples.size()}});
    out << "synth: " << spec.num_origins << " origins, " << ds.samples.size() << " samples -> "
        << data_path.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << "\n";
    return 1;
  }
}

int cmd_train_target(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RunContext ctx = resolve(opts, "train-target");
    const Json& data = require_key(ctx.config, "data", "");
    const std::filesystem::path dataset_path = get_string(data, "dataset", "data");
    const Json* schema = data.contains("schema") ? &data.at("schema") : nullptr;
    const OriginDataset full = load_dataset(dataset_path, schema);

    const Json& model_section = require_key(ctx.config, "model", "");
    const ModelConfig model_cfg =
        parse_model_config(model_section, mix_seed(ctx.master_seed, kSeedModelStream));

    const auto target_path = ctx.run_dir / "target.json";
    Json details;
    PathList artifacts{{"target_checkpoint", target_path}};
    Json seeds{{"model", model_cfg.seed}};

    if (ctx.config.contains("partition")) {
      // Experiment mode: carve out target/proxy/aux roles and train the
      // target on the member origins' training halves only.
      const PartitionConfig part =
          parse_partition_config(ctx.config.at("partition"), ctx.master_seed);
      const ExperimentAssets assets = prepare_experiment(full, part, model_cfg, &err);
      write_file(target_path, save_model(assets.target));
      const auto proxy_path = ctx.run_dir / "proxy.csv";
      const auto aux_path = ctx.run_dir / "aux.csv";
      const auto truth_path = ctx.run_dir / "truth.csv";
      save_delimited(assets.proxy, proxy_path);
      save_delimited(assets.aux, aux_path);
      save_truth(assets.truth, truth_path);
      artifacts.emplace_back("proxy_dataset", proxy_path);
      artifacts.emplace_back("aux_dataset", aux_path);
      artifacts.emplace_back("truth", truth_path);
      seeds["partition"] = part.seed;
      details["trained_epochs"] = assets.target.trained_epochs;
      details["model_digest"] = model_digest(assets.target);
      details["target_origins"] = assets.plan.target_origins.size();
      details["proxy_origins"] = assets.plan.proxy_origins().size();
      details["aux_origins"] = quotient(assets.aux).size();
      if (assets.target.config.output_kind == OutputKind::kSoftmaxClassifier) {
        const LabeledData train_rows = to_labeled(assets.filtered, assets.target_train_indices);
        details["train_accuracy"] = classification_accuracy(assets.target, train_rows);
      }
      out << "train-target: " << assets.plan.target_origins.size() << " target origins, "
          << assets.target.trained_epochs << " epochs -> " << target_path.string() << "\n";
    } else {
      std::vector<std::size_t> all(full.samples.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      const LabeledData ld = to_labeled(full, all);
      WhiteBoxModel model;
      if (model_section.contains("resume_from")) {
        const std::filesystem::path base_path = get_string(model_section, "resume_from", "model");
        if (!std::filesystem::exists(base_path)) {
          throw InputError("missing checkpoint: " + base_path.string());
        }
        const WhiteBoxModel base = load_model(read_file(base_path));
        model = incremental_train(base, ld, model_cfg.epochs, model_cfg.learning_rate);
      } else {
        model = train(model_cfg, ld);
      }
      write_file(target_path, save_model(model));
      details["trained_epochs"] = model.trained_epochs;
      details["model_digest"] = model_digest(model);
      if (model.config.output_kind == OutputKind::kSoftmaxClassifier) {
        details["train_accuracy"] = classification_accuracy(model, ld);
      }
      out << "train-target: " << full.samples.size() << " samples, " << model.trained_epochs
          << " epochs -> " << target_path.string() << "\n";
    }
    write_manifest(ctx, "train-target", {{"dataset", dataset_path}}, artifacts, seeds, details);
    return 0;
  } catch (const std::exception& e) {
    err << "train-target: " << e.what() << "\n";
    return 1;
  }
}

int cmd_infer(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RunContext ctx = resolve(opts, "infer");
    const InferInputs in = load_infer_inputs(ctx.config);
    const ExperimentConfig cfg =
        parse_experiment_config(ctx.config, in.target.config, ctx.master_seed);
    check_compatibility(in, cfg);

    const InferenceRun run = run_origin_inference(in.target, in.proxy, in.aux, cfg);

    ExperimentConfig frozen = cfg;
    frozen.feat = run.shadow.frozen_feat;
    const auto verdict_path = ctx.run_dir / "verdicts.json";
    write_file(verdict_path, verdicts_to_json(run.verdicts, frozen));
    const auto meta_path = ctx.run_dir / "meta.json";
    write_file(meta_path, save_meta(run.meta));
    PathList artifacts{{"verdicts", verdict_path}, {"meta_model", meta_path}};
    for (std::size_t k = 0; k < run.shadow.shadows.size(); ++k) {
      const auto shadow_path = ctx.run_dir / ("shadow_" + std::to_string(k) + ".json");
      write_file(shadow_path, save_model(run.shadow.shadows[k]));
      artifacts.emplace_back("shadow_" + std::to_string(k), shadow_path);
    }

    std::size_t members = 0;
    for (const auto& v : run.verdicts) {
      if (v.member) ++members;
    }
    const PathList inputs{{"target_checkpoint", in.checkpoint_path},
                          {"proxy_dataset", in.proxy_path},
                          {"aux_dataset", in.aux_path}};
    write_manifest(ctx, "infer", inputs, artifacts, experiment_seeds(cfg),
                   Json{{"num_origins", run.verdicts.size()},
                        {"member_verdicts", members},
                        {"meta_training_bags", run.shadow.meta_training_set.size()}});
    out << "infer: " << run.verdicts.size() << " origins, " << members
        << " member verdicts -> " << verdict_path.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "infer: " << e.what() << "\n";
    return 1;
  }
}

int cmd_evaluate(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RunContext ctx = resolve(opts, "evaluate");
    const Json& ev = require_key(ctx.config, "evaluate", "");

    std::filesystem::path verdict_path;
    std::filesystem::path aux_path;
    if (ev.contains("manifest")) {
      const std::filesystem::path manifest_path = get_string(ev, "manifest", "evaluate");
      if (!std::filesystem::exists(manifest_path)) {
        throw InputError("missing manifest: " + manifest_path.string());
      }
      Json m;
      try {
        m = Json::parse(read_file(manifest_path));
        verdict_path = m.at("artifacts").at("verdicts").get<std::string>();
        aux_path = m.at("inputs").at("aux_dataset").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw SerializationError("malformed manifest " + manifest_path.string() + ": " + e.what());
      }
    } else {
      verdict_path = get_string(ev, "verdicts", "evaluate");
      aux_path = get_string(ev, "aux_dataset", "evaluate");
    }
    if (!std::filesystem::exists(verdict_path)) {
      throw InputError("missing verdict report: " + verdict_path.string());
    }
    const std::vector<InferenceVerdict> verdicts = verdicts_from_json(read_file(verdict_path));
    const Json* schema = ev.contains("schema") ? &ev.at("schema") : nullptr;
    const OriginDataset aux = load_dataset(aux_path, schema);

    std::optional<std::map<OriginId, bool>> truth;
    PathList inputs{{"verdicts", verdict_path}, {"aux_dataset", aux_path}};
    if (ev.contains("truth")) {
      const std::filesystem::path truth_path = get_string(ev, "truth", "evaluate");
      truth = load_truth(truth_path);
      inputs.emplace_back("truth", truth_path);
    }
    std::vector<LayerAccuracyRecord> records;
    if (ev.contains("sweep_table")) {
      const std::filesystem::path table_path = get_string(ev, "sweep_table", "evaluate");
      records = layer_records_from_csv(read_file(table_path));
      inputs.emplace_back("sweep_table", table_path);
    }
    const std::string task =
        ev.contains("task") ? get_string(ev, "task", "evaluate") : "classification";
    if (task != "classification" && task != "regression") {
      throw ConfigError("config key 'evaluate.task' must be classification or regression");
    }
    const bool classification = task == "classification";

    const RunEvaluation eval = evaluate_run(verdicts, truth, aux, records, classification);

    const auto eval_path = ctx.run_dir / "evaluation.json";
    write_file(eval_path, evaluation_to_json(eval));
    const auto coverage_path = ctx.run_dir / "coverage.csv";
    write_file(coverage_path, coverage_to_csv(eval.coverage));
    PathList artifacts{{"evaluation", eval_path}, {"coverage", coverage_path}};
    if (!records.empty()) {
      const auto records_path = ctx.run_dir / "layer_records.csv";
      write_file(records_path, layer_records_to_csv(records));
      artifacts.emplace_back("layer_records", records_path);
    }
    write_manifest(ctx, "evaluate", inputs, artifacts, Json::object());
    if (eval.accuracy.has_value()) {
      out << "evaluate: accuracy " << format_double(*eval.accuracy) << " over "
          << eval.num_origins << " origins -> " << eval_path.string() << "\n";
    } else {
      out << "evaluate: accuracy unavailable (no ground truth), " << eval.num_origins
          << " origins -> " << eval_path.string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "evaluate: " << e.what() << "\n";
    return 1;
  }
}

namespace {

struct SweepCell {
  ExperimentConfig cfg;
  int layer_index = 0;
  std::size_t bag_size = 0;
  std::string feat_name;
  std::string shadow_mode;
  int incremental_epochs = 0;  // meaningful only for incremental cells
};

struct CellResult {
  bool ok = false;
  std::string error;
  LayerAccuracyRecord record;
};

template <typename T>
std::vector<T> grid_of(const Json& sweep, const std::string& key, const char* what, T base) {
  if (!sweep.contains(key)) return {base};
  std::vector<T> values;
  try {
    values = sweep.at(key).get<std::vector<T>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key 'sweep." + key + "' must be an array of " + what);
  }
  if (values.empty()) throw ConfigError("sweep grid 'sweep." + key + "' is empty");
  return values;
}

}  // namespace

int cmd_sweep(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RunContext ctx = resolve(opts, "sweep");
    const InferInputs in = load_infer_inputs(ctx.config);
    if (!in.truth_path) throw ConfigError("missing config key 'paths.truth'");
    const std::map<OriginId, bool> truth = load_truth(*in.truth_path);
    const ExperimentConfig base =
        parse_experiment_config(ctx.config, in.target.config, ctx.master_seed);
    check_compatibility(in, base);

    const Json& sweep = require_key(ctx.config, "sweep", "");
    const bool has_grid = sweep.contains("layer_index") || sweep.contains("bag_size") ||
                          sweep.contains("feat") || sweep.contains("shadow_mode") ||
                          sweep.contains("incremental_epochs");
    if (!has_grid) throw ConfigError("sweep grid is empty: no swept keys in 'sweep'");

    const auto layers = grid_of<int>(sweep, "layer_index", "integers", base.layer_index);
    const auto bags = grid_of<std::size_t>(sweep, "bag_size", "integers", base.bag_size);
    const auto feats =
        grid_of<std::string>(sweep, "feat", "names", feat_kind_name(base.feat.kind));
    const auto modes = grid_of<std::string>(sweep, "shadow_mode", "names",
                                            shadow_mode_name(base.shadow_mode));
    const auto inc_epochs =
        grid_of<int>(sweep, "incremental_epochs", "integers", base.incremental_epochs);

    std::vector<SweepCell> cells;
    for (const auto& mode : modes) {
      const ShadowMode shadow_mode = shadow_mode_from_name(mode);
      // The epoch dimension only exists for incremental shadows.
      const std::vector<int> epoch_grid =
          shadow_mode == ShadowMode::kIncremental ? inc_epochs : std::vector<int>{base.incremental_epochs};
      for (int epochs : epoch_grid) {
        for (const auto& feat_name : feats) {
          for (int layer : layers) {
            for (std::size_t bag : bags) {
              SweepCell cell;
              cell.cfg = base;
              cell.cfg.shadow_mode = shadow_mode;
              cell.cfg.incremental_epochs = epochs;
              cell.cfg.feat.kind = feat_kind_from_name(feat_name);
              cell.cfg.layer_index = layer;
              cell.cfg.bag_size = bag;
              cell.layer_index = layer;
              cell.bag_size = bag;
              cell.feat_name = feat_name;
              cell.shadow_mode = mode;
              cell.incremental_epochs = epochs;
              cells.push_back(std::move(cell));
            }
          }
        }
      }
    }

    int workers = 1;
    if (sweep.contains("workers")) workers = get_int(sweep, "workers", "sweep");
    if (workers < 1) throw ConfigError("config key 'sweep.workers' must be at least 1");
    const std::size_t pool_size =
        std::min<std::size_t>(static_cast<std::size_t>(workers), cells.size());

    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
        CellResult& res = results[i];
        try {
          const SweepCell& cell = cells[i];
          cell.cfg.validate();
          const InferenceRun run = run_origin_inference(in.target, in.proxy, in.aux, cell.cfg);
          LayerAccuracyRecord rec;
          rec.layer_index = cell.layer_index;
          rec.layer_depth = cell.layer_index;
          rec.param_count = layer_param_count(in.target.config, cell.layer_index);
          rec.layer_type = layer_type_of(in.target.config, cell.layer_index);
          rec.bag_size = cell.bag_size;
          rec.accuracy = accuracy_against(run.verdicts, truth);
          res.record = rec;
          res.ok = true;
        } catch (const std::exception& e) {
          res.error = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < pool_size; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    // Single writer, deterministic cell order regardless of worker count.
    std::ostringstream table;
    table << "cell,layer_index,bag_size,featurization,shadow_mode,incremental_epochs,"
             "layer_depth,param_count,layer_type,accuracy,status,error\n";
    std::vector<LayerAccuracyRecord> records;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const SweepCell& cell = cells[i];
      const CellResult& res = results[i];
      table << i << ',' << cell.layer_index << ',' << cell.bag_size << ',' << cell.feat_name
            << ',' << cell.shadow_mode << ','
            << (cell.cfg.shadow_mode == ShadowMode::kIncremental
                    ? std::to_string(cell.incremental_epochs)
                    : std::string())
            << ',';
      if (res.ok) {
        table << res.record.layer_depth << ',' << res.record.param_count << ','
              << layer_type_name(res.record.layer_type) << ',' << format_double(res.record.accuracy)
              << ",ok,\n";
        records.push_back(res.record);
      } else {
        table << ",,,,failed," << sanitize_cell(res.error) << "\n";
        ++failures;
      }
    }
    const auto table_path = ctx.run_dir / "sweep.csv";
    write_file(table_path, table.str());
    const auto records_path = ctx.run_dir / "layer_records.csv";
    write_file(records_path, layer_records_to_csv(records));

    const PathList inputs{{"target_checkpoint", in.checkpoint_path},
                          {"proxy_dataset", in.proxy_path},
                          {"aux_dataset", in.aux_path},
                          {"truth", *in.truth_path}};
    write_manifest(ctx, "sweep", inputs,
                   {{"sweep_table", table_path}, {"layer_records", records_path}},
                   experiment_seeds(base),
                   Json{{"cells", cells.size()}, {"failures", failures}, {"workers", workers}});
    out << "sweep: " << cells.size() << " cells, " << failures << " failed -> "
        << table_path.string() << "\n";
    if (failures > 0) err << "sweep: " << failures << " of " << cells.size() << " cells failed\n";
    return 0;
  } catch (const std::exception& e) {
    err << "sweep: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace orinf
