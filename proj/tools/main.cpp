#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "orinf/cli.hpp"

namespace {

void attach_common(CLI::App* cmd, orinf::CliOptions& opts) {
  cmd->add_option("config", opts.config_path, "JSON config file")->required();
  cmd->add_option("--seed", opts.seed, "override the top-level seed");
  cmd->add_option("--out-dir", opts.out_dir, "override the output root");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"origin-level membership inference toolkit"};
  app.require_subcommand(1);

  orinf::CliOptions opts;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic origin-labeled dataset");
  attach_common(synth, opts);
  CLI::App* train = app.add_subcommand("train-target", "train the target model");
  attach_common(train, opts);
  CLI::App* infer = app.add_subcommand("infer", "run the shadow pipeline and score aux origins");
  attach_common(infer, opts);
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a verdict report");
  attach_common(evaluate, opts);
  CLI::App* sweep = app.add_subcommand("sweep", "run a grid of inference settings");
  attach_common(sweep, opts);
  sweep->add_option("--workers", opts.workers, "concurrent sweep cells");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return orinf::cmd_synth(opts, std::cout, std::cerr);
    if (train->parsed()) return orinf::cmd_train_target(opts, std::cout, std::cerr);
    if (infer->parsed()) return orinf::cmd_infer(opts, std::cout, std::cerr);
    if (evaluate->parsed()) return orinf::cmd_evaluate(opts, std::cout, std::cerr);
    if (sweep->parsed()) return orinf::cmd_sweep(opts, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
