#include "vbvar/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Variational Bayes estimation of sparse vector autoregressions"};
  app.require_subcommand(0, 1);

  vbvar::CliOptions opts;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  bool print_default = false;
  app.add_flag("--default-config", print_default, "Print the default config and exit");

  for (const char* name : {"fit", "simulate", "backtest", "predict"}) {
    auto* sub = app.add_subcommand(name, std::string("Run the ") + name + " command");
    sub->add_option("--config", opts.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out, "Override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : vbvar::kExitValidation;
  }

  if (print_default) {
    std::cout << vbvar::dump_json(vbvar::default_config_json()) << "\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return vbvar::kExitValidation;
  }
  auto* sub = app.get_subcommands().front();
  opts.command = sub->get_name();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--threads")) opts.threads = threads;
  if (sub->count("--out")) opts.out = out;
  return vbvar::run(opts);
}
