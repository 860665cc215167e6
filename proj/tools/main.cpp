#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "kmf/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kmf: extremal-metric functionals on the sphere and flat tori"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list available experiments");

  std::string config_path, output_dir;
  int threads = 1;
  long long seed_override = -1;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "path to the experiment config")->required();
  run->add_option("--output-dir", output_dir, "override the [output] dir field");
  run->add_option("--threads", threads, "worker threads for independent rows");
  run->add_option("--seed-override", seed_override, "override the [fields] seed field");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    std::fputs(kmf::list_experiments_text().c_str(), stdout);
    return 0;
  }

  kmf::Config cfg;
  try {
    cfg = kmf::Config::parse_file(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  kmf::RunOptions opts;
  opts.output_dir = output_dir;
  opts.threads = threads;
  if (seed_override >= 0) opts.seed_override = static_cast<std::uint64_t>(seed_override);

  std::string message;
  const int status = kmf::run_experiment(cfg, opts, &message);
  std::fprintf(status == 0 ? stdout : stderr, "%s\n", message.c_str());
  return status;
}
