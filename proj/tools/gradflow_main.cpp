// Command-line front end: loads a scenario file, dispatches to one of the
// run commands, and maps failures onto stable exit codes (0 success,
// 2 configuration error, 3 numerical failure).

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gradflow/runner.hpp"
#include "gradflow/scenario.hpp"

namespace {

struct RunArgs {
  std::string config_path;
  gradflow::runner::CommandOptions options;
};

void add_run_options(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "scenario file (JSON)")->required();
  cmd->add_option("-o,--out", args.options.out_dir, "output directory");
  cmd->add_option("--seed", args.options.seed, "seed recorded in the report");
  cmd->add_option("-j,--jobs", args.options.jobs, "worker threads (0 = hardware)");
  cmd->add_option("--format", args.options.format, "trajectory format override")
      ->check(CLI::IsMember({"csv", "json"}));
}

std::vector<std::pair<int, int>> parse_pair_list(const std::string& text) {
  std::vector<std::pair<int, int>> pairs;
  std::string token;
  std::istringstream stream(text);
  while (std::getline(stream, token, ';')) {
    for (char& ch : token)
      if (ch == ',' || ch == '(' || ch == ')') ch = ' ';
    std::istringstream pair_stream(token);
    int a = 0, b = 0;
    if (pair_stream >> a >> b) pairs.emplace_back(a, b);
  }
  return pairs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral dynamics laboratory for restricted flow models"};
  app.require_subcommand(1);

  RunArgs simulate_args, portrait_args, classify_args, viscous_args;
  CLI::App* simulate = app.add_subcommand("simulate", "integrate one trajectory and classify it");
  add_run_options(simulate, simulate_args);
  CLI::App* portrait = app.add_subcommand("portrait", "sweep starting points into a phase portrait");
  add_run_options(portrait, portrait_args);
  CLI::App* classify = app.add_subcommand("classify", "map outcomes over a parameter sweep");
  add_run_options(classify, classify_args);
  CLI::App* viscous = app.add_subcommand("viscous", "run the 2-D grid model and its limit study");
  add_run_options(viscous, viscous_args);

  int seq_n = 0;
  std::string seq_check;
  CLI::App* invariants = app.add_subcommand("invariants", "print or verify index-pair sequences");
  invariants->add_option("-n,--n", seq_n, "spectrum dimension")->required();
  invariants->add_option("--check", seq_check, "pair list to verify, e.g. \"1,2;3,4\"");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (invariants->parsed()) {
      if (seq_n < 2) throw gradflow::scenario::ConfigError("n", "dimension must be at least 2");
      if (seq_check.empty()) {
        gradflow::runner::print_sequences(seq_n, std::cout);
      } else {
        gradflow::runner::check_sequence(seq_n, parse_pair_list(seq_check), std::cout);
      }
      return 0;
    }
    const RunArgs& args = simulate->parsed()  ? simulate_args
                          : portrait->parsed() ? portrait_args
                          : classify->parsed() ? classify_args
                                               : viscous_args;
    const auto config = gradflow::scenario::load_config(args.config_path);
    if (simulate->parsed()) {
      gradflow::runner::cmd_simulate(config, args.options);
    } else if (portrait->parsed()) {
      gradflow::runner::cmd_portrait(config, args.options);
    } else if (classify->parsed()) {
      gradflow::runner::cmd_classify(config, args.options);
    } else {
      gradflow::runner::cmd_viscous(config, args.options);
    }
    return 0;
  } catch (const gradflow::scenario::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const gradflow::runner::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
}
