// gsnn: train, evaluate and visualize group sparse autoencoders and CNNs.
//
//   gsnn train     --config run.cfg [--seed N] [--out DIR] [--set key=value ...]
//   gsnn eval      --config run.cfg [--seed N] [--out DIR] [--set key=value ...]
//   gsnn visualize --config run.cfg [--seed N] [--out DIR] [--set key=value ...]

#include "gsnn/commands.hpp"
#include "gsnn/run_config.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "key=value configuration file");
  cmd->add_option("--seed", o.seed, "random seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  cmd->add_option("--set", o.sets, "override one config key, e.g. --set train.epochs=5")->allow_extra_args(false);
}

gsnn::RunConfig build_config(const Options& o) {
  gsnn::RunConfig c;
  if (!o.config.empty()) c.load_file(o.config);
  for (const auto& s : o.sets) {
    const auto [k, v] = gsnn::split_assignment(s);
    c.set(k, v);
  }
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  if (!o.out.empty()) c.set("out", o.out);
  return c;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group sparse autoencoders and group sparse CNNs"};
  app.require_subcommand(1);
  Options o;
  CLI::App* train = app.add_subcommand("train", "train a model and write model.gsnn1, metrics.csv, summary.txt");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint and write eval.csv");
  CLI::App* vis = app.add_subcommand("visualize", "write weight tiles (PGM) and activations.csv");
  for (CLI::App* cmd : {train, eval, vis}) add_common(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    const gsnn::RunConfig config = build_config(o);
    if (train->parsed()) {
      const auto outcome = gsnn::cmd_train(config);
      for (const auto& [k, v] : outcome.summary) std::cout << k << "=" << v << "\n";
    } else if (eval->parsed()) {
      const auto report = gsnn::cmd_eval(config);
      for (const auto& [k, v] : report.metrics) std::cout << k << "=" << v << "\n";
    } else {
      for (const auto& f : gsnn::cmd_visualize(config)) std::cout << f << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
