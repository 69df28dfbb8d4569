#include "chflow/cli_reports.hpp"

#include <CLI11.hpp>

#include <future>
#include <iostream>

extern char** environ;

namespace {

using namespace chflow::reports;

// defaults < config file < CHFLOW_* environment < command line
ParameterSet layered(const ParameterSet& command_line, const std::string& config_file) {
  ParameterSet params;
  std::string file = config_file;
  const ParameterSet env = ParameterSet::from_environment(environ);
  if (file.empty()) file = command_line.find("config").value_or(env.find("config").value_or(""));
  if (!file.empty()) params.merge(ParameterSet::from_file(file));
  params.merge(env);
  params.merge(command_line);
  return params;
}

// The first bare word names the mode; the rest are parameters.
std::pair<std::string, std::vector<std::string>> split_mode(std::vector<std::string> tokens) {
  std::string mode;
  if (!tokens.empty() && tokens.front().find('=') == std::string::npos && tokens.front().rfind("-", 0) != 0) {
    mode = tokens.front();
    tokens.erase(tokens.begin());
  }
  return {mode, tokens};
}

void execute(const ExperimentConfig& config) {
  const Report report = run(config);
  for (const std::string& name : write_artifacts(config, report))
    std::cout << (config.out / name).string() << "\n";
}

void list_experiments() {
  for (const ExperimentInfo& e : experiments()) {
    std::cout << e.name << ": " << e.help << "\n";
    for (const std::string& mode : e.modes) {
      std::cout << "  " << mode << "\n";
      for (const ParameterInfo& p : parameters(e.name, mode))
        std::cout << "    " << p.key << "=" << p.default_value << "  " << p.help << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments for the curvature-normalized Ricci-DeTurck flow on complex hyperbolic space"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  ParameterSet globals;
  std::string format, out, seed, config_file;
  app.add_option("--format", format, "csv or json tables");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "seed for randomized inputs");
  app.add_option("--config", config_file, "key=value file");

  std::string run_experiment;
  CLI::App* run_cmd = app.add_subcommand("run", "run <experiment> [mode] key=value ...");
  run_cmd->add_option("experiment", run_experiment, "experiment name")->required();
  run_cmd->allow_extras();

  std::vector<CLI::App*> direct;
  for (const ExperimentInfo& e : experiments()) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->allow_extras();
    direct.push_back(sub);
  }

  int jobs = 1;
  std::vector<std::string> batch_files;
  CLI::App* batch = app.add_subcommand("batch", "run one experiment per config file, each into its own directory");
  batch->add_option("--jobs", jobs, "experiments run in parallel")->check(CLI::PositiveNumber);
  batch->add_option("files", batch_files, "config files with experiment= and mode= keys")->required();

  CLI::App* list = app.add_subcommand("list", "list experiments, modes and parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (!format.empty()) globals.set("format", format);
    if (!out.empty()) globals.set("out", out);
    if (!seed.empty()) globals.set("seed", seed);

    if (list->parsed()) {
      list_experiments();
      return 0;
    }

    if (batch->parsed()) {
      std::vector<ExperimentConfig> configs;
      ParameterSet shared = globals;
      shared.set("out", "");
      for (const std::string& file : batch_files) {
        const ParameterSet p = layered(shared, file);
        const std::string experiment = p.find("experiment").value_or("");
        const std::string mode = p.find("mode").value_or("");
        ParameterSet rest;
        for (const auto& [k, v] : p.values())
          if (k != "experiment" && k != "mode" && k != "out") rest.set(k, v);
        const std::string own = ParameterSet::from_file(file).find("out").value_or("");
        const std::filesystem::path base = out.empty() ? "chflow-out" : out;
        rest.set("out", own.empty() ? (base / std::filesystem::path(file).stem()).string() : own);
        configs.push_back(resolve(experiment, mode, rest));
      }
      for (std::size_t start = 0; start < configs.size(); start += static_cast<std::size_t>(jobs)) {
        std::vector<std::future<Report>> running;
        const std::size_t stop = std::min(configs.size(), start + static_cast<std::size_t>(jobs));
        for (std::size_t k = start; k < stop; ++k)
          running.push_back(std::async(std::launch::async, [&, k] { return run(configs[k]); }));
        for (std::size_t k = start; k < stop; ++k) {
          const Report report = running[k - start].get();
          for (const std::string& name : write_artifacts(configs[k], report))
            std::cout << (configs[k].out / name).string() << "\n";
        }
      }
      return 0;
    }

    std::string experiment;
    std::vector<std::string> tokens;
    if (run_cmd->parsed()) {
      experiment = run_experiment;
      tokens = run_cmd->remaining();
    } else {
      for (CLI::App* sub : direct)
        if (sub->parsed()) {
          experiment = sub->get_name();
          tokens = sub->remaining();
        }
    }
    const auto [mode, rest] = split_mode(tokens);
    ParameterSet command_line = ParameterSet::from_tokens(rest);
    command_line.merge(globals);
    execute(resolve(experiment, mode, layered(command_line, config_file)));
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
