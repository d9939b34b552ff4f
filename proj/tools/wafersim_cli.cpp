#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "wafersim/experiments.hpp"
#include "wafersim/record_io.hpp"

using namespace wafersim;

namespace {

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const std::string item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wafer-stage scanning controller simulator"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", controllers;
  std::uint64_t seed = 0;
  bool assert_mode = false, print_preset = false;

  for (ExperimentKind kind : all_experiment_kinds()) {
    auto* sub = app.add_subcommand(std::string(to_string(kind)));
    sub->add_option("--config", config_path, "JSON file merged over the preset")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "noise seed");
    sub->add_option("--controllers", controllers, "comma-separated controller list");
    sub->add_flag("--assert", assert_mode, "exit nonzero when a check fails");
    sub->add_flag("--print-preset", print_preset, "print the effective config and exit");
  }
  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  const ExperimentKind kind = experiment_kind_from_string(sub->get_name());
  try {
    Json user = Json::object();
    if (!config_path.empty()) {
      try {
        user = Json::parse(read_file(config_path));
      } catch (const Json::parse_error& ex) {
        throw ConfigError(config_path + ": " + ex.what());
      }
    }
    Overrides ov;
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--controllers")) ov.controllers = split_list(controllers);
    const Json effective = effective_config(kind, user, ov);
    if (print_preset) {
      std::cout << effective.dump(2) << "\n";
      return 0;
    }
    std::cout << "effective config:\n" << effective.dump(2) << "\n\n";
    const ExperimentOutput result = run_experiment(effective);
    write_outputs(result, effective, out_dir);
    std::cout << result.summary << "outputs written to " << out_dir << "\n";
    for (const auto& f : result.run_failures) std::cerr << "run failure: " << f << "\n";
    if (assert_mode && !result.checks_passed()) {
      std::cerr << "assertion failure\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}
