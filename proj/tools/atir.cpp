// Command-line entry point. Every subcommand takes the same options:
//   atir <command> [--config FILE] [--set key=value ...]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "atir/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Interleaved audio-text retrieval experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  for (const auto& name : atir::cli::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config_path, "key=value or JSON config (relative paths also searched in $" +
                                                    std::string(atir::cli::kConfigDirEnv) + ")");
    sub->add_option("-s,--set", overrides, "override one config entry, key=value");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << R"({"error":"config","exit_code":2,"message":")" << e.get_name() << "\"}\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto cfg = atir::cli::load_experiment_config(
        config_path.empty() ? std::nullopt : std::optional<std::string>(config_path), overrides);
    auto manifest = atir::cli::run_command(command, cfg);
    std::cout << command << " ok config_hash=" << manifest.config_hash << " artifacts=" << manifest.artifacts.size()
              << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::string line;
    const int code = atir::cli::describe_error(e, line);
    std::cerr << line << "\n";
    return code;
  }
}
