#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ebflow/cli/commands.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed) {
  cmd->add_option("--config", c.config_path, "Experiment config (flat JSON)");
  if (with_seed) cmd->add_option("--seed", c.seed, "Seed (generate: data seed; fit: chain seed)");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--threads", c.threads, "Worker threads");
  cmd->add_option("--set", c.sets, "Override a config key, key=value (repeatable)");
}

ebflow::cli::ExperimentConfig resolve(const Common& c) {
  ebflow::cli::ExperimentConfig config;
  if (!c.config_path.empty()) config = ebflow::cli::load_config(c.config_path);
  std::vector<std::string> sets = c.sets;
  if (!c.out.empty()) sets.push_back("out=\"" + c.out + "\"");
  if (c.threads) sets.push_back("threads=" + std::to_string(*c.threads));
  return ebflow::cli::apply_overrides(config, sets);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical-Bayes prior estimation in linear models"};
  app.require_subcommand(1);

  Common gen, fit, exp;
  auto* generate = app.add_subcommand("generate", "Simulate a dataset");
  add_common(generate, gen, true);

  auto* fit_cmd = app.add_subcommand("fit", "Fit the configured algorithm to a dataset");
  add_common(fit_cmd, fit, true);
  std::string fit_data;
  fit_cmd->add_option("--data", fit_data, "Dataset directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score a result directory against its dataset");
  std::string eval_result, eval_data;
  evaluate->add_option("--result", eval_result, "Result directory")->required();
  evaluate->add_option("--data", eval_data, "Dataset directory")->required();

  auto* experiment = app.add_subcommand("experiment", "Generate, fit every seed, aggregate");
  add_common(experiment, exp, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*generate) {
      const auto config = resolve(gen);
      const std::uint64_t seed = gen.seed.value_or(config.data_seed);
      ebflow::cli::cmd_generate(config, seed, config.out);
      std::cout << "dataset written to " << config.out << '\n';
    } else if (*fit_cmd) {
      const auto config = resolve(fit);
      const std::uint64_t seed = fit.seed.value_or(config.seeds.front());
      ebflow::cli::cmd_fit(config, fit_data, seed, config.out);
      std::cout << "result written to " << config.out << '\n';
    } else if (*evaluate) {
      const auto m = ebflow::cli::cmd_evaluate(eval_result, eval_data);
      std::cout << ebflow::cli::metrics_csv_header() << '\n' << ebflow::cli::metrics_csv_row(m) << '\n';
    } else if (*experiment) {
      auto config = resolve(exp);
      if (exp.seed) config.data_seed = *exp.seed;
      const auto s = ebflow::cli::cmd_experiment(config);
      std::cout << "tv " << ebflow::cli::format_double(s.tv_mean) << " +- " << ebflow::cli::format_double(s.tv_sd)
                << ", failed " << s.failed << "/" << s.runs.size() << ", tables in " << config.out << '\n';
      for (const auto& r : s.runs)
        if (!r.ok) std::cerr << "seed " << r.seed << " failed: " << r.error << '\n';
    }
  } catch (const ebflow::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ebflow::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
