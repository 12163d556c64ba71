// Command-line front end: run / validate / gradcheck / report.

#include "fedclip/checkpoint.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/experiment.hpp"
#include "fedclip/gradcheck_suite.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum Exit : int { kOk = 0, kFailed = 1, kConfig = 2, kRuntime = 3 };

nlohmann::json load_config(const std::string& path) {
  try {
    return fedclip::read_json(path);
  } catch (const fedclip::Error& e) {
    throw fedclip::ConfigError(e.what());
  }
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const fedclip::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const fedclip::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfig;
  } catch (const fedclip::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated contrastive-learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a config field, e.g. --set optimizer.lr=0.1");
  run->add_option("-o,--output", output_dir, "Output directory (overrides output_dir)");

  auto* validate = app.add_subcommand("validate", "Check a config and print it with defaults filled in");
  validate->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  validate->add_option("--set", overrides, "Override a config field");

  unsigned long long grad_seed = 7;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gradcheck->add_option("--seed", grad_seed, "Seed for the random test inputs");

  std::string summary_path;
  bool as_json = false;
  auto* report = app.add_subcommand("report", "Pretty-print a run summary");
  report->add_option("summary", summary_path, "summary.json of a run")->required()->check(CLI::ExistingFile);
  report->add_flag("--json", as_json, "Print the summary JSON instead");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded([&] {
      const auto outcome = fedclip::run_experiment(load_config(config_path), overrides, output_dir);
      std::cout << fedclip::format_report(outcome.summary) << "\nwrote " << outcome.summary_path.string() << '\n';
      return kOk;
    });
  }
  if (*validate) {
    return guarded([&] {
      const auto resolved = fedclip::resolve_config(fedclip::apply_overrides(load_config(config_path), overrides));
      std::cout << resolved.dump(2) << '\n';
      return kOk;
    });
  }
  if (*gradcheck) {
    return guarded([&] {
      const bool ok = fedclip::report_gradcheck(fedclip::run_gradcheck_suite(grad_seed), std::cout);
      return ok ? kOk : kFailed;
    });
  }
  return guarded([&] {
    const auto summary = fedclip::read_json(summary_path);
    std::cout << (as_json ? summary.dump(2) + "\n" : fedclip::format_report(summary));
    return kOk;
  });
}
