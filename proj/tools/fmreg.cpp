#include <exception>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fm/fm.hpp"

namespace {

struct FlagBinding {
  CLI::Option* option;
  std::string key;
  const std::string* value;
};

struct SubcommandFlags {
  std::vector<std::unique_ptr<std::string>> storage;
  std::vector<FlagBinding> bindings;
  std::string config_path;

  void add(CLI::App* sub, const char* flag, const char* key, const char* desc) {
    storage.push_back(std::make_unique<std::string>());
    CLI::Option* opt = sub->add_option(flag, *storage.back(), desc);
    bindings.push_back({opt, key, storage.back().get()});
  }

  void add_flag(CLI::App* sub, const char* flag, const char* key,
                const char* desc) {
    storage.push_back(std::make_unique<std::string>());
    CLI::Option* opt = sub->add_flag(std::string(flag));
    opt->description(desc);
    bindings.push_back({opt, key, storage.back().get()});
  }

  std::vector<fm::KeyValue> collect() const {
    std::vector<fm::KeyValue> out;
    for (const auto& b : bindings)
      if (b.option->count() > 0)
        out.emplace_back(b.key, b.value->empty() ? "true" : *b.value);
    return out;
  }
};

void add_common_flags(CLI::App* sub, SubcommandFlags& flags) {
  sub->add_option("--config", flags.config_path,
                  "config file (sections of key = value lines)");
  flags.add(sub, "--input", "data.path", "input CSV path (header row, comma-separated)");
  flags.add(sub, "--target-index", "data.target_index", "0-based target column");
  flags.add(sub, "--bounds", "data.bounds", "per-feature bounds lo:hi,lo:hi,...");
  flags.add(sub, "--y-bounds", "data.y_bounds", "target bounds lo:hi (linear)");
  flags.add(sub, "--threshold", "data.threshold", "target threshold (logistic)");
  flags.add_flag(sub, "--pre-normalized", "data.pre_normalized",
                 "input already satisfies the normalized invariants");
  flags.add(sub, "--synth-n", "synth.n", "synthetic record count");
  flags.add(sub, "--synth-d", "synth.d", "synthetic feature count");
  flags.add(sub, "--synth-omega", "synth.omega",
            "true model parameters (comma list or one broadcast value)");
  flags.add(sub, "--synth-noise", "synth.noise", "linear target noise stddev");
  flags.add(sub, "--task", "run.task", "linear | logistic");
  flags.add(sub, "--methods", "run.methods", "comma list of fm,noprivacy,truncated");
  flags.add(sub, "--epsilon", "run.epsilon", "privacy budget per release (default 0.8)");
  flags.add(sub, "--strategy", "run.strategy", "regularize-trim | rerun-once");
  flags.add(sub, "--lambda", "run.lambda", "regularizer override");
  flags.add(sub, "--folds", "run.folds", "cross-validation folds (default 5)");
  flags.add(sub, "--repeats", "run.repeats", "cross-validation repeats (default 50)");
  flags.add(sub, "--seed", "run.seed", "RNG seed (default: FMREG_SEED or 0)");
  flags.add(sub, "--out", "run.output", "output directory (file path for synth)");
  flags.add(sub, "--grid-epsilons", "grid.epsilons", "bench: comma list of epsilons");
  flags.add(sub, "--grid-rates", "grid.rates", "bench: comma list of sampling rates");
  flags.add(sub, "--grid-dims", "grid.dims", "bench: comma list of feature prefixes");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private linear/logistic regression via "
               "objective-coefficient perturbation"};
  app.require_subcommand(1);

  struct Sub {
    fm::Command command;
    CLI::App* app;
    SubcommandFlags flags;
  };
  std::vector<Sub> subs;
  subs.push_back({fm::Command::Train,
                  app.add_subcommand("train", "fit a single model"), {}});
  subs.push_back({fm::Command::Bench,
                  app.add_subcommand("bench", "cross-validated grid sweep"), {}});
  subs.push_back({fm::Command::Synth,
                  app.add_subcommand("synth", "emit a synthetic dataset"), {}});
  subs.push_back({fm::Command::Validate,
                  app.add_subcommand("validate", "run the invariant self-checks"),
                  {}});
  for (auto& s : subs) add_common_flags(s.app, s.flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    for (auto& s : subs) {
      if (!s.app->parsed()) continue;
      std::vector<fm::KeyValue> file_entries;
      if (!s.flags.config_path.empty())
        file_entries = fm::read_config_file(s.flags.config_path);
      const fm::RunConfig cfg =
          fm::parse_config(s.command, file_entries, s.flags.collect());
      return fm::run(cfg, std::cout);
    }
    return 1;
  } catch (const fm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const fm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const fm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
