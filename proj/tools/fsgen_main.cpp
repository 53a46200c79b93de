#include "fsgen/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

using namespace fsgen;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> dataset;
  std::optional<std::string> target;
  std::optional<std::string> task;
  std::optional<std::string> collector;
  std::optional<int> n;
};

/// Flag > FSGEN_OUT_DIR > config file, per field.
RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.dataset) cfg.dataset_path = *o.dataset;
  if (o.target) cfg.target_column = *o.target;
  if (o.task) cfg.task = task_from_string(*o.task);
  if (o.collector) cfg.collector = *o.collector;
  if (o.n) cfg.collect_epochs = *o.n;
  if (o.out_dir)
    cfg.out_dir = *o.out_dir;
  else if (const char* env = std::getenv("FSGEN_OUT_DIR"); env && *env)
    cfg.out_dir = env;
  return cfg;
}

void print_report_summary(const std::string& report_text,
                          const std::filesystem::path& report_path) {
  nlohmann::json report = nlohmann::json::parse(report_text);
  std::cout << "chosen " << report["chosen"]["size"] << " feature(s):";
  for (const auto& name : report["chosen"]["names"])
    std::cout << ' ' << name.get<std::string>();
  std::cout << "\n"
            << report["scores"]["metric"].get<std::string>() << " on held-out B:"
            << " chosen " << report["scores"]["chosen_b"] << ", full "
            << report["scores"]["full_b"] << ", k-best "
            << report["scores"]["kbest_b"] << "\n"
            << "report written: " << report_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequence-generative feature subset selection"};
  app.require_subcommand(1);

  Overrides o;
  std::string stage_only;
  std::string inspect_path;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--seed", o.seed, "run seed override");
    sub->add_option("--out-dir", o.out_dir,
                    "artifact directory (overrides FSGEN_OUT_DIR and config)");
    sub->add_option("--dataset", o.dataset, "input CSV path override");
    sub->add_option("--target", o.target, "target column name override");
    sub->add_option("--task", o.task, "task kind override")
        ->check(CLI::IsMember({"regression", "classification"}));
    sub->add_option("--collector", o.collector, "corpus collector override")
        ->check(CLI::IsMember({"rl", "random"}));
    sub->add_option("--n", o.n, "collection epochs override")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* collect = app.add_subcommand("collect", "explore subsets, write the corpus");
  add_common(collect);
  CLI::App* train = app.add_subcommand("train", "fit the sequence model on the corpus");
  add_common(train);
  CLI::App* select = app.add_subcommand("select", "latent search + held-out report");
  add_common(select);
  CLI::App* pipeline = app.add_subcommand("pipeline", "collect, train and select in one run");
  add_common(pipeline);
  pipeline->add_option("--stage-only", stage_only, "run a single stage off existing artifacts")
      ->check(CLI::IsMember({"collect", "train", "select"}));
  CLI::App* synth = app.add_subcommand("synth", "emit the synthetic dataset as CSV");
  add_common(synth);
  CLI::App* inspect = app.add_subcommand("inspect", "summarize a corpus or checkpoint file");
  inspect->add_option("artifact", inspect_path, "artifact path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fsgen::exit_code::config;
  }

  try {
    if (inspect->parsed()) {
      std::cout << cmd_inspect(inspect_path);
      return exit_code::ok;
    }
    RunConfig cfg = resolve(o);
    if (collect->parsed()) {
      std::cout << "corpus written: " << cmd_collect(cfg).string() << "\n";
    } else if (train->parsed()) {
      std::cout << "checkpoint written: " << cmd_train(cfg).string() << "\n";
    } else if (select->parsed()) {
      print_report_summary(cmd_select(cfg), artifact_paths(cfg).report);
    } else if (pipeline->parsed()) {
      std::string out = cmd_pipeline(cfg, stage_only);
      if (stage_only.empty() || stage_only == "select")
        print_report_summary(out, artifact_paths(cfg).report);
      else
        std::cout << stage_only << " stage done: " << out << "\n";
    } else if (synth->parsed()) {
      ArtifactPaths paths = cmd_synth(cfg);
      std::cout << "dataset written: " << paths.synthetic_csv.string() << "\n"
                << "truth written:   " << paths.synthetic_truth.string() << "\n";
    }
    return exit_code::ok;
  } catch (const StageFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::config;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::dataset;
  } catch (const ArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::artifact;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
