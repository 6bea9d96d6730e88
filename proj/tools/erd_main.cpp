// erd: command-line front end.
//
//   erd gen-synth --out data/synth [--config c.json] [--set data.synthetic.seed=3]
//   erd split     --out stream.json
//   erd train     --out runs/a --set train.method=ft
//   erd eval      --checkpoint runs/a/session_8/model --session 8 --out runs/a/eval
//   erd sweep     --axis P --values 0,0.2,0.4,0.6 --out runs/sweep_p --jobs 2
//   erd config    print the resolved config as JSON

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "erd/cli/commands.hpp"
#include "erd/errors.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "output path");
  if (out_required) out->required();
  cmd->add_option("--set", c.overrides, "override a config field, key.path=value (repeatable)")
      ->take_all();
}

erd::cli::ExperimentConfig load(const Common& c) {
  std::optional<std::filesystem::path> path;
  if (!c.config_path.empty()) path = c.config_path;
  return erd::cli::load_config(path, c.overrides);
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) {
      throw erd::ValidationError("--values: '" + item + "' is not a number");
    }
    values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental few-shot learning with episodic replay distillation"};
  app.require_subcommand(1);

  Common gen, split, train, evalc, sweep, show;
  auto* gen_cmd = app.add_subcommand("gen-synth", "write a synthetic dataset directory");
  add_common(gen_cmd, gen, true);

  auto* split_cmd = app.add_subcommand("split", "write the class-to-task assignment");
  add_common(split_cmd, split, true);

  auto* train_cmd = app.add_subcommand("train", "train over the task stream");
  add_common(train_cmd, train, false);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model checkpoint");
  add_common(eval_cmd, evalc, true);
  std::string checkpoint;
  std::size_t session = 0;
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint directory")->required();
  eval_cmd->add_option("--session", session, "seen tasks 1..session (default: all)");

  auto* sweep_cmd = app.add_subcommand("sweep", "one run per value of an ablation axis");
  add_common(sweep_cmd, sweep, false);
  std::string axis;
  std::string values_text;
  std::size_t jobs = 1;
  sweep_cmd->add_option("--axis", axis, "P | lambda_m | lambda_e | n_ex | bf")->required();
  sweep_cmd->add_option("--values", values_text, "comma-separated values")->required();
  sweep_cmd->add_option("--jobs", jobs, "configurations run at once")->check(CLI::PositiveNumber);

  auto* show_cmd = app.add_subcommand("config", "print the resolved config");
  add_common(show_cmd, show, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      erd::cli::cmd_gen_synth(load(gen), gen.out);
      std::cout << "wrote " << gen.out << '\n';
    } else if (split_cmd->parsed()) {
      erd::cli::cmd_split(load(split), split.out);
      std::cout << "wrote " << split.out << '\n';
    } else if (train_cmd->parsed()) {
      const auto config = load(train);
      const std::string out = train.out.empty() ? config.output_dir : train.out;
      erd::cli::cmd_train(config, out, &std::cout);
      std::cout << "run directory " << out << '\n';
    } else if (eval_cmd->parsed()) {
      const auto config = load(evalc);
      const std::size_t s = session == 0 ? config.stream.n_tasks : session;
      const auto records = erd::cli::cmd_eval(config, checkpoint, s, evalc.out);
      for (const auto& r : records) std::cout << erd::eval::to_json_line(r) << '\n';
    } else if (sweep_cmd->parsed()) {
      const auto config = load(sweep);
      const std::string out = sweep.out.empty() ? config.output_dir : sweep.out;
      const auto outcomes =
          erd::cli::cmd_sweep(config, axis, parse_values(values_text), out, jobs, &std::cout);
      std::size_t failed = 0;
      for (const auto& o : outcomes) failed += o.ok ? 0 : 1;
      if (failed > 0) {
        std::cerr << failed << " of " << outcomes.size() << " runs failed, see " << out
                  << "/sweep_failures.txt\n";
        return 1;
      }
    } else if (show_cmd->parsed()) {
      std::cout << erd::cli::to_json(erd::cli::materialize(load(show))).dump(2) << '\n';
    }
  } catch (const erd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
