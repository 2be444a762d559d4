// agscl: run, resume and inspect continual-learning experiments.
//
//   agscl run <config.json> [--seed N] [--out DIR]
//   agscl resume <checkpoint> [--out DIR]
//   agscl aopc <checkpoint> [--data config.json] [--order highest|lowest|random]
//   agscl report <checkpoint> --out DIR
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numeric abort.

#include "agscl/errors.hpp"
#include "agscl/rng.hpp"
#include "agscl/runner.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>

namespace {

using namespace agscl;

std::filesystem::path seed_dir(const std::filesystem::path& root, std::uint64_t seed) {
  return root / fmt::format("seed_{}", seed);
}

void print_summary(const RunReport& r, const std::filesystem::path& dir) {
  const auto show = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.4f}", *v) : std::string("n/a");
  };
  fmt::print("seed {}: final avg accuracy {:.4f}  P {}  S {}  -> {}\n", r.seed,
             r.final_average_accuracy(), show(r.plasticity.value), show(r.stability.value),
             dir.string());
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out) {
  ExperimentConfig config = ExperimentConfig::load(config_path);
  if (seed) config.seeds = {*seed};
  if (!out.empty()) config.output_dir = out;
  const auto root = resolve_output_dir(config);
  for (const std::uint64_t s : config.seeds) {
    const auto dir = seed_dir(root, s);
    std::optional<std::filesystem::path> ckpt;
    if (config.write_checkpoints) ckpt = dir / "checkpoints";
    const RunReport report = run_experiment(config, s, ckpt);
    emit_results(report, dir);
    print_summary(report, dir);
  }
  return 0;
}

int cmd_resume(const std::string& checkpoint, const std::string& out) {
  RunState state = load_checkpoint(checkpoint);
  if (!out.empty()) state.config.output_dir = out;
  const TaskStream stream = load_task_stream(state.config, state.seed);
  const auto dir = seed_dir(resolve_output_dir(state.config), state.seed);
  std::optional<std::filesystem::path> ckpt;
  if (state.config.write_checkpoints) ckpt = dir / "checkpoints";
  const RunReport report = continue_run(std::move(state), stream, ckpt);
  emit_results(report, dir);
  print_summary(report, dir);
  return 0;
}

int cmd_aopc(const std::string& checkpoint, const std::string& data,
             const std::vector<std::string>& orders) {
  const RunState state = load_checkpoint(checkpoint);
  if (state.completed == 0) throw UsageError("checkpoint holds no trained task");
  ExperimentConfig config = state.config;
  if (!data.empty()) config.tasks = ExperimentConfig::load(data).tasks;
  const TaskStream stream = load_task_stream(config, state.seed);
  if (stream.size() < state.completed)
    throw DataError(fmt::format("dataset has {} tasks, checkpoint trained {}", stream.size(),
                                state.completed));
  const GroupLayout layout = build_layout(state.params.specs);
  std::vector<EvalSet> sets;
  for (std::size_t j = 0; j < state.completed; ++j) sets.push_back({&stream.tasks[j].test, j});
  fmt::print("mode,fraction,accuracy\n");
  for (const auto& name : orders) {
    Rng rng = substream(state.seed, "aopc");
    const AopcCurve curve = aopc_curve(state.params, layout, state.omega, sets,
                                       parse_aopc_order(name), config.aopc_fractions, rng,
                                       state.completed);
    for (std::size_t k = 0; k < curve.fractions.size(); ++k)
      fmt::print("{},{},{}\n", name, curve.fractions[k], curve.accuracy[k]);
    fmt::print(stderr, "{} area {:.6f}\n", name, aopc_area(curve));
  }
  return 0;
}

int cmd_report(const std::string& checkpoint, const std::string& out) {
  const RunState state = load_checkpoint(checkpoint);
  const TaskStream stream = load_task_stream(state.config, state.seed);
  const RunReport report = make_report(state, stream);
  emit_results(report, out);
  print_summary(report, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive group sparsity continual learning"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, out, data;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> orders{"highest", "random", "lowest"};

  auto* run = app.add_subcommand("run", "train a task stream from a config");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--seed", seed, "override the config's seeds with one seed");
  run->add_option("--out", out, "output directory (overrides output_dir)");

  auto* resume = app.add_subcommand("resume", "continue a run from a checkpoint");
  resume->add_option("checkpoint", checkpoint)->required();
  resume->add_option("--out", out, "output directory (overrides output_dir)");

  auto* aopc = app.add_subcommand("aopc", "pruning curves for a checkpoint, as CSV on stdout");
  aopc->add_option("checkpoint", checkpoint)->required();
  aopc->add_option("--data", data, "config whose task stream to evaluate on");
  aopc->add_option("--order", orders, "pruning orders")
      ->check(CLI::IsMember({"highest", "lowest", "random"}));

  auto* report = app.add_subcommand("report", "re-emit results from a checkpoint");
  report->add_option("checkpoint", checkpoint)->required();
  report->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out);
    if (*resume) return cmd_resume(checkpoint, out);
    if (*aopc) return cmd_aopc(checkpoint, data, orders);
    return cmd_report(checkpoint, out);
  } catch (const agscl::NumericError& e) {
    fmt::print(stderr, "numeric abort: {}\n", e.what());
    return 3;
  } catch (const agscl::DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return 2;
  } catch (const agscl::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "io error: {}\n", e.what());
    return 2;
  }
}
