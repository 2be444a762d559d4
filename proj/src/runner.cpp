#include "agscl/runner.hpp"

#include "agscl/errors.hpp"
#include "agscl/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <numeric>

namespace agscl {

namespace {

constexpr const char* kBatchStream = "batch";
constexpr const char* kRandInitStream = "rand_init";

ExperimentConfig single_seed(ExperimentConfig config, std::uint64_t seed) {
  config.seeds = {seed};
  return config;
}

TrainOptions train_options(const ExperimentConfig& config) {
  TrainOptions o;
  if (config.method == Method::finetune)
    o.mode = TrainMode::plain;
  else if (config.ablations.no_pgd)
    o.mode = TrainMode::no_pgd;
  o.tau = config.ablations.tau;
  return o;
}

}  // namespace

std::optional<double> RunReport::aopc_area_of(AopcOrder order) const {
  for (const auto& c : aopc)
    if (c.order == order) return aopc_area(c);
  return std::nullopt;
}

TaskStream load_task_stream(const ExperimentConfig& config, std::uint64_t seed) {
  const auto& t = config.tasks;
  TaskStream stream;
  if (t.kind == "synthetic") {
    stream = synth_tasks(t.n_tasks, t.classes_per_task, t.dim, t.samples_per_class, t.separation,
                         seed);
  } else {
    const IdxDataset train = load_idx(t.train_images, t.train_labels);
    std::optional<IdxDataset> test;
    if (!t.test_images.empty()) test = load_idx(t.test_images, t.test_labels);
    const IdxDataset* test_ptr = test ? &*test : nullptr;
    stream = t.kind == "split_idx" ? split_tasks(train, test_ptr, t.partition, seed, t.split)
                                   : permuted_tasks(train, test_ptr, t.n_tasks, seed, t.split);
  }
  if (config.shuffle_tasks) {
    Rng rng = substream(seed, "task_order");
    std::shuffle(stream.tasks.begin(), stream.tasks.end(), rng);
    for (std::size_t i = 0; i < stream.tasks.size(); ++i) stream.tasks[i].id = i;
  }
  const std::size_t width = config.model.channels * config.model.height * config.model.width;
  for (const auto& task : stream.tasks)
    if (static_cast<std::size_t>(task.train.inputs.cols()) != width)
      throw ConfigError(fmt::format("task '{}' has {} features but the model input is {}",
                                    task.name, task.train.inputs.cols(), width));
  return stream;
}

RunState initial_state(const ExperimentConfig& config, std::uint64_t seed,
                       const TaskStream& stream) {
  RunState s;
  s.config = single_seed(config, seed);
  s.seed = seed;
  Rng init = substream(seed, "init");
  const auto heads = stream.head_dims();
  s.params = init_network(config.model.layer_specs(), heads, init);
  s.omega = OmegaRegistry(build_layout(s.params.specs), config.hyper.eta);
  s.adam = AdamState::fresh(s.params);
  s.rng_states[kBatchStream] = rng_state(substream(seed, kBatchStream));
  s.rng_states[kRandInitStream] = rng_state(substream(seed, kRandInitStream));
  s.accuracy = AccuracyMatrix(stream.size());
  return s;
}

void run_next_task(RunState& state, const TaskStream& stream) {
  if (state.completed >= stream.size()) throw UsageError("every task is already trained");
  const auto started = std::chrono::steady_clock::now();
  const ExperimentConfig& cfg = state.config;
  const std::size_t t = state.completed;
  const Task& task = stream.tasks[t];
  const GroupLayout layout = build_layout(state.params.specs);
  const TrainOptions options = train_options(cfg);

  // Work on a copy so that a numeric abort leaves the last good state intact.
  NetworkParams params = state.params;
  OmegaRegistry omega = state.omega;
  ZeroMask mask = state.mask;
  AdamState adam = AdamState::fresh(params);
  Rng batch_rng = rng_from_state(state.rng_states.at(kBatchStream));
  Rng rand_rng = rng_from_state(state.rng_states.at(kRandInitStream));
  PlateauScheduler scheduler(cfg.hyper.lr, cfg.hyper.plateau);
  const PrevParams prev = PrevParams::snapshot(params);

  train_task(params, task, t, layout, omega, prev, cfg.hyper, adam, scheduler, batch_rng, mask,
             options);

  CapacityRow row;
  row.task = t;
  const std::optional<double> tau =
      options.mode == TrainMode::no_pgd ? std::optional<double>(cfg.ablations.tau) : std::nullopt;
  row.used_capacity = used_capacity(params, prev, layout, tau);
  row.frozen_nodes = static_cast<std::size_t>(
      std::llround(row.used_capacity * static_cast<double>(layout.node_count())));

  if (cfg.method == Method::agscl) {
    update_omega(omega, mean_node_activations(params, task.train, t));
    const UnimportantSet g0 = options.mode == TrainMode::no_pgd
                                  ? derive_g0_below(omega, cfg.ablations.tau)
                                  : derive_g0(omega);
    if (!cfg.ablations.no_zero_init) {
      zero_init(params, layout, g0, mask, static_cast<std::uint32_t>(t));
      if (cfg.zero_old_head_inputs) zero_old_head_inputs(params, layout, g0, t);
    }
    if (!cfg.ablations.no_rand_init)
      row.redrawn_nodes = rand_init(params, layout, g0, mask, cfg.hyper.rho, rand_rng).size();
    row.sparsity = sparsity(g0.size(), layout.node_count());
    row.g0_size = g0.size();
    row.reg_param_count = omega.size();
  }

  AccuracyMatrix accuracy = state.accuracy;
  for (std::size_t j = 0; j <= t; ++j)
    accuracy.record(t, j, evaluate_accuracy(params, stream.tasks[j].test, j));

  state.params = std::move(params);
  state.omega = std::move(omega);
  state.mask = std::move(mask);
  state.adam = std::move(adam);
  state.rng_states[kBatchStream] = rng_state(batch_rng);
  state.rng_states[kRandInitStream] = rng_state(rand_rng);
  state.accuracy = std::move(accuracy);
  state.capacity.push_back(row);
  state.completed += 1;
  state.wall_seconds.push_back(
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
}

RunReport make_report(const RunState& state, const TaskStream& stream) {
  const std::size_t done = state.completed;
  if (done == 0) throw UsageError("no task has been trained yet");
  RunReport r;
  r.config = state.config.to_json();
  r.seed = state.seed;
  r.method = state.config.method;
  r.accuracy = AccuracyMatrix(done);
  for (std::size_t i = 0; i < done; ++i)
    for (std::size_t j = 0; j <= i; ++j) r.accuracy.record(i, j, state.accuracy.at(i, j));
  for (std::size_t i = 0; i < done; ++i) r.average_accuracy.push_back(r.accuracy.average(i));
  r.capacity = state.capacity;
  r.wall_seconds = state.wall_seconds;
  r.stability = stability(r.accuracy);
  if (state.config.method == Method::finetune) {
    for (std::size_t i = 0; i < done; ++i) r.reference.push_back(r.accuracy.at(i, i));
  } else if (state.reference.size() >= done) {
    r.reference.assign(state.reference.begin(),
                       state.reference.begin() + static_cast<std::ptrdiff_t>(done));
  }
  if (!r.reference.empty()) r.plasticity = plasticity(r.accuracy, r.reference);

  const GroupLayout layout = build_layout(state.params.specs);
  if (state.config.method == Method::agscl) {
    r.reg = reg_param_count(layout);
    std::vector<EvalSet> sets;
    for (std::size_t j = 0; j < done; ++j) sets.push_back({&stream.tasks[j].test, j});
    for (const AopcOrder order : {AopcOrder::highest, AopcOrder::random, AopcOrder::lowest}) {
      Rng rng = substream(state.seed, "aopc");
      r.aopc.push_back(aopc_curve(state.params, layout, state.omega, sets, order,
                                  state.config.aopc_fractions, rng, done));
    }
  } else {
    r.reg = {0, layout.hidden_scalar_count()};
  }
  return r;
}

RunReport continue_run(RunState state, const TaskStream& stream,
                       const std::optional<std::filesystem::path>& checkpoint_dir) {
  if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);
  while (state.completed < stream.size()) {
    try {
      run_next_task(state, stream);
    } catch (const NumericError&) {
      if (checkpoint_dir) save_checkpoint(state, *checkpoint_dir / "aborted.ckpt");
      throw;
    }
    if (checkpoint_dir)
      save_checkpoint(state, *checkpoint_dir / fmt::format("task_{}.ckpt", state.completed));
  }
  return make_report(state, stream);
}

RunReport run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& checkpoint_dir) {
  config.validate();
  const TaskStream stream = load_task_stream(config, seed);
  RunState state = initial_state(config, seed, stream);
  if (config.method == Method::agscl && config.finetune_reference) {
    ExperimentConfig baseline = config;
    baseline.method = Method::finetune;
    baseline.ablations = {};
    RunState ft = initial_state(baseline, seed, stream);
    const RunReport ft_report = continue_run(std::move(ft), stream, std::nullopt);
    state.reference = ft_report.reference;
  }
  return continue_run(std::move(state), stream, checkpoint_dir);
}

RunReport run_agscl(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.method != Method::agscl) throw ConfigError("run_agscl needs method = agscl");
  return run_experiment(config, seed);
}

RunReport run_finetune(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.method != Method::finetune) throw ConfigError("run_finetune needs method = finetune");
  return run_experiment(config, seed);
}

RunReport run_no_pgd_ablation(const ExperimentConfig& config, std::uint64_t seed) {
  if (!config.ablations.no_pgd) throw ConfigError("run_no_pgd_ablation needs ablations.no_pgd");
  if (!(config.ablations.tau > 0.0)) throw ConfigError("tau must be > 0");
  return run_experiment(config, seed);
}

}  // namespace agscl
