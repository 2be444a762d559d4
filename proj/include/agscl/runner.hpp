#pragma once

#include "agscl/ags_optim.hpp"
#include "agscl/group_index.hpp"
#include "agscl/importance.hpp"
#include "agscl/metrics.hpp"
#include "agscl/nn.hpp"
#include "agscl/tasks.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace agscl {

enum class Method { agscl, finetune };

struct LayerConfig {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;  ///< dense units or conv filters
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct ModelConfig {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 784;
  std::vector<LayerConfig> layers;

  std::vector<LayerSpec> layer_specs() const;
};

struct TaskStreamConfig {
  std::string kind = "split_idx";  ///< split_idx | permuted_idx | synthetic
  std::string train_images, train_labels, test_images, test_labels;
  std::vector<std::vector<int>> partition;
  std::size_t n_tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t dim = 20;
  std::size_t samples_per_class = 100;
  double separation = 3.0;
  SplitOptions split{};
};

struct AblationConfig {
  bool no_pgd = false;
  double tau = 1e-4;
  bool no_zero_init = false;
  bool no_rand_init = false;
};

/// Everything one experiment needs. Parsed from a JSON file; `to_json` yields the fully
/// resolved form (every default filled in) that runs write beside their outputs.
struct ExperimentConfig {
  Method method = Method::agscl;
  ModelConfig model;
  TaskStreamConfig tasks;
  Hyperparams hyper;
  AblationConfig ablations;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs/default";
  bool shuffle_tasks = false;
  /// Also zero the columns of already-trained heads that read unimportant last-layer nodes.
  bool zero_old_head_inputs = false;
  /// Run the fine-tuning baseline first (same seed) to obtain A* for plasticity.
  bool finetune_reference = false;
  bool write_checkpoints = true;
  std::vector<double> aopc_fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Resolves `output_dir` against $AGSCL_OUTPUT_ROOT when it is relative and the variable is set.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// Builds the task stream a config describes, in training order for `seed`.
TaskStream load_task_stream(const ExperimentConfig& config, std::uint64_t seed);

/// Per-task capacity bookkeeping. Fields that only exist for AGS-CL are empty for fine-tuning.
struct CapacityRow {
  std::size_t task = 0;
  std::optional<double> sparsity;
  double used_capacity = 0.0;
  std::optional<std::size_t> g0_size;
  std::size_t frozen_nodes = 0;
  std::size_t reg_param_count = 0;
  std::size_t redrawn_nodes = 0;
};

/// Complete training state at a task boundary; what checkpoints hold.
struct RunState {
  ExperimentConfig config;  ///< resolved, with `seeds` holding just this run's seed
  std::uint64_t seed = 0;
  std::size_t completed = 0;
  NetworkParams params;
  OmegaRegistry omega;
  ZeroMask mask;
  AdamState adam;
  std::map<std::string, std::string> rng_states;
  AccuracyMatrix accuracy;
  std::vector<CapacityRow> capacity;
  std::vector<double> reference;  ///< A* from the fine-tuning baseline, when available
  std::vector<double> wall_seconds;
};

struct RunReport {
  nlohmann::json config;
  std::uint64_t seed = 0;
  Method method = Method::agscl;
  AccuracyMatrix accuracy;
  std::vector<double> average_accuracy;
  std::vector<CapacityRow> capacity;
  std::vector<double> reference;
  TaskRatio plasticity;
  TaskRatio stability;
  std::vector<AopcCurve> aopc;
  RegParamCount reg;
  std::vector<double> wall_seconds;

  double final_average_accuracy() const { return average_accuracy.back(); }
  std::optional<double> aopc_area_of(AopcOrder order) const;
};

/// Fresh state before the first task.
RunState initial_state(const ExperimentConfig& config, std::uint64_t seed,
                       const TaskStream& stream);

/// Trains the next task and performs the post-task bookkeeping (Ω update, G₀, zero-init then
/// rand-init for AGS-CL), then evaluates every task seen so far. On NumericError the state is
/// left as it was before the call and the error propagates.
void run_next_task(RunState& state, const TaskStream& stream);

/// Metrics over the completed tasks (P, S, AOPC on the final model).
RunReport make_report(const RunState& state, const TaskStream& stream);

/// Runs from `state` to the end of the stream, checkpointing after every task into
/// `checkpoint_dir` when given. A numeric abort writes `aborted.ckpt` there and rethrows.
RunReport continue_run(RunState state, const TaskStream& stream,
                       const std::optional<std::filesystem::path>& checkpoint_dir);

/// Whole experiment for one seed, including the fine-tuning reference when configured.
RunReport run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

RunReport run_agscl(const ExperimentConfig& config, std::uint64_t seed);
RunReport run_finetune(const ExperimentConfig& config, std::uint64_t seed);
/// Throws ConfigError unless `ablations.no_pgd` is set with tau > 0.
RunReport run_no_pgd_ablation(const ExperimentConfig& config, std::uint64_t seed);

/// Binary checkpoint: magic, version, payload length, payload, CRC-32 of the payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string encode_checkpoint(const RunState& state);
RunState decode_checkpoint(const std::string& bytes);
void save_checkpoint(const RunState& state, const std::filesystem::path& path);
RunState load_checkpoint(const std::filesystem::path& path);

/// Writes accuracy_matrix.csv, capacity.csv, aopc.csv, summary.json, config.json and
/// timing.csv into `dir`. Everything except timing.csv is a pure function of config and seed.
void emit_results(const RunReport& report, const std::filesystem::path& dir);
nlohmann::json summary_json(const RunReport& report);

std::string to_string(Method method);

}  // namespace agscl
