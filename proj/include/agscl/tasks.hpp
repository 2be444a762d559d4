#pragma once

#include "agscl/nn.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace agscl {

/// One supervised task. Labels of every partition are dense in 0..classes-1.
struct Task {
  std::size_t id = 0;
  std::size_t classes = 0;
  std::string name;
  Dataset train;
  Dataset val;
  Dataset test;
};

struct TaskStream {
  std::vector<Task> tasks;

  std::size_t size() const { return tasks.size(); }
  std::vector<std::size_t> head_dims() const;
};

/// Images flattened row-major and scaled to [0, 1].
struct IdxDataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Matrix images;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
};

/// Parses a big-endian IDX image file (magic 0x00000803) and label file (0x00000801).
/// Gzip-compressed files are inflated transparently. Throws FormatError naming the byte
/// offset of the first problem, DataError when a file cannot be opened.
IdxDataset load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path);

struct SplitOptions {
  double val_fraction = 0.1;
  /// Only used when no separate test set is supplied.
  double test_fraction = 0.1;
};

/// Gaussian-cluster tasks: per class a mean on the sphere of radius `separation`, unit
/// covariance, `samples_per_class` points; each task is split 80/10/10 into train/val/test.
TaskStream synth_tasks(std::size_t n_tasks, std::size_t classes_per_task, std::size_t dim,
                       std::size_t samples_per_class, double separation, std::uint64_t seed);

/// Task j holds exactly the examples whose label is in `partition[j]`, relabelled by position
/// within the cell. Throws ConfigError for overlapping or empty cells.
TaskStream split_tasks(const IdxDataset& train, const IdxDataset* test,
                       const std::vector<std::vector<int>>& partition, std::uint64_t seed,
                       const SplitOptions& options = {});

/// Task 0 sees the original pixels; task j > 0 a fixed seeded permutation of them.
TaskStream permuted_tasks(const IdxDataset& train, const IdxDataset* test, std::size_t n_tasks,
                          std::uint64_t seed, const SplitOptions& options = {});

/// The pixel permutation permuted_tasks uses for task `task` (identity for task 0).
std::vector<std::size_t> task_permutation(std::size_t pixels, std::size_t task,
                                          std::uint64_t seed);

}  // namespace agscl
