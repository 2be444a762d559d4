#include "agscl/tasks.hpp"

#include "agscl/errors.hpp"
#include "agscl/rng.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace agscl {

std::vector<std::size_t> TaskStream::head_dims() const {
  std::vector<std::size_t> dims;
  for (const auto& t : tasks) dims.push_back(t.classes);
  return dims;
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw DataError(fmt::format("cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof buf);
    if (n < 0) {
      int code = 0;
      const std::string msg = gzerror(f, &code);
      gzclose(f);
      throw FormatError(fmt::format("{}: read failed at byte {}: {}", path.string(), bytes.size(),
                                    msg));
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), buf, buf + n);
  }
  gzclose(f);
  return bytes;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t offset,
                   const std::filesystem::path& path) {
  if (offset + 4 > b.size())
    throw FormatError(fmt::format("{}: header truncated at byte {} (file has {} bytes)",
                                  path.string(), offset, b.size()));
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

void expect_magic(std::uint32_t magic, std::uint32_t want, const std::filesystem::path& path) {
  if (magic == want) return;
  throw FormatError(fmt::format("{}: bad magic 0x{:08x} at byte 0, expected 0x{:08x} ({})",
                                path.string(), magic, want,
                                want == kImageMagic ? "image file" : "label file"));
}

void expect_length(std::size_t actual, std::size_t expected, const std::filesystem::path& path) {
  if (actual == expected) return;
  throw FormatError(fmt::format("{}: expected {} bytes, found {} (mismatch from byte {})",
                                path.string(), expected, actual, std::min(actual, expected)));
}

Dataset gather(const Matrix& images, const std::vector<std::size_t>& idx,
               const std::vector<int>& labels) {
  Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(idx.size()), images.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    d.inputs.row(static_cast<Eigen::Index>(r)) = images.row(static_cast<Eigen::Index>(idx[r]));
  d.labels = labels;
  return d;
}

void check_fraction(double f, const char* what) {
  if (!(f >= 0.0 && f < 1.0)) throw ConfigError(fmt::format("{} {} outside [0, 1)", what, f));
}

// Shuffles `idx` with `rng`, then cuts it into (train, val, test) by fractions of its size.
struct Cut {
  std::vector<std::size_t> train, val, test;
};

Cut cut(std::vector<std::size_t> idx, double val_fraction, double test_fraction, Rng& rng) {
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = idx.size();
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  const auto n_test =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_val + n_test >= n) throw ConfigError("split leaves no training examples");
  Cut c;
  c.val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  c.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val),
                idx.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  c.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), idx.end());
  return c;
}

std::vector<int> labels_of(const std::vector<std::size_t>& idx,
                           const std::vector<std::uint8_t>& raw,
                           const std::vector<int>& remap) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(remap[raw[i]]);
  return out;
}

}  // namespace

IdxDataset load_idx(const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
  const auto img = read_all(images_path);
  expect_magic(be32(img, 0, images_path), kImageMagic, images_path);
  const std::size_t count = be32(img, 4, images_path);
  const std::size_t rows = be32(img, 8, images_path);
  const std::size_t cols = be32(img, 12, images_path);
  expect_length(img.size(), 16 + count * rows * cols, images_path);

  const auto lab = read_all(labels_path);
  expect_magic(be32(lab, 0, labels_path), kLabelMagic, labels_path);
  const std::size_t label_count = be32(lab, 4, labels_path);
  expect_length(lab.size(), 8 + label_count, labels_path);
  if (label_count != count)
    throw FormatError(fmt::format("{} has {} images but {} has {} labels", images_path.string(),
                                  count, labels_path.string(), label_count));

  IdxDataset d;
  d.rows = rows;
  d.cols = cols;
  d.images.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(rows * cols));
  const std::uint8_t* px = img.data() + 16;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t k = 0; k < rows * cols; ++k)
      d.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          static_cast<double>(px[i * rows * cols + k]) / 255.0;
  d.labels.assign(lab.begin() + 8, lab.end());
  return d;
}

TaskStream synth_tasks(std::size_t n_tasks, std::size_t classes_per_task, std::size_t dim,
                       std::size_t samples_per_class, double separation, std::uint64_t seed) {
  if (n_tasks == 0 || classes_per_task == 0 || dim == 0 || samples_per_class == 0)
    throw ConfigError("synthetic task counts must be >= 1");
  if (!(separation >= 0.0)) throw ConfigError("separation must be >= 0");
  Rng rng = substream(seed, "synth");
  std::normal_distribution<double> normal(0.0, 1.0);
  TaskStream stream;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    Matrix means(static_cast<Eigen::Index>(classes_per_task), static_cast<Eigen::Index>(dim));
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
      for (Eigen::Index k = 0; k < means.cols(); ++k) means(c, k) = normal(rng);
      means.row(c) *= separation / means.row(c).norm();
    }
    const std::size_t n = classes_per_task * samples_per_class;
    Matrix points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<Eigen::Index>(i / samples_per_class);
      labels[i] = static_cast<int>(c);
      for (Eigen::Index k = 0; k < points.cols(); ++k)
        points(static_cast<Eigen::Index>(i), k) = means(c, k) + normal(rng);
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const Cut parts = cut(std::move(idx), 0.1, 0.1, rng);
    const auto take = [&](const std::vector<std::size_t>& ids) {
      std::vector<int> y;
      for (const auto i : ids) y.push_back(labels[i]);
      return gather(points, ids, y);
    };
    Task task;
    task.id = t;
    task.classes = classes_per_task;
    task.name = fmt::format("synth-{}", t);
    task.train = take(parts.train);
    task.val = take(parts.val);
    task.test = take(parts.test);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream split_tasks(const IdxDataset& train, const IdxDataset* test,
                       const std::vector<std::vector<int>>& partition, std::uint64_t seed,
                       const SplitOptions& options) {
  check_fraction(options.val_fraction, "val_fraction");
  check_fraction(options.test_fraction, "test_fraction");
  if (partition.empty()) throw ConfigError("empty class partition");
  std::set<int> used;
  for (const auto& cell : partition) {
    if (cell.empty()) throw ConfigError("empty cell in class partition");
    for (const int label : cell) {
      if (label < 0 || label > 255) throw ConfigError(fmt::format("label {} out of range", label));
      if (!used.insert(label).second)
        throw ConfigError(fmt::format("label {} appears in more than one task", label));
    }
  }

  Rng rng = substream(seed, "split");
  TaskStream stream;
  for (std::size_t j = 0; j < partition.size(); ++j) {
    std::vector<int> remap(256, -1);
    for (std::size_t k = 0; k < partition[j].size(); ++k)
      remap[static_cast<std::size_t>(partition[j][k])] = static_cast<int>(k);
    const auto members = [&](const IdxDataset& d) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < d.size(); ++i)
        if (remap[d.labels[i]] >= 0) idx.push_back(i);
      return idx;
    };
    const Cut parts = cut(members(train), options.val_fraction,
                          test != nullptr ? 0.0 : options.test_fraction, rng);
    Task task;
    task.id = j;
    task.classes = partition[j].size();
    task.name = "split";
    for (const int label : partition[j]) task.name += fmt::format("-{}", label);
    task.train = gather(train.images, parts.train, labels_of(parts.train, train.labels, remap));
    task.val = gather(train.images, parts.val, labels_of(parts.val, train.labels, remap));
    if (test != nullptr) {
      const auto ids = members(*test);
      task.test = gather(test->images, ids, labels_of(ids, test->labels, remap));
    } else {
      task.test = gather(train.images, parts.test, labels_of(parts.test, train.labels, remap));
    }
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

std::vector<std::size_t> task_permutation(std::size_t pixels, std::size_t task,
                                          std::uint64_t seed) {
  std::vector<std::size_t> perm(pixels);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (task == 0) return perm;
  Rng rng = substream(seed, fmt::format("permute/{}", task));
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

TaskStream permuted_tasks(const IdxDataset& train, const IdxDataset* test, std::size_t n_tasks,
                          std::uint64_t seed, const SplitOptions& options) {
  if (n_tasks == 0) throw ConfigError("n_tasks must be >= 1");
  check_fraction(options.val_fraction, "val_fraction");
  check_fraction(options.test_fraction, "test_fraction");
  std::size_t classes = 0;
  for (const auto y : train.labels) classes = std::max<std::size_t>(classes, y + 1u);
  std::vector<int> identity(256);
  std::iota(identity.begin(), identity.end(), 0);

  Rng rng = substream(seed, "split");
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Cut parts =
      cut(std::move(all), options.val_fraction, test != nullptr ? 0.0 : options.test_fraction, rng);

  const auto permute = [](const Dataset& d, const std::vector<std::size_t>& perm) {
    Dataset out;
    out.labels = d.labels;
    out.inputs.resize(d.inputs.rows(), d.inputs.cols());
    for (Eigen::Index r = 0; r < d.inputs.rows(); ++r)
      for (std::size_t k = 0; k < perm.size(); ++k)
        out.inputs(r, static_cast<Eigen::Index>(k)) = d.inputs(r, static_cast<Eigen::Index>(perm[k]));
    return out;
  };

  const Dataset base_train =
      gather(train.images, parts.train, labels_of(parts.train, train.labels, identity));
  const Dataset base_val = gather(train.images, parts.val, labels_of(parts.val, train.labels, identity));
  Dataset base_test;
  if (test != nullptr) {
    std::vector<std::size_t> ids(test->size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    base_test = gather(test->images, ids, labels_of(ids, test->labels, identity));
  } else {
    base_test = gather(train.images, parts.test, labels_of(parts.test, train.labels, identity));
  }

  TaskStream stream;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const auto perm = task_permutation(static_cast<std::size_t>(train.images.cols()), t, seed);
    Task task;
    task.id = t;
    task.classes = classes;
    task.name = fmt::format("permuted-{}", t);
    task.train = permute(base_train, perm);
    task.val = permute(base_val, perm);
    task.test = permute(base_test, perm);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

}  // namespace agscl
