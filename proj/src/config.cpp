#include "agscl/errors.hpp"
#include "agscl/runner.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <set>

namespace agscl {

using nlohmann::json;

namespace {

// Rejects keys outside `allowed` so that a typo never silently falls back to a default.
void check_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

LayerConfig parse_layer(const json& j) {
  check_keys(j, {"type", "units", "filters", "kernel", "stride", "padding"}, "layer");
  LayerConfig layer;
  std::string type = "dense";
  read(j, "type", type);
  if (type == "dense") {
    layer.kind = LayerKind::dense;
    read(j, "units", layer.units);
  } else if (type == "conv") {
    layer.kind = LayerKind::conv2d;
    read(j, "filters", layer.units);
    read(j, "kernel", layer.kernel);
    read(j, "stride", layer.stride);
    read(j, "padding", layer.padding);
  } else {
    throw ConfigError(fmt::format("unknown layer type '{}'", type));
  }
  return layer;
}

json layer_json(const LayerConfig& layer) {
  if (layer.kind == LayerKind::dense) return {{"type", "dense"}, {"units", layer.units}};
  return {{"type", "conv"},
          {"filters", layer.units},
          {"kernel", layer.kernel},
          {"stride", layer.stride},
          {"padding", layer.padding}};
}

}  // namespace

std::string to_string(Method method) { return method == Method::agscl ? "agscl" : "finetune"; }

std::vector<LayerSpec> ModelConfig::layer_specs() const {
  std::vector<LayerSpec> specs;
  std::size_t c = channels, h = height, w = width;
  bool flat = false;
  for (const auto& layer : layers) {
    if (layer.kind == LayerKind::conv2d) {
      if (flat) throw ConfigError("conv layer after a dense layer");
      ConvGeometry g{c, h, w, layer.kernel, layer.kernel, layer.stride, layer.padding};
      if (layer.kernel == 0 || layer.stride == 0 || layer.kernel > h + 2 * layer.padding ||
          layer.kernel > w + 2 * layer.padding)
        throw ConfigError("conv kernel does not fit its input");
      specs.push_back(LayerSpec::conv2d(g, layer.units));
      c = layer.units;
      h = g.out_height();
      w = g.out_width();
    } else {
      specs.push_back(LayerSpec::dense(flat ? specs.back().output_width() : c * h * w, layer.units));
      flat = true;
    }
  }
  validate_specs(specs);
  return specs;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  check_keys(j,
             {"method", "model", "tasks", "hyper", "ablations", "seeds", "seed", "output_dir",
              "shuffle_tasks", "zero_old_head_inputs", "finetune_reference", "write_checkpoints",
              "aopc_fractions"},
             "config");
  ExperimentConfig c;
  std::string method = "agscl";
  read(j, "method", method);
  if (method == "agscl")
    c.method = Method::agscl;
  else if (method == "finetune")
    c.method = Method::finetune;
  else
    throw ConfigError(fmt::format("unknown method '{}'", method));

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"input", "layers"}, "model");
    if (m.contains("input")) {
      const json& in = m.at("input");
      check_keys(in, {"channels", "height", "width"}, "model.input");
      c.model.channels = 1;
      c.model.height = 1;
      read(in, "channels", c.model.channels);
      read(in, "height", c.model.height);
      read(in, "width", c.model.width);
    }
    if (m.contains("layers"))
      for (const auto& layer : m.at("layers")) c.model.layers.push_back(parse_layer(layer));
  }
  if (c.model.layers.empty()) {
    c.model.channels = 1;
    c.model.height = 28;
    c.model.width = 28;
    c.model.layers = {LayerConfig{LayerKind::dense, 100}, LayerConfig{LayerKind::dense, 100}};
  }

  if (j.contains("tasks")) {
    const json& t = j.at("tasks");
    check_keys(t,
               {"kind", "train_images", "train_labels", "test_images", "test_labels", "partition",
                "n_tasks", "classes_per_task", "dim", "samples_per_class", "separation",
                "val_fraction", "test_fraction"},
               "tasks");
    read(t, "kind", c.tasks.kind);
    read(t, "train_images", c.tasks.train_images);
    read(t, "train_labels", c.tasks.train_labels);
    read(t, "test_images", c.tasks.test_images);
    read(t, "test_labels", c.tasks.test_labels);
    read(t, "partition", c.tasks.partition);
    read(t, "n_tasks", c.tasks.n_tasks);
    read(t, "classes_per_task", c.tasks.classes_per_task);
    read(t, "dim", c.tasks.dim);
    read(t, "samples_per_class", c.tasks.samples_per_class);
    read(t, "separation", c.tasks.separation);
    read(t, "val_fraction", c.tasks.split.val_fraction);
    read(t, "test_fraction", c.tasks.split.test_fraction);
  }
  if (c.tasks.kind == "split_idx" && c.tasks.partition.empty())
    c.tasks.partition = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}};

  if (j.contains("hyper")) {
    const json& h = j.at("hyper");
    check_keys(h,
               {"mu", "lambda", "rho", "eta", "lr", "epochs", "batch_size", "patience",
                "decay_factor", "lr_min", "prox_uses_current_lr", "penalty_scale"},
               "hyper");
    read(h, "mu", c.hyper.mu);
    read(h, "lambda", c.hyper.lambda);
    read(h, "rho", c.hyper.rho);
    read(h, "eta", c.hyper.eta);
    read(h, "lr", c.hyper.lr);
    read(h, "epochs", c.hyper.epochs);
    read(h, "batch_size", c.hyper.batch_size);
    read(h, "patience", c.hyper.plateau.patience);
    read(h, "decay_factor", c.hyper.plateau.factor);
    read(h, "lr_min", c.hyper.plateau.lr_min);
    read(h, "prox_uses_current_lr", c.hyper.prox_uses_current_lr);
    // Grid knob: multiplies both penalty weights. Resolved away in to_json.
    double scale = 1.0;
    read(h, "penalty_scale", scale);
    if (!(scale >= 0.0)) throw ConfigError("penalty_scale must be >= 0");
    c.hyper.mu *= scale;
    c.hyper.lambda *= scale;
  }

  if (j.contains("ablations")) {
    const json& a = j.at("ablations");
    check_keys(a, {"no_pgd", "tau", "no_zero_init", "no_rand_init", "prox_per_minibatch"},
               "ablations");
    read(a, "prox_per_minibatch", c.hyper.prox_per_minibatch);
    read(a, "no_pgd", c.ablations.no_pgd);
    read(a, "no_zero_init", c.ablations.no_zero_init);
    read(a, "no_rand_init", c.ablations.no_rand_init);
    if (a.contains("tau")) {
      if (!c.ablations.no_pgd) throw ConfigError("tau is only meaningful with no_pgd");
      read(a, "tau", c.ablations.tau);
    }
  }

  if (j.contains("seed") && j.contains("seeds")) throw ConfigError("give either seed or seeds");
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    read(j, "seed", seed);
    c.seeds = {seed};
  }
  read(j, "seeds", c.seeds);
  read(j, "output_dir", c.output_dir);
  read(j, "shuffle_tasks", c.shuffle_tasks);
  read(j, "zero_old_head_inputs", c.zero_old_head_inputs);
  read(j, "finetune_reference", c.finetune_reference);
  read(j, "write_checkpoints", c.write_checkpoints);
  read(j, "aopc_fractions", c.aopc_fractions);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  ExperimentConfig c = from_json(j);
  // Relative data paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (std::string* p : {&c.tasks.train_images, &c.tasks.train_labels, &c.tasks.test_images,
                         &c.tasks.test_labels})
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal();
  return c;
}

void ExperimentConfig::validate() const {
  hyper.validate();
  model.layer_specs();
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (ablations.no_pgd && !(ablations.tau > 0.0))
    throw ConfigError(fmt::format("tau must be > 0, got {}", ablations.tau));
  if (ablations.no_pgd && method != Method::agscl)
    throw ConfigError("no_pgd applies to the agscl method only");
  const auto& t = tasks;
  if (t.kind == "split_idx" || t.kind == "permuted_idx") {
    if (t.train_images.empty() || t.train_labels.empty())
      throw ConfigError("IDX task streams need train_images and train_labels");
    if (t.test_images.empty() != t.test_labels.empty())
      throw ConfigError("give both test_images and test_labels or neither");
  } else if (t.kind != "synthetic") {
    throw ConfigError(fmt::format("unknown task stream kind '{}'", t.kind));
  }
  if (aopc_fractions.empty() || aopc_fractions.front() != 0.0)
    throw ConfigError("aopc_fractions must start at 0");
}

json ExperimentConfig::to_json() const {
  json layers = json::array();
  for (const auto& l : model.layers) layers.push_back(layer_json(l));
  json t = {{"kind", tasks.kind}, {"val_fraction", tasks.split.val_fraction}};
  if (tasks.kind == "synthetic") {
    t["n_tasks"] = tasks.n_tasks;
    t["classes_per_task"] = tasks.classes_per_task;
    t["dim"] = tasks.dim;
    t["samples_per_class"] = tasks.samples_per_class;
    t["separation"] = tasks.separation;
  } else {
    t["train_images"] = tasks.train_images;
    t["train_labels"] = tasks.train_labels;
    if (!tasks.test_images.empty()) {
      t["test_images"] = tasks.test_images;
      t["test_labels"] = tasks.test_labels;
    } else {
      t["test_fraction"] = tasks.split.test_fraction;
    }
    if (tasks.kind == "split_idx")
      t["partition"] = tasks.partition;
    else
      t["n_tasks"] = tasks.n_tasks;
  }
  json ablation = {{"no_pgd", ablations.no_pgd},
                   {"no_zero_init", ablations.no_zero_init},
                   {"no_rand_init", ablations.no_rand_init},
                   {"prox_per_minibatch", hyper.prox_per_minibatch}};
  if (ablations.no_pgd) ablation["tau"] = ablations.tau;
  return {
      {"method", to_string(method)},
      {"model",
       {{"input", {{"channels", model.channels}, {"height", model.height}, {"width", model.width}}},
        {"layers", layers}}},
      {"tasks", t},
      {"hyper",
       {{"mu", hyper.mu},
        {"lambda", hyper.lambda},
        {"rho", hyper.rho},
        {"eta", hyper.eta},
        {"lr", hyper.lr},
        {"epochs", hyper.epochs},
        {"batch_size", hyper.batch_size},
        {"patience", hyper.plateau.patience},
        {"decay_factor", hyper.plateau.factor},
        {"lr_min", hyper.plateau.lr_min},
        {"prox_uses_current_lr", hyper.prox_uses_current_lr}}},
      {"ablations", ablation},
      {"seeds", seeds},
      {"output_dir", output_dir},
      {"shuffle_tasks", shuffle_tasks},
      {"zero_old_head_inputs", zero_old_head_inputs},
      {"finetune_reference", finetune_reference},
      {"write_checkpoints", write_checkpoints},
      {"aopc_fractions", aopc_fractions},
  };
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  std::filesystem::path out(config.output_dir);
  if (out.is_relative())
    if (const char* root = std::getenv("AGSCL_OUTPUT_ROOT"); root != nullptr && *root != '\0')
      return std::filesystem::path(root) / out;
  return out;
}

}  // namespace agscl
