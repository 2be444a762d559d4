#include "agscl/errors.hpp"
#include "agscl/runner.hpp"

#include <fmt/format.h>

#include <fstream>

namespace agscl {

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json ratio_json(const TaskRatio& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& t : r.per_task) per.push_back(optional_json(t));
  return {{"value", optional_json(r.value)}, {"per_task", per}};
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

// Shortest representation that round-trips; CSVs stay bitwise reproducible.
std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

nlohmann::json summary_json(const RunReport& report) {
  nlohmann::json j;
  j["method"] = to_string(report.method);
  j["seed"] = report.seed;
  j["tasks"] = report.accuracy.tasks();
  j["P"] = optional_json(report.plasticity.value);
  j["S"] = optional_json(report.stability.value);
  j["plasticity"] = ratio_json(report.plasticity);
  j["stability"] = ratio_json(report.stability);
  j["final_average_accuracy"] = report.final_average_accuracy();
  j["average_accuracy"] = report.average_accuracy;
  j["reference_accuracy"] = report.reference;

  nlohmann::json sparsity = nlohmann::json::array();
  nlohmann::json used = nlohmann::json::array();
  for (const auto& row : report.capacity) {
    sparsity.push_back(optional_json(row.sparsity));
    used.push_back(row.used_capacity);
  }
  j["sparsity"] = sparsity;
  j["used_capacity"] = used;

  nlohmann::json areas = nlohmann::json::object();
  for (const auto& c : report.aopc) areas[to_string(c.order)] = aopc_area(c);
  j["aopc_area"] = areas;
  j["reg_param_count"] = {{"nodes", report.reg.nodes},
                          {"weights", report.reg.weights},
                          {"ratio", report.reg.weights ? report.reg.ratio() : 0.0}};
  j["config"] = report.config;
  return j;
}

void emit_results(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  auto acc = open_out(dir / "accuracy_matrix.csv");
  acc << "after_task,task,accuracy\n";
  for (std::size_t i = 0; i < report.accuracy.tasks(); ++i)
    for (std::size_t j = 0; j <= i; ++j)
      acc << i + 1 << ',' << j + 1 << ',' << num(report.accuracy.at(i, j)) << '\n';

  auto cap = open_out(dir / "capacity.csv");
  cap << "task,sparsity,used_capacity,g0_size,reg_param_count\n";
  for (const auto& row : report.capacity) {
    cap << row.task + 1 << ',' << (row.sparsity ? num(*row.sparsity) : "") << ','
        << num(row.used_capacity) << ',' << (row.g0_size ? std::to_string(*row.g0_size) : "")
        << ',' << row.reg_param_count << '\n';
  }

  auto aopc = open_out(dir / "aopc.csv");
  aopc << "mode,fraction,accuracy\n";
  for (const auto& c : report.aopc)
    for (std::size_t k = 0; k < c.fractions.size(); ++k)
      aopc << to_string(c.order) << ',' << num(c.fractions[k]) << ',' << num(c.accuracy[k])
           << '\n';

  open_out(dir / "summary.json") << summary_json(report).dump(2) << '\n';
  open_out(dir / "config.json") << report.config.dump(2) << '\n';

  auto timing = open_out(dir / "timing.csv");
  timing << "task,wall_seconds\n";
  for (std::size_t t = 0; t < report.wall_seconds.size(); ++t)
    timing << t + 1 << ',' << num(report.wall_seconds[t]) << '\n';
}

}  // namespace agscl
