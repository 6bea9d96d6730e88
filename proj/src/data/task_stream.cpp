#include "erd/data/task_stream.hpp"

#include <fstream>
#include "json.hpp"
#include <numeric>
#include <set>

#include "erd/errors.hpp"
#include "erd/rng.hpp"

namespace erd::data {

std::vector<ClassData> TaskStream::classes_up_to(std::size_t number) const {
  std::vector<ClassData> out;
  for (std::size_t t = 0; t < number && t < tasks.size(); ++t) {
    out.insert(out.end(), tasks[t].classes.begin(), tasks[t].classes.end());
  }
  return out;
}

TaskStream build_task_stream(std::span<const ClassData> classes, std::size_t n_tasks,
                             std::size_t classes_per_task, std::size_t n_meta_test,
                             std::uint64_t seed) {
  if (n_tasks == 0 || classes_per_task == 0) {
    throw ValidationError("task stream needs at least one task with one class");
  }
  if (classes.size() != n_tasks * classes_per_task + n_meta_test) {
    throw ValidationError("task stream: " + std::to_string(classes.size()) + " classes but " +
                          std::to_string(n_tasks) + "x" + std::to_string(classes_per_task) +
                          " + " + std::to_string(n_meta_test) + " requested");
  }
  std::vector<std::size_t> order(classes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  TaskStream stream;
  std::size_t cursor = 0;
  for (; cursor < n_meta_test; ++cursor) stream.meta_test.push_back(classes[order[cursor]]);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    Task task;
    task.number = t + 1;
    for (std::size_t c = 0; c < classes_per_task; ++c) {
      task.classes.push_back(classes[order[cursor++]]);
    }
    stream.tasks.push_back(std::move(task));
  }
  validate_stream(stream);
  return stream;
}

void validate_stream(const TaskStream& stream) {
  if (stream.tasks.empty()) throw ValidationError("task stream has no tasks");
  const std::size_t per_task = stream.tasks.front().classes.size();
  std::set<int> seen;
  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const auto& task = stream.tasks[t];
    if (task.number != t + 1) throw ValidationError("task numbers must run 1..M in order");
    if (task.classes.empty() || task.classes.size() != per_task) {
      throw ValidationError("tasks must all have the same non-zero number of classes");
    }
    for (const auto& c : task.classes) {
      if (!seen.insert(c.id).second) {
        throw ValidationError("class " + std::to_string(c.id) + " appears in two tasks");
      }
    }
  }
  for (const auto& c : stream.meta_test) {
    if (!seen.insert(c.id).second) {
      throw ValidationError("meta-test class " + std::to_string(c.id) + " overlaps a task");
    }
  }
}

void save_stream_layout(const std::filesystem::path& path, const TaskStream& stream) {
  nlohmann::json layout;
  layout["tasks"] = nlohmann::json::array();
  for (const auto& task : stream.tasks) {
    std::vector<int> ids;
    for (const auto& c : task.classes) ids.push_back(c.id);
    layout["tasks"].push_back({{"number", task.number}, {"classes", ids}});
  }
  std::vector<int> meta;
  for (const auto& c : stream.meta_test) meta.push_back(c.id);
  layout["meta_test"] = meta;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << layout.dump(2) << '\n';
}

}  // namespace erd::data
