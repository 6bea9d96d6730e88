#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "erd/data/dataset.hpp"

namespace erd::data {

/// One incremental task. Tasks are numbered from 1.
struct Task {
  std::size_t number = 1;
  std::vector<ClassData> classes;
};

/// Disjoint class groups arriving in order, plus meta-test classes that never
/// appear in any task.
struct TaskStream {
  std::vector<Task> tasks;
  std::vector<ClassData> meta_test;

  std::size_t n_tasks() const { return tasks.size(); }
  const Task& task(std::size_t number) const { return tasks.at(number - 1); }
  /// All classes of tasks 1..number.
  std::vector<ClassData> classes_up_to(std::size_t number) const;
};

/// Shuffles classes with `seed`; the first n_meta_test become the meta-test
/// set and the rest are cut, in order, into n_tasks groups of
/// classes_per_task.
TaskStream build_task_stream(std::span<const ClassData> classes, std::size_t n_tasks,
                             std::size_t classes_per_task, std::size_t n_meta_test,
                             std::uint64_t seed);

/// Throws ValidationError unless tasks are non-empty, equally sized and
/// pairwise disjoint, and meta_test is disjoint from every task.
void validate_stream(const TaskStream& stream);

/// Class ids per task and for the meta-test set, as JSON.
void save_stream_layout(const std::filesystem::path& path, const TaskStream& stream);

}  // namespace erd::data
