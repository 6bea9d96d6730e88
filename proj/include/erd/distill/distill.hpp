#pragma once

#include <string_view>

#include "erd/learners/networks.hpp"
#include "erd/sampler/episode.hpp"

namespace erd::distill {

using ad::BasicTensor;
using learners::Model;

struct LossWeights {
  double lambda_m = 0.5;
  double lambda_e = 0.5;

  void validate() const;
};

/// Which relation head scores the student embeddings in the cross-task
/// relation distillation: the frozen previous head (as printed in the
/// original formulation) or the current one.
enum class DistillHead { old_head, new_head };

std::string_view to_string(DistillHead head);
DistillHead parse_distill_head(std::string_view text);

enum class RelationDistillVariant { exemplar, cross_task };

/// Frozen deep copy of the model at the end of the previous task.
template <typename T>
class TeacherSnapshot {
 public:
  explicit TeacherSnapshot(const Model<T>& model);

  const Model<T>& model() const { return model_; }

 private:
  Model<T> model_;
};

/// sum over query rows of KL[ teacher probs || student probs ], each side
/// building prototypes from its own embedding of the same support set.
/// Gradients reach only the student.
template <typename T>
BasicTensor<T> proto_distill(const TeacherSnapshot<T>* teacher,
                             const learners::EmbeddingNet<T>& student,
                             const sampler::Episode& episode);

/// sum over (support, query) pairs of the squared difference between the
/// teacher-path relation score and the student-path score.
template <typename T>
BasicTensor<T> relation_distill(const TeacherSnapshot<T>* teacher, const Model<T>& student,
                                const sampler::Episode& episode,
                                RelationDistillVariant variant,
                                DistillHead cross_task_head = DistillHead::old_head);

/// Dispatches on the learner type. The relation variant follows the episode
/// kind.
template <typename T>
BasicTensor<T> distill_loss(const TeacherSnapshot<T>* teacher, const Model<T>& student,
                            const sampler::Episode& episode,
                            DistillHead cross_task_head = DistillHead::old_head);

/// meta + lambda_m * dist_m + lambda_e * dist_e. Undefined distillation
/// tensors count as zero. Throws TrainingError on a non-finite term.
template <typename T>
BasicTensor<T> combined_loss(const BasicTensor<T>& meta, const BasicTensor<T>& dist_m,
                             const BasicTensor<T>& dist_e, const LossWeights& weights);

double combined_loss(double meta, double dist_m, double dist_e, const LossWeights& weights);

}  // namespace erd::distill
