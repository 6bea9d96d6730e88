#include "erd/distill/distill.hpp"

#include <cmath>

#include "erd/autodiff/ops.hpp"
#include "erd/errors.hpp"
#include "erd/learners/episodic.hpp"

namespace erd::distill {

void LossWeights::validate() const {
  if (!std::isfinite(lambda_m) || !std::isfinite(lambda_e) || lambda_m < 0 || lambda_e < 0) {
    throw ValidationError("loss weights must be finite and >= 0");
  }
}

std::string_view to_string(DistillHead head) {
  return head == DistillHead::old_head ? "old" : "new";
}

DistillHead parse_distill_head(std::string_view text) {
  if (text == "old") return DistillHead::old_head;
  if (text == "new") return DistillHead::new_head;
  throw ValidationError("m_distill_head must be 'old' or 'new', got '" + std::string(text) + "'");
}

template <typename T>
TeacherSnapshot<T>::TeacherSnapshot(const Model<T>& model) : model_(model.clone()) {
  model_.set_trainable(false);
  for (auto& p : model_.parameters()) p.drop_grad();
}

namespace {

template <typename T>
void require_teacher(const TeacherSnapshot<T>* teacher, const sampler::Episode& episode) {
  if (teacher == nullptr) throw PreconditionError("distillation needs a teacher snapshot");
  if (episode.kind == sampler::EpisodeKind::standard) {
    throw PreconditionError("distillation runs on cross-task or exemplar sub-episodes");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> proto_distill(const TeacherSnapshot<T>* teacher,
                             const learners::EmbeddingNet<T>& student,
                             const sampler::Episode& episode) {
  require_teacher(teacher, episode);
  BasicTensor<T> target;
  {
    ad::NoGradScope<T> no_grad;
    target = learners::proto_probabilities(teacher->model().embed, episode);
  }
  const auto predicted = learners::proto_probabilities(student, episode);
  return ad::kl_divergence(target, predicted);
}

template <typename T>
BasicTensor<T> relation_distill(const TeacherSnapshot<T>* teacher, const Model<T>& student,
                                const sampler::Episode& episode,
                                RelationDistillVariant variant, DistillHead cross_task_head) {
  require_teacher(teacher, episode);
  const auto& old_model = teacher->model();
  if (!old_model.relation || !student.relation) {
    throw PreconditionError("relation distillation needs relation modules on both models");
  }
  BasicTensor<T> target;
  {
    ad::NoGradScope<T> no_grad;
    target = learners::relation_scores(old_model.embed, *old_model.relation, episode);
  }
  const bool old_head =
      variant == RelationDistillVariant::cross_task && cross_task_head == DistillHead::old_head;
  const auto& head = old_head ? *old_model.relation : *student.relation;
  const auto predicted = learners::relation_scores(student.embed, head, episode);
  return ad::scale(ad::mse(target, predicted), static_cast<double>(predicted.size()));
}

template <typename T>
BasicTensor<T> distill_loss(const TeacherSnapshot<T>* teacher, const Model<T>& student,
                            const sampler::Episode& episode, DistillHead cross_task_head) {
  if (student.type == learners::LearnerType::proto) {
    return proto_distill(teacher, student.embed, episode);
  }
  const auto variant = episode.kind == sampler::EpisodeKind::exemplar
                           ? RelationDistillVariant::exemplar
                           : RelationDistillVariant::cross_task;
  return relation_distill(teacher, student, episode, variant, cross_task_head);
}

template <typename T>
BasicTensor<T> combined_loss(const BasicTensor<T>& meta, const BasicTensor<T>& dist_m,
                             const BasicTensor<T>& dist_e, const LossWeights& weights) {
  auto check = [](const BasicTensor<T>& term, const char* name) {
    if (term.defined() && !std::isfinite(static_cast<double>(term.item()))) {
      throw TrainingError(std::string("non-finite ") + name + " loss term");
    }
  };
  if (!meta.defined()) throw PreconditionError("combined_loss needs a meta loss");
  check(meta, "meta");
  check(dist_m, "cross-task distillation");
  check(dist_e, "exemplar distillation");
  auto total = meta;
  if (dist_m.defined()) total = ad::add(total, ad::scale(dist_m, weights.lambda_m));
  if (dist_e.defined()) total = ad::add(total, ad::scale(dist_e, weights.lambda_e));
  return total;
}

double combined_loss(double meta, double dist_m, double dist_e, const LossWeights& weights) {
  if (!std::isfinite(meta) || !std::isfinite(dist_m) || !std::isfinite(dist_e)) {
    throw TrainingError("non-finite loss term");
  }
  return meta + weights.lambda_m * dist_m + weights.lambda_e * dist_e;
}

#define ERD_INSTANTIATE_DISTILL(T)                                                            \
  template class TeacherSnapshot<T>;                                                          \
  template BasicTensor<T> proto_distill(const TeacherSnapshot<T>*,                            \
                                        const learners::EmbeddingNet<T>&,                     \
                                        const sampler::Episode&);                             \
  template BasicTensor<T> relation_distill(const TeacherSnapshot<T>*, const Model<T>&,        \
                                           const sampler::Episode&, RelationDistillVariant,   \
                                           DistillHead);                                      \
  template BasicTensor<T> distill_loss(const TeacherSnapshot<T>*, const Model<T>&,            \
                                       const sampler::Episode&, DistillHead);                 \
  template BasicTensor<T> combined_loss(const BasicTensor<T>&, const BasicTensor<T>&,         \
                                        const BasicTensor<T>&, const LossWeights&);

ERD_INSTANTIATE_DISTILL(float)
ERD_INSTANTIATE_DISTILL(double)

#undef ERD_INSTANTIATE_DISTILL

}  // namespace erd::distill
