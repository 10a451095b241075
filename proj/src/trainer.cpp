#include "mtda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mtda/errors.hpp"
#include "mtda/metrics.hpp"
#include "mtda/rng.hpp"

namespace mtda {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::mt_mtda: return "mt_mtda";
    case TrainMode::mt_mtda_mixed: return "mt_mtda_mixed";
    case TrainMode::single_teacher_mixed: return "single_teacher_mixed";
    case TrainMode::fusion_sum: return "fusion_sum";
    case TrainMode::fusion_mean: return "fusion_mean";
    case TrainMode::source_only: return "source_only";
  }
  return "unknown";
}

TrainMode parse_train_mode(const std::string& name) {
  for (TrainMode m : {TrainMode::mt_mtda, TrainMode::mt_mtda_mixed, TrainMode::single_teacher_mixed,
                      TrainMode::fusion_sum, TrainMode::fusion_mean, TrainMode::source_only})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown mode '" + name + "'");
}

void TrainConfig::validate(std::size_t n_targets, bool require_fusion_pair) const {
  weights.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  BetaSchedule(s, f, epochs);  // throws on bad (s, f)
  if (!(uda_learning_rate > 0.0)) throw ConfigError("uda_learning_rate must be > 0");
  if (!(kd_learning_rate > 0.0)) throw ConfigError("kd_learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(momentum >= 0.0)) throw ConfigError("momentum must be >= 0");
  if (mode == TrainMode::mt_mtda_mixed && (!k_splits || *k_splits < 1))
    throw ConfigError("mt_mtda_mixed requires k_splits >= 1");
  if (require_fusion_pair && (mode == TrainMode::fusion_sum || mode == TrainMode::fusion_mean) && n_targets < 2)
    throw ConfigError("fusion modes require at least 2 targets");
  if (mode != TrainMode::source_only && n_targets < 1) throw ConfigError("mode " + to_string(mode) + " needs targets");
  if (!target_order.empty()) {
    std::set<std::size_t> seen(target_order.begin(), target_order.end());
    if (target_order.size() != n_targets || seen.size() != n_targets || *seen.rbegin() >= n_targets)
      throw ConfigError("target_order must be a permutation of 0.." + std::to_string(n_targets ? n_targets - 1 : 0));
  }
}

// --- Learner --------------------------------------------------------------

Learner::Learner(ClassifierNetwork n, DomainClassifier d, Sgd o) : net(std::move(n)), dclf(std::move(d)), opt(std::move(o)) {
  if (opt.groups().empty()) {
    opt.add_group("net", net.parameters());
    opt.add_group("dclf", dclf.parameters());
  } else {
    bind();
  }
}

Learner::Learner(const Learner& other) : net(other.net), dclf(other.dclf), opt(other.opt) { bind(); }

Learner& Learner::operator=(const Learner& other) {
  if (this != &other) {
    net = other.net;
    dclf = other.dclf;
    opt = other.opt;
    bind();
  }
  return *this;
}

void Learner::bind() {
  opt.rebind("net", net.parameters());
  opt.rebind("dclf", dclf.parameters());
}

// --- run log --------------------------------------------------------------

void JsonlRunLog::step(const StepRecord& r) {
  nlohmann::json j{{"type", "step"},
                   {"step", r.step},
                   {"epoch", r.epoch},
                   {"batch", r.batch},
                   {"teacher", r.teacher},
                   {"beta", r.loss.beta},
                   {"da", r.loss.da_term},
                   {"kd_source", r.loss.kd_source_term},
                   {"kd_target", r.loss.kd_target_term},
                   {"total", r.loss.total}};
  out_ << j.dump() << '\n';
}

void JsonlRunLog::epoch(const EpochSnapshot& s) {
  nlohmann::json j{{"type", "epoch"},
                   {"epoch", s.epoch},
                   {"beta", s.beta},
                   {"accuracies", s.accuracies},
                   {"equal_weight", s.equal_weight},
                   {"da_steps", s.counters.da_steps},
                   {"kd_source_steps", s.counters.kd_source_steps},
                   {"kd_target_steps", s.counters.kd_target_steps},
                   {"source_ce_steps", s.counters.source_ce_steps}};
  out_ << j.dump() << '\n';
  out_.flush();
}

void JsonlRunLog::divergence(const std::string& message) {
  out_ << nlohmann::json{{"type", "divergence"}, {"message", message}}.dump() << '\n';
  out_.flush();
}

// --- setup ----------------------------------------------------------------

std::vector<DomainDataset> training_targets(const TrainConfig& config, std::span<const DomainDataset> targets) {
  std::vector<DomainDataset> ordered;
  ordered.reserve(targets.size());
  if (config.target_order.empty()) {
    for (const auto& t : targets) ordered.push_back(t.without_labels());
  } else {
    for (std::size_t i : config.target_order) ordered.push_back(targets[i].without_labels());
  }
  switch (config.mode) {
    case TrainMode::mt_mtda:
    case TrainMode::fusion_sum:
    case TrainMode::fusion_mean:
      return ordered;
    case TrainMode::mt_mtda_mixed:
      return split_mixed_targets(ordered, *config.k_splits, derive_seed(config.seed, 0x313));
    case TrainMode::single_teacher_mixed:
      return {merge_datasets(ordered, "merged-targets")};
    case TrainMode::source_only:
      return {};
  }
  return ordered;
}

std::vector<std::size_t> target_slots(const TrainConfig& config, std::size_t n_training_targets) {
  const bool per_target = config.mode == TrainMode::mt_mtda || config.mode == TrainMode::fusion_sum ||
                          config.mode == TrainMode::fusion_mean;
  if (per_target && config.target_order.size() == n_training_targets) return config.target_order;
  std::vector<std::size_t> slots(n_training_targets);
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  return slots;
}

RunState initialize_run(const TrainConfig& config, const DomainDataset& source,
                        std::span<const DomainDataset> train_targets) {
  if (!source.has_labels()) throw ArgumentError("source dataset must be labeled");
  const auto [mean, stddev] = channel_statistics(source);
  const std::size_t n_teachers = config.mode == TrainMode::source_only ? 0 : train_targets.size();
  const auto slots = target_slots(config, n_teachers);

  RunState state;
  state.config = config;
  for (std::size_t i = 0; i < n_teachers; ++i) {
    const std::uint64_t seed = derive_seed(config.seed, 100 + slots[i]);
    ClassifierNetwork net =
        build_backbone(config.teacher_preset, source.shape(), source.num_classes(), seed, config.teacher_feature_dim);
    net.set_standardization(mean, stddev);
    DomainClassifier dclf(net.feature_dim(), derive_seed(seed, 1));
    state.teachers.emplace_back(std::move(net), std::move(dclf),
                                make_optimizer(config.uda_learning_rate, config.momentum, config.weight_decay));
    state.training_target_ids.push_back(train_targets[i].domain_id());
  }
  const std::uint64_t seed = derive_seed(config.seed, 1);
  ClassifierNetwork net =
      build_backbone(config.student_preset, source.shape(), source.num_classes(), seed, config.student_feature_dim);
  net.set_standardization(mean, stddev);
  DomainClassifier dclf(net.feature_dim(), derive_seed(seed, 1));
  state.student.emplace_back(std::move(net), std::move(dclf),
                             make_optimizer(config.kd_learning_rate, config.momentum, config.weight_decay));
  state.beta = BetaSchedule(config.s, config.f, config.epochs).at(0.0);
  return state;
}

// --- training loop --------------------------------------------------------

namespace {

void guard(double value, const std::string& what, std::size_t epoch, std::size_t batch, RunLog* log) {
  if (std::isfinite(value) && std::abs(value) <= kDivergenceThreshold) return;
  const std::string msg = "divergence: " + what + " = " + std::to_string(value) + " at epoch " +
                          std::to_string(epoch) + ", batch " + std::to_string(batch);
  if (log) log->divergence(msg);
  throw DivergenceError(msg);
}


struct StepContext {
  RunState& state;
  const LossWeights& weights;
  KdOptions kd;
  RunLog* log;
  std::size_t epoch;
  std::size_t batch;
};

double teacher_da_step(StepContext& c, Learner& t, const BatchTuple& tuple, std::size_t i, double beta) {
  t.opt.zero_grad();
  const TeacherDaTerms da = teacher_da_loss(t.net, t.dclf, tuple.source_images, tuple.source_labels,
                                            tuple.target_images[i], c.weights, {1.0 - beta, true});
  guard(da.value, "teacher DA loss", c.epoch, c.batch, c.log);
  t.opt.step({"net", "dclf"});
  ++c.state.counters.da_steps;
  return da.value;
}

void run_alternating_batch(StepContext& c, const BatchTuple& tuple, double beta) {
  Learner& s = c.state.student_learner();
  const bool cst = c.state.config.consistency_enabled;
  for (std::size_t i = 0; i < c.state.teachers.size(); ++i) {
    Learner& t = c.state.teachers[i];
    const double da = teacher_da_step(c, t, tuple, i, beta);

    s.opt.zero_grad();
    if (c.kd.update_teacher) t.opt.zero_grad();
    const double kds = kd_source_loss(t.net, s.net, tuple.source_images, tuple.source_labels, c.weights,
                                      {beta, true}, c.kd);
    guard(kds, "source distillation loss", c.epoch, c.batch, c.log);
    s.opt.step({"net"});
    if (c.kd.update_teacher) t.opt.step({"net"});
    ++c.state.counters.kd_source_steps;

    s.opt.zero_grad();
    if (c.kd.update_teacher) t.opt.zero_grad();
    const double kdt = kd_target_loss(t.net, s.net, s.dclf, tuple.target_images[i], tuple.source_images,
                                      c.weights, cst, {beta, true}, c.kd);
    guard(kdt, "target distillation loss", c.epoch, c.batch, c.log);
    if (cst) s.opt.step({"net", "dclf"}); else s.opt.step({"net"});
    if (c.kd.update_teacher) t.opt.step({"net"});
    ++c.state.counters.kd_target_steps;

    const LossBreakdown b = combined_teacher_objective(da, kds, kdt, beta);
    guard(b.total, "combined objective", c.epoch, c.batch, c.log);
    if (c.log) c.log->step({c.state.counters.da_steps, c.epoch, c.batch, i, b});
  }
}

Tensor fused_teacher_logits(RunState& state, const Tensor& images, Fusion fusion) {
  std::vector<Tensor> logits;
  logits.reserve(state.teachers.size());
  for (Learner& t : state.teachers) logits.push_back(t.net.logits(images));
  return fuse_logits(logits, fusion);
}

void run_fusion_batch(StepContext& c, const BatchTuple& tuple, double beta, Fusion fusion) {
  Learner& s = c.state.student_learner();
  const bool cst = c.state.config.consistency_enabled;
  const std::size_t n = c.state.teachers.size();
  std::vector<double> da(n);
  for (std::size_t i = 0; i < n; ++i) da[i] = teacher_da_step(c, c.state.teachers[i], tuple, i, beta);

  s.opt.zero_grad();
  const Tensor fused_s = fused_teacher_logits(c.state, tuple.source_images, fusion);
  const double kds = kd_source_loss(fused_s, s.net, tuple.source_images, tuple.source_labels, c.weights,
                                    {beta, true}, c.kd);
  guard(kds, "source distillation loss", c.epoch, c.batch, c.log);
  s.opt.step({"net"});
  ++c.state.counters.kd_source_steps;

  for (std::size_t i = 0; i < n; ++i) {
    s.opt.zero_grad();
    const Tensor fused_t = fused_teacher_logits(c.state, tuple.target_images[i], fusion);
    const double kdt = kd_target_loss(fused_t, s.net, s.dclf, tuple.target_images[i], tuple.source_images,
                                      c.weights, cst, {beta, true}, c.kd);
    guard(kdt, "target distillation loss", c.epoch, c.batch, c.log);
    if (cst) s.opt.step({"net", "dclf"}); else s.opt.step({"net"});
    ++c.state.counters.kd_target_steps;

    const LossBreakdown b = combined_teacher_objective(da[i], kds, kdt, beta);
    guard(b.total, "combined objective", c.epoch, c.batch, c.log);
    if (c.log) c.log->step({c.state.counters.da_steps, c.epoch, c.batch, i, b});
  }
}

void run_source_only_batch(StepContext& c, const BatchTuple& tuple) {
  Learner& s = c.state.student_learner();
  s.opt.zero_grad();
  const NetOutput out = s.net.forward(tuple.source_images);
  Tensor g;
  const double ce = cross_entropy(out.logits, tuple.source_labels, g);
  guard(ce, "source cross-entropy", c.epoch, c.batch, c.log);
  s.net.backward(g, {});
  s.opt.step({"net"});
  ++c.state.counters.source_ce_steps;
  if (c.log) {
    LossBreakdown b;
    b.total = b.da_term = ce;
    c.log->step({c.state.counters.source_ce_steps, c.epoch, c.batch, 0, b});
  }
}

}  // namespace

void run_epochs(RunState& state, const TrainData& data, RunLog* log, std::optional<std::size_t> stop_epoch) {
  const TrainConfig& cfg = state.config;
  cfg.validate(data.targets.size(), false);
  const auto targets = training_targets(cfg, data.targets);
  if (cfg.mode != TrainMode::source_only && targets.size() != state.teachers.size())
    throw ConsistencyError("run state has " + std::to_string(state.teachers.size()) + " teachers but " +
                           std::to_string(targets.size()) + " training targets");

  const BetaSchedule schedule(cfg.s, cfg.f, cfg.epochs);
  const BatchPlan plan = make_batch_plan(data.source.size(), cfg.batch_size, derive_seed(cfg.seed, 0xba7c));
  std::vector<std::uint64_t> tags;
  for (std::size_t slot : target_slots(cfg, targets.size())) tags.push_back(slot + 1);
  const MultiTargetBatchIterator batches(data.source, targets, plan, tags);
  const KdOptions kd{cfg.kd_convention, cfg.distill_updates_teacher};
  const std::size_t last = std::min<std::size_t>(stop_epoch.value_or(cfg.epochs), cfg.epochs);

  for (std::size_t e = state.epoch; e < last; ++e) {
    const auto plan_e = batches.epoch_indices(e);
    for (std::size_t b = 0; b < plan_e.size(); ++b) {
      const BatchTuple tuple = batches.materialize(plan_e[b]);
      state.beta = schedule.at_step(e, b, plan.epoch_length, cfg.beta_granularity);
      StepContext ctx{state, cfg.weights, kd, log, e, b};
      switch (cfg.mode) {
        case TrainMode::source_only: run_source_only_batch(ctx, tuple); break;
        case TrainMode::fusion_sum: run_fusion_batch(ctx, tuple, state.beta, Fusion::sum); break;
        case TrainMode::fusion_mean: run_fusion_batch(ctx, tuple, state.beta, Fusion::mean); break;
        default: run_alternating_batch(ctx, tuple, state.beta); break;
      }
    }
    EpochSnapshot snap;
    snap.epoch = e;
    snap.beta = schedule.at(static_cast<double>(e));
    snap.accuracies = per_target_accuracy(state.student_learner().net, data.eval_sets);
    snap.equal_weight = snap.accuracies.empty() ? 0.0 : equal_weight_accuracy(snap.accuracies);
    snap.counters = state.counters;
    state.history.push_back(snap);
    state.epoch = e + 1;
    if (log) log->epoch(snap);
  }
}

namespace {

RunState train_validated(const TrainConfig& config, const TrainData& data, RunLog* log) {
  const auto targets = training_targets(config, data.targets);
  RunState state = initialize_run(config, data.source, targets);
  run_epochs(state, data, log);
  return state;
}

}  // namespace

RunState train(const TrainConfig& config, const TrainData& data, RunLog* log) {
  config.validate(data.targets.size());
  return train_validated(config, data, log);
}

RunState train_mt_mtda(TrainConfig config, const TrainData& data, RunLog* log) {
  if (config.mode != TrainMode::mt_mtda_mixed) config.mode = TrainMode::mt_mtda;
  return train(config, data, log);
}

RunState train_single_teacher_mixed(TrainConfig config, const TrainData& data, RunLog* log) {
  config.mode = TrainMode::single_teacher_mixed;
  return train(config, data, log);
}

RunState train_fusion(TrainConfig config, const TrainData& data, Fusion fusion, RunLog* log) {
  config.mode = fusion == Fusion::sum ? TrainMode::fusion_sum : TrainMode::fusion_mean;
  config.validate(data.targets.size(), false);
  return train_validated(config, data, log);
}

RunState train_source_only(TrainConfig config, const TrainData& data, RunLog* log) {
  config.mode = TrainMode::source_only;
  return train(config, data, log);
}

Tensor fuse_logits(std::span<const Tensor> teacher_logits, Fusion fusion) {
  if (teacher_logits.empty()) throw ArgumentError("no teacher logits to fuse");
  Tensor fused = teacher_logits.front();
  for (std::size_t i = 1; i < teacher_logits.size(); ++i) {
    if (teacher_logits[i].shape() != fused.shape()) throw ShapeError("fused teacher logits differ in shape");
    for (std::size_t j = 0; j < fused.size(); ++j) fused[j] += teacher_logits[i][j];
  }
  if (fusion == Fusion::mean) {
    const double inv = 1.0 / static_cast<double>(teacher_logits.size());
    for (auto& v : fused.values()) v *= inv;
  }
  return fused;
}

}  // namespace mtda
