// Copyright 2026 The mdlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mdlab/experiment.h"

#include <chrono>
#include <optional>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/utility/utility.h"
#include "mdlab/attacks.h"
#include "mdlab/checkpoint.h"
#include "mdlab/io.h"
#include "mdlab/metrics.h"
#include "mdlab/random.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

absl::Status UnknownKey(const std::string& where, const std::string& key) {
  return absl::InvalidArgumentError(
      absl::StrCat("unknown key '", key, "' in ", where));
}

absl::StatusOr<AttackSpec> AttackSpecFromJson(const Json& j) {
  AttackSpec a;
  if (!j.contains("name")) {
    return absl::InvalidArgumentError("attack entry without a name");
  }
  a.name = j.at("name").get<std::string>();
  std::set<std::string> allowed = {"name"};
  if (a.name == "secmi") {
    allowed.insert({"t_sec", "stride"});
  } else if (a.name == "loss") {
    allowed.insert({"t_lists", "n_mc"});
  } else if (a.name == "blackbox") {
    allowed.insert("k");
  } else {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown attack '", a.name, "'"));
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) return UnknownKey("attack " + a.name, key);
    if (key == "t_sec") {
      a.t_sec = value.is_array() ? value.get<std::vector<int>>()
                                 : std::vector<int>{value.get<int>()};
    } else if (key == "stride") {
      a.stride = value.get<int>();
    } else if (key == "t_lists") {
      a.t_lists = value.get<std::vector<std::vector<int>>>();
    } else if (key == "n_mc") {
      a.n_mc = value.get<int>();
    } else if (key == "k") {
      a.k = value.get<int>();
    }
  }
  return a;
}

Json AttackSpecToJson(const AttackSpec& a) {
  Json j{{"name", a.name}};
  if (a.name == "secmi") {
    j["t_sec"] = a.t_sec;
    j["stride"] = a.stride;
  } else if (a.name == "loss") {
    j["t_lists"] = a.t_lists;
    j["n_mc"] = a.n_mc;
  } else {
    j["k"] = a.k;
  }
  return j;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since)
      .count();
}

std::string RelPath(const fs::path& p, const fs::path& root) {
  return fs::relative(p, root).generic_string();
}

// Everything that determines a trained model, as a cache key.
std::string ModelKey(const ExperimentConfig& c, const std::string& role,
                     const Json& extra) {
  Json j{{"role", role},
         {"seed", c.master_seed},
         {"dataset", c.dataset.ToJson()},
         {"schedule",
          {c.schedule.num_timesteps, c.schedule.beta_start, c.schedule.beta_end}},
         {"arch", c.ModelArch().ToJson()},
         {"train", c.train.ToJson()},
         {"stratified", c.stratified_split},
         {"extra", extra}};
  return j.dump();
}

// State of one arm while it runs.
class ArmRun {
 public:
  ArmRun(const ExperimentConfig& config, ModelCache& cache)
      : cfg_(config), cache_(cache), root_(config.output_dir) {}

  absl::StatusOr<Json> Run();

 private:
  absl::Status Stage(const std::string& name,
                     const std::function<absl::Status()>& body);
  absl::Status Prepare();
  absl::StatusOr<std::shared_ptr<const TrainedModel>> Train(
      const std::string& role, std::span<const LabeledSample> data,
      std::uint64_t init_index);
  absl::StatusOr<std::shared_ptr<const TrainedModel>> Distill();
  absl::Status RecordModel(const std::string& role, const TrainedModel& m);
  absl::StatusOr<Tensor> Sample(const std::string& target,
                                const Denoiser& a, const Denoiser* b,
                                std::uint64_t index);
  // `members` defaults to the full member set.
  absl::Status Attack(const AttackSpec& spec, const std::string& target,
                      const Denoiser* model, const Tensor* generated,
                      std::span<const LabeledSample> members = {});
  absl::Status RecordReport(const std::string& key, const AttackScores& scores,
                            Json extra);
  absl::StatusOr<GapEstimate> Gap(const Denoiser& model,
                                  std::span<const LabeledSample> members,
                                  std::span<const LabeledSample> nonmembers,
                                  std::uint64_t index);
  Json Manifest(const std::string& status) const;

  const ExperimentConfig& cfg_;
  ModelCache& cache_;
  fs::path root_;
  std::optional<NoiseSchedule> sched_;
  Dataset data_;
  DatasetSplit split_;
  std::vector<LabeledSample> members_;
  std::vector<LabeledSample> test_;
  Tensor unique_members_;
  Tensor quality_reference_;
  double memorization_eps_ = 0.0;

  Json artifacts_ = Json::object();
  Json reports_ = Json::object();
  Json quality_ = Json::object();
  Json memorization_ = Json::object();
  Json gaps_ = Json::object();
  Json training_ = Json::object();
  Json warnings_ = Json::array();
  Json timings_ = Json::object();
  std::string failed_stage_;
  std::string error_;
};

absl::Status ArmRun::Stage(const std::string& name,
                           const std::function<absl::Status()>& body) {
  const auto start = std::chrono::steady_clock::now();
  absl::Status s = body();
  timings_[name] = Seconds(start);
  if (!s.ok() && failed_stage_.empty()) {
    failed_stage_ = name;
    error_ = std::string(s.message());
  }
  return s;
}

absl::Status ArmRun::Prepare() {
  MDLAB_ASSIGN_OR_RETURN(NoiseSchedule s, cfg_.MakeSchedule());
  sched_ = std::move(s);
  MDLAB_ASSIGN_OR_RETURN(
      data_, GenerateDataset(cfg_.dataset, DeriveSeed(cfg_.master_seed, "data")));
  std::vector<LabeledSample> all = data_.members;
  all.insert(all.end(), data_.nonmembers.begin(), data_.nonmembers.end());
  MDLAB_ASSIGN_OR_RETURN(
      split_, SplitDisjoint(std::move(all), DeriveSeed(cfg_.master_seed, "split"),
                            SplitOptions{cfg_.stratified_split}));
  members_ = data_.members;
  test_ = data_.nonmembers;
  unique_members_ = UniqueMemberPoints(data_);
  memorization_eps_ = cfg_.eval.memorization_eps_fraction *
                      MedianNearestNeighborDistance(unique_members_);
  memorization_["eps"] = memorization_eps_;
  DatasetSpec ref_spec = cfg_.dataset;
  ref_spec.n_member = cfg_.eval.quality_reference;
  ref_spec.n_test = 0;
  ref_spec.duplicate.reset();
  MDLAB_ASSIGN_OR_RETURN(
      Dataset ref,
      GenerateDataset(ref_spec,
                      DeriveSeed(cfg_.master_seed, "quality_reference")));
  quality_reference_ = PointsOf(ref.members);
  MDLAB_RETURN_IF_ERROR(
      WriteJsonFile(root_ / "dataset.json", DatasetToJson(data_)));
  MDLAB_ASSIGN_OR_RETURN(std::string h, GitBlobHashOfFile(root_ / "dataset.json"));
  artifacts_["dataset"] = {{"path", "dataset.json"}, {"hash", h}};
  return absl::OkStatus();
}

absl::StatusOr<std::shared_ptr<const TrainedModel>> ArmRun::Train(
    const std::string& role, std::span<const LabeledSample> data,
    std::uint64_t init_index) {
  const std::string key = ModelKey(cfg_, role, Json());
  return cache_.GetOrTrain(key, [&]() -> absl::StatusOr<TrainedModel> {
    const auto start = std::chrono::steady_clock::now();
    MDLAB_ASSIGN_OR_RETURN(
        Denoiser init,
        InitDenoiser(cfg_.ModelArch(),
                     DeriveSeed(cfg_.master_seed, "init", init_index)));
    Rng rng = MakeRng(DeriveSeed(cfg_.master_seed, "train", init_index));
    TrainConfig tc = cfg_.train;
    tc.conditional = cfg_.dataset.conditional;
    MDLAB_ASSIGN_OR_RETURN(TrainResult r,
                           TrainDdpm(std::move(init), data, *sched_, tc, rng));
    return TrainedModel{std::move(r.model), std::move(r.loss_trace),
                        std::move(r.warnings), {}, tc.iterations,
                        Seconds(start)};
  });
}

absl::StatusOr<std::shared_ptr<const TrainedModel>> ArmRun::Distill() {
  const std::vector<LabeledSample> d1 = split_.D1();
  const std::vector<LabeledSample> d2 = split_.D2();
  MDLAB_ASSIGN_OR_RETURN(auto t1, Train("teacher1", d1, 1));
  MDLAB_ASSIGN_OR_RETURN(auto t2, Train("teacher2", d2, 2));
  const std::string key = ModelKey(cfg_, "student", Json());
  return cache_.GetOrTrain(key, [&]() -> absl::StatusOr<TrainedModel> {
    const auto start = std::chrono::steady_clock::now();
    MDLAB_ASSIGN_OR_RETURN(
        Denoiser init,
        InitDenoiser(cfg_.ModelArch(), DeriveSeed(cfg_.master_seed, "init", 3)));
    Rng rng = MakeRng(DeriveSeed(cfg_.master_seed, "train", 3));
    TrainConfig tc = cfg_.train;
    tc.conditional = cfg_.dataset.conditional;
    DistillAudit audit;
    MDLAB_ASSIGN_OR_RETURN(
        TrainResult r, TrainDistillMd(t1->model, t2->model, split_,
                                      std::move(init), *sched_, tc, rng, &audit));
    return TrainedModel{std::move(r.model), std::move(r.loss_trace),
                        std::move(r.warnings), audit, tc.iterations,
                        Seconds(start)};
  });
}

absl::Status ArmRun::RecordModel(const std::string& role,
                                 const TrainedModel& m) {
  const fs::path ckpt = root_ / "checkpoints" / (role + ".mdck");
  MDLAB_RETURN_IF_ERROR(SaveCheckpoint(ckpt, m.model));
  MDLAB_ASSIGN_OR_RETURN(std::string h, GitBlobHashOfFile(ckpt));
  const fs::path trace = root_ / "loss" / (role + ".csv");
  MDLAB_RETURN_IF_ERROR(WriteLossTrace(trace, m.loss_trace));
  artifacts_["checkpoints"][role] = {{"path", RelPath(ckpt, root_)},
                                     {"hash", h}};
  artifacts_["loss_traces"][role] = RelPath(trace, root_);
  Json t{{"iterations", m.iterations},
         {"final_loss", m.loss_trace.empty() ? 0.0 : m.loss_trace.back()}};
  if (m.audit.d1_batches + m.audit.d2_batches > 0) {
    t["audit"] = {{"d1_batches_teacher2", m.audit.d1_batches},
                  {"d2_batches_teacher1", m.audit.d2_batches}};
  }
  training_[role] = t;
  timings_["train." + role] = m.seconds;
  for (const auto& w : m.warnings) warnings_.push_back(role + ": " + w);
  return absl::OkStatus();
}

absl::StatusOr<Tensor> ArmRun::Sample(const std::string& target,
                                      const Denoiser& a, const Denoiser* b,
                                      std::uint64_t index) {
  SamplerPlan plan;
  plan.mode = b == nullptr ? SamplerMode::kSingle : SamplerMode::kDual;
  plan.step_kind = cfg_.sampling.step_kind;
  plan.start = cfg_.sampling.start;
  plan.block_size = cfg_.sampling.block_size;
  plan.n_samples = cfg_.sampling.n_samples;
  plan.seed = DeriveSeed(cfg_.master_seed, "sample", index);
  SamplerStats stats;
  Tensor out;
  if (b == nullptr) {
    MDLAB_ASSIGN_OR_RETURN(out, SingleSample(a, *sched_, plan, &stats));
  } else {
    MDLAB_ASSIGN_OR_RETURN(out, DualSample(a, *b, *sched_, plan, &stats));
  }
  Json hashes = Json::array();
  hashes.push_back(GitBlobHash(EncodeCheckpoint(a)));
  if (b != nullptr) hashes.push_back(GitBlobHash(EncodeCheckpoint(*b)));
  Json sidecar{{"plan", plan.ToJson()},
               {"model_hashes", hashes},
               {"steps", {{"a", stats.steps_a}, {"b", stats.steps_b}}}};
  const fs::path path = root_ / "samples" / (target + ".bin");
  MDLAB_RETURN_IF_ERROR(WriteSamples(path, out, sidecar));
  MDLAB_ASSIGN_OR_RETURN(std::string h, GitBlobHashOfFile(path));
  artifacts_["samples"][target] = {{"path", RelPath(path, root_)}, {"hash", h}};

  MDLAB_ASSIGN_OR_RETURN(double ed, EnergyDistance(out, PointsOf(test_)));
  MDLAB_ASSIGN_OR_RETURN(double ed_population,
                         EnergyDistance(out, quality_reference_));
  MDLAB_ASSIGN_OR_RETURN(double frac,
                         MemorizationFraction(out, unique_members_,
                                              memorization_eps_));
  quality_[target] = {{"energy_distance", ed},
                      {"energy_distance_population", ed_population},
                      {"n_samples", out.rows()}};
  memorization_["fraction"][target] = frac;
  return out;
}

absl::Status ArmRun::RecordReport(const std::string& key,
                                  const AttackScores& scores, Json extra) {
  MDLAB_ASSIGN_OR_RETURN(RocReport roc, MakeRocReport(scores));
  const fs::path score_path = root_ / "attacks" / (key + ".json");
  const fs::path roc_path = root_ / "roc" / (key + ".csv");
  MDLAB_RETURN_IF_ERROR(WriteJsonFile(score_path, scores.ToJson()));
  MDLAB_RETURN_IF_ERROR(WriteRocCsv(roc_path, roc));
  Json r = roc.ToJson();
  r["attack"] = scores.attack;
  r["params"] = scores.params;
  r["scores_file"] = RelPath(score_path, root_);
  r["roc_csv"] = RelPath(roc_path, root_);
  for (auto& [k, v] : extra.items()) r[k] = v;
  reports_[key] = r;
  return absl::OkStatus();
}

absl::Status ArmRun::Attack(const AttackSpec& spec, const std::string& target,
                            const Denoiser* model, const Tensor* generated,
                            std::span<const LabeledSample> members) {
  if (members.empty()) members = members_;
  const AttackConfig ac{DeriveSeed(cfg_.master_seed, "attack")};
  const bool cond = cfg_.dataset.conditional;
  const std::string key = spec.name + "@" + target;
  std::optional<AttackScores> best;
  double best_auc = -1.0;
  Json sweep = Json::array();
  auto consider = [&](const Scorer& scorer) -> absl::Status {
    MDLAB_ASSIGN_OR_RETURN(AttackScores s,
                           RunAttack(scorer, members, test_, ac));
    MDLAB_ASSIGN_OR_RETURN(double auc, Auc(s));
    sweep.push_back({{"params", s.params}, {"auc", auc}});
    if (auc > best_auc) {
      best_auc = auc;
      best = std::move(s);
    }
    return absl::OkStatus();
  };
  if (spec.name == "secmi") {
    std::vector<int> ts = spec.t_sec;
    if (ts.empty()) ts.push_back(sched_->num_steps() / 2);
    for (int t : ts) {
      auto scorer = MakeSecMiScorer(*model, *sched_, {t, spec.stride}, cond);
      MDLAB_RETURN_IF_ERROR(consider(*scorer));
    }
  } else if (spec.name == "loss") {
    std::vector<std::vector<int>> lists = spec.t_lists;
    if (lists.empty()) lists.emplace_back();
    for (const auto& l : lists) {
      auto scorer = MakeLossScorer(*model, *sched_, {l, spec.n_mc}, cond);
      MDLAB_RETURN_IF_ERROR(consider(*scorer));
    }
  } else {
    auto scorer = MakeBlackboxScorer(*generated, {spec.k});
    MDLAB_RETURN_IF_ERROR(consider(*scorer));
  }
  Json extra = Json::object();
  if (sweep.size() > 1) extra["sweep"] = sweep;
  return RecordReport(key, *best, extra);
}

absl::StatusOr<GapEstimate> ArmRun::Gap(
    const Denoiser& model, std::span<const LabeledSample> members,
    std::span<const LabeledSample> nonmembers, std::uint64_t index) {
  Rng rng = MakeRng(DeriveSeed(cfg_.master_seed, "gap", index));
  return GeneralizationGap(model, members, nonmembers, *sched_,
                           cfg_.eval.gap_n_mc, rng);
}

Json ArmRun::Manifest(const std::string& status) const {
  Json m;
  m["format_version"] = kManifestFormatVersion;
  m["status"] = status;
  if (!failed_stage_.empty()) {
    m["failed_stage"] = failed_stage_;
    m["error"] = error_;
  }
  m["name"] = cfg_.name;
  m["defense"] = ToString(cfg_.defense);
  m["config"] = cfg_.ToJson();
  m["artifacts"] = artifacts_;
  m["metrics"] = {{"reports", reports_},
                  {"quality", quality_},
                  {"memorization", memorization_},
                  {"generalization_gaps", gaps_},
                  {"training", training_},
                  {"warnings", warnings_}};
  m["timings"] = timings_;
  return m;
}

absl::StatusOr<Json> ArmRun::Run() {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) {
    return absl::InternalError(
        absl::StrCat("cannot create ", root_.string(), ": ", ec.message()));
  }
  const auto start = std::chrono::steady_clock::now();
  absl::Status status = [&]() -> absl::Status {
    MDLAB_RETURN_IF_ERROR(Stage("validate", [&] { return cfg_.Validate(); }));
    MDLAB_RETURN_IF_ERROR(Stage("prepare", [&] { return Prepare(); }));

    std::shared_ptr<const TrainedModel> target;
    std::shared_ptr<const TrainedModel> t1;
    std::shared_ptr<const TrainedModel> t2;
    std::string target_name;
    if (cfg_.defense == Defense::kNone) {
      MDLAB_RETURN_IF_ERROR(Stage("train", [&]() -> absl::Status {
        MDLAB_ASSIGN_OR_RETURN(target, Train("baseline", members_, 0));
        return RecordModel("baseline", *target);
      }));
      target_name = "baseline";
    } else {
      MDLAB_RETURN_IF_ERROR(Stage("train", [&]() -> absl::Status {
        MDLAB_ASSIGN_OR_RETURN(t1, Train("teacher1", split_.D1(), 1));
        MDLAB_ASSIGN_OR_RETURN(t2, Train("teacher2", split_.D2(), 2));
        MDLAB_RETURN_IF_ERROR(RecordModel("teacher1", *t1));
        return RecordModel("teacher2", *t2);
      }));
      if (cfg_.defense == Defense::kDistillMd) {
        MDLAB_RETURN_IF_ERROR(Stage("distill", [&]() -> absl::Status {
          MDLAB_ASSIGN_OR_RETURN(target, Distill());
          return RecordModel("student", *target);
        }));
        target_name = "student";
      } else {
        target_name = "dual";
      }
    }

    // Generated samples: the arm's output plus, for dualmd, each teacher
    // alone for comparison.
    std::map<std::string, Tensor> generated;
    MDLAB_RETURN_IF_ERROR(Stage("sample", [&]() -> absl::Status {
      if (cfg_.defense == Defense::kDualMd) {
        MDLAB_ASSIGN_OR_RETURN(generated["dual"],
                               Sample("dual", t1->model, &t2->model, 3));
        MDLAB_ASSIGN_OR_RETURN(generated["teacher1"],
                               Sample("teacher1", t1->model, nullptr, 1));
        MDLAB_ASSIGN_OR_RETURN(generated["teacher2"],
                               Sample("teacher2", t2->model, nullptr, 2));
      } else {
        const std::uint64_t idx = cfg_.defense == Defense::kNone ? 0 : 4;
        MDLAB_ASSIGN_OR_RETURN(generated[target_name],
                               Sample(target_name, target->model, nullptr, idx));
      }
      return absl::OkStatus();
    }));

    MDLAB_RETURN_IF_ERROR(Stage("attack", [&]() -> absl::Status {
      for (const AttackSpec& spec : cfg_.attacks) {
        if (!spec.white_box()) {
          // A teacher alone is attacked on the half it was trained on.
          const std::vector<LabeledSample> d1 = split_.D1();
          const std::vector<LabeledSample> d2 = split_.D2();
          for (const auto& [name, samples] : generated) {
            std::span<const LabeledSample> members;
            if (name == "teacher1") members = d1;
            if (name == "teacher2") members = d2;
            MDLAB_RETURN_IF_ERROR(Attack(spec, name, nullptr, &samples, members));
          }
        } else {
          MDLAB_RETURN_IF_ERROR(Attack(spec, target_name, &target->model, nullptr));
        }
      }
      return absl::OkStatus();
    }));

    MDLAB_RETURN_IF_ERROR(Stage("evaluate", [&]() -> absl::Status {
      const std::vector<LabeledSample> d1 = split_.D1();
      const std::vector<LabeledSample> d2 = split_.D2();
      if (target != nullptr) {
        MDLAB_ASSIGN_OR_RETURN(GapEstimate g,
                               Gap(target->model, members_, test_, 0));
        gaps_[target_name] = g.ToJson();
      }
      if (t1 != nullptr) {
        // The disjointness assumption: each teacher treats the other half
        // like held-out data.
        MDLAB_ASSIGN_OR_RETURN(GapEstimate g1, Gap(t1->model, d2, test_, 1));
        MDLAB_ASSIGN_OR_RETURN(GapEstimate g2, Gap(t2->model, d1, test_, 2));
        MDLAB_ASSIGN_OR_RETURN(GapEstimate o1, Gap(t1->model, d1, test_, 3));
        MDLAB_ASSIGN_OR_RETURN(GapEstimate o2, Gap(t2->model, d2, test_, 4));
        gaps_["teacher1_on_d2"] = g1.ToJson();
        gaps_["teacher2_on_d1"] = g2.ToJson();
        gaps_["teacher1_on_d1"] = o1.ToJson();
        gaps_["teacher2_on_d2"] = o2.ToJson();
      }
      if (cfg_.dataset.duplicate.has_value() && target != nullptr) {
        MDLAB_ASSIGN_OR_RETURN(
            MemorizationSets sets,
            BuildMemorizationSets(data_, cfg_.eval,
                                  DeriveSeed(cfg_.master_seed, "memorized_set")));
        const AttackSpec* secmi = nullptr;
        for (const auto& a : cfg_.attacks) {
          if (a.name == "secmi") secmi = &a;
        }
        std::vector<int> ts = secmi != nullptr ? secmi->t_sec : std::vector<int>{};
        if (ts.empty()) ts.push_back(sched_->num_steps() / 2);
        const int stride = secmi != nullptr ? secmi->stride : 1;
        Json sweep = Json::array();
        std::optional<RocReport> best;
        int best_t = 0;
        for (int t : ts) {
          MDLAB_ASSIGN_OR_RETURN(
              RocReport r, MemorizationDetection(target->model, sets.memorized,
                                                 sets.clean, *sched_, t, stride));
          sweep.push_back({{"t_sec", t}, {"auc", r.auc}});
          if (!best.has_value() || r.auc > best->auc) {
            best = std::move(r);
            best_t = t;
          }
        }
        Json det = best->ToJson();
        det["t_sec"] = best_t;
        det["sweep"] = sweep;
        det["target"] = target_name;
        memorization_["detection"] = det;
      }
      return absl::OkStatus();
    }));
    return absl::OkStatus();
  }();
  timings_["total"] = Seconds(start);

  const Json manifest = Manifest(status.ok() ? "ok" : "failed");
  absl::Status written = WriteJsonFile(root_ / "manifest.json", manifest);
  MDLAB_RETURN_IF_ERROR(status);
  MDLAB_RETURN_IF_ERROR(written);
  return absl::StatusOr<Json>(absl::in_place, manifest);
}

}  // namespace

std::string ToString(Defense d) {
  switch (d) {
    case Defense::kNone:
      return "none";
    case Defense::kDualMd:
      return "dualmd";
    case Defense::kDistillMd:
      return "distillmd";
  }
  return "none";
}

absl::StatusOr<Defense> DefenseFromString(std::string_view s) {
  if (s == "none") return Defense::kNone;
  if (s == "dualmd") return Defense::kDualMd;
  if (s == "distillmd") return Defense::kDistillMd;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown defense '", std::string(s), "'"));
}

ExperimentConfig ExperimentConfig::Default() {
  ExperimentConfig c;
  c.train.iterations = 15000;
  c.train.batch_size = 64;
  c.train.learning_rate = 4e-3;
  c.train.lr_schedule = LrSchedule::kCosine;
  AttackSpec secmi;
  secmi.name = "secmi";
  secmi.t_sec = {1, 2, 3, 5, 10, 20, 50};
  AttackSpec loss;
  loss.name = "loss";
  loss.t_lists = {{}, {1, 2, 3, 4, 5}};
  AttackSpec blackbox;
  blackbox.name = "blackbox";
  c.attacks = {secmi, loss, blackbox};
  return c;
}

DenoiserArch ExperimentConfig::ModelArch() const {
  DenoiserArch a;
  a.data_dim = dataset.dim;
  a.hidden = arch.hidden;
  a.embed_dim = arch.embed_dim;
  a.fourier_features = arch.fourier_features;
  a.num_tokens = dataset.num_tokens();
  a.num_timesteps = schedule.num_timesteps;
  return a;
}

absl::StatusOr<NoiseSchedule> ExperimentConfig::MakeSchedule() const {
  return MakeLinearSchedule(schedule.num_timesteps, schedule.beta_start,
                            schedule.beta_end);
}

absl::Status ExperimentConfig::Validate() const {
  MDLAB_RETURN_IF_ERROR(dataset.Validate());
  MDLAB_RETURN_IF_ERROR(MakeSchedule().status());
  MDLAB_RETURN_IF_ERROR(ModelArch().Validate());
  MDLAB_RETURN_IF_ERROR(train.Validate());
  if (train.iterations < 1) {
    return absl::InvalidArgumentError("train.iterations must be > 0");
  }
  if (train.diversify && !dataset.conditional) {
    return absl::InvalidArgumentError(
        "train.diversify needs a conditional dataset");
  }
  if (dataset.n_test < 1) {
    return absl::InvalidArgumentError("experiments need n_test >= 1");
  }
  if (defense != Defense::kNone && dataset.n_member < 2) {
    return absl::InvalidArgumentError("defenses need at least two members");
  }
  std::set<std::string> seen;
  for (const auto& a : attacks) {
    if (!seen.insert(a.name).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("attack '", a.name, "' listed twice"));
    }
    if (defense == Defense::kDualMd && a.white_box()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "the dualmd arm has no single model; white-box attack '", a.name,
          "' is not applicable"));
    }
    for (int t : a.t_sec) {
      if (t < 1 || t >= schedule.num_timesteps) {
        return absl::InvalidArgumentError(
            absl::StrCat("secmi t_sec ", t, " outside [1, T - 1]"));
      }
    }
    if (a.stride < 1) return absl::InvalidArgumentError("stride must be >= 1");
    for (const auto& l : a.t_lists) {
      for (int t : l) {
        if (t < 1 || t > schedule.num_timesteps) {
          return absl::InvalidArgumentError(
              absl::StrCat("loss timestep ", t, " outside [1, T]"));
        }
      }
    }
    if (a.n_mc < 1) return absl::InvalidArgumentError("n_mc must be >= 1");
    if (a.k < 1 || a.k > sampling.n_samples) {
      return absl::InvalidArgumentError("blackbox k must lie in [1, n_samples]");
    }
  }
  if (sampling.n_samples < 1 || sampling.block_size < 1) {
    return absl::InvalidArgumentError("invalid sampling settings");
  }
  if (eval.gap_n_mc < 1 || eval.quality_reference < 1 ||
      eval.memorized_set_size < 1 || eval.clean_set_size < 1 ||
      !(eval.memorization_eps_fraction > 0.0)) {
    return absl::InvalidArgumentError("invalid eval settings");
  }
  if (output_dir.empty()) {
    return absl::InvalidArgumentError("output_dir must be set");
  }
  return absl::OkStatus();
}

Json ExperimentConfig::ToJson() const {
  Json train_json = train.ToJson();
  train_json.erase("conditional");
  Json attacks_json = Json::array();
  for (const auto& a : attacks) attacks_json.push_back(AttackSpecToJson(a));
  return Json{
      {"name", name},
      {"master_seed", master_seed},
      {"dataset", dataset.ToJson()},
      {"schedule",
       {{"num_timesteps", schedule.num_timesteps},
        {"beta_start", schedule.beta_start},
        {"beta_end", schedule.beta_end}}},
      {"arch",
       {{"hidden", arch.hidden},
        {"embed_dim", arch.embed_dim},
        {"fourier_features", arch.fourier_features}}},
      {"train", train_json},
      {"defense", ToString(defense)},
      {"stratified_split", stratified_split},
      {"attacks", attacks_json},
      {"sampling",
       {{"n_samples", sampling.n_samples},
        {"step_kind", ToString(sampling.step_kind)},
        {"start", ToString(sampling.start)},
        {"block_size", sampling.block_size}}},
      {"eval",
       {{"gap_n_mc", eval.gap_n_mc},
        {"quality_reference", eval.quality_reference},
        {"memorization_eps_fraction", eval.memorization_eps_fraction},
        {"memorized_set_size", eval.memorized_set_size},
        {"clean_set_size", eval.clean_set_size}}},
      {"output_dir", output_dir}};
}

absl::StatusOr<ExperimentConfig> ExperimentConfig::FromJson(const Json& j) {
  ExperimentConfig c = Default();
  if (!j.is_object()) {
    return absl::InvalidArgumentError("experiment config must be an object");
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "name") {
        c.name = value.get<std::string>();
      } else if (key == "master_seed") {
        c.master_seed = value.get<std::uint64_t>();
      } else if (key == "dataset") {
        MDLAB_ASSIGN_OR_RETURN(c.dataset, DatasetSpec::FromJson(value));
      } else if (key == "schedule") {
        for (const auto& [k, v] : value.items()) {
          if (k == "num_timesteps") {
            c.schedule.num_timesteps = v.get<int>();
          } else if (k == "beta_start") {
            c.schedule.beta_start = v.get<double>();
          } else if (k == "beta_end") {
            c.schedule.beta_end = v.get<double>();
          } else {
            return UnknownKey("schedule", k);
          }
        }
      } else if (key == "arch") {
        for (const auto& [k, v] : value.items()) {
          if (k == "hidden") {
            c.arch.hidden = v.get<std::vector<int>>();
          } else if (k == "embed_dim") {
            c.arch.embed_dim = v.get<int>();
          } else if (k == "fourier_features") {
            c.arch.fourier_features = v.get<int>();
          } else {
            return UnknownKey("arch", k);
          }
        }
      } else if (key == "train") {
        // Partial train blocks override the defaults key by key.
        Json merged = c.train.ToJson();
        for (const auto& [k, v] : value.items()) merged[k] = v;
        if (value.contains("conditional")) {
          return absl::InvalidArgumentError(
              "train.conditional follows dataset.conditional");
        }
        MDLAB_ASSIGN_OR_RETURN(c.train, TrainConfig::FromJson(merged));
      } else if (key == "defense") {
        MDLAB_ASSIGN_OR_RETURN(c.defense,
                               DefenseFromString(value.get<std::string>()));
      } else if (key == "stratified_split") {
        c.stratified_split = value.get<bool>();
      } else if (key == "attacks") {
        c.attacks.clear();
        for (const auto& a : value) {
          MDLAB_ASSIGN_OR_RETURN(AttackSpec spec, AttackSpecFromJson(a));
          c.attacks.push_back(std::move(spec));
        }
      } else if (key == "sampling") {
        Json plan = Json::object();
        for (const auto& [k, v] : value.items()) {
          if (k == "n_samples") {
            c.sampling.n_samples = v.get<int>();
          } else if (k == "block_size") {
            c.sampling.block_size = v.get<int>();
          } else if (k == "step_kind" || k == "start") {
            plan[k] = v;
          } else {
            return UnknownKey("sampling", k);
          }
        }
        MDLAB_ASSIGN_OR_RETURN(SamplerPlan p, SamplerPlan::FromJson(plan));
        if (plan.contains("step_kind")) c.sampling.step_kind = p.step_kind;
        if (plan.contains("start")) c.sampling.start = p.start;
      } else if (key == "eval") {
        for (const auto& [k, v] : value.items()) {
          if (k == "gap_n_mc") {
            c.eval.gap_n_mc = v.get<int>();
          } else if (k == "quality_reference") {
            c.eval.quality_reference = v.get<int>();
          } else if (k == "memorization_eps_fraction") {
            c.eval.memorization_eps_fraction = v.get<double>();
          } else if (k == "memorized_set_size") {
            c.eval.memorized_set_size = v.get<int>();
          } else if (k == "clean_set_size") {
            c.eval.clean_set_size = v.get<int>();
          } else {
            return UnknownKey("eval", k);
          }
        }
      } else if (key == "output_dir") {
        c.output_dir = value.get<std::string>();
      } else {
        return UnknownKey("experiment config", key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed experiment config: ", e.what()));
  }
  MDLAB_RETURN_IF_ERROR(c.Validate());
  return c;
}

absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const fs::path& path) {
  MDLAB_ASSIGN_OR_RETURN(Json j, ReadJsonFile(path));
  return ExperimentConfig::FromJson(j);
}

absl::Status ApplyOverride(Json& config, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "override '", std::string(assignment), "' is not key=value"));
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  Json* node = &config;
  const std::vector<std::string> parts = absl::StrSplit(path, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) {
      return absl::InvalidArgumentError(
          absl::StrCat("override path '", path, "' crosses a non-object"));
    }
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = Json::object();
  }
  (*node)[parts.back()] = value;
  return absl::OkStatus();
}

absl::StatusOr<std::shared_ptr<const TrainedModel>> ModelCache::GetOrTrain(
    const std::string& key, const Trainer& train) {
  auto it = models_.find(key);
  if (it != models_.end()) {
    ++hits_;
    return it->second;
  }
  MDLAB_ASSIGN_OR_RETURN(TrainedModel m, train());
  auto ptr = std::make_shared<const TrainedModel>(std::move(m));
  models_.emplace(key, ptr);
  return ptr;
}

absl::StatusOr<Json> RunExperiment(const ExperimentConfig& config,
                                   ModelCache* cache) {
  ModelCache local;
  ArmRun run(config, cache != nullptr ? *cache : local);
  return run.Run();
}

Json MetricBlocks(const Json& manifest) {
  Json out = manifest;
  out.erase("timings");
  if (out.contains("config")) out["config"].erase("output_dir");
  return out;
}

absl::Status VerifyManifestArtifacts(const fs::path& manifest_path) {
  MDLAB_ASSIGN_OR_RETURN(Json m, ReadJsonFile(manifest_path));
  const fs::path root = manifest_path.parent_path();
  auto check = [&](const Json& entry) -> absl::Status {
    const fs::path p = root / entry.at("path").get<std::string>();
    MDLAB_ASSIGN_OR_RETURN(std::string h, GitBlobHashOfFile(p));
    if (h != entry.at("hash").get<std::string>()) {
      return absl::DataLossError(
          absl::StrCat("hash mismatch for ", p.string(), ": manifest has ",
                       entry.at("hash").get<std::string>(), ", file has ", h));
    }
    return absl::OkStatus();
  };
  try {
    const Json& a = m.at("artifacts");
    if (a.contains("dataset")) MDLAB_RETURN_IF_ERROR(check(a.at("dataset")));
    for (const char* group : {"checkpoints", "samples"}) {
      if (!a.contains(group)) continue;
      for (const auto& [name, entry] : a.at(group).items()) {
        MDLAB_RETURN_IF_ERROR(check(entry));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(absl::StrCat("malformed manifest: ", e.what()));
  }
  return absl::OkStatus();
}

absl::StatusOr<MemorizationSets> BuildMemorizationSets(const Dataset& data,
                                                       const EvalConfig& eval,
                                                       std::uint64_t seed) {
  if (!data.spec.duplicate.has_value()) {
    return absl::FailedPreconditionError("dataset has no duplicated member");
  }
  if (data.nonmembers.empty()) {
    return absl::FailedPreconditionError("dataset has no non-members");
  }
  const Tensor& anchor = data.members[data.spec.duplicate->index].x0;
  const std::size_t d = anchor.size();
  // Near copies: jitter well inside the memorization radius.
  const double jitter =
      0.01 * MedianNearestNeighborDistance(UniqueMemberPoints(data));
  Rng rng = MakeRng(seed);
  MemorizationSets sets;
  sets.memorized = Tensor(Shape{static_cast<std::size_t>(eval.memorized_set_size), d});
  for (std::size_t i = 0; i < sets.memorized.rows(); ++i) {
    auto row = sets.memorized.row(i);
    for (std::size_t l = 0; l < d; ++l) {
      row[l] = static_cast<float>(anchor[l] + jitter * StandardNormal(rng));
    }
  }
  const std::size_t n_clean =
      std::min<std::size_t>(eval.clean_set_size, data.nonmembers.size());
  sets.clean = PointsOf(std::span<const LabeledSample>(data.nonmembers).first(n_clean));
  return sets;
}

absl::StatusOr<Json> RunMemorizationExperiment(const ExperimentConfig& config,
                                               ModelCache* cache) {
  if (!config.dataset.duplicate.has_value()) {
    return absl::InvalidArgumentError(
        "memorization experiments need dataset.duplicate");
  }
  ModelCache local;
  ModelCache& c = cache != nullptr ? *cache : local;
  Json summary{{"format_version", kManifestFormatVersion},
               {"name", config.name},
               {"arms", Json::object()}};
  for (Defense d : {Defense::kNone, Defense::kDistillMd}) {
    ExperimentConfig arm = config;
    arm.defense = d;
    arm.output_dir = (fs::path(config.output_dir) / ToString(d)).string();
    std::vector<AttackSpec> kept;
    for (const auto& a : arm.attacks) {
      if (a.name == "secmi") kept.push_back(a);
    }
    arm.attacks = kept;
    MDLAB_ASSIGN_OR_RETURN(Json m, RunExperiment(arm, &c));
    const Json& mem = m["metrics"]["memorization"];
    Json entry{{"manifest", ToString(d) + "/manifest.json"},
               {"eps", mem["eps"]},
               {"fraction", mem["fraction"]}};
    if (mem.contains("detection")) {
      entry["detection_auc"] = mem["detection"]["auc"];
    }
    summary["arms"][ToString(d)] = entry;
  }
  MDLAB_RETURN_IF_ERROR(
      WriteJsonFile(fs::path(config.output_dir) / "memorization.json", summary));
  return absl::StatusOr<Json>(absl::in_place, std::move(summary));
}

}  // namespace mdlab
