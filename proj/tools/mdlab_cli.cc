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

// Command-line front end: data generation, training, distillation, sampling,
// attacks, evaluation, end-to-end runs and reports.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "mdlab/attacks.h"
#include "mdlab/checkpoint.h"
#include "mdlab/dataset.h"
#include "mdlab/experiment.h"
#include "mdlab/io.h"
#include "mdlab/kernels.h"
#include "mdlab/metrics.h"
#include "mdlab/random.h"
#include "mdlab/report.h"
#include "mdlab/sampler.h"
#include "mdlab/status_macros.h"
#include "mdlab/training.h"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace mdlab {
namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::string output_dir;
};

void AddCommon(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "experiment config (JSON)");
  app->add_option("--set", f.overrides, "override a config key: a.b=value");
  app->add_option("--output-dir", f.output_dir, "output directory");
}

absl::StatusOr<ExperimentConfig> ResolveConfig(const CommonFlags& f) {
  Json j = Json::object();
  if (!f.config.empty()) {
    MDLAB_ASSIGN_OR_RETURN(j, ReadJsonFile(f.config));
  }
  if (const char* env = std::getenv("MDLAB_OUTPUT_DIR");
      env != nullptr && !j.contains("output_dir")) {
    j["output_dir"] = env;
  }
  for (const auto& o : f.overrides) MDLAB_RETURN_IF_ERROR(ApplyOverride(j, o));
  if (!f.output_dir.empty()) j["output_dir"] = f.output_dir;
  return ExperimentConfig::FromJson(j);
}

// Data files hold the dataset and its D1/D2/test split.
absl::Status WriteDataFile(const fs::path& path, const Dataset& data,
                           const DatasetSplit& split) {
  Json j{{"dataset", DatasetToJson(data)},
         {"split",
          {{"d1", split.d1_indices},
           {"d2", split.d2_indices},
           {"test", split.test_indices}}}};
  return WriteJsonFile(path, j);
}

struct DataFile {
  Dataset data;
  DatasetSplit split;
};

absl::StatusOr<DataFile> ReadDataFile(const fs::path& path) {
  MDLAB_ASSIGN_OR_RETURN(Json j, ReadJsonFile(path));
  DataFile f;
  try {
    MDLAB_ASSIGN_OR_RETURN(f.data, DatasetFromJson(j.at("dataset")));
    f.split.all_samples = f.data.members;
    f.split.all_samples.insert(f.split.all_samples.end(),
                               f.data.nonmembers.begin(),
                               f.data.nonmembers.end());
    f.split.d1_indices = j.at("split").at("d1").get<std::vector<int>>();
    f.split.d2_indices = j.at("split").at("d2").get<std::vector<int>>();
    f.split.test_indices = j.at("split").at("test").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed data file: ", e.what()));
  }
  const int total = static_cast<int>(f.split.all_samples.size());
  for (const auto* idx :
       {&f.split.d1_indices, &f.split.d2_indices, &f.split.test_indices}) {
    for (int i : *idx) {
      if (i < 0 || i >= total) {
        return absl::InvalidArgumentError("split index out of range");
      }
    }
  }
  return f;
}

absl::StatusOr<std::vector<LabeledSample>> SelectSubset(const DataFile& f,
                                                        const std::string& s) {
  if (s == "members") return f.data.members;
  if (s == "d1") return f.split.D1();
  if (s == "d2") return f.split.D2();
  if (s == "test") return f.split.Test();
  return absl::InvalidArgumentError(absl::StrCat("unknown subset '", s, "'"));
}

TrainConfig TrainFor(const ExperimentConfig& cfg) {
  TrainConfig tc = cfg.train;
  tc.conditional = cfg.dataset.conditional;
  return tc;
}

absl::Status GenData(const CommonFlags& flags, const std::string& out) {
  MDLAB_ASSIGN_OR_RETURN(ExperimentConfig cfg, ResolveConfig(flags));
  MDLAB_ASSIGN_OR_RETURN(
      Dataset data,
      GenerateDataset(cfg.dataset, DeriveSeed(cfg.master_seed, "data")));
  std::vector<LabeledSample> all = data.members;
  all.insert(all.end(), data.nonmembers.begin(), data.nonmembers.end());
  MDLAB_ASSIGN_OR_RETURN(
      DatasetSplit split,
      SplitDisjoint(std::move(all), DeriveSeed(cfg.master_seed, "split"),
                    SplitOptions{cfg.stratified_split}));
  MDLAB_RETURN_IF_ERROR(WriteDataFile(out, data, split));
  std::cout << "wrote " << out << ": " << data.members.size() << " members, "
            << data.nonmembers.size() << " non-members, |D1| = "
            << split.d1_indices.size() << ", |D2| = " << split.d2_indices.size()
            << "\n";
  return absl::OkStatus();
}

absl::Status Train(const CommonFlags& flags, const std::string& data_path,
                   const std::string& subset, std::uint64_t seed,
                   const std::string& out) {
  MDLAB_ASSIGN_OR_RETURN(ExperimentConfig cfg, ResolveConfig(flags));
  MDLAB_ASSIGN_OR_RETURN(DataFile f, ReadDataFile(data_path));
  MDLAB_ASSIGN_OR_RETURN(auto samples, SelectSubset(f, subset));
  MDLAB_ASSIGN_OR_RETURN(NoiseSchedule sched, cfg.MakeSchedule());
  MDLAB_ASSIGN_OR_RETURN(Denoiser init,
                         InitDenoiser(cfg.ModelArch(), DeriveSeed(seed, "init")));
  Rng rng = MakeRng(DeriveSeed(seed, "train"));
  MDLAB_ASSIGN_OR_RETURN(
      TrainResult r, TrainDdpm(std::move(init), samples, sched, TrainFor(cfg), rng));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  MDLAB_RETURN_IF_ERROR(SaveCheckpoint(out, r.model));
  MDLAB_RETURN_IF_ERROR(WriteLossTrace(out + ".loss.csv", r.loss_trace));
  std::cout << "wrote " << out << " (final batch loss "
            << (r.loss_trace.empty() ? 0.0 : r.loss_trace.back()) << ")\n";
  return absl::OkStatus();
}

absl::Status Distill(const CommonFlags& flags, const std::string& data_path,
                     const std::string& teacher1, const std::string& teacher2,
                     std::uint64_t seed, const std::string& out) {
  MDLAB_ASSIGN_OR_RETURN(ExperimentConfig cfg, ResolveConfig(flags));
  MDLAB_ASSIGN_OR_RETURN(DataFile f, ReadDataFile(data_path));
  MDLAB_ASSIGN_OR_RETURN(NoiseSchedule sched, cfg.MakeSchedule());
  const DenoiserArch arch = cfg.ModelArch();
  MDLAB_ASSIGN_OR_RETURN(Denoiser t1, LoadCheckpoint(teacher1, arch));
  MDLAB_ASSIGN_OR_RETURN(Denoiser t2, LoadCheckpoint(teacher2, arch));
  MDLAB_ASSIGN_OR_RETURN(Denoiser init, InitDenoiser(arch, DeriveSeed(seed, "init")));
  Rng rng = MakeRng(DeriveSeed(seed, "train"));
  DistillAudit audit;
  MDLAB_ASSIGN_OR_RETURN(TrainResult r,
                         TrainDistillMd(t1, t2, f.split, std::move(init), sched,
                                        TrainFor(cfg), rng, &audit));
  MDLAB_RETURN_IF_ERROR(SaveCheckpoint(out, r.model));
  MDLAB_RETURN_IF_ERROR(WriteLossTrace(out + ".loss.csv", r.loss_trace));
  std::cout << "wrote " << out << " (" << audit.d1_batches
            << " D1 batches with teacher 2, " << audit.d2_batches
            << " D2 batches with teacher 1)\n";
  return absl::OkStatus();
}

absl::Status Sample(const CommonFlags& flags, const std::string& model_a,
                    const std::string& model_b, int n, std::uint64_t seed,
                    const std::string& out) {
  MDLAB_ASSIGN_OR_RETURN(ExperimentConfig cfg, ResolveConfig(flags));
  MDLAB_ASSIGN_OR_RETURN(NoiseSchedule sched, cfg.MakeSchedule());
  const DenoiserArch arch = cfg.ModelArch();
  MDLAB_ASSIGN_OR_RETURN(Denoiser a, LoadCheckpoint(model_a, arch));
  SamplerPlan plan;
  plan.mode = model_b.empty() ? SamplerMode::kSingle : SamplerMode::kDual;
  plan.step_kind = cfg.sampling.step_kind;
  plan.start = cfg.sampling.start;
  plan.block_size = cfg.sampling.block_size;
  plan.n_samples = n > 0 ? n : cfg.sampling.n_samples;
  plan.seed = seed;
  SamplerStats stats;
  Tensor samples;
  Json hashes = Json::array();
  MDLAB_ASSIGN_OR_RETURN(std::string ha, GitBlobHashOfFile(model_a));
  hashes.push_back(ha);
  if (model_b.empty()) {
    MDLAB_ASSIGN_OR_RETURN(samples, SingleSample(a, sched, plan, &stats));
  } else {
    MDLAB_ASSIGN_OR_RETURN(Denoiser b, LoadCheckpoint(model_b, arch));
    MDLAB_ASSIGN_OR_RETURN(samples, DualSample(a, b, sched, plan, &stats));
    MDLAB_ASSIGN_OR_RETURN(std::string hb, GitBlobHashOfFile(model_b));
    hashes.push_back(hb);
  }
  Json sidecar{{"plan", plan.ToJson()},
               {"model_hashes", hashes},
               {"steps", {{"a", stats.steps_a}, {"b", stats.steps_b}}}};
  MDLAB_RETURN_IF_ERROR(WriteSamples(out, samples, sidecar));
  std::cout << "wrote " << samples.rows() << " samples to " << out << "\n";
  return absl::OkStatus();
}

absl::Status Attack(const CommonFlags& flags, const std::string& data_path,
                    const std::string& attack, const std::string& model_path,
                    const std::string& samples_path, std::uint64_t seed,
                    const std::string& out) {
  MDLAB_ASSIGN_OR_RETURN(ExperimentConfig cfg, ResolveConfig(flags));
  MDLAB_ASSIGN_OR_RETURN(DataFile f, ReadDataFile(data_path));
  MDLAB_ASSIGN_OR_RETURN(NoiseSchedule sched, cfg.MakeSchedule());
  AttackSpec spec;
  spec.name = attack;
  for (const auto& a : cfg.attacks) {
    if (a.name == attack) spec = a;
  }
  const bool cond = cfg.dataset.conditional;
  std::unique_ptr<Scorer> scorer;
  std::optional<Denoiser> model;
  if (attack == "blackbox") {
    if (samples_path.empty()) {
      return absl::InvalidArgumentError("blackbox attack needs --samples");
    }
    MDLAB_ASSIGN_OR_RETURN(Tensor gen, ReadSampleBlock(samples_path));
    scorer = MakeBlackboxScorer(std::move(gen), {spec.k});
  } else {
    if (model_path.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat(attack, " attack needs --model"));
    }
    MDLAB_ASSIGN_OR_RETURN(model, LoadCheckpoint(model_path, cfg.ModelArch()));
    if (attack == "secmi") {
      const int t = spec.t_sec.empty() ? 0 : spec.t_sec.front();
      scorer = MakeSecMiScorer(*model, sched, {t, spec.stride}, cond);
    } else if (attack == "loss") {
      std::vector<int> l = spec.t_lists.empty() ? std::vector<int>{}
                                                : spec.t_lists.front();
      scorer = MakeLossScorer(*model, sched, {l, spec.n_mc}, cond);
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown attack '", attack, "'"));
    }
  }
  MDLAB_ASSIGN_OR_RETURN(
      AttackScores scores,
      RunAttack(*scorer, f.data.members, f.data.nonmembers, {seed}));
  MDLAB_RETURN_IF_ERROR(WriteJsonFile(out, scores.ToJson()));
  MDLAB_ASSIGN_OR_RETURN(double auc, Auc(scores));
  std::cout << "wrote " << out << " (AUC " << auc << ")\n";
  return absl::OkStatus();
}

absl::Status Eval(const std::string& scores_path, const std::string& samples,
                  const std::string& reference, double eps,
                  const std::string& out, const std::string& roc_csv) {
  Json result = Json::object();
  if (!scores_path.empty()) {
    MDLAB_ASSIGN_OR_RETURN(Json j, ReadJsonFile(scores_path));
    MDLAB_ASSIGN_OR_RETURN(AttackScores scores, AttackScores::FromJson(j));
    MDLAB_ASSIGN_OR_RETURN(RocReport r, MakeRocReport(scores));
    result["roc"] = r.ToJson();
    if (!roc_csv.empty()) MDLAB_RETURN_IF_ERROR(WriteRocCsv(roc_csv, r));
  }
  if (!samples.empty()) {
    if (reference.empty()) {
      return absl::InvalidArgumentError("--samples needs --reference");
    }
    MDLAB_ASSIGN_OR_RETURN(Tensor gen, ReadSampleBlock(samples));
    MDLAB_ASSIGN_OR_RETURN(Tensor ref, ReadSampleBlock(reference));
    MDLAB_ASSIGN_OR_RETURN(double ed, EnergyDistance(gen, ref));
    result["energy_distance"] = ed;
    const double radius =
        eps > 0.0 ? eps : 0.1 * MedianNearestNeighborDistance(ref);
    MDLAB_ASSIGN_OR_RETURN(double frac, MemorizationFraction(gen, ref, radius));
    result["memorization_fraction"] = frac;
    result["memorization_eps"] = radius;
  }
  if (result.empty()) {
    return absl::InvalidArgumentError("eval needs --scores or --samples");
  }
  if (!out.empty()) MDLAB_RETURN_IF_ERROR(WriteJsonFile(out, result));
  std::cout << result.dump(2) << "\n";
  return absl::OkStatus();
}

absl::Status Run(const CommonFlags& flags, const std::string& defenses) {
  MDLAB_ASSIGN_OR_RETURN(ExperimentConfig base, ResolveConfig(flags));
  std::vector<std::string> names;
  if (defenses.empty()) {
    names.push_back(ToString(base.defense));
  } else {
    names = absl::StrSplit(defenses, ',');
  }
  ModelCache cache;
  for (const auto& name : names) {
    ExperimentConfig cfg = base;
    MDLAB_ASSIGN_OR_RETURN(cfg.defense, DefenseFromString(name));
    if (names.size() > 1) {
      cfg.output_dir = (fs::path(base.output_dir) / name).string();
    }
    if (cfg.defense == Defense::kDualMd) {
      std::erase_if(cfg.attacks, [](const AttackSpec& a) { return a.white_box(); });
    }
    MDLAB_ASSIGN_OR_RETURN(Json m, RunExperiment(cfg, &cache));
    std::cout << "[" << name << "] " << cfg.output_dir << "/manifest.json\n";
    for (const auto& [key, rep] : m["metrics"]["reports"].items()) {
      std::cout << "  " << key << ": AUC " << rep["auc"].get<double>()
                << ", TPR@1%FPR " << rep["tpr_at_1pct_fpr"].get<double>()
                << "\n";
    }
  }
  return absl::OkStatus();
}

absl::Status Report(const std::vector<std::string>& manifests,
                    const std::string& csv, const std::string& markdown) {
  std::vector<fs::path> paths(manifests.begin(), manifests.end());
  MDLAB_ASSIGN_OR_RETURN(ComparisonTable table, BuildReport(paths));
  if (!csv.empty()) MDLAB_RETURN_IF_ERROR(WriteFileAtomic(csv, table.ToCsv()));
  if (!markdown.empty()) {
    MDLAB_RETURN_IF_ERROR(WriteFileAtomic(markdown, table.ToMarkdown()));
  }
  std::cout << table.ToMarkdown();
  return absl::OkStatus();
}

absl::Status MemorizeExp(const CommonFlags& flags) {
  MDLAB_ASSIGN_OR_RETURN(ExperimentConfig cfg, ResolveConfig(flags));
  if (!cfg.dataset.duplicate.has_value()) {
    cfg.dataset.duplicate = DuplicationSpec{};
  }
  MDLAB_ASSIGN_OR_RETURN(Json summary, RunMemorizationExperiment(cfg));
  std::cout << summary.dump(2) << "\n";
  return absl::OkStatus();
}

int Finish(const absl::Status& s) {
  if (s.ok()) return 0;
  std::cerr << "error: " << s << "\n";
  return 1;
}

}  // namespace
}  // namespace mdlab

int main(int argc, char** argv) {
  using namespace mdlab;
  if (const char* threads = std::getenv("MDLAB_NUM_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) kernels::SetMaxThreads(n);
  }

  CLI::App app{"Membership-inference lab for small diffusion models"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  std::string gen_out = "data.json";
  auto* gen = app.add_subcommand("gen-data", "generate a dataset and its split");
  AddCommon(gen, gen_flags);
  gen->add_option("--out", gen_out, "output data file");

  CommonFlags train_flags;
  std::string train_data, train_subset = "members", train_out = "model.mdck";
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "train a denoiser on a subset");
  AddCommon(train, train_flags);
  train->add_option("--data", train_data, "data file from gen-data")->required();
  train->add_option("--subset", train_subset, "members, d1 or d2");
  train->add_option("--seed", train_seed, "seed");
  train->add_option("--out", train_out, "checkpoint path");

  CommonFlags distill_flags;
  std::string distill_data, teacher1, teacher2, distill_out = "student.mdck";
  std::uint64_t distill_seed = 0;
  auto* distill = app.add_subcommand("distill", "alternating distillation");
  AddCommon(distill, distill_flags);
  distill->add_option("--data", distill_data, "data file")->required();
  distill->add_option("--teacher1", teacher1, "model trained on D1")->required();
  distill->add_option("--teacher2", teacher2, "model trained on D2")->required();
  distill->add_option("--seed", distill_seed, "seed");
  distill->add_option("--out", distill_out, "student checkpoint path");

  CommonFlags sample_flags;
  std::string model_a, model_b, sample_out = "samples.bin";
  int sample_n = 0;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "generate samples (single or dual)");
  AddCommon(sample, sample_flags);
  sample->add_option("--model", model_a, "checkpoint")->required();
  sample->add_option("--model-b", model_b, "second checkpoint for dual mode");
  sample->add_option("--n", sample_n, "number of samples");
  sample->add_option("--seed", sample_seed, "seed");
  sample->add_option("--out", sample_out, "sample block path");

  CommonFlags attack_flags;
  std::string attack_data, attack_name, attack_model, attack_samples,
      attack_out = "scores.json";
  std::uint64_t attack_seed = 0;
  auto* attack = app.add_subcommand("attack", "score members and non-members");
  AddCommon(attack, attack_flags);
  attack->add_option("--data", attack_data, "data file")->required();
  attack->add_option("--attack", attack_name, "loss, secmi or blackbox")
      ->required();
  attack->add_option("--model", attack_model, "checkpoint (white-box attacks)");
  attack->add_option("--samples", attack_samples, "sample block (blackbox)");
  attack->add_option("--seed", attack_seed, "seed");
  attack->add_option("--out", attack_out, "scores JSON");

  std::string eval_scores, eval_samples, eval_reference, eval_out, eval_roc;
  double eval_eps = 0.0;
  auto* eval = app.add_subcommand("eval", "ROC metrics, quality and memorization");
  eval->add_option("--scores", eval_scores, "attack scores JSON");
  eval->add_option("--roc-csv", eval_roc, "write ROC points as CSV");
  eval->add_option("--samples", eval_samples, "generated sample block");
  eval->add_option("--reference", eval_reference, "reference sample block");
  eval->add_option("--eps", eval_eps, "memorization radius");
  eval->add_option("--out", eval_out, "result JSON");

  CommonFlags run_flags;
  std::string run_defenses;
  auto* run = app.add_subcommand("run", "end-to-end experiment");
  AddCommon(run, run_flags);
  run->add_option("--defenses", run_defenses,
                  "comma-separated arms, e.g. none,dualmd,distillmd");

  std::vector<std::string> report_manifests;
  std::string report_csv, report_md;
  auto* report = app.add_subcommand("report", "comparison table from manifests");
  report->add_option("manifests", report_manifests, "manifest.json files")
      ->required();
  report->add_option("--csv", report_csv, "write the table as CSV");
  report->add_option("--markdown", report_md, "write the table as markdown");

  CommonFlags mem_flags;
  auto* mem = app.add_subcommand("memorize-exp", "duplicated-sample experiment");
  AddCommon(mem, mem_flags);

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) return Finish(GenData(gen_flags, gen_out));
  if (train->parsed()) {
    return Finish(Train(train_flags, train_data, train_subset, train_seed,
                        train_out));
  }
  if (distill->parsed()) {
    return Finish(Distill(distill_flags, distill_data, teacher1, teacher2,
                          distill_seed, distill_out));
  }
  if (sample->parsed()) {
    return Finish(
        Sample(sample_flags, model_a, model_b, sample_n, sample_seed, sample_out));
  }
  if (attack->parsed()) {
    return Finish(Attack(attack_flags, attack_data, attack_name, attack_model,
                         attack_samples, attack_seed, attack_out));
  }
  if (eval->parsed()) {
    return Finish(Eval(eval_scores, eval_samples, eval_reference, eval_eps,
                       eval_out, eval_roc));
  }
  if (run->parsed()) return Finish(Run(run_flags, run_defenses));
  if (report->parsed()) return Finish(Report(report_manifests, report_csv, report_md));
  if (mem->parsed()) return Finish(MemorizeExp(mem_flags));
  return 1;
}
