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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criteria 1-4 are property checks; 5-11 run the ring experiment
// for seeds 1, 2 and 3.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "mdlab/attacks.h"
#include "mdlab/denoiser.h"
#include "mdlab/diffusion.h"
#include "mdlab/experiment.h"
#include "mdlab/io.h"
#include "mdlab/metrics.h"
#include "mdlab/random.h"
#include "mdlab/sampler.h"
#include "mdlab/schedule.h"
#include "mdlab/status_macros.h"
#include "nlohmann/json.hpp"

namespace mdlab {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

double Since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;

  void Fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void Note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

void Print(int id, const std::string& title, Outcome& o) {
  if (o.budget > 0.0 && o.seconds > o.budget) {
    o.Fail(absl::StrFormat("runtime %.1fs over budget %.0fs", o.seconds, o.budget));
  }
  std::printf("[%s] %2d %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", id,
              title.c_str(), o.seconds, o.detail.c_str());
  std::fflush(stdout);
}

class ConstantPredictor : public NoisePredictor {
 public:
  explicit ConstantPredictor(std::vector<float> value) : value_(std::move(value)) {}
  std::size_t data_dim() const override { return value_.size(); }
  absl::StatusOr<Tensor> PredictNoise(const Tensor& x, std::span<const int>,
                                      std::span<const int>) const override {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::copy(value_.begin(), value_.end(), out.row(i).begin());
    }
    return out;
  }

 private:
  std::vector<float> value_;
};

Outcome GradientCheck() {
  Outcome o;
  o.budget = 10.0;
  const auto start = Clock::now();
  Rng rng = MakeRng(20240501);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int net = 0; net < 20; ++net) {
    DenoiserArch arch;
    arch.num_timesteps = 50;
    arch.embed_dim = 2 * UniformInt(rng, 2, 4);
    arch.fourier_features = UniformInt(rng, 0, 3);
    arch.num_tokens = UniformInt(rng, 0, 1) == 1 ? UniformInt(rng, 2, 5) : 0;
    const int depth = UniformInt(rng, 1, 3);
    arch.hidden.clear();
    for (int l = 0; l < depth; ++l) arch.hidden.push_back(UniformInt(rng, 3, 12));
    auto init = InitDenoiser(arch, 1000 + net);
    if (!init.ok()) {
      o.Fail(std::string(init.status().message()));
      break;
    }
    Denoiser m = *std::move(init);
    const std::size_t n = UniformInt(rng, 1, 6);
    const Tensor x = GaussianTensor(Shape{n, 2}, rng);
    const Tensor target = GaussianTensor(Shape{n, 2}, rng);
    std::vector<int> ts(n), tok;
    for (auto& t : ts) t = UniformInt(rng, 1, arch.num_timesteps);
    if (arch.conditional()) {
      tok.resize(n);
      for (auto& k : tok) k = UniformInt(rng, 0, arch.num_tokens - 1);
    }
    auto loss = [&]() { return m.ComputeLossAndGrads(x, ts, tok, target)->loss; };
    const LossAndGrads lg = *m.ComputeLossAndGrads(x, ts, tok, target);
    const double h = 1e-3;
    for (std::size_t p = 0; p < m.params().size(); ++p) {
      for (std::size_t i = 0; i < m.params()[p].value.size(); ++i) {
        float& w = m.mutable_params()[p].value[i];
        const float orig = w;
        w = static_cast<float>(orig + h);
        const double up_step = static_cast<double>(w) - orig;
        const double up = loss();
        w = static_cast<float>(orig - h);
        const double down_step = static_cast<double>(w) - orig;
        const double down = loss();
        w = orig;
        const double fd = (up - down) / (up_step - down_step);
        const double an = lg.grads[p].value[i];
        const double scale = std::max({std::abs(fd), std::abs(an), 1e-2});
        worst = std::max(worst, std::abs(fd - an) / scale);
        ++checked;
      }
    }
  }
  o.seconds = Since(start);
  o.Note(absl::StrFormat("%d parameters, worst relative error %.2e", checked, worst));
  if (worst > 1e-4) o.Fail("relative error above 1e-4");
  return o;
}

Outcome AucOracle() {
  Outcome o;
  o.budget = 5.0;
  const auto start = Clock::now();
  Rng rng = MakeRng(77);
  int mismatches = 0;
  int flip_mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    AttackScores s;
    s.attack = "oracle";
    s.member_scores.resize(UniformInt(rng, 1, 60));
    s.nonmember_scores.resize(UniformInt(rng, 1, 60));
    const int levels = UniformInt(rng, 2, 30);
    for (auto& v : s.member_scores) v = UniformInt(rng, 0, levels) * 0.25;
    for (auto& v : s.nonmember_scores) v = UniformInt(rng, 0, levels) * 0.25;
    if (trial % 2 == 1) s.orientation = Orientation::kHigherMeansMember;
    std::uint64_t twice = 0;
    for (double a : s.member_scores) {
      for (double b : s.nonmember_scores) {
        const bool lower = s.orientation == Orientation::kLowerMeansMember;
        if (a == b) {
          twice += 1;
        } else if ((a < b) == lower) {
          twice += 2;
        }
      }
    }
    const AucCounts c = *ComputeAucCounts(s);
    if (c.twice_wins != twice) ++mismatches;
    AttackScores f = s;
    f.orientation = s.orientation == Orientation::kLowerMeansMember
                        ? Orientation::kHigherMeansMember
                        : Orientation::kLowerMeansMember;
    const AucCounts fc = *ComputeAucCounts(f);
    if (fc.twice_wins != 2 * c.pairs - c.twice_wins) ++flip_mismatches;
  }
  o.seconds = Since(start);
  o.Note(absl::StrFormat("200 score sets, %d count mismatches, %d flip mismatches",
                         mismatches, flip_mismatches));
  if (mismatches > 0 || flip_mismatches > 0) o.Fail("pair counts differ");
  return o;
}

Outcome SecMiZeroAndInversion() {
  Outcome o;
  o.budget = 5.0;
  const auto start = Clock::now();
  const NoiseSchedule s = *MakeLinearSchedule(100, 1e-4, 0.05);
  Rng rng = MakeRng(3);
  const Tensor x0 = GaussianTensor(Shape{256, 2}, rng);
  ConstantPredictor model({0.4f, -1.1f});
  double worst_t_error = 0.0;
  for (int t_sec = 1; t_sec < 100; ++t_sec) {
    for (int stride : {1, 3}) {
      for (double v : *SecMiScores(model, x0, {}, s, t_sec, stride)) {
        worst_t_error = std::max(worst_t_error, v);
      }
    }
  }
  double worst_inversion = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const Tensor eps = GaussianTensor(x0.shape(), rng);
    const Tensor xt = *Diffuse(x0, t, eps, s);
    const Tensor back = *PredictX0(xt, t, eps, s);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      worst_inversion = std::max(
          worst_inversion, std::abs(static_cast<double>(back[i]) - x0[i]));
    }
  }
  o.seconds = Since(start);
  o.Note(absl::StrFormat("max t-error %.1e, max inversion error %.1e",
                         worst_t_error, worst_inversion));
  if (worst_t_error > 1e-12) o.Fail("t-error not zero");
  if (worst_inversion > 1e-5) o.Fail("inversion error above 1e-5");
  return o;
}

Outcome DualDegenerate() {
  Outcome o;
  o.budget = 5.0;
  const auto start = Clock::now();
  const NoiseSchedule s = *MakeLinearSchedule(100, 1e-4, 0.05);
  DenoiserArch arch;
  arch.hidden = {32, 32};
  arch.fourier_features = 2;
  const Denoiser a = *InitDenoiser(arch, 5);
  const Denoiser b = a;
  int cases = 0;
  for (StepKind kind : {StepKind::kAncestral, StepKind::kDeterministic}) {
    for (std::uint64_t seed : {1u, 2u}) {
      SamplerPlan single;
      single.step_kind = kind;
      single.n_samples = 500;
      single.seed = seed;
      const Tensor ref = *SingleSample(a, s, single);
      for (StartParity start_parity : {StartParity::kAFirst, StartParity::kBFirst}) {
        for (int block : {1, 7}) {
          SamplerPlan dual = single;
          dual.mode = SamplerMode::kDual;
          dual.start = start_parity;
          dual.block_size = block;
          const Tensor out = *DualSample(a, b, s, dual);
          ++cases;
          if (!(out == ref)) {
            o.Fail(absl::StrCat("mismatch for ", ToString(kind), " seed ", seed));
          }
        }
      }
    }
  }
  o.seconds = Since(start);
  o.Note(absl::StrCat(cases, " dual runs compared bit for bit"));
  return o;
}

// Manifests and wall times of one seed's arms.
struct SeedRun {
  Json baseline;
  Json distill;
  Json dual;
  Json memorization;
  double baseline_seconds = 0.0;
  double distill_seconds = 0.0;
  double dual_seconds = 0.0;
  double memorization_seconds = 0.0;
};

ExperimentConfig ArmConfig(std::uint64_t seed, Defense d, const fs::path& dir) {
  ExperimentConfig c = ExperimentConfig::Default();
  c.name = absl::StrCat("ring-seed", seed, "-", ToString(d));
  c.master_seed = seed;
  c.defense = d;
  c.output_dir = dir.string();
  if (d == Defense::kDualMd) {
    std::vector<AttackSpec> kept;
    for (const auto& a : c.attacks) {
      if (!a.white_box()) kept.push_back(a);
    }
    c.attacks = kept;
  }
  return c;
}

absl::StatusOr<SeedRun> RunSeed(std::uint64_t seed, const fs::path& root,
                                bool with_memorization) {
  SeedRun r;
  ModelCache cache;
  const fs::path dir = root / absl::StrCat("seed", seed);
  auto t = Clock::now();
  MDLAB_ASSIGN_OR_RETURN(
      r.baseline,
      RunExperiment(ArmConfig(seed, Defense::kNone, dir / "none"), &cache));
  r.baseline_seconds = Since(t);
  t = Clock::now();
  MDLAB_ASSIGN_OR_RETURN(
      r.distill, RunExperiment(ArmConfig(seed, Defense::kDistillMd,
                                         dir / "distillmd"), &cache));
  r.distill_seconds = Since(t);
  t = Clock::now();
  MDLAB_ASSIGN_OR_RETURN(
      r.dual,
      RunExperiment(ArmConfig(seed, Defense::kDualMd, dir / "dualmd"), &cache));
  r.dual_seconds = Since(t);
  if (with_memorization) {
    ExperimentConfig c = ExperimentConfig::Default();
    c.name = absl::StrCat("ring-dup-seed", seed);
    c.master_seed = seed;
    c.dataset.duplicate = DuplicationSpec{0, 100};
    c.output_dir = (dir / "memorization").string();
    t = Clock::now();
    ModelCache mem_cache;
    MDLAB_ASSIGN_OR_RETURN(r.memorization, RunMemorizationExperiment(c, &mem_cache));
    r.memorization_seconds = Since(t);
  }
  return r;
}

double Get(const Json& m, std::initializer_list<const char*> path) {
  const Json* node = &m;
  for (const char* key : path) node = &node->at(key);
  return node->get<double>();
}

double Timing(const Json& m, const char* key) {
  return m["timings"].contains(key) ? m["timings"][key].get<double>() : 0.0;
}

int Main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string output_dir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--output-dir", output_dir, "Directory for run artifacts");
  app.add_option("--only", only, "Run only these criteria (1-4 are cheap)");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  std::map<int, bool> results;
  auto record = [&](int id, const std::string& title, Outcome o) {
    Print(id, title, o);
    results[id] = o.pass;
  };
  if (want(1)) record(1, "gradient correctness", GradientCheck());
  if (want(2)) record(2, "AUC oracle equivalence", AucOracle());
  if (want(3)) record(3, "SecMI zero point and inversion", SecMiZeroAndInversion());
  if (want(4)) record(4, "dual sampler degenerate equivalence", DualDegenerate());

  const bool need_runs = std::any_of(
      selected.begin(), selected.end(), [](int id) { return id >= 5; });
  if (!selected.empty() && !need_runs) {
    return std::all_of(results.begin(), results.end(),
                       [](const auto& kv) { return kv.second; })
               ? 0
               : 1;
  }

  const fs::path root(output_dir);
  std::vector<SeedRun> runs;
  for (std::uint64_t seed : kSeeds) {
    auto r = RunSeed(seed, root, want(10));
    if (!r.ok()) {
      std::printf("[FAIL] experiment for seed %llu failed: %s\n",
                  static_cast<unsigned long long>(seed),
                  std::string(r.status().message()).c_str());
      return 1;
    }
    runs.push_back(*std::move(r));
  }
  const double n = static_cast<double>(runs.size());

  if (want(5)) {
    Outcome o;
    o.budget = 600.0;
    double secmi = 0.0, loss = 0.0;
    for (const auto& r : runs) {
      secmi += Get(r.baseline, {"metrics", "reports", "secmi@baseline", "auc"}) / n;
      loss += Get(r.baseline, {"metrics", "reports", "loss@baseline", "auc"}) / n;
      o.seconds += r.baseline_seconds;
    }
    o.Note(absl::StrFormat("mean SecMI AUC %.4f, mean loss AUC %.4f", secmi, loss));
    if (secmi < 0.80) o.Fail("SecMI AUC below 0.80");
    if (loss < 0.75) o.Fail("loss AUC below 0.75");
    record(5, "attacks succeed on the baseline", o);
  }

  if (want(6)) {
    Outcome o;
    o.budget = 900.0;
    double auc = 0.0, tpr_student = 0.0, tpr_base = 0.0;
    for (const auto& r : runs) {
      auc += Get(r.distill, {"metrics", "reports", "secmi@student", "auc"}) / n;
      tpr_student +=
          Get(r.distill, {"metrics", "reports", "secmi@student", "tpr_at_1pct_fpr"}) / n;
      tpr_base +=
          Get(r.baseline, {"metrics", "reports", "secmi@baseline", "tpr_at_1pct_fpr"}) / n;
      o.seconds += r.distill_seconds;
    }
    o.Note(absl::StrFormat(
        "mean student SecMI AUC %.4f, TPR@1%%FPR %.4f vs baseline %.4f", auc,
        tpr_student, tpr_base));
    if (auc > 0.65) o.Fail("student AUC above 0.65");
    if (std::abs(auc - 0.5) > 0.15) o.Fail("student AUC more than 0.15 from 0.5");
    if (!(tpr_base > 0.0 && tpr_base >= 5.0 * tpr_student)) {
      o.Fail("TPR@1%FPR not reduced 5x");
    }
    // The student's loss gap between members and test data shrinks too.
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const double student = std::abs(
          Get(runs[i].distill, {"metrics", "generalization_gaps", "student", "gap"}));
      const double base = std::abs(
          Get(runs[i].baseline, {"metrics", "generalization_gaps", "baseline", "gap"}));
      o.Note(absl::StrFormat("seed %d |gap| %.4f vs baseline %.4f", kSeeds[i],
                             student, base));
      if (!(student < base)) {
        o.Fail(absl::StrFormat("seed %d student gap not smaller", kSeeds[i]));
      }
    }
    record(6, "distillation defense", o);
  }

  if (want(7)) {
    Outcome o;
    o.budget = 120.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const Json& gaps = runs[i].distill["metrics"]["generalization_gaps"];
      for (const char* key : {"teacher1_on_d2", "teacher2_on_d1"}) {
        const double gap = gaps[key]["gap"].get<double>();
        const double se = gaps[key]["standard_error"].get<double>();
        o.Note(absl::StrFormat("seed %d %s %.4f (%.2f SE)", kSeeds[i], key, gap,
                               se > 0.0 ? gap / se : 0.0));
        if (!(std::abs(gap) <= 3.0 * se)) {
          o.Fail(absl::StrFormat("seed %d %s outside 3 SE", kSeeds[i], key));
        }
      }
      o.seconds += Timing(runs[i].distill, "evaluate");
    }
    record(7, "teachers see the other half as unseen data", o);
  }

  if (want(8)) {
    Outcome o;
    o.budget = 600.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const Json& rep = runs[i].dual["metrics"]["reports"];
      const double dual = rep["blackbox@dual"]["auc"].get<double>();
      const double t1 = rep["blackbox@teacher1"]["auc"].get<double>();
      const double t2 = rep["blackbox@teacher2"]["auc"].get<double>();
      o.Note(absl::StrFormat("seed %d dual %.4f, teachers %.4f / %.4f", kSeeds[i],
                             dual, t1, t2));
      if (!(dual < t1 && dual < t2)) {
        o.Fail(absl::StrFormat("seed %d not below both teachers", kSeeds[i]));
      }
      o.seconds += runs[i].dual_seconds +
                   Timing(runs[i].distill, "train.teacher1") +
                   Timing(runs[i].distill, "train.teacher2");
    }
    record(8, "dual sampling blunts the black-box attack", o);
  }

  if (want(9)) {
    Outcome o;
    o.budget = 300.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const double student =
          Get(runs[i].distill, {"metrics", "quality", "student", "energy_distance"});
      const double base =
          Get(runs[i].baseline, {"metrics", "quality", "baseline", "energy_distance"});
      const double student_pop = Get(
          runs[i].distill, {"metrics", "quality", "student", "energy_distance_population"});
      const double base_pop = Get(
          runs[i].baseline, {"metrics", "quality", "baseline", "energy_distance_population"});
      const int samples =
          runs[i].distill["metrics"]["quality"]["student"]["n_samples"].get<int>();
      o.Note(absl::StrFormat(
          "seed %d student %.4f vs baseline %.4f (%.2fx; against fresh draws %.2fx)",
          kSeeds[i], student, base, student / base, student_pop / base_pop));
      if (samples != 1000) o.Fail("quality not measured on 1000 samples");
      if (!(student <= 1.5 * base)) {
        o.Fail(absl::StrFormat("seed %d above 1.5x baseline", kSeeds[i]));
      }
      for (const Json* m : {&runs[i].distill, &runs[i].baseline}) {
        o.seconds += Timing(*m, "sample") + Timing(*m, "evaluate");
      }
    }
    record(9, "sample quality preserved", o);
  }

  if (want(10)) {
    Outcome o;
    o.budget = 900.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const Json& arms = runs[i].memorization["arms"];
      const double detection = arms["none"]["detection_auc"].get<double>();
      const double base = arms["none"]["fraction"]["baseline"].get<double>();
      const double student = arms["distillmd"]["fraction"]["student"].get<double>();
      o.Note(absl::StrFormat(
          "seed %d detection AUC %.4f, memorized fraction %.4f -> %.4f",
          kSeeds[i], detection, base, student));
      if (detection < 0.9) {
        o.Fail(absl::StrFormat("seed %d detection AUC below 0.9", kSeeds[i]));
      }
      if (!(student < base)) {
        o.Fail(absl::StrFormat("seed %d fraction not reduced", kSeeds[i]));
      }
      o.seconds += runs[i].memorization_seconds;
    }
    record(10, "memorization link", o);
  }

  if (want(11)) {
    // Fresh process-level state: a new cache retrains every model.
    Outcome o;
    const auto start = Clock::now();
    auto again = RunSeed(kSeeds[0], root / "rerun", false);
    if (!again.ok()) {
      o.Fail(std::string(again.status().message()));
    } else {
      const SeedRun& first = runs[0];
      const std::pair<const Json*, const Json*> pairs[] = {
          {&first.baseline, &again->baseline},
          {&first.distill, &again->distill},
          {&first.dual, &again->dual}};
      const char* names[] = {"none", "distillmd", "dualmd"};
      for (int k = 0; k < 3; ++k) {
        const std::string a = MetricBlocks(*pairs[k].first).dump();
        const std::string b = MetricBlocks(*pairs[k].second).dump();
        if (a != b) o.Fail(absl::StrCat(names[k], " metric blocks differ"));
        const fs::path on_disk = root / "seed1" / names[k] / "manifest.json";
        auto stored = ReadJsonFile(on_disk);
        if (!stored.ok() || MetricBlocks(*stored).dump() != b) {
          o.Fail(absl::StrCat(names[k], " stored manifest differs"));
        }
        if (!VerifyManifestArtifacts(on_disk).ok()) {
          o.Fail(absl::StrCat(names[k], " artifact hashes differ"));
        }
      }
      o.Note("seed 1 arms rerun from scratch, metric blocks compared byte for byte");
    }
    o.seconds = Since(start);
    record(11, "determinism", o);
  }

  int failed = 0;
  for (const auto& [id, pass] : results) failed += pass ? 0 : 1;
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace mdlab

int main(int argc, char** argv) { return mdlab::Main(argc, argv); }
