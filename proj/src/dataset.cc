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

#include "mdlab/dataset.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "absl/strings/str_cat.h"
#include "mdlab/kernels.h"
#include "mdlab/random.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

constexpr double kPi = std::numbers::pi;

absl::Status UnknownKey(std::string_view where, std::string_view key) {
  return absl::InvalidArgumentError(
      absl::StrCat("unknown key '", std::string(key), "' in ", std::string(where)));
}

// Draws one point and its class label.
std::pair<std::vector<float>, int> DrawPoint(const DatasetSpec& spec,
                                             Rng& rng) {
  std::vector<float> x(spec.dim, 0.0f);
  int label = 0;
  if (spec.generator == "gaussian-mixture-ring") {
    label = UniformInt(rng, 0, spec.num_classes - 1);
    const auto center = RingModeCenter(spec, label);
    for (int l = 0; l < spec.dim; ++l) {
      x[l] = static_cast<float>(center[l] + spec.noise * StandardNormal(rng));
    }
  } else if (spec.generator == "swiss-roll-2d") {
    const double u = Uniform01(rng);
    const double theta = 1.5 * kPi * (1.0 + 2.0 * u);
    const double r = theta / (4.5 * kPi) * spec.scale;
    label = std::min(static_cast<int>(u * spec.num_classes),
                     spec.num_classes - 1);
    x[0] = static_cast<float>(r * std::cos(theta) +
                              spec.noise * StandardNormal(rng));
    x[1] = static_cast<float>(r * std::sin(theta) +
                              spec.noise * StandardNormal(rng));
  } else {  // checkerboard-2d
    // 4 x 4 board over [-scale, scale]^2; the 8 cells with (row + col) even
    // are filled.
    const int cell = UniformInt(rng, 0, 7);
    const int row = cell / 2;
    const int col = 2 * (cell % 2) + (row % 2);
    const double width = spec.scale / 2.0;
    x[0] = static_cast<float>(-spec.scale + (col + Uniform01(rng)) * width);
    x[1] = static_cast<float>(-spec.scale + (row + Uniform01(rng)) * width);
    label = cell % spec.num_classes;
  }
  return {std::move(x), label};
}

}  // namespace

absl::Status DatasetSpec::Validate() const {
  static const std::set<std::string> kGenerators = {
      "gaussian-mixture-ring", "swiss-roll-2d", "checkerboard-2d"};
  if (!kGenerators.contains(generator)) {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown generator '", generator, "'"));
  }
  if (n_member < 1) return absl::InvalidArgumentError("n_member must be >= 1");
  if (n_test < 0) return absl::InvalidArgumentError("n_test must be >= 0");
  if (dim < 1) return absl::InvalidArgumentError("dim must be >= 1");
  if (generator != "gaussian-mixture-ring" && dim != 2) {
    return absl::InvalidArgumentError(
        absl::StrCat(generator, " is two-dimensional"));
  }
  if (generator == "gaussian-mixture-ring" && dim < 2) {
    return absl::InvalidArgumentError("the ring generator needs dim >= 2");
  }
  if (num_classes < 1) {
    return absl::InvalidArgumentError("num_classes must be >= 1");
  }
  if (!(scale > 0.0) || !(noise >= 0.0)) {
    return absl::InvalidArgumentError("scale must be > 0 and noise >= 0");
  }
  if (tokens_per_class < 1) {
    return absl::InvalidArgumentError("tokens_per_class must be >= 1");
  }
  if (duplicate.has_value()) {
    if (duplicate->index < 0 || duplicate->index >= n_member) {
      return absl::InvalidArgumentError("duplicate.index is not a member");
    }
    if (duplicate->copies < 1) {
      return absl::InvalidArgumentError("duplicate.copies must be >= 1");
    }
  }
  return absl::OkStatus();
}

nlohmann::json DatasetSpec::ToJson() const {
  nlohmann::json j = {{"generator", generator},
                      {"n_member", n_member},
                      {"n_test", n_test},
                      {"dim", dim},
                      {"num_classes", num_classes},
                      {"scale", scale},
                      {"noise", noise},
                      {"conditional", conditional},
                      {"tokens_per_class", tokens_per_class}};
  if (duplicate.has_value()) {
    j["duplicate"] = {{"index", duplicate->index},
                      {"copies", duplicate->copies}};
  } else {
    j["duplicate"] = nullptr;
  }
  return j;
}

absl::StatusOr<DatasetSpec> DatasetSpec::FromJson(const nlohmann::json& j) {
  DatasetSpec spec;
  if (!j.is_object()) return absl::InvalidArgumentError("dataset must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "generator") {
        spec.generator = value.get<std::string>();
      } else if (key == "n_member") {
        spec.n_member = value.get<int>();
      } else if (key == "n_test") {
        spec.n_test = value.get<int>();
      } else if (key == "dim") {
        spec.dim = value.get<int>();
      } else if (key == "num_classes") {
        spec.num_classes = value.get<int>();
      } else if (key == "scale") {
        spec.scale = value.get<double>();
      } else if (key == "noise") {
        spec.noise = value.get<double>();
      } else if (key == "conditional") {
        spec.conditional = value.get<bool>();
      } else if (key == "tokens_per_class") {
        spec.tokens_per_class = value.get<int>();
      } else if (key == "duplicate") {
        if (value.is_null()) {
          spec.duplicate.reset();
          continue;
        }
        DuplicationSpec dup;
        for (const auto& [k2, v2] : value.items()) {
          if (k2 == "index") {
            dup.index = v2.get<int>();
          } else if (k2 == "copies") {
            dup.copies = v2.get<int>();
          } else {
            return UnknownKey("dataset.duplicate", k2);
          }
        }
        spec.duplicate = dup;
      } else {
        return UnknownKey("dataset", key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed dataset spec: ", e.what()));
  }
  MDLAB_RETURN_IF_ERROR(spec.Validate());
  return spec;
}

std::vector<double> RingModeCenter(const DatasetSpec& spec, int c) {
  std::vector<double> center(spec.dim, 0.0);
  const double angle = 2.0 * kPi * c / spec.num_classes;
  center[0] = spec.scale * std::cos(angle);
  center[1] = spec.scale * std::sin(angle);
  return center;
}

absl::StatusOr<Dataset> GenerateDataset(const DatasetSpec& spec,
                                        std::uint64_t seed) {
  MDLAB_RETURN_IF_ERROR(spec.Validate());
  Rng rng = MakeRng(seed);
  Dataset data;
  data.spec = spec;
  const int k = spec.tokens_per_class;
  auto make = [&](int source, bool member) {
    auto [x, label] = DrawPoint(spec, rng);
    LabeledSample s;
    s.x0 = Tensor::FromData(Shape{static_cast<std::size_t>(spec.dim)},
                            std::move(x))
               .value();
    s.label = label;
    if (spec.conditional) {
      for (int j = 0; j < k; ++j) s.tokens.push_back(label * k + j);
    }
    s.member = member;
    s.source = source;
    return s;
  };
  for (int i = 0; i < spec.n_member; ++i) data.members.push_back(make(i, true));
  for (int i = 0; i < spec.n_test; ++i) {
    data.nonmembers.push_back(make(spec.n_member + i, false));
  }
  if (spec.duplicate.has_value()) {
    const LabeledSample copy = data.members[spec.duplicate->index];
    for (int c = 1; c < spec.duplicate->copies; ++c) {
      data.members.push_back(copy);
    }
  }
  return data;
}

Tensor PointsOf(std::span<const LabeledSample> samples) {
  if (samples.empty()) return Tensor(Shape{0, 0});
  const std::size_t d = samples.front().x0.size();
  Tensor out(Shape{samples.size(), d});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].x0.data().begin(), samples[i].x0.data().end(),
              out.row(i).begin());
  }
  return out;
}

Tensor UniqueMemberPoints(const Dataset& data) {
  std::vector<LabeledSample> unique;
  std::set<int> seen;
  for (const auto& s : data.members) {
    if (seen.insert(s.source).second) unique.push_back(s);
  }
  return PointsOf(unique);
}

double MedianNearestNeighborDistance(const Tensor& points) {
  const std::size_t n = points.rows();
  if (n < 2) return 0.0;
  const std::size_t d = points.cols();
  // Nearest *other* row: take the 2 nearest (self at distance 0) and recover
  // the second from the mean.
  std::vector<double> nn = kernels::NearestDistances(points.data(), n,
                                                     points.data(), n, d, 2);
  for (double& v : nn) v *= 2.0;
  std::sort(nn.begin(), nn.end());
  return n % 2 == 1 ? nn[n / 2] : 0.5 * (nn[n / 2 - 1] + nn[n / 2]);
}

std::vector<LabeledSample> DatasetSplit::Subset(
    std::span<const int> indices) const {
  std::vector<LabeledSample> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(all_samples[i]);
  return out;
}

std::vector<LabeledSample> DatasetSplit::Members() const {
  std::vector<int> idx = d1_indices;
  idx.insert(idx.end(), d2_indices.begin(), d2_indices.end());
  std::sort(idx.begin(), idx.end());
  return Subset(idx);
}

absl::StatusOr<DatasetSplit> SplitDisjoint(std::vector<LabeledSample> samples,
                                           std::uint64_t seed,
                                           SplitOptions options) {
  DatasetSplit split;
  // Distinct member sources in first-appearance order, with their rows.
  std::vector<int> sources;
  std::map<int, std::vector<int>> rows_of;
  std::map<int, int> label_of;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.member) {
      split.test_indices.push_back(static_cast<int>(i));
      continue;
    }
    // Rows without a source id are their own group.
    const int key = s.source >= 0 ? s.source : -1 - static_cast<int>(i);
    if (!rows_of.contains(key)) {
      sources.push_back(key);
      label_of[key] = s.label;
    }
    rows_of[key].push_back(static_cast<int>(i));
  }
  if (sources.empty()) {
    return absl::InvalidArgumentError("no member samples to split");
  }
  if (sources.size() < 2) {
    return absl::InvalidArgumentError(
        "need at least two distinct members to split");
  }
  Rng rng = MakeRng(seed);
  std::vector<int> order;
  if (options.stratified) {
    std::map<int, std::vector<int>> by_class;
    for (int key : sources) by_class[label_of[key]].push_back(key);
    for (auto& [label, keys] : by_class) {
      std::shuffle(keys.begin(), keys.end(), rng);
      order.insert(order.end(), keys.begin(), keys.end());
    }
    // Alternating assignment over the class-grouped order keeps every class
    // and the totals balanced to within one.
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto& dst = i % 2 == 0 ? split.d1_indices : split.d2_indices;
      const auto& rows = rows_of[order[i]];
      dst.insert(dst.end(), rows.begin(), rows.end());
    }
  } else {
    order = sources;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = (order.size() + 1) / 2;
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto& dst = i < half ? split.d1_indices : split.d2_indices;
      const auto& rows = rows_of[order[i]];
      dst.insert(dst.end(), rows.begin(), rows.end());
    }
  }
  std::sort(split.d1_indices.begin(), split.d1_indices.end());
  std::sort(split.d2_indices.begin(), split.d2_indices.end());
  split.all_samples = std::move(samples);
  return split;
}

nlohmann::json SampleToJson(const LabeledSample& s) {
  return nlohmann::json{{"x", s.x0.values()},
                        {"label", s.label},
                        {"tokens", s.tokens},
                        {"member", s.member},
                        {"source", s.source}};
}

absl::StatusOr<LabeledSample> SampleFromJson(const nlohmann::json& j) {
  LabeledSample s;
  try {
    auto x = j.at("x").get<std::vector<float>>();
    const std::size_t d = x.size();
    MDLAB_ASSIGN_OR_RETURN(s.x0, Tensor::FromData(Shape{d}, std::move(x)));
    s.label = j.at("label").get<int>();
    s.tokens = j.at("tokens").get<std::vector<int>>();
    s.member = j.at("member").get<bool>();
    s.source = j.at("source").get<int>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed sample: ", e.what()));
  }
  return s;
}

nlohmann::json DatasetToJson(const Dataset& data) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& s : data.members) members.push_back(SampleToJson(s));
  nlohmann::json nonmembers = nlohmann::json::array();
  for (const auto& s : data.nonmembers) nonmembers.push_back(SampleToJson(s));
  return nlohmann::json{{"spec", data.spec.ToJson()},
                        {"members", std::move(members)},
                        {"nonmembers", std::move(nonmembers)}};
}

absl::StatusOr<Dataset> DatasetFromJson(const nlohmann::json& j) {
  Dataset data;
  if (!j.contains("spec") || !j.contains("members") ||
      !j.contains("nonmembers")) {
    return absl::InvalidArgumentError(
        "dataset file needs spec, members and nonmembers");
  }
  MDLAB_ASSIGN_OR_RETURN(data.spec, DatasetSpec::FromJson(j.at("spec")));
  for (const auto& s : j.at("members")) {
    MDLAB_ASSIGN_OR_RETURN(LabeledSample sample, SampleFromJson(s));
    data.members.push_back(std::move(sample));
  }
  for (const auto& s : j.at("nonmembers")) {
    MDLAB_ASSIGN_OR_RETURN(LabeledSample sample, SampleFromJson(s));
    data.nonmembers.push_back(std::move(sample));
  }
  return data;
}

}  // namespace mdlab
