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

#include "mdlab/checkpoint.h"

#include "absl/strings/str_cat.h"
#include "mdlab/io.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {
constexpr std::string_view kMagic = "MDCK";
}  // namespace

std::string EncodeCheckpoint(const Denoiser& model) {
  std::string out(kMagic);
  AppendU32(out, kCheckpointFormatVersion);
  const std::string arch = model.arch().ToJson().dump();
  AppendU32(out, static_cast<std::uint32_t>(arch.size()));
  out += arch;
  AppendU32(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    AppendU32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    AppendU32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t extent : p.value.shape()) AppendU64(out, extent);
    for (float v : p.value.data()) AppendF32(out, v);
  }
  return out;
}

absl::StatusOr<Denoiser> DecodeCheckpoint(
    std::string_view bytes, const std::optional<DenoiserArch>& expected_arch) {
  ByteReader reader(bytes);
  MDLAB_ASSIGN_OR_RETURN(std::string magic, reader.Bytes(kMagic.size()));
  if (magic != kMagic) return absl::DataLossError("not a checkpoint file");
  MDLAB_ASSIGN_OR_RETURN(std::uint32_t version, reader.U32());
  if (version != kCheckpointFormatVersion) {
    return absl::FailedPreconditionError(
        absl::StrCat("unsupported checkpoint version ", version));
  }
  MDLAB_ASSIGN_OR_RETURN(std::uint32_t arch_len, reader.U32());
  MDLAB_ASSIGN_OR_RETURN(std::string arch_text, reader.Bytes(arch_len));
  nlohmann::json arch_json;
  try {
    arch_json = nlohmann::json::parse(arch_text);
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(
        absl::StrCat("corrupt architecture header: ", e.what()));
  }
  MDLAB_ASSIGN_OR_RETURN(DenoiserArch arch, DenoiserArch::FromJson(arch_json));
  if (expected_arch.has_value() && !(arch == *expected_arch)) {
    return absl::FailedPreconditionError(absl::StrCat(
        "checkpoint architecture ", arch_json.dump(),
        " does not match expected ", expected_arch->ToJson().dump()));
  }
  MDLAB_ASSIGN_OR_RETURN(std::uint32_t count, reader.U32());
  ParameterList params;
  for (std::uint32_t b = 0; b < count; ++b) {
    MDLAB_ASSIGN_OR_RETURN(std::uint32_t name_len, reader.U32());
    MDLAB_ASSIGN_OR_RETURN(std::string name, reader.Bytes(name_len));
    MDLAB_ASSIGN_OR_RETURN(std::uint32_t rank, reader.U32());
    Shape shape(rank);
    for (auto& extent : shape) {
      MDLAB_ASSIGN_OR_RETURN(std::uint64_t e, reader.U64());
      extent = e;
    }
    if (ShapeSize(shape) > reader.remaining() / 4) {
      return absl::DataLossError(
          absl::StrCat("block '", name, "' is truncated"));
    }
    std::vector<float> data(ShapeSize(shape));
    for (auto& v : data) {
      MDLAB_ASSIGN_OR_RETURN(v, reader.F32());
    }
    MDLAB_ASSIGN_OR_RETURN(Tensor t,
                           Tensor::FromData(std::move(shape), std::move(data)));
    params.push_back({std::move(name), std::move(t)});
  }
  if (!reader.done()) {
    return absl::DataLossError("trailing bytes after the last block");
  }
  return Denoiser::FromParameters(std::move(arch), std::move(params));
}

absl::Status SaveCheckpoint(const std::filesystem::path& path,
                            const Denoiser& model) {
  return WriteFileAtomic(path, EncodeCheckpoint(model));
}

absl::StatusOr<Denoiser> LoadCheckpoint(
    const std::filesystem::path& path,
    const std::optional<DenoiserArch>& expected_arch) {
  MDLAB_ASSIGN_OR_RETURN(std::string bytes, ReadFile(path));
  return DecodeCheckpoint(bytes, expected_arch);
}

}  // namespace mdlab
