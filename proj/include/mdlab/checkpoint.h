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

#ifndef MDLAB_CHECKPOINT_H_
#define MDLAB_CHECKPOINT_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "absl/status/statusor.h"
#include "mdlab/denoiser.h"

namespace mdlab {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

// Binary layout, all integers little-endian:
//   "MDCK" magic, u32 format version, u32 arch JSON length, arch JSON bytes,
//   u32 block count, then per block:
//     u32 name length, name bytes, u32 rank, u64 extent * rank,
//     float32 * prod(extents)
std::string EncodeCheckpoint(const Denoiser& model);

// Fails on a bad magic, an unknown version, truncation, or parameters that
// do not match the recorded architecture. If `expected_arch` is given the
// stored architecture must equal it.
absl::StatusOr<Denoiser> DecodeCheckpoint(
    std::string_view bytes,
    const std::optional<DenoiserArch>& expected_arch = std::nullopt);

absl::Status SaveCheckpoint(const std::filesystem::path& path,
                            const Denoiser& model);
absl::StatusOr<Denoiser> LoadCheckpoint(
    const std::filesystem::path& path,
    const std::optional<DenoiserArch>& expected_arch = std::nullopt);

}  // namespace mdlab

#endif  // MDLAB_CHECKPOINT_H_
