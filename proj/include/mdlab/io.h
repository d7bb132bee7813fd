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

#ifndef MDLAB_IO_H_
#define MDLAB_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "mdlab/tensor.h"
#include "nlohmann/json.hpp"

namespace mdlab {

// Writes to "<path>.tmp" and renames over `path`, creating parent
// directories as needed.
absl::Status WriteFileAtomic(const std::filesystem::path& path,
                             std::string_view contents);
absl::StatusOr<std::string> ReadFile(const std::filesystem::path& path);

absl::Status WriteJsonFile(const std::filesystem::path& path,
                           const nlohmann::json& j);
absl::StatusOr<nlohmann::json> ReadJsonFile(const std::filesystem::path& path);

// Content hash in git's blob format: sha1("blob <len>\0" + contents), as hex.
std::string GitBlobHash(std::string_view contents);
absl::StatusOr<std::string> GitBlobHashOfFile(const std::filesystem::path& path);

// Little-endian primitive encoding used by the binary formats.
void AppendU32(std::string& out, std::uint32_t v);
void AppendU64(std::string& out, std::uint64_t v);
void AppendF32(std::string& out, float v);

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  absl::StatusOr<std::uint32_t> U32();
  absl::StatusOr<std::uint64_t> U64();
  absl::StatusOr<float> F32();
  absl::StatusOr<std::string> Bytes(std::size_t n);
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

// Sample block: u64 count, u64 dim, then count * dim little-endian float32
// values in row-major order.
std::string EncodeSampleBlock(const Tensor& samples);
absl::StatusOr<Tensor> DecodeSampleBlock(std::string_view bytes);
absl::Status WriteSampleBlock(const std::filesystem::path& path,
                              const Tensor& samples);
absl::StatusOr<Tensor> ReadSampleBlock(const std::filesystem::path& path);

// CSV with a header line; rows are written with full double precision.
absl::Status WriteCsv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);

}  // namespace mdlab

#endif  // MDLAB_IO_H_
