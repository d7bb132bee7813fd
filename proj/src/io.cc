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

#include "mdlab/io.h"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "mdlab/status_macros.h"

namespace mdlab {

absl::Status WriteFileAtomic(const std::filesystem::path& path,
                             std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      return absl::InternalError(absl::StrCat(
          "cannot create ", path.parent_path().string(), ": ", ec.message()));
    }
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      return absl::InternalError(
          absl::StrCat("cannot open ", tmp.string(), " for writing"));
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      return absl::InternalError(absl::StrCat("write failed: ", tmp.string()));
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    return absl::InternalError(absl::StrCat("rename to ", path.string(),
                                            " failed: ", ec.message()));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::string> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

absl::Status WriteJsonFile(const std::filesystem::path& path,
                           const nlohmann::json& j) {
  return WriteFileAtomic(path, j.dump(2) + "\n");
}

absl::StatusOr<nlohmann::json> ReadJsonFile(const std::filesystem::path& path) {
  MDLAB_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat(path.string(), ": invalid JSON: ", e.what()));
  }
}

std::string GitBlobHash(std::string_view contents) {
  const std::string header = absl::StrCat("blob ", contents.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size() + 1);  // includes '\0'
  EVP_DigestUpdate(ctx, contents.data(), contents.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    absl::StrAppendFormat(&hex, "%02x", digest[i]);
  }
  return hex;
}

absl::StatusOr<std::string> GitBlobHashOfFile(
    const std::filesystem::path& path) {
  MDLAB_ASSIGN_OR_RETURN(std::string bytes, ReadFile(path));
  return GitBlobHash(bytes);
}

void AppendU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void AppendU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void AppendF32(std::string& out, float v) {
  AppendU32(out, std::bit_cast<std::uint32_t>(v));
}

absl::StatusOr<std::uint32_t> ByteReader::U32() {
  if (bytes_.size() - pos_ < 4) return absl::DataLossError("truncated u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
         << (8 * i);
  }
  pos_ += 4;
  return v;
}

absl::StatusOr<std::uint64_t> ByteReader::U64() {
  if (bytes_.size() - pos_ < 8) return absl::DataLossError("truncated u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
         << (8 * i);
  }
  pos_ += 8;
  return v;
}

absl::StatusOr<float> ByteReader::F32() {
  MDLAB_ASSIGN_OR_RETURN(std::uint32_t bits, U32());
  return std::bit_cast<float>(bits);
}

absl::StatusOr<std::string> ByteReader::Bytes(std::size_t n) {
  if (bytes_.size() - pos_ < n) return absl::DataLossError("truncated bytes");
  std::string s(bytes_.substr(pos_, n));
  pos_ += n;
  return s;
}

std::string EncodeSampleBlock(const Tensor& samples) {
  std::string out;
  AppendU64(out, samples.rows());
  AppendU64(out, samples.cols());
  out.reserve(out.size() + 4 * samples.size());
  for (float v : samples.data()) AppendF32(out, v);
  return out;
}

absl::StatusOr<Tensor> DecodeSampleBlock(std::string_view bytes) {
  ByteReader reader(bytes);
  MDLAB_ASSIGN_OR_RETURN(std::uint64_t count, reader.U64());
  MDLAB_ASSIGN_OR_RETURN(std::uint64_t dim, reader.U64());
  if ((bytes.size() - 16) / 4 != count * dim || (bytes.size() - 16) % 4 != 0) {
    return absl::DataLossError(absl::StrCat(
        "sample block declares ", count, " x ", dim, " values but holds ",
        (bytes.size() - 16) / 4));
  }
  std::vector<float> data(count * dim);
  for (auto& v : data) {
    MDLAB_ASSIGN_OR_RETURN(v, reader.F32());
  }
  return Tensor::FromData(Shape{count, dim}, std::move(data));
}

absl::Status WriteSampleBlock(const std::filesystem::path& path,
                              const Tensor& samples) {
  return WriteFileAtomic(path, EncodeSampleBlock(samples));
}

absl::StatusOr<Tensor> ReadSampleBlock(const std::filesystem::path& path) {
  MDLAB_ASSIGN_OR_RETURN(std::string bytes, ReadFile(path));
  return DecodeSampleBlock(bytes);
}

absl::Status WriteCsv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string out = absl::StrJoin(header, ",") + "\n";
  for (const auto& row : rows) {
    out += absl::StrJoin(row, ",", [](std::string* s, double v) {
      absl::StrAppendFormat(s, "%.17g", v);
    });
    out += "\n";
  }
  return WriteFileAtomic(path, out);
}

}  // namespace mdlab
