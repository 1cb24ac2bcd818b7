/*
 * Copyright 2026 The MTDA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mtda/ingest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "mtda/audio.hpp"
#include "mtda/errors.hpp"

namespace mtda {

namespace {

// Bumped whenever the feature pipeline changes so stale outputs are redone.
constexpr const char* kFrontendTag = "logmel-v1";

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_id(const std::string& id) {
  if (id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos) {
    throw ContractError("row id is not usable as a file name: " + id);
  }
}

}  // namespace

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

IngestResult ingest(const Manifest& input, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  IngestResult result;
  result.manifest.base_dir = out_dir;

  for (const auto& row : input.rows) {
    try {
      check_id(row.id);
      const auto wav_path = input.resolve(row.path);
      const auto bytes = slurp(wav_path);
      const std::string stamp = sha256_hex(bytes) + " " + kFrontendTag + "\n";
      const std::string feature_name = row.id + ".mtdt";
      const auto feature_path = out_dir / feature_name;
      const auto stamp_path = out_dir / (feature_name + ".sha256");

      std::error_code ec;
      const bool fresh = std::filesystem::exists(feature_path, ec) &&
                         std::filesystem::exists(stamp_path, ec) && read_text(stamp_path) == stamp;
      if (fresh) {
        ++result.skipped;
      } else {
        const AudioClip clip = decode_wav(bytes);
        write_features(feature_path, logmel(resample(clip)));
        write_text_if_changed(stamp_path, stamp);
        ++result.written;
      }

      ManifestRow out = row;
      out.path = std::filesystem::absolute(wav_path).lexically_normal().string();
      out.feature_path = feature_name;
      result.manifest.rows.push_back(std::move(out));
    } catch (const std::exception& e) {
      result.errors.push_back({row.id, row.path, e.what()});
    }
  }

  write_manifest(out_dir / "manifest.csv", result.manifest);
  std::ostringstream errs;
  errs << "id,path,error\n";
  for (const auto& e : result.errors) {
    errs << csv_escape(e.id) << ',' << csv_escape(e.path) << ',' << csv_escape(e.message) << '\n';
  }
  write_text_if_changed(out_dir / "ingest_errors.csv", errs.str());
  return result;
}

}  // namespace mtda
