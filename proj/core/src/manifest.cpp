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

#include "mtda/manifest.hpp"

#include <fstream>
#include <sstream>

#include "mtda/errors.hpp"

namespace mtda {

std::filesystem::path Manifest::resolve(const std::string& relative) const {
  std::filesystem::path p(relative);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw ContractError("unterminated quote in CSV line: " + std::string(line));
  return fields;
}

std::string format_manifest(const Manifest& manifest) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.rows) {
    out << csv_escape(r.id) << ',' << csv_escape(r.path) << ',' << csv_escape(r.scene) << ','
        << csv_escape(r.device) << ',' << csv_escape(r.parallel_group) << ','
        << csv_escape(r.split) << ',' << csv_escape(r.feature_path) << '\n';
  }
  return out.str();
}

Manifest parse_manifest(std::string_view text, std::filesystem::path base_dir) {
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      // The feature_path column is optional on input manifests.
      if (line != kManifestHeader && line != kManifestHeader.substr(0, kManifestHeader.rfind(','))) {
        throw ContractError("manifest header must be: " + std::string(kManifestHeader));
      }
      header_seen = true;
      continue;
    }
    auto f = csv_split(line);
    if (f.size() == 6) f.emplace_back();
    if (f.size() != 7) {
      throw ContractError("manifest line " + std::to_string(line_no) + ": expected 7 fields, got " +
                          std::to_string(f.size()));
    }
    if (f[0].empty()) throw ContractError("manifest line " + std::to_string(line_no) + ": empty id");
    m.rows.push_back({f[0], f[1], f[2], f[3], f[4], f[5], f[6]});
  }
  if (!header_seen) throw ContractError("manifest is empty (missing header)");
  return m;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_text_if_changed(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in && ss.str() == text) return false;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
  return true;
}

Manifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  write_text_if_changed(path, format_manifest(manifest));
}

}  // namespace mtda
