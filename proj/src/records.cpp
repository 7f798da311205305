/*
 * Copyright 2026 The memprior Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "memprior/records.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "memprior/binary_io.hpp"
#include "memprior/errors.hpp"

namespace memprior {

using nlohmann::json;

std::vector<GroundingRecord> load_grounding_records(const std::filesystem::path& path,
                                                    const std::filesystem::path& crop_root) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<GroundingRecord> records;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      const json j = json::parse(line);
      GroundingRecord rec;
      rec.image_id = j.at("image_id").get<std::string>();
      rec.phrase = j.at("phrase").get<std::string>();
      rec.scene = j.value("scene", std::string{});
      const auto& box = j.at("box");
      if (!box.is_array() || box.size() != 4) throw FormatError("box must be [x0, y0, x1, y1]", line_start);
      rec.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
      if (!rec.box.valid()) throw FormatError("invalid box for image \"" + rec.image_id + "\"", line_start);
      if (j.contains("blur_score") && !j["blur_score"].is_null()) {
        rec.blur_score = j["blur_score"].get<double>();
        if (!std::isfinite(*rec.blur_score)) throw FormatError("non-finite blur_score", line_start);
      }
      if (j.contains("gray_crop") && !j["gray_crop"].is_null()) {
        rec.crop_path = j["gray_crop"].get<std::string>();
        try {
          rec.gray_crop = load_pgm(crop_root / rec.crop_path);
        } catch (const Error& e) {
          throw FormatError("gray_crop \"" + rec.crop_path + "\": " + e.what(), line_start);
        }
      }
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw FormatError(std::string("bad grounding record: ") + e.what(), line_start);
    }
  }
  return records;
}

void save_grounding_records(const std::vector<GroundingRecord>& records, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& r : records) {
    json j = {{"image_id", r.image_id},
              {"box", {r.box.x0, r.box.y0, r.box.x1, r.box.y1}},
              {"phrase", r.phrase},
              {"scene", r.scene}};
    if (r.blur_score) j["blur_score"] = *r.blur_score;
    if (!r.crop_path.empty()) j["gray_crop"] = r.crop_path;
    out << j.dump() << '\n';
  }
  io::write_text_atomic(path, out.str());
}

ScalarMap decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space();
    const std::size_t at = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 24)) throw FormatError("PGM header value too large", at);
    }
    if (pos == at) throw FormatError("expected integer in PGM header", at);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM (P5)", 0);
  pos = 2;
  const std::size_t width = read_int();
  const std::size_t height = read_int();
  const std::size_t maxval = read_int();
  if (width == 0 || height == 0) throw FormatError("PGM with zero size", pos);
  if (maxval == 0 || maxval > 255) throw FormatError("only 8-bit PGM is supported", pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("missing PGM header terminator", pos);
  ++pos;
  if (bytes.size() - pos < width * height) throw FormatError("truncated PGM pixel data", pos);
  ScalarMap map(height, width);
  for (std::size_t i = 0; i < width * height; ++i) map.data[i] = static_cast<float>(bytes[pos + i]);
  return map;
}

ScalarMap load_pgm(const std::filesystem::path& path) { return decode_pgm(io::read_file(path)); }

std::vector<std::uint8_t> encode_pgm(const ScalarMap& map) {
  const std::string header = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + map.data.size());
  for (float v : map.data) out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 255.0f))));
  return out;
}

}  // namespace memprior
