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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memprior::io {

/// Appends little-endian scalars to a growing byte buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void magic(std::string_view four_cc);
  void raw(std::span<const std::uint8_t> data);
  void f32s(std::span<const float> values);
  /// u32 length prefix then UTF-8 bytes.
  void str(std::string_view s);

  /// Appends crc32 of everything written so far.
  void append_crc32();

  std::size_t size() const noexcept { return bytes_.size(); }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; every failure is a FormatError with the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str(std::size_t max_len = 1u << 20);
  void f32s(std::span<float> out);
  std::span<const std::uint8_t> raw(std::size_t n);

  /// Throws FormatError unless the next four bytes equal four_cc.
  void expect_magic(std::string_view four_cc);
  /// Reads a u32 version and throws unless it equals expected.
  void expect_version(std::uint32_t expected);
  /// Verifies the trailing crc32 over all preceding bytes and shrinks the readable range.
  void verify_crc32_trailer();
  /// Throws unless at least count * item_size bytes remain (guards allocations from corrupt counts).
  void require_remaining(std::uint64_t count, std::uint64_t item_size, std::string_view what) const;
  /// Throws unless every readable byte was consumed.
  void expect_end() const;

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> data) noexcept;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace memprior::io
