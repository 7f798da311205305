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

#include "memprior/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "memprior/errors.hpp"

namespace memprior::io {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> b) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) { put_le(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(bytes_, v); }
void ByteWriter::f32(float v) { put_le(bytes_, std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { put_le(bytes_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::magic(std::string_view four_cc) { bytes_.insert(bytes_.end(), four_cc.begin(), four_cc.end()); }

void ByteWriter::raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

void ByteWriter::f32s(std::span<const float> values) {
  bytes_.reserve(bytes_.size() + 4 * values.size());
  for (float v : values) f32(v);
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::append_crc32() { u32(crc32(bytes_)); }

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > remaining()) {
    throw FormatError("truncated input: need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()),
                      pos_);
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }
std::uint32_t ByteReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return get_le<std::uint64_t>(take(8)); }
float ByteReader::f32() { return std::bit_cast<float>(get_le<std::uint32_t>(take(4))); }
double ByteReader::f64() { return std::bit_cast<double>(get_le<std::uint64_t>(take(8))); }

std::string ByteReader::str(std::size_t max_len) {
  const std::size_t at = pos_;
  const std::uint32_t len = u32();
  if (len > max_len) throw FormatError("string length " + std::to_string(len) + " exceeds limit", at);
  auto b = take(len);
  return std::string(b.begin(), b.end());
}

void ByteReader::f32s(std::span<float> out) {
  auto b = take(4 * out.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_le<std::uint32_t>(b.subspan(4 * i, 4)));
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) { return take(n); }

void ByteReader::expect_magic(std::string_view four_cc) {
  const std::size_t at = pos_;
  if (remaining() < four_cc.size()) throw FormatError("file too short for magic", at);
  auto b = take(four_cc.size());
  if (std::memcmp(b.data(), four_cc.data(), four_cc.size()) != 0) {
    throw FormatError("bad magic, expected \"" + std::string(four_cc) + "\"", at);
  }
}

void ByteReader::expect_version(std::uint32_t expected) {
  const std::size_t at = pos_;
  const std::uint32_t v = u32();
  if (v != expected) {
    throw FormatError("unsupported version " + std::to_string(v) + ", expected " + std::to_string(expected), at);
  }
}

void ByteReader::verify_crc32_trailer() {
  if (data_.size() < pos_ + 4) throw FormatError("truncated input: missing checksum", data_.size());
  const std::size_t trailer = data_.size() - 4;
  const auto stored = get_le<std::uint32_t>(data_.subspan(trailer, 4));
  if (stored != crc32(data_.first(trailer))) throw FormatError("checksum mismatch", trailer);
  data_ = data_.first(trailer);
}

void ByteReader::require_remaining(std::uint64_t count, std::uint64_t item_size, std::string_view what) const {
  if (item_size != 0 && count > remaining() / item_size) {
    throw FormatError("truncated input: " + std::string(what) + " needs " + std::to_string(count) + " x " +
                          std::to_string(item_size) + " bytes",
                      pos_);
  }
}

void ByteReader::expect_end() const {
  if (remaining() != 0) throw FormatError(std::to_string(remaining()) + " trailing bytes", pos_);
}

std::uint32_t crc32(std::span<const std::uint8_t> data) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for large buffers.
  std::size_t off = 0;
  while (off < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - off, 1u << 30);
    crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace memprior::io
