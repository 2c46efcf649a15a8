#pragma once

// Little-endian byte packing shared by the model and perturbation files.

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "viap/tensor.hpp"

namespace viap::detail {

class ByteWriter {
 public:
  void raw(std::string_view bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

  template <class T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

  void f64s(std::span<const double> values) {
    for (double v : values) f64(v);
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  template <class T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  std::vector<double> f64s(std::size_t n) {
    if (n > (bytes_.size() - pos_) / 8) fail("payload truncated");
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
  }

  [[noreturn]] void fail(const std::string& why) const { throw Error("bad_file", what_ + ": " + why); }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) fail("unexpected end of data");
  }

  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace viap::detail
