#pragma once

// Packed bit string with the parity/xor helpers cascade, Toeplitz
// hashing and the one-time-pad transport lean on.

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkd {

class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t n, bool value = false)
      : size_(n), words_(word_count(n), value ? ~std::uint64_t{0} : 0) {
    trim();
  }

  static BitVec from_bytes(const std::vector<std::uint8_t>& bytes) {
    BitVec b(bytes.size() * 8);
    for (std::size_t i = 0; i < bytes.size(); ++i)
      for (int j = 0; j < 8; ++j)
        if (bytes[i] & (1u << j)) b.set(i * 8 + j, true);
    return b;
  }

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
    for (std::size_t i = 0; i < size_; ++i)
      if (get(i)) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return out;
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool get(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::size_t i, bool v) {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (v)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }
  void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  void push_back(bool v) {
    if (size_ % 64 == 0) words_.push_back(0);
    ++size_;
    set(size_ - 1, v);
  }

  std::size_t count_ones() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  bool parity() const {
    std::uint64_t acc = 0;
    for (auto w : words_) acc ^= w;
    return std::popcount(acc) & 1u;
  }

  BitVec& operator^=(const BitVec& other) {
    if (other.size_ != size_) throw std::invalid_argument("BitVec xor: size mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
    return *this;
  }
  friend BitVec operator^(BitVec a, const BitVec& b) { return a ^= b; }

  friend bool operator==(const BitVec& a, const BitVec& b) {
    return a.size_ == b.size_ && a.words_ == b.words_;
  }

  std::size_t hamming_distance(const BitVec& other) const {
    if (other.size_ != size_) throw std::invalid_argument("hamming_distance: size mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
      d += static_cast<std::size_t>(std::popcount(words_[i] ^ other.words_[i]));
    return d;
  }

  BitVec slice(std::size_t begin, std::size_t len) const {
    if (begin + len > size_) throw std::out_of_range("BitVec::slice");
    BitVec out(len);
    for (std::size_t i = 0; i < len; ++i) out.set(i, get(begin + i));
    return out;
  }

  std::string to_string() const {
    std::string s;
    s.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) s.push_back(get(i) ? '1' : '0');
    return s;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  static std::size_t word_count(std::size_t bits) { return (bits + 63) / 64; }
  void trim() {
    if (size_ % 64 != 0 && !words_.empty())
      words_.back() &= (~std::uint64_t{0}) >> (64 - size_ % 64);
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace qkd
