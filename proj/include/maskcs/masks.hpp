#ifndef MASKCS_MASKS_HPP
#define MASKCS_MASKS_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace maskcs {

enum class MaskAlphabet { Signed, Binary };

inline const char* to_string(MaskAlphabet a) {
  return a == MaskAlphabet::Signed ? "signed" : "binary";
}

/// K modulation patterns of length L, stored row-contiguous as int8.
///
/// Mask k is generated from its own stream seeded with derive_seed(seed, {k}).
/// Bit b of the stream maps to +1/-1 (signed) or 1/0 (binary), so the binary
/// and signed ensembles drawn from the same seed satisfy signed = 2*binary - 1.
class MaskEnsemble {
 public:
  MaskEnsemble() = default;

  /// Explicit masks (e.g. the all-ones calibration mask). seed is informational.
  static MaskEnsemble from_entries(Index length, MaskAlphabet alphabet,
                                   std::vector<std::int8_t> entries, std::uint64_t seed = 0) {
    detail::require(length >= 1, "mask length must be >= 1");
    detail::require(!entries.empty() && entries.size() % static_cast<std::size_t>(length) == 0,
                    "mask entries must be a nonempty multiple of the mask length");
    for (auto e : entries) {
      const bool ok = alphabet == MaskAlphabet::Signed ? (e == 1 || e == -1) : (e == 0 || e == 1);
      detail::require(ok, std::string("mask entry outside the ") + to_string(alphabet) +
                              " alphabet");
    }
    MaskEnsemble m;
    m.length_ = length;
    m.count_ = static_cast<Index>(entries.size() / static_cast<std::size_t>(length));
    m.alphabet_ = alphabet;
    m.seed_ = seed;
    m.entries_ = std::move(entries);
    return m;
  }

  Index length() const noexcept { return length_; }
  Index count() const noexcept { return count_; }
  MaskAlphabet alphabet() const noexcept { return alphabet_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t mask_seed(Index k) const noexcept {
    return derive_seed(seed_, {static_cast<std::uint64_t>(k)});
  }

  std::span<const std::int8_t> mask(Index k) const noexcept {
    return {entries_.data() + k * length_, static_cast<std::size_t>(length_)};
  }
  double operator()(Index k, Index i) const noexcept { return entries_[k * length_ + i]; }
  const std::vector<std::int8_t>& entries() const noexcept { return entries_; }

  /// 2*phi - 1 applied entrywise; identity on signed ensembles.
  MaskEnsemble to_signed() const {
    if (alphabet_ == MaskAlphabet::Signed) return *this;
    MaskEnsemble m = *this;
    m.alphabet_ = MaskAlphabet::Signed;
    for (auto& e : m.entries_) e = static_cast<std::int8_t>(2 * e - 1);
    return m;
  }

  /// K x L matrix of mask values.
  Matrix as_matrix() const {
    Matrix out(count_, length_);
    for (Index k = 0; k < count_; ++k)
      for (Index i = 0; i < length_; ++i) out(k, i) = (*this)(k, i);
    return out;
  }

  friend bool operator==(const MaskEnsemble&, const MaskEnsemble&) = default;

 private:
  friend MaskEnsemble generate_masks(Index, Index, MaskAlphabet, std::uint64_t);

  Index length_ = 0;
  Index count_ = 0;
  MaskAlphabet alphabet_ = MaskAlphabet::Signed;
  std::uint64_t seed_ = 0;
  std::vector<std::int8_t> entries_;
};

/// K independent masks with i.i.d. equiprobable entries over the alphabet.
inline MaskEnsemble generate_masks(Index L, Index K, MaskAlphabet alphabet, std::uint64_t seed) {
  detail::require(L >= 1 && K >= 1, "generate_masks needs L >= 1 and K >= 1");
  MaskEnsemble m;
  m.length_ = L;
  m.count_ = K;
  m.alphabet_ = alphabet;
  m.seed_ = seed;
  m.entries_.resize(static_cast<std::size_t>(L * K));
  const std::int8_t zero = alphabet == MaskAlphabet::Signed ? -1 : 0;
  for (Index k = 0; k < K; ++k) {
    SplitMix64 rng(m.mask_seed(k));
    std::int8_t* row = m.entries_.data() + k * L;
    for (Index i = 0; i < L; i += 64) {
      std::uint64_t bits = rng();
      const Index stop = std::min<Index>(64, L - i);
      for (Index b = 0; b < stop; ++b, bits >>= 1) row[i + b] = (bits & 1U) ? 1 : zero;
    }
  }
  return m;
}

/// Converts stacked 0/1-mask measurements (K blocks of N) to the measurements
/// the signed masks 2*phi_k - 1 would have produced, using one extra
/// measurement taken with the all-ones mask: y_k <- 2*y_k - y_ones.
inline Vector measurements_binary_to_signed(const Vector& y_binary, const Vector& y_allones) {
  const Index n = y_allones.size();
  detail::require(n >= 1 && y_binary.size() >= n && y_binary.size() % n == 0,
                  "binary measurements must be whole blocks of the all-ones length");
  Vector out(y_binary.size());
  for (Index k = 0; k < y_binary.size() / n; ++k)
    out.segment(k * n, n) = 2.0 * y_binary.segment(k * n, n) - y_allones;
  return out;
}

}  // namespace maskcs

#endif  // MASKCS_MASKS_HPP
