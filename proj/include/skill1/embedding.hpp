#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skill1 {

// Recorded in every library snapshot. Bump whenever tokenization, hashing
// or the seed changes; old snapshots then refuse to load.
inline constexpr std::string_view kEmbeddingVersion = "hashgram3-v1";
inline constexpr std::uint64_t kEmbeddingSeed = 0x51CE'11ED'0B5E'ED01ull;
inline constexpr std::size_t kDefaultEmbeddingDim = 64;

// Unit-norm dense vector. Construct through TextEncoder::embed or
// EmbeddingVector::from_values (which validates the norm).
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  // Throws std::invalid_argument if empty or not unit norm within 1e-9.
  static EmbeddingVector from_values(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;

  friend class TextEncoder;
};

// Lowercases ASCII letters and turns every ASCII non-alphanumeric byte into a
// space. Bytes >= 0x80 pass through so UTF-8 survives.
std::string normalize_text(std::string_view text);

// Frozen signed feature-hashing encoder over word tokens and boundary-padded
// character 3-grams. Stateless apart from the dimension.
class TextEncoder {
 public:
  explicit TextEncoder(std::size_t dim = kDefaultEmbeddingDim);

  EmbeddingVector embed(std::string_view text) const;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

// Dot product of two unit vectors. Throws std::invalid_argument on dimension
// mismatch.
double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

// Raw features hashed by the encoder ("w:<token>" and "c:<3gram>"), exposed
// for inspection and tests.
std::vector<std::string> text_features(std::string_view text);

}  // namespace skill1
