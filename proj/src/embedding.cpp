#include "skill1/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace skill1 {
namespace {

std::uint64_t hash_feature(std::string_view s) {
  // FNV-1a over the bytes, seeded, followed by a splitmix finalizer so the
  // low bits (bucket) and the top bit (sign) are well mixed.
  std::uint64_t h = 0xCBF29CE484222325ull ^ kEmbeddingSeed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  h ^= h >> 33;
  h *= 0xFF51AFD7ED558CCDull;
  h ^= h >> 33;
  h *= 0xC4CEB9FE1A85EC53ull;
  h ^= h >> 33;
  return h;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

EmbeddingVector EmbeddingVector::from_values(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("embedding: empty vector");
  double sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("embedding: non-finite component");
    sq += v * v;
  }
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-9)
    throw std::invalid_argument("embedding: vector is not unit norm");
  return EmbeddingVector(std::move(values));
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80) {
      out.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      out.push_back(ch);
    } else {
      out.push_back(' ');
    }
  }
  return out;
}

std::vector<std::string> text_features(std::string_view text) {
  const std::string norm = normalize_text(text);
  std::vector<std::string> feats;
  for (std::string_view tok : split_ws(norm)) {
    feats.push_back("w:" + std::string(tok));
    const std::string padded = "#" + std::string(tok) + "#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i)
      feats.push_back("c:" + padded.substr(i, 3));
  }
  return feats;
}

TextEncoder::TextEncoder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("embedding: dimension must be positive");
}

EmbeddingVector TextEncoder::embed(std::string_view text) const {
  std::vector<double> v(dim_, 0.0);
  for (const auto& f : text_features(text)) {
    const std::uint64_t h = hash_feature(f);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % dim_] += sign;
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) {
    v[0] = 1.0;
    return EmbeddingVector(std::move(v));
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return EmbeddingVector(std::move(v));
}

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("cosine_sim: dimension mismatch (" + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()) + ")");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
  return dot;
}

}  // namespace skill1
