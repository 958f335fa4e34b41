#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "skill1/embedding.hpp"

namespace skill1 {

using SkillId = std::uint64_t;

// Terminal task outcome. Binary by construction.
enum class Outcome : std::uint8_t { failure = 0, success = 1 };

inline double outcome_value(Outcome o) { return o == Outcome::success ? 1.0 : 0.0; }

inline constexpr std::string_view kSnapshotFormatVersion = "skill1-library-v1";

struct Skill {
  SkillId id = 0;
  std::string strat;
  std::string desc;
  EmbeddingVector desc_embedding;
  double utility = 0.0;
  std::uint64_t usage_count = 0;
  std::int64_t created_step = 0;

  friend bool operator==(const Skill&, const Skill&) = default;
};

struct SkillDraft {
  std::string strat;
  std::string desc;
};

struct Candidate {
  SkillId id = 0;
  double similarity = 0.0;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Result of a top-K scan: descending similarity, ties by ascending id.
struct CandidateSet {
  std::vector<Candidate> entries;
  EmbeddingVector query_embedding;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// How the retirement score uses the usage count.
//   log1p:       U * log(1 + n)
//   log_clamped: U * log(max(n, 1))   (closer to the original formulation)
enum class RetirementRule { log1p, log_clamped };

struct LibraryConfig {
  std::size_t capacity = 256;
  double ema_rate = 0.05;
  std::size_t top_k = 5;
  RetirementRule retirement = RetirementRule::log1p;

  void validate() const;  // throws ConfigError
};

enum class AdmitStatus {
  admitted,
  admitted_with_eviction,
  rejected_failure,
  rejected_empty_strat,
  rejected_empty_desc,
};

struct AdmitResult {
  AdmitStatus status = AdmitStatus::rejected_failure;
  SkillId id = 0;                  // valid when admitted
  std::optional<SkillId> evicted;  // set for admitted_with_eviction

  bool admitted() const {
    return status == AdmitStatus::admitted || status == AdmitStatus::admitted_with_eviction;
  }
};

double retirement_score(const Skill& s, RetirementRule rule);

// Called right before a victim is removed, with every resident (victim
// included). Used by tests to verify the eviction rule exhaustively.
using EvictionObserver = std::function<void(std::span<const Skill> residents, SkillId victim)>;

class SkillLibrary {
 public:
  SkillLibrary(LibraryConfig config, TextEncoder encoder);

  // Exact scan. The similarity pass is OpenMP-parallel; the result is
  // identical to retrieve_top_k_serial.
  CandidateSet retrieve_top_k(const EmbeddingVector& query, std::size_t k) const;
  // Reference implementation: one loop, full sort.
  CandidateSet retrieve_top_k_serial(const EmbeddingVector& query, std::size_t k) const;

  // U(s) <- (1 - alpha) U(s) + alpha r for every candidate. Throws
  // RuntimeError if a candidate id is not resident.
  void update_utilities(const CandidateSet& candidates, Outcome outcome, double alpha);

  // Max candidate utility; 0 for an empty set.
  double library_baseline(const CandidateSet& candidates) const;

  AdmitResult admit(const SkillDraft& draft, Outcome outcome, std::int64_t current_step);

  void record_selection(SkillId id);

  const Skill& get(SkillId id) const;
  const Skill* find(SkillId id) const;
  bool contains(SkillId id) const { return index_.count(id) != 0; }

  std::span<const Skill> skills() const { return skills_; }
  std::size_t size() const { return skills_.size(); }
  bool empty() const { return skills_.empty(); }
  const LibraryConfig& config() const { return config_; }
  const TextEncoder& encoder() const { return encoder_; }
  std::uint64_t total_selections() const { return total_selections_; }
  SkillId next_id() const { return next_id_; }

  void set_eviction_observer(EvictionObserver obs) { observer_ = std::move(obs); }

  // Line-delimited JSON: one header object, then one skill per line in id
  // order.
  void snapshot(const std::filesystem::path& path) const;
  std::string snapshot_string() const;
  static SkillLibrary load(const std::filesystem::path& path);
  static SkillLibrary load_string(const std::string& text);

  // Field-for-field equality (config, counters and every skill).
  friend bool operator==(const SkillLibrary& a, const SkillLibrary& b);

 private:
  std::size_t slot(SkillId id) const;
  std::size_t eviction_victim() const;
  void remove_at(std::size_t pos);

  LibraryConfig config_;
  TextEncoder encoder_;
  std::vector<Skill> skills_;
  std::unordered_map<SkillId, std::size_t> index_;
  SkillId next_id_ = 1;
  std::uint64_t total_selections_ = 0;
  EvictionObserver observer_;
};

}  // namespace skill1
