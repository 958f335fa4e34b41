#include "skill1/skill_library.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skill1/error.hpp"

namespace skill1 {
namespace {

using nlohmann::json;

bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

std::string retirement_name(RetirementRule r) {
  return r == RetirementRule::log1p ? "log1p" : "log_clamped";
}

RetirementRule parse_retirement(const std::string& s) {
  if (s == "log1p") return RetirementRule::log1p;
  if (s == "log_clamped") return RetirementRule::log_clamped;
  throw ConfigError("unknown retirement rule '" + s + "'");
}

}  // namespace

void LibraryConfig::validate() const {
  if (capacity < 1) throw ConfigError("library capacity must be >= 1");
  if (!(ema_rate > 0.0 && ema_rate <= 1.0)) throw ConfigError("ema_rate must be in (0, 1]");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
}

double retirement_score(const Skill& s, RetirementRule rule) {
  const double n = static_cast<double>(s.usage_count);
  if (rule == RetirementRule::log1p) return s.utility * std::log1p(n);
  return s.utility * std::log(std::max(n, 1.0));
}

SkillLibrary::SkillLibrary(LibraryConfig config, TextEncoder encoder)
    : config_(config), encoder_(encoder) {
  config_.validate();
}

CandidateSet SkillLibrary::retrieve_top_k(const EmbeddingVector& query, std::size_t k) const {
  CandidateSet out;
  out.query_embedding = query;
  const std::size_t n = skills_.size();
  if (n == 0 || k == 0) return out;
  if (query.dim() != encoder_.dim())
    throw std::invalid_argument("retrieve_top_k: query dimension mismatch");

  std::vector<Candidate> all(n);
  const auto ns = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n >= 512)
  for (std::ptrdiff_t i = 0; i < ns; ++i) {
    const Skill& s = skills_[static_cast<std::size_t>(i)];
    all[static_cast<std::size_t>(i)] = {s.id, cosine_sim(query, s.desc_embedding)};
  }
  const std::size_t m = std::min(k, n);
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(),
                    candidate_before);
  all.resize(m);
  out.entries = std::move(all);
  return out;
}

CandidateSet SkillLibrary::retrieve_top_k_serial(const EmbeddingVector& query,
                                                 std::size_t k) const {
  CandidateSet out;
  out.query_embedding = query;
  std::vector<Candidate> all;
  all.reserve(skills_.size());
  for (const Skill& s : skills_) all.push_back({s.id, cosine_sim(query, s.desc_embedding)});
  std::sort(all.begin(), all.end(), candidate_before);
  if (all.size() > k) all.resize(k);
  out.entries = std::move(all);
  return out;
}

std::size_t SkillLibrary::slot(SkillId id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw RuntimeError("skill library: unknown skill id " + std::to_string(id));
  return it->second;
}

const Skill& SkillLibrary::get(SkillId id) const { return skills_[slot(id)]; }

const Skill* SkillLibrary::find(SkillId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &skills_[it->second];
}

void SkillLibrary::update_utilities(const CandidateSet& candidates, Outcome outcome,
                                    double alpha) {
  // Validate first so a bad id leaves the library untouched.
  std::vector<std::size_t> slots;
  slots.reserve(candidates.size());
  for (const auto& c : candidates.entries) slots.push_back(slot(c.id));
  const double r = outcome_value(outcome);
  for (std::size_t p : slots) {
    double& u = skills_[p].utility;
    u = (1.0 - alpha) * u + alpha * r;
  }
}

double SkillLibrary::library_baseline(const CandidateSet& candidates) const {
  double best = 0.0;
  bool any = false;
  for (const auto& c : candidates.entries) {
    const double u = get(c.id).utility;
    if (!any || u > best) best = u;
    any = true;
  }
  return any ? best : 0.0;
}

void SkillLibrary::record_selection(SkillId id) {
  skills_[slot(id)].usage_count += 1;
  total_selections_ += 1;
}

std::size_t SkillLibrary::eviction_victim() const {
  std::size_t best = 0;
  double best_score = retirement_score(skills_[0], config_.retirement);
  for (std::size_t i = 1; i < skills_.size(); ++i) {
    const Skill& s = skills_[i];
    const double sc = retirement_score(s, config_.retirement);
    const Skill& b = skills_[best];
    if (sc < best_score || (sc == best_score && (s.created_step < b.created_step ||
                                                 (s.created_step == b.created_step && s.id < b.id)))) {
      best = i;
      best_score = sc;
    }
  }
  return best;
}

void SkillLibrary::remove_at(std::size_t pos) {
  index_.erase(skills_[pos].id);
  if (pos != skills_.size() - 1) {
    skills_[pos] = std::move(skills_.back());
    index_[skills_[pos].id] = pos;
  }
  skills_.pop_back();
}

AdmitResult SkillLibrary::admit(const SkillDraft& draft, Outcome outcome,
                                std::int64_t current_step) {
  AdmitResult res;
  if (outcome != Outcome::success) {
    res.status = AdmitStatus::rejected_failure;
    return res;
  }
  if (draft.strat.empty()) {
    res.status = AdmitStatus::rejected_empty_strat;
    return res;
  }
  if (draft.desc.empty()) {
    res.status = AdmitStatus::rejected_empty_desc;
    return res;
  }
  res.status = AdmitStatus::admitted;
  if (skills_.size() >= config_.capacity) {
    const std::size_t victim = eviction_victim();
    if (observer_) observer_(skills_, skills_[victim].id);
    res.evicted = skills_[victim].id;
    res.status = AdmitStatus::admitted_with_eviction;
    remove_at(victim);
  }
  Skill s;
  s.id = next_id_++;
  s.strat = draft.strat;
  s.desc = draft.desc;
  s.desc_embedding = encoder_.embed(s.desc);
  // Admission implies the first observed outcome was a success.
  s.utility = 1.0;
  s.usage_count = 0;
  s.created_step = current_step;
  res.id = s.id;
  index_[s.id] = skills_.size();
  skills_.push_back(std::move(s));
  return res;
}

std::string SkillLibrary::snapshot_string() const {
  std::ostringstream os;
  json header = {
      {"format_version", kSnapshotFormatVersion},
      {"embedding_version", kEmbeddingVersion},
      {"capacity", config_.capacity},
      {"ema_rate", config_.ema_rate},
      {"top_k", config_.top_k},
      {"retirement", retirement_name(config_.retirement)},
      {"dim", encoder_.dim()},
      {"next_id", next_id_},
      {"total_selections", total_selections_},
  };
  os << header.dump() << '\n';
  std::vector<const Skill*> order;
  order.reserve(skills_.size());
  for (const auto& s : skills_) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const Skill* s : order) {
    json rec = {
        {"id", s->id},
        {"strat", s->strat},
        {"desc", s->desc},
        {"utility", s->utility},
        {"usage_count", s->usage_count},
        {"created_step", s->created_step},
        {"desc_embedding", std::vector<double>(s->desc_embedding.values().begin(),
                                               s->desc_embedding.values().end())},
    };
    os << rec.dump() << '\n';
  }
  return os.str();
}

void SkillLibrary::snapshot(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write library snapshot " + path.string());
  out << snapshot_string();
  if (!out) throw RuntimeError("error writing library snapshot " + path.string());
}

SkillLibrary SkillLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open library snapshot " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return load_string(ss.str());
  } catch (const RuntimeError& e) {
    throw RuntimeError(path.string() + ": " + e.what());
  }
}

SkillLibrary SkillLibrary::load_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> RuntimeError {
    return RuntimeError("line " + std::to_string(lineno) + ": " + msg);
  };

  if (!std::getline(in, line)) {
    lineno = 1;
    throw fail("missing header");
  }
  ++lineno;
  LibraryConfig cfg;
  std::size_t dim = 0;
  SkillId next_id = 1;
  std::uint64_t total = 0;
  try {
    const json h = json::parse(line);
    if (h.at("format_version").get<std::string>() != kSnapshotFormatVersion)
      throw fail("unsupported format_version '" + h.at("format_version").get<std::string>() + "'");
    if (h.at("embedding_version").get<std::string>() != kEmbeddingVersion)
      throw fail("embedding_version mismatch: snapshot has '" +
                 h.at("embedding_version").get<std::string>() + "', binary uses '" +
                 std::string(kEmbeddingVersion) + "'");
    cfg.capacity = h.at("capacity").get<std::size_t>();
    cfg.ema_rate = h.at("ema_rate").get<double>();
    cfg.top_k = h.value("top_k", std::size_t{5});
    cfg.retirement = parse_retirement(h.value("retirement", std::string("log1p")));
    dim = h.value("dim", kDefaultEmbeddingDim);
    next_id = h.value("next_id", SkillId{1});
    total = h.value("total_selections", std::uint64_t{0});
    cfg.validate();
  } catch (const json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw fail(std::string("invalid header: ") + e.what());
  }

  SkillLibrary lib(cfg, TextEncoder(dim));
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Skill s;
    try {
      const json r = json::parse(line);
      s.id = r.at("id").get<SkillId>();
      s.strat = r.at("strat").get<std::string>();
      s.desc = r.at("desc").get<std::string>();
      s.utility = r.at("utility").get<double>();
      s.usage_count = r.at("usage_count").get<std::uint64_t>();
      s.created_step = r.at("created_step").get<std::int64_t>();
      s.desc_embedding = EmbeddingVector::from_values(r.at("desc_embedding").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw fail(std::string("malformed skill record: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw fail(std::string("bad desc_embedding: ") + e.what());
    }
    if (s.desc_embedding.dim() != dim) throw fail("desc_embedding has wrong dimension");
    if (!(s.utility >= 0.0 && s.utility <= 1.0)) throw fail("utility outside [0, 1]");
    if (s.strat.empty() || s.desc.empty()) throw fail("empty strat or desc");
    if (!(s.desc_embedding == lib.encoder_.embed(s.desc)))
      throw fail("desc_embedding does not match the encoder output for desc");
    if (lib.index_.count(s.id)) throw fail("duplicate skill id " + std::to_string(s.id));
    if (s.id >= next_id) throw fail("skill id " + std::to_string(s.id) + " >= next_id");
    if (lib.skills_.size() >= cfg.capacity) throw fail("more skills than capacity");
    lib.index_[s.id] = lib.skills_.size();
    lib.skills_.push_back(std::move(s));
  }
  lib.next_id_ = next_id;
  lib.total_selections_ = total;
  return lib;
}

bool operator==(const SkillLibrary& a, const SkillLibrary& b) {
  if (a.config_.capacity != b.config_.capacity || a.config_.ema_rate != b.config_.ema_rate ||
      a.config_.top_k != b.config_.top_k || a.config_.retirement != b.config_.retirement ||
      a.encoder_.dim() != b.encoder_.dim() || a.next_id_ != b.next_id_ ||
      a.total_selections_ != b.total_selections_ || a.skills_.size() != b.skills_.size())
    return false;
  for (const Skill& s : a.skills_) {
    const Skill* o = b.find(s.id);
    if (!o || !(*o == s)) return false;
  }
  return true;
}

}  // namespace skill1
