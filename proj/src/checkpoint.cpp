#include "skill1/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "skill1/error.hpp"

namespace skill1 {
namespace {

const char* const kMatrixNames[] = {"query", "rerank", "action", "distill"};

void write_matrix(std::ostringstream& os, const std::string& name, const Eigen::MatrixXd& m) {
  os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
}

double parse_double(const std::string& tok, std::size_t lineno) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || end != tok.data() + tok.size())
    throw RuntimeError("checkpoint line " + std::to_string(lineno) + ": bad number '" + tok + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string checkpoint_string(const Checkpoint& ckpt) {
  std::ostringstream os;
  os << kCheckpointVersion << '\n';
  nlohmann::json meta = ckpt.meta;
  os << "meta " << meta.dump() << '\n';
  for (std::size_t i = 0; i < 4; ++i)
    write_matrix(os, kMatrixNames[i], ckpt.policy.params.head(kAllHeads[i]));
  for (std::size_t i = 0; i < 4; ++i)
    write_matrix(os, std::string("ref.") + kMatrixNames[i], ckpt.policy.reference.head(kAllHeads[i]));
  os << "end\n";
  return os.str();
}

Checkpoint parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    return RuntimeError("checkpoint line " + std::to_string(lineno) + ": " + msg);
  };
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };

  if (!next()) throw fail("empty file");
  if (line != kCheckpointVersion)
    throw fail("version mismatch: file has '" + line + "', binary expects '" +
               std::string(kCheckpointVersion) + "'");
  Checkpoint ck;
  if (!next() || line.rfind("meta ", 0) != 0) throw fail("missing meta line");
  try {
    ck.meta = nlohmann::json::parse(line.substr(5));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed meta: ") + e.what());
  }

  auto read_matrix = [&](const std::string& expected) {
    if (!next()) throw fail("unexpected end of file, wanted matrix " + expected);
    std::istringstream hs(line);
    std::string name;
    Eigen::Index rows = -1, cols = -1;
    hs >> name >> rows >> cols;
    if (name != expected || rows < 0 || cols < 0) throw fail("expected matrix header '" + expected + "'");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!next()) throw fail("truncated matrix " + expected);
      std::istringstream rs(line);
      std::string tok;
      Eigen::Index c = 0;
      while (rs >> tok) {
        if (c >= cols) throw fail("too many values in row of " + expected);
        m(r, c++) = parse_double(tok, lineno);
      }
      if (c != cols) throw fail("too few values in row of " + expected);
    }
    return m;
  };

  for (std::size_t i = 0; i < 4; ++i) ck.policy.params.head(kAllHeads[i]) = read_matrix(kMatrixNames[i]);
  for (std::size_t i = 0; i < 4; ++i)
    ck.policy.reference.head(kAllHeads[i]) = read_matrix(std::string("ref.") + kMatrixNames[i]);
  if (!next() || line != "end") throw fail("missing end marker");

  auto& d = ck.policy.dims;
  const auto& p = ck.policy.params;
  d.query_templates = static_cast<std::size_t>(p.query.rows());
  d.task_features = static_cast<std::size_t>(p.query.cols());
  d.rerank_features = static_cast<std::size_t>(p.rerank.cols());
  d.num_actions = static_cast<std::size_t>(p.action.rows());
  d.action_features = static_cast<std::size_t>(p.action.cols());
  d.distill_templates = static_cast<std::size_t>(p.distill.rows());
  d.distill_features = static_cast<std::size_t>(p.distill.cols());
  for (Head h : kAllHeads) {
    if (ck.policy.reference.head(h).rows() != p.head(h).rows() ||
        ck.policy.reference.head(h).cols() != p.head(h).cols())
      throw RuntimeError("checkpoint: reference shape differs for head " + std::string(head_name(h)));
  }
  if (!p.all_finite() || !ck.policy.reference.all_finite())
    throw RuntimeError("checkpoint: non-finite parameter");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write checkpoint " + path.string());
  out << checkpoint_string(ckpt);
  if (!out) throw RuntimeError("error writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace skill1
