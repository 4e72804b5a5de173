#pragma once

// JSON reading and writing for representation files and reports.
// Matrices are arrays of rows; each entry is a two-element [re, im] array.

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wold/decomposition.hpp"
#include "wold/repn.hpp"

namespace wold::io {

using json = nlohmann::json;
using linalg::Complex;

struct LoadedRep {
  bool product = false;
  CovariantRep single;
  ProductSystemRep psr;
};

namespace detail {

/// Rewrites bare NaN / Infinity / -Infinity tokens (outside strings) as
/// strings so the document still parses and the value is reported as
/// non-finite instead of as a syntax error.
inline std::string quote_non_finite_tokens(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < text.size()) {
        out += text[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    bool matched = false;
    for (const char* tok : {"-Infinity", "Infinity", "NaN"}) {
      const std::string t(tok);
      if (text.compare(i, t.size(), t) == 0) {
        const bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
        const std::size_t end = i + t.size();
        const bool right_ok = end >= text.size() || !std::isalnum(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) {
          out += '"' + t + '"';
          i = end - 1;
          matched = true;
          break;
        }
      }
    }
    if (!matched) out += c;
  }
  return out;
}

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

[[noreturn]] inline void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::Parse, "field '" + field + "': " + what);
}

inline double scalar(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf" || s == "infinity" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-infinity") return -std::numeric_limits<double>::infinity();
  }
  fail(field, "expected a number");
}

inline std::size_t count(const json& v, const std::string& field) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail(field, "expected a nonnegative integer");
  const auto x = v.get<long long>();
  if (x < 0) fail(field, "expected a nonnegative integer");
  return static_cast<std::size_t>(x);
}

}  // namespace detail

/// Matrix from rows of [re, im] entries; non-finite entries raise NonFinite
/// naming the offending entry.
inline ComplexMatrix matrix_from_json(const json& v, const std::string& field) {
  if (!v.is_array()) detail::fail(field, "expected an array of rows");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  if (rows > 0) {
    if (!v[0].is_array()) detail::fail(field + "[0]", "expected a row array");
    cols = v[0].size();
  }
  ComplexMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!v[r].is_array()) detail::fail(rf, "expected a row array");
    if (v[r].size() != cols) detail::fail(rf, "row has " + std::to_string(v[r].size()) + " entries, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string ef = rf + "[" + std::to_string(c) + "]";
      const json& e = v[r][c];
      if (!e.is_array() || e.size() != 2) detail::fail(ef, "expected [re, im]");
      const double re = detail::scalar(e[0], ef + "[0]");
      const double im = detail::scalar(e[1], ef + "[1]");
      if (!std::isfinite(re) || !std::isfinite(im)) {
        throw Error(ErrorCode::NonFinite, "field '" + ef + "' is not finite");
      }
      m(static_cast<Index>(r), static_cast<Index>(c)) = Complex(re, im);
    }
  }
  return m;
}

inline json matrix_to_json(const ComplexMatrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const ComplexVector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

namespace detail {

inline std::vector<ComplexMatrix> matrix_list(const json& doc, const std::string& key, const std::string& field) {
  std::vector<ComplexMatrix> out;
  if (!doc.contains(key)) return out;
  const json& v = doc.at(key);
  if (!v.is_array()) fail(field, "expected an array of matrices");
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(matrix_from_json(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline Correspondence correspondence(const json& v, const std::string& field) {
  if (!v.is_object()) fail(field, "expected an object");
  if (!v.contains("dim")) fail(field + ".dim", "missing");
  Correspondence c;
  c.dim = count(v.at("dim"), field + ".dim");
  c.left_action = matrix_list(v, "left_action", field + ".left_action");
  c.right_action = matrix_list(v, "right_action", field + ".right_action");
  return c;
}

inline std::optional<Frame> window(const json& doc, std::size_t n) {
  if (!doc.contains("window_mask") || doc.at("window_mask").is_null()) return std::nullopt;
  const json& v = doc.at("window_mask");
  if (!v.is_array()) fail("window_mask", "expected an array of basis indices");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string f = "window_mask[" + std::to_string(i) + "]";
    const std::size_t b = count(v[i], f);
    if (b >= n) fail(f, "index " + std::to_string(b) + " outside K_dim " + std::to_string(n));
    idx.push_back(b);
  }
  return Frame::coordinate(n, idx);
}

/// Pairs given 1-based as {i, j, matrix}.
inline std::map<std::pair<std::size_t, std::size_t>, ComplexMatrix> pair_map(const json& doc, const std::string& key,
                                                                             std::size_t k) {
  std::map<std::pair<std::size_t, std::size_t>, ComplexMatrix> out;
  if (!doc.contains(key)) return out;
  const json& v = doc.at(key);
  if (!v.is_array()) fail(key, "expected an array of {i, j, matrix}");
  for (std::size_t e = 0; e < v.size(); ++e) {
    const std::string f = key + "[" + std::to_string(e) + "]";
    if (!v[e].is_object() || !v[e].contains("i") || !v[e].contains("j") || !v[e].contains("matrix")) {
      fail(f, "expected {i, j, matrix}");
    }
    const std::size_t i = count(v[e].at("i"), f + ".i");
    const std::size_t j = count(v[e].at("j"), f + ".j");
    if (i < 1 || j < 1 || i > k || j > k || i == j) fail(f, "directions must be distinct and in 1.." + std::to_string(k));
    out[{i - 1, j - 1}] = matrix_from_json(v[e].at("matrix"), f + ".matrix");
  }
  return out;
}

}  // namespace detail

inline LoadedRep rep_from_json(const json& doc) {
  if (!doc.is_object()) detail::fail("<root>", "expected an object");
  if (!doc.contains("mode") || !doc.at("mode").is_string()) detail::fail("mode", "missing or not a string");
  const std::string mode = doc.at("mode").get<std::string>();
  if (mode != "single" && mode != "product") detail::fail("mode", "must be \"single\" or \"product\"");
  if (!doc.contains("K_dim")) detail::fail("K_dim", "missing");
  const std::size_t n = detail::count(doc.at("K_dim"), "K_dim");
  auto sigma = detail::matrix_list(doc, "sigma", "sigma");
  if (!doc.contains("correspondences") || !doc.at("correspondences").is_array()) {
    detail::fail("correspondences", "missing or not an array");
  }
  std::vector<Correspondence> corrs;
  const json& cs = doc.at("correspondences");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    corrs.push_back(detail::correspondence(cs[i], "correspondences[" + std::to_string(i) + "]"));
  }
  LoadedRep out;
  if (mode == "single") {
    if (corrs.size() != 1) detail::fail("correspondences", "single mode needs exactly one correspondence");
    if (!doc.contains("atilde")) detail::fail("atilde", "missing");
    out.single.K_dim = n;
    out.single.sigma = std::move(sigma);
    out.single.E = corrs[0];
    out.single.atilde = matrix_from_json(doc.at("atilde"), "atilde");
    out.single.window_mask = detail::window(doc, n);
    validate(out.single);
    return out;
  }
  out.product = true;
  if (!doc.contains("atildes")) detail::fail("atildes", "missing");
  out.psr.K_dim = n;
  out.psr.sigma = std::move(sigma);
  out.psr.corrs = std::move(corrs);
  out.psr.atildes = detail::matrix_list(doc, "atildes", "atildes");
  if (out.psr.atildes.size() != out.psr.corrs.size()) detail::fail("atildes", "need one matrix per correspondence");
  const std::size_t k = out.psr.atildes.size();
  out.psr.flips = detail::pair_map(doc, "flips", k);
  out.psr.twists = detail::pair_map(doc, "twists", k);
  for (const auto& [key, u] : out.psr.twists) {
    if (key.first > key.second) detail::fail("twists", "store U_ij with i < j; U_ji is its adjoint");
  }
  out.psr.window_mask = detail::window(doc, n);
  validate(out.psr);
  return out;
}

/// Parses a representation document; syntax errors carry line and column.
inline LoadedRep rep_from_text(const std::string& text) {
  const std::string cleaned = detail::quote_non_finite_tokens(text);
  json doc;
  try {
    doc = json::parse(cleaned);
  } catch (const json::parse_error& e) {
    // columns count the quotes added around non-finite tokens earlier on the line
    const auto [line, col] = detail::line_col(cleaned, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    const std::size_t at = what.find(": ", what.find("column"));
    if (at != std::string::npos) what = what.substr(at + 2);
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + what);
  }
  return rep_from_json(doc);
}

inline LoadedRep rep_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return rep_from_text(ss.str());
}

namespace detail {

inline json window_to_json(const std::optional<Frame>& w) {
  if (!w) return nullptr;
  json idx = json::array();
  const ComplexMatrix& b = w->basis();
  for (Index c = 0; c < b.cols(); ++c) {
    Index row = 0;
    const double peak = b.col(c).cwiseAbs().maxCoeff(&row);
    if (std::abs(peak - 1.0) > 1e-12) throw Error(ErrorCode::BadParams, "window is not a coordinate subspace");
    idx.push_back(row);
  }
  return idx;
}

inline json correspondence_to_json(const Correspondence& c) {
  json l = json::array();
  json r = json::array();
  for (const auto& m : c.left_action) l.push_back(matrix_to_json(m));
  for (const auto& m : c.right_action) r.push_back(matrix_to_json(m));
  return {{"dim", c.dim}, {"left_action", l}, {"right_action", r}};
}

}  // namespace detail

inline json rep_to_json(const CovariantRep& rep) {
  json sigma = json::array();
  for (const auto& s : rep.sigma) sigma.push_back(matrix_to_json(s));
  json doc = {{"mode", "single"},
              {"K_dim", rep.K_dim},
              {"sigma", sigma},
              {"correspondences", json::array({detail::correspondence_to_json(rep.E)})},
              {"atilde", matrix_to_json(rep.atilde)}};
  if (rep.window_mask) doc["window_mask"] = detail::window_to_json(rep.window_mask);
  return doc;
}

inline json rep_to_json(const ProductSystemRep& psr) {
  json sigma = json::array();
  for (const auto& s : psr.sigma) sigma.push_back(matrix_to_json(s));
  json corrs = json::array();
  for (const auto& c : psr.corrs) corrs.push_back(detail::correspondence_to_json(c));
  json atildes = json::array();
  for (const auto& a : psr.atildes) atildes.push_back(matrix_to_json(a));
  json flips = json::array();
  for (const auto& [key, u] : psr.flips) flips.push_back({{"i", key.first + 1}, {"j", key.second + 1}, {"matrix", matrix_to_json(u)}});
  json twists = json::array();
  for (const auto& [key, u] : psr.twists) twists.push_back({{"i", key.first + 1}, {"j", key.second + 1}, {"matrix", matrix_to_json(u)}});
  json doc = {{"mode", "product"}, {"K_dim", psr.K_dim}, {"sigma", sigma}, {"correspondences", corrs},
              {"atildes", atildes}, {"flips", flips}, {"twists", twists}};
  if (psr.window_mask) doc["window_mask"] = detail::window_to_json(psr.window_mask);
  return doc;
}

/// Each column scaled by a unit phase so its first entry of modulus above
/// 1e-12 is positive real.
inline ComplexMatrix canonical_basis(const Frame& f) {
  ComplexMatrix b = f.basis();
  for (Index c = 0; c < b.cols(); ++c) {
    for (Index r = 0; r < b.rows(); ++r) {
      const double a = std::abs(b(r, c));
      if (a > 1e-12) {
        b.col(c) *= std::conj(b(r, c)) / a;
        b(r, c) = Complex(b(r, c).real(), 0.0);
        break;
      }
    }
  }
  return b;
}

inline json frame_to_json(const Frame& f) {
  const ComplexMatrix b = canonical_basis(f);
  json cols = json::array();
  for (Index c = 0; c < b.cols(); ++c) cols.push_back(vector_to_json(b.col(c)));
  return {{"ambient_dim", f.ambient_dim()}, {"rank", f.rank()}, {"basis", cols}};
}

/// Inverse of frame_to_json, for tests and downstream tooling.
inline Frame frame_from_json(const json& v, double tol = 1e-10) {
  const auto n = static_cast<Index>(v.at("ambient_dim").get<std::size_t>());
  const json& cols = v.at("basis");
  ComplexMatrix b(n, static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (Index r = 0; r < n; ++r) {
      const json& e = cols[c][static_cast<std::size_t>(r)];
      b(r, static_cast<Index>(c)) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return Frame::from_orthonormal(std::move(b), tol);
}

inline json report_to_json(const CheckReport& r) {
  json m = json::object();
  for (const auto& [k, v] : r.metrics) m[k] = v;
  json out = {{"name", r.name},           {"passed", r.passed},   {"residual", r.residual},
              {"tolerance", r.tolerance}, {"window_restricted", r.window_restricted},
              {"metrics", m},             {"note", r.note}};
  out["witness"] = r.witness ? vector_to_json(*r.witness) : json(nullptr);
  return out;
}

inline json single_decomposition_to_json(const decomp::SingleDecomposition& d) {
  json grades = json::array();
  json grade_ranks = json::array();
  for (const auto& g : d.grades) {
    grades.push_back(frame_to_json(g));
    grade_ranks.push_back(g.rank());
  }
  json range_ranks = json::array();
  for (const auto& r : d.ranges) range_ranks.push_back(r.rank());
  return {{"kind", "single"},
          {"level_cap", d.level_cap},
          {"stabilized", d.stabilized},
          {"grades_stabilized", d.grades_stabilized},
          {"ranges_stabilized", d.ranges_stabilized},
          {"wandering", frame_to_json(d.wandering)},
          {"grade_ranks", grade_ranks},
          {"range_ranks", range_ranks},
          {"grades", grades},
          {"K1", frame_to_json(d.K1)},
          {"K2", frame_to_json(d.K2)}};
}

inline json multi_decomposition_to_json(const decomp::MultiDecomposition& d) {
  json summands = json::array();
  for (const auto& s : d.summands) {
    json cls = json::array();
    for (auto c : s.per_direction) cls.push_back(decomp::to_string(c));
    json res = json::object();
    for (const auto& [k, v] : s.residuals) res[k] = v;
    summands.push_back({{"beta", s.beta.label()},
                        {"rank", s.K.rank()},
                        {"wandering_rank", s.wandering.rank()},
                        {"core_rank", s.core.rank()},
                        {"stabilized", s.stabilized},
                        {"classification", cls},
                        {"residuals", res},
                        {"K", frame_to_json(s.K)}});
  }
  return {{"kind", "multi"}, {"level_caps", d.level_caps}, {"stabilized", d.stabilized}, {"summands", summands}};
}

}  // namespace wold::io
