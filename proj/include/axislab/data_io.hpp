#pragma once

// File formats: EMB1 embedding container, manifest JSON lines, head /
// direction / cell description files, synthetic specs, and the canonical
// JSON used for every report.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "axislab/cell.hpp"
#include "axislab/error.hpp"
#include "axislab/intervention.hpp"
#include "axislab/manifest.hpp"
#include "axislab/synth_bench.hpp"

namespace axislab {

using json = nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

// ---------------------------------------------------------------------------
// Canonical JSON: sorted keys, 2-space indent, floats at 17 significant
// digits, non-finite floats as null.

namespace detail {

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0.0) return std::signbit(v) ? "-0.0" : "0.0";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  // Keep floats recognizable as floats after a round trip.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline void canonical_dump(const json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: already key-sorted
        if (!first) out += ",\n";
        first = false;
        out += inner + json(it.key()).dump() + ": ";
        canonical_dump(it.value(), out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool scalars = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      if (scalars) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          canonical_dump(j[i], out, indent + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        canonical_dump(j[i], out, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float: out += format_double(j.get<double>()); return;
    default: out += j.dump(); return;
  }
}

}  // namespace detail

inline std::string canonical_json(const json& j) {
  std::string out;
  detail::canonical_dump(j, out, 0);
  out += "\n";
  return out;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  detail::require(j.is_array(), what + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    detail::require(j[i].is_number(), what + ": element " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  detail::require(j.is_array() && !j.empty(), what + ": expected a nonempty array of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    detail::require(j[r].is_array() && j[r].size() == cols, what + ": ragged row " + std::to_string(r));
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r], what).transpose();
  }
  return m;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(m.row(r).transpose()));
  return rows;
}

// ---------------------------------------------------------------------------
// File helpers.

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  detail::require(static_cast<bool>(out), "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  detail::require(static_cast<bool>(out), "write to '" + path.string() + "' failed");
}

inline json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// EMB1: one JSON header line terminated by 0x0A, then n*h little-endian
// float32 values, row-major.

inline constexpr const char* kEmbFormat = "EMB1";

inline json emb_header(const EmbeddingMatrix& m) {
  return json{{"format", kEmbFormat}, {"n", m.n()},           {"h", m.h()},
              {"dtype", "f32le"},     {"cell_id", m.cell_id}, {"architecture", m.architecture},
              {"layer", m.layer}};
}

inline std::string encode_embeddings(const EmbeddingMatrix& m) {
  m.validate();
  std::string out = emb_header(m).dump() + "\n";
  const std::size_t header = out.size();
  out.resize(header + 4 * static_cast<std::size_t>(m.n() * m.h()));
  std::size_t pos = header;
  for (Eigen::Index i = 0; i < m.n(); ++i) {
    for (Eigen::Index j = 0; j < m.h(); ++j) {
      const float f = static_cast<float>(m.data(i, j));
      std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) out[pos++] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
  }
  return out;
}

inline EmbeddingMatrix decode_embeddings(const std::string& bytes, const std::string& source = "<memory>") {
  const auto nl = bytes.find('\n');
  detail::require(nl != std::string::npos, source + ": EMB1 header line is not terminated by a newline");
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::parse_error& e) {
    throw ValidationError(source + ": EMB1 header is not valid JSON: " + e.what());
  }
  detail::require(header.is_object() && header.value("format", "") == kEmbFormat, source + ": not an EMB1 file (format tag)");
  detail::require(header.value("dtype", "") == "f32le", source + ": unsupported dtype (expected f32le)");
  for (const char* key : {"n", "h"})
    detail::require(header.contains(key) && header[key].is_number_integer() && header[key].get<long long>() >= 0,
                    source + ": header field '" + key + "' must be a nonnegative integer");
  const auto n = header["n"].get<long long>();
  const auto h = header["h"].get<long long>();
  detail::require(n >= 1, source + ": header declares n = 0");
  detail::require(h >= 2, source + ": header declares h < 2");
  const std::size_t expected = 4 * static_cast<std::size_t>(n) * static_cast<std::size_t>(h);
  const std::size_t actual = bytes.size() - nl - 1;
  if (actual != expected)
    throw ValidationError(source + ": body size mismatch: header n=" + std::to_string(n) + ", h=" + std::to_string(h) +
                          " requires " + std::to_string(expected) + " bytes, found " + std::to_string(actual) +
                          (actual < expected ? " (truncated body)" : " (trailing bytes)"));
  EmbeddingMatrix m;
  m.cell_id = header.value("cell_id", "");
  m.architecture = header.value("architecture", "");
  m.layer = header.value("layer", 0);
  m.data.resize(n, h);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (long long i = 0; i < n; ++i) {
    for (long long j = 0; j < h; ++j) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(*p++) << (8 * b);
      m.data(i, j) = static_cast<double>(std::bit_cast<float>(bits));
    }
    detail::require(m.data.row(i).allFinite(), source + ": non-finite value in row " + std::to_string(i));
  }
  return m;
}

inline void save_embeddings(const EmbeddingMatrix& m, const fs::path& path) { write_file(path, encode_embeddings(m)); }

inline EmbeddingMatrix load_embeddings(const fs::path& path) { return decode_embeddings(read_file(path), path.string()); }

/// Import shim for 2-D little-endian .npy arrays (<f4 or <f8, C order).
inline EmbeddingMatrix import_npy(const fs::path& path, std::string cell_id = "", std::string architecture = "", int layer = 0) {
  const std::string bytes = read_file(path);
  const std::string src = path.string();
  detail::require(bytes.size() >= 10 && bytes.compare(0, 6, "\x93NUMPY") == 0, src + ": not an .npy file");
  const int major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    offset = 10;
  } else {
    detail::require(bytes.size() >= 12, src + ": truncated .npy header");
    for (int b = 0; b < 4; ++b) header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + b])) << (8 * b);
    offset = 12;
  }
  detail::require(bytes.size() >= offset + header_len, src + ": truncated .npy header");
  const std::string header = bytes.substr(offset, header_len);
  std::smatch m;
  detail::require(std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([<|>])([fi])(\d+)')")), src + ": missing descr");
  const std::string order = m[1], type = m[2];
  const int width = std::stoi(m[3]);
  detail::require(type == "f" && (width == 4 || width == 8) && order != ">", src + ": only little-endian f4/f8 arrays are supported");
  detail::require(std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*False)")), src + ": Fortran-order arrays are not supported");
  detail::require(std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(\s*(\d+)\s*,\s*(\d+)\s*,?\s*\))")), src + ": expected a 2-D shape");
  const long long n = std::stoll(m[1]), h = std::stoll(m[2]);
  const std::size_t body = offset + header_len;
  const std::size_t expected = static_cast<std::size_t>(n * h * width);
  detail::require(bytes.size() - body == expected, src + ": body size mismatch: expected " + std::to_string(expected) + " bytes, found " +
                                                       std::to_string(bytes.size() - body));
  EmbeddingMatrix e{std::move(cell_id), std::move(architecture), layer, RowMatrix(n, h)};
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + body);
  for (long long i = 0; i < n * h; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < width; ++b) bits |= static_cast<std::uint64_t>(*p++) << (8 * b);
    e.data(i / h, i % h) = width == 4 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)))
                                      : std::bit_cast<double>(bits);
  }
  e.validate();
  return e;
}

// ---------------------------------------------------------------------------
// Manifest JSON lines: {text_id, population, role: human|AI, covariates}.

inline Manifest parse_manifest(const std::string& text, const std::string& source = "<memory>") {
  Manifest out;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": invalid JSON: " + e.what());
    }
    detail::require(j.is_object(), where + ": record must be a JSON object");
    detail::require(j.contains("text_id") && j["text_id"].is_string(), where + ": missing string field text_id");
    ManifestRecord r;
    r.text_id = j["text_id"].get<std::string>();
    if (auto it = seen.find(r.text_id); it != seen.end())
      throw ValidationError(where + ": duplicate text_id '" + r.text_id + "' (first seen on line " + std::to_string(it->second) + ")");
    seen.emplace(r.text_id, lineno);
    r.population = j.value("population", "");
    detail::require(j.contains("role") && j["role"].is_string(), where + ": missing role");
    const auto role = j["role"].get<std::string>();
    if (role == "human")
      r.role = TextRole::human;
    else if (role == "AI")
      r.role = TextRole::AI;
    else
      throw ValidationError(where + ": unknown role '" + role + "' (expected human or AI)");
    if (j.contains("covariates")) {
      detail::require(j["covariates"].is_object(), where + ": covariates must be an object");
      for (auto it = j["covariates"].begin(); it != j["covariates"].end(); ++it) {
        if (it.value().is_null()) continue;  // explicit absence
        detail::require(it.value().is_number(), where + ": covariate '" + it.key() + "' is not a number");
        r.covariates[it.key()] = it.value().get<double>();
      }
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

inline Manifest load_manifest(const fs::path& path) { return parse_manifest(read_file(path), path.string()); }

inline std::string encode_manifest(const Manifest& m) {
  std::string out;
  for (const auto& r : m.records) {
    json cov = json::object();
    for (const auto& [k, v] : r.covariates) cov[k] = v;
    json j{{"text_id", r.text_id}, {"population", r.population}, {"role", to_string(r.role)}, {"covariates", cov}};
    out += j.dump() + "\n";
  }
  return out;
}

inline void save_manifest(const Manifest& m, const fs::path& path) { write_file(path, encode_manifest(m)); }

// ---------------------------------------------------------------------------
// Directions and heads.

inline json to_json(const Direction& d) {
  return json{{"axis_id", d.axis_id}, {"unit", to_json(d.unit)}, {"raw_norm", d.raw_norm}, {"provenance", d.provenance}, {"weak", d.weak}};
}

inline Direction direction_from_json(const json& j, const std::string& source = "<direction>") {
  detail::require(j.is_object() && j.contains("axis_id") && j.contains("unit"), source + ": direction needs axis_id and unit");
  const Vector u = vector_from_json(j["unit"], source + ".unit");
  Direction d = Direction::from_vector(u, j["axis_id"].get<std::string>(), j.value("provenance", ""));
  detail::require(std::abs(u.norm() - 1.0) <= 1e-6, source + ": unit vector is not normalized");
  // Keep the stored bits; renormalizing would perturb the last ulp.
  d.unit = u;
  d.raw_norm = j.value("raw_norm", 1.0);
  detail::require(d.raw_norm >= 0.0, source + ": raw_norm must be nonnegative");
  d.weak = j.value("weak", false);
  return d;
}

inline Direction load_direction(const fs::path& path) { return direction_from_json(read_json_file(path), path.string()); }

inline void save_direction(const Direction& d, const fs::path& path) { write_file(path, canonical_json(to_json(d))); }

inline json to_json(const HeadModel& head) {
  switch (head.kind()) {
    case HeadKind::linear: return json{{"kind", "linear"}, {"weight", to_json(head.linear().weight)}, {"bias", head.linear().bias}};
    case HeadKind::mlp: {
      const auto& m = head.mlp();
      return json{{"kind", "mlp"}, {"w1", matrix_to_json(m.w1)}, {"b1", to_json(m.b1)}, {"w2", to_json(m.w2)}, {"b2", m.b2}};
    }
    case HeadKind::jacobian_bundle: {
      const auto& b = head.bundle();
      return json{{"kind", "jacobian_bundle"}, {"rows", matrix_to_json(b.rows)}, {"baseline_logit", to_json(b.baseline_logit)}};
    }
  }
  return {};
}

inline HeadModel head_from_json(const json& j, const std::string& source = "<head>") {
  detail::require(j.is_object() && j.contains("kind"), source + ": head needs a kind");
  const auto kind = j["kind"].get<std::string>();
  if (kind == "linear") return HeadModel(LinearHead{vector_from_json(j.at("weight"), source + ".weight"), j.value("bias", 0.0)});
  if (kind == "mlp")
    return HeadModel(MlpHead{matrix_from_json(j.at("w1"), source + ".w1"), vector_from_json(j.at("b1"), source + ".b1"),
                             vector_from_json(j.at("w2"), source + ".w2"), j.value("b2", 0.0)});
  if (kind == "jacobian_bundle")
    return HeadModel(JacobianBundle{matrix_from_json(j.at("rows"), source + ".rows"),
                                    vector_from_json(j.at("baseline_logit"), source + ".baseline_logit")});
  throw ValidationError(source + ": unknown head kind '" + kind + "'");
}

inline HeadModel load_head(const fs::path& path) { return head_from_json(read_json_file(path), path.string()); }

inline void save_head(const HeadModel& h, const fs::path& path) { write_file(path, canonical_json(to_json(h))); }

// ---------------------------------------------------------------------------
// Cell description: {cell_id, tau, head, positive_pool, bias_pool,
// recall_pool, pools: [{name, role, emb, bundle?}], axes: [paths]}. Paths
// are relative to the cell file.

struct CellFile {
  Cell cell;
  std::vector<Direction> axes;
};

inline CellFile load_cell(const fs::path& path) {
  const json j = read_json_file(path);
  const fs::path base = path.parent_path();
  const std::string src = path.string();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  detail::require(j.is_object() && j.contains("pools") && j["pools"].is_array(), src + ": cell file needs a pools array");
  CellFile out;
  Cell& c = out.cell;
  c.cell_id = j.value("cell_id", path.stem().string());
  c.tau = j.value("tau", 0.0);
  c.positive_pool = j.value("positive_pool", "");
  c.bias_pool = j.value("bias_pool", "");
  c.recall_pool = j.value("recall_pool", "Cp1");
  if (j.contains("head")) c.head = load_head(resolve(j["head"].get<std::string>()));
  for (const auto& p : j["pools"]) {
    Pool pool;
    pool.name = p.at("name").get<std::string>();
    const auto role = p.at("role").get<std::string>();
    detail::require(role == "positive" || role == "negative", src + ": pool role must be positive or negative");
    pool.role = role == "positive" ? PoolRole::positive : PoolRole::negative;
    pool.emb = load_embeddings(resolve(p.at("emb").get<std::string>()));
    if (p.contains("bundle")) pool.bundle = load_head(resolve(p["bundle"].get<std::string>()));
    c.pools.push_back(std::move(pool));
  }
  if (j.contains("axes"))
    for (const auto& a : j["axes"]) out.axes.push_back(load_direction(resolve(a.get<std::string>())));
  c.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Metric blocks and Pareto cells.

inline json to_json(const MetricBlock& b) {
  json pools = json::object();
  for (const auto& [name, r] : b.pools) {
    json e{{"role", to_string(r.role)}, {"n", r.n}};
    e[r.role == PoolRole::positive ? "tpr" : "fpr"] = r.rate;
    pools[name] = e;
  }
  return json{{"auroc", b.auroc}, {"fpr_at_tau", b.fpr_at_tau}, {"tpr_at_tau", b.tpr_at_tau}, {"tau", b.tau}, {"pools", pools}};
}

inline MetricBlock metric_block_from_json(const json& j) {
  MetricBlock b;
  b.auroc = j.at("auroc").get<double>();
  b.fpr_at_tau = j.at("fpr_at_tau").get<double>();
  b.tpr_at_tau = j.at("tpr_at_tau").get<double>();
  b.tau = j.at("tau").get<double>();
  for (auto it = j.at("pools").begin(); it != j.at("pools").end(); ++it) {
    const auto role = it.value().at("role").get<std::string>() == "positive" ? PoolRole::positive : PoolRole::negative;
    const double rate = it.value().at(role == PoolRole::positive ? "tpr" : "fpr").get<double>();
    b.pools[it.key()] = {role, rate, it.value().value("n", std::size_t{0})};
  }
  b.validate();
  return b;
}

inline json to_json(const VerdictResult& v) {
  return json{{"verdict", to_string(v.verdict)}, {"reasons", v.reasons}, {"violation", v.violation}, {"slack", v.slack}};
}

inline VerdictResult verdict_from_json(const json& j) {
  VerdictResult v;
  v.verdict = j.at("verdict").get<std::string>() == "PASS" ? Verdict::pass : Verdict::decline;
  v.reasons = j.at("reasons").get<std::vector<std::string>>();
  v.violation = j.at("violation").get<double>();
  v.slack = j.value("slack", 0.0);
  return v;
}

inline json to_json(const ParetoCell& c) {
  json cands = json::array();
  for (const auto& k : c.candidates) {
    json e{{"axis_id", k.axis_id},
           {"axis_index", k.axis_index},
           {"epsilon", k.epsilon},
           {"predicted", to_json(k.predicted)},
           {"predicted_delta_fpr", k.predicted_delta_fpr},
           {"predicted_verdict", to_json(k.predicted_verdict)}};
    if (k.measured) e["measured"] = to_json(*k.measured);
    if (k.measured_verdict) e["measured_verdict"] = to_json(*k.measured_verdict);
    cands.push_back(e);
  }
  return json{{"cell_id", c.cell_id},
              {"axis_bank", c.axis_bank},
              {"eps_grid", c.eps_grid},
              {"baseline", to_json(c.baseline)},
              {"candidates", cands},
              {"verdict", to_string(c.verdict)},
              {"reasons", c.reasons},
              {"measured", c.measured},
              {"rule", json{{"recall_pool", c.rule.recall_pool}, {"recall_tolerance", c.rule.recall_tolerance}}}};
}

inline ParetoCell pareto_cell_from_json(const json& j) {
  ParetoCell c;
  c.cell_id = j.at("cell_id").get<std::string>();
  c.axis_bank = j.at("axis_bank").get<std::vector<std::string>>();
  c.eps_grid = j.at("eps_grid").get<std::vector<double>>();
  c.baseline = metric_block_from_json(j.at("baseline"));
  c.verdict = j.at("verdict").get<std::string>() == "PASS" ? Verdict::pass : Verdict::decline;
  c.reasons = j.at("reasons").get<std::vector<std::string>>();
  c.measured = j.value("measured", true);
  if (j.contains("rule")) {
    c.rule.recall_pool = j["rule"].value("recall_pool", "Cp1");
    c.rule.recall_tolerance = j["rule"].value("recall_tolerance", 0.02);
  }
  for (const auto& e : j.at("candidates")) {
    Candidate k;
    k.axis_id = e.at("axis_id").get<std::string>();
    k.axis_index = e.at("axis_index").get<std::size_t>();
    k.epsilon = e.at("epsilon").get<double>();
    k.predicted = metric_block_from_json(e.at("predicted"));
    k.predicted_delta_fpr = e.at("predicted_delta_fpr").get<double>();
    k.predicted_verdict = verdict_from_json(e.at("predicted_verdict"));
    if (e.contains("measured")) k.measured = metric_block_from_json(e["measured"]);
    if (e.contains("measured_verdict")) k.measured_verdict = verdict_from_json(e["measured_verdict"]);
    c.candidates.push_back(std::move(k));
  }
  return c;
}

inline json to_json(const SelectorDecision& d) {
  json j{{"mode", to_string(d.mode)}};
  if (d.chosen)
    j["chosen"] = json{{"candidate_index", d.chosen->candidate_index}, {"axis_id", d.chosen->axis_id},
                       {"epsilon", d.chosen->epsilon}, {"fpr_reduction", d.chosen->fpr_reduction}};
  else
    j["chosen"] = nullptr;
  return j;
}

inline json to_json(const SelectorComparison& c) {
  return json{{"oracle", to_json(c.oracle)}, {"predictor", to_json(c.predictor)}, {"agreement", to_string(c.agreement)}, {"gap", c.gap}};
}

// ---------------------------------------------------------------------------
// Synthetic specs.

inline SyntheticCellSpec synth_spec_from_json(const json& j, const std::string& source = "<spec>") {
  detail::require(j.is_object(), source + ": spec must be an object");
  if (j.value("preset", "") == "planted_bias")
    return planted_bias_cell_spec(j.value("seed", std::uint64_t{7}), j.value("head_kind", std::string("mlp")));
  SyntheticCellSpec s;
  s.cell_id = j.value("cell_id", s.cell_id);
  s.h = j.value("h", s.h);
  if (j.contains("axes")) s.axes = j["axes"].get<std::vector<std::string>>();
  s.positive_pool = j.value("positive_pool", "");
  s.bias_pool = j.value("bias_pool", "");
  s.recall_pool = j.value("recall_pool", "Cp1");
  s.tau = j.value("tau", 0.0);
  s.length_axis = j.value("length_axis", "");
  s.length_r = j.value("length_r", 0.5);
  s.seed = j.value("seed", std::uint64_t{0});
  detail::require(j.contains("populations") && j["populations"].is_array(), source + ": spec needs populations");
  for (const auto& p : j["populations"]) {
    PopulationSpec ps;
    ps.name = p.at("name").get<std::string>();
    const auto role = p.value("role", std::string("negative"));
    detail::require(role == "positive" || role == "negative", source + ": population role must be positive or negative");
    ps.role = role == "positive" ? PoolRole::positive : PoolRole::negative;
    ps.n = p.value("n", std::size_t{100});
    ps.scale = p.value("scale", 1.0);
    if (p.contains("offsets")) ps.offsets = p["offsets"].get<std::map<std::string, double>>();
    if (p.contains("axis_scale")) ps.axis_scale = p["axis_scale"].get<std::map<std::string, double>>();
    s.populations.push_back(std::move(ps));
  }
  if (j.contains("head")) {
    const auto& hj = j["head"];
    s.head.kind = hj.value("kind", std::string("linear"));
    if (hj.contains("weights")) s.head.weights = hj["weights"].get<std::map<std::string, double>>();
    s.head.bias = hj.value("bias", 0.0);
    s.head.off_axis_weight = hj.value("off_axis_weight", 0.0);
    if (hj.contains("widths")) {
      const auto widths = hj["widths"].get<std::vector<long long>>();
      detail::require(widths.size() == 3 && widths[0] == s.h && widths[1] >= 1 && widths[2] == 1,
                      source + ": invalid widths (expected [h, hidden, 1])");
      s.head.hidden = static_cast<std::size_t>(widths[1]);
    }
    s.head.curvature = hj.value("curvature", s.head.curvature);
  }
  s.validate();
  return s;
}

/// Writes one EMB1 per pool, the manifest, the head, per-pool Jacobian
/// bundles, planted axes and a cell file tying them together.
inline std::vector<fs::path> write_synthetic_bundle(const SyntheticCell& sc, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  detail::require(!ec && fs::is_directory(dir), "cannot create output directory '" + dir.string() + "'");
  std::vector<fs::path> written;
  json pools = json::array();
  const auto bundles = export_jacobians(sc.cell);
  for (const auto& p : sc.cell.pools) {
    const auto emb_path = p.name + ".emb";
    EmbeddingMatrix m = p.emb;
    m.cell_id = sc.cell.cell_id + "/" + p.name;
    save_embeddings(m, dir / emb_path);
    written.push_back(dir / emb_path);
    const auto bundle_path = p.name + ".jacobian.json";
    save_head(HeadModel(bundles.at(p.name)), dir / bundle_path);
    written.push_back(dir / bundle_path);
    pools.push_back(json{{"name", p.name}, {"role", to_string(p.role)}, {"emb", emb_path}});
  }
  save_head(sc.cell.head, dir / "head.json");
  written.push_back(dir / "head.json");
  save_manifest(sc.manifest, dir / "manifest.jsonl");
  written.push_back(dir / "manifest.jsonl");
  json axes = json::array();
  for (const auto& [name, d] : sc.planted) {
    const auto path = "axis_" + name + ".json";
    save_direction(d, dir / path);
    written.push_back(dir / path);
    axes.push_back(path);
  }
  json cell{{"cell_id", sc.cell.cell_id}, {"tau", sc.cell.tau},           {"head", "head.json"},
            {"pools", pools},             {"positive_pool", sc.cell.positive_pool}, {"bias_pool", sc.cell.bias_pool},
            {"recall_pool", sc.cell.recall_pool}, {"axes", axes}};
  write_file(dir / "cell.json", canonical_json(cell));
  written.push_back(dir / "cell.json");
  return written;
}

}  // namespace axislab
