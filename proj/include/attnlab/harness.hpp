#ifndef ATTNLAB_HARNESS_HPP
#define ATTNLAB_HARNESS_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "attnlab/linalg.hpp"
#include "attnlab/model.hpp"
#include "attnlab/tasks.hpp"
#include "attnlab/training.hpp"
#include "json.hpp"

namespace attnlab {

/// Usage error: bad flags or infeasible parameters (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Flat key = value config files

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Parses `key = value` lines; '#' starts a comment, blank lines and [section] headers are skipped,
/// surrounding double quotes are stripped from values.
inline std::vector<std::pair<std::string, std::string>> parse_kv_config(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> load_kv_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file: " + path);
  return parse_kv_config(is);
}

/// Output root: $ATTNLAB_OUT when set, "runs" otherwise.
inline std::filesystem::path output_root() {
  const char* env = std::getenv("ATTNLAB_OUT");
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("runs");
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Demo tokenization: letters are questions (A = 0), digits are answers, '=' is the sign.

inline Sequence tokenize(const std::string& text, const Vocabulary& v) {
  Sequence out;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (ch == '=') {
      out.push_back(v.sign());
    } else if (std::isalpha(static_cast<unsigned char>(ch))) {
      const int q = std::toupper(static_cast<unsigned char>(ch)) - 'A';
      if (q >= v.n_question) throw UsageError(std::string("token '") + ch + "' outside the question alphabet");
      out.push_back(q);
    } else if (std::isdigit(static_cast<unsigned char>(ch))) {
      const int a = ch - '0';
      if (a >= v.n_answer) throw UsageError(std::string("token '") + ch + "' outside the answer alphabet");
      out.push_back(v.answer(a));
    } else {
      throw UsageError(std::string("cannot tokenize character '") + ch + "'");
    }
  }
  if (out.empty()) throw UsageError("empty input");
  return out;
}

inline std::string token_label(int t, const Vocabulary& v) {
  if (t == v.sign()) return "=";
  if (v.is_answer(t)) return std::to_string(t - v.n_question - 1);
  if (t < 26) return std::string(1, static_cast<char>('A' + t));
  return "q" + std::to_string(t);
}

inline std::vector<std::string> token_labels(const Sequence& s, const Vocabulary& v) {
  std::vector<std::string> out;
  for (int t : s) out.push_back(token_label(t, v));
  return out;
}

// ---------------------------------------------------------------------------
// Attention export

/// Row q of the exported matrix is query position q; entry (q, j) is its weight on position j.
inline Matrix query_major(const Matrix& alpha) { return alpha.transpose(); }

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Grayscale heatmap, darker = larger, scaled by the matrix maximum. Rows are labelled on the left,
/// columns on top.
inline std::string heatmap_svg(const Matrix& m, const std::vector<std::string>& row_labels,
                               const std::vector<std::string>& col_labels, const std::string& title) {
  const int cell = 24, left = 40, top = 48;
  const auto rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
  const double mx = std::max(max_abs(m), 1e-300);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + cols * cell + 8 << "\" height=\""
     << top + rows * cell + 8 << "\" font-family=\"monospace\" font-size=\"11\">\n";
  os << "<text x=\"4\" y=\"14\">" << xml_escape(title) << "</text>\n";
  for (int c = 0; c < cols; ++c) {
    os << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top - 6 << "\" text-anchor=\"middle\">"
       << xml_escape(c < static_cast<int>(col_labels.size()) ? col_labels[static_cast<std::size_t>(c)] : "") << "</text>\n";
  }
  for (int r = 0; r < rows; ++r) {
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + r * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
       << xml_escape(r < static_cast<int>(row_labels.size()) ? row_labels[static_cast<std::size_t>(r)] : "") << "</text>\n";
    for (int c = 0; c < cols; ++c) {
      const double v = std::clamp(std::abs(m(r, c)) / mx, 0.0, 1.0);
      const int g = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      os << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell << "\" width=\"" << cell << "\" height=\""
         << cell << "\" fill=\"rgb(" << g << ',' << g << ',' << g << ")\" stroke=\"#ccc\"><title>" << std::setprecision(6)
         << m(r, c) << "</title></rect>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

/// One JSON object per (layer, head) with the query-major matrix.
inline json attention_json(const Model& model, const Sequence& tokens, const Vocabulary& v) {
  json out = json::array();
  const auto labels = token_labels(tokens, v);
  for (const auto& am : attention_maps(model, tokens)) {
    const Matrix q = query_major(am.alpha);
    json rows = json::array();
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < q.cols(); ++c) row.push_back(q(r, c));
      rows.push_back(std::move(row));
    }
    out.push_back({{"layer", am.layer}, {"head", am.head}, {"tokens", labels}, {"token_ids", tokens}, {"alpha", rows}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << "step,train_loss,train_accuracy,eval_accuracy\n";
  os << std::setprecision(17);
  for (const auto& r : rows) os << r.step << ',' << r.train_loss << ',' << r.train_accuracy << ',' << r.eval_accuracy << '\n';
  return os.str();
}

inline json train_config_json(const TrainConfig& tc) {
  return {{"learning_rate", tc.learning_rate}, {"steps", tc.steps},
          {"batch_size", tc.batch_size},       {"seed", tc.seed},
          {"init", to_string(tc.init)},        {"value_init", to_string(tc.value_init)},
          {"qk_init_scale", tc.qk_init_scale}, {"eval_every", tc.eval_every},
          {"checkpoint_every", tc.checkpoint_every}};
}

/// Comma-separated positive integers, e.g. "1,1,4".
inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("not an integer list: " + s);
    }
  }
  return out;
}

}  // namespace attnlab

#endif  // ATTNLAB_HARNESS_HPP
