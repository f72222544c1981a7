#ifndef ATTNLAB_TASKS_HPP
#define ATTNLAB_TASKS_HPP

#include <algorithm>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "attnlab/linalg.hpp"
#include "json.hpp"

namespace attnlab {

using json = nlohmann::json;
using Sequence = std::vector<int>;

/// Token layout [question block d1 ; sign ; answer block d2].
struct Vocabulary {
  int n_question = 0;
  int n_answer = 0;

  int d_token() const { return n_question + 1 + n_answer; }
  int sign() const { return n_question; }
  int question(int q) const {
    require(q >= 0 && q < n_question, "Vocabulary: question index out of range");
    return q;
  }
  int answer(int a) const {
    require(a >= 0 && a < n_answer, "Vocabulary: answer index out of range");
    return n_question + 1 + a;
  }
  bool is_question(int t) const { return t >= 0 && t < n_question; }
  bool is_answer(int t) const { return t > n_question && t < d_token(); }

  bool operator==(const Vocabulary&) const = default;
};

enum class Role { question, sign, answer };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::question: return "question";
    case Role::sign: return "sign";
    case Role::answer: return "answer";
  }
  return "question";
}

inline Role parse_role(const std::string& s) {
  if (s == "question") return Role::question;
  if (s == "sign") return Role::sign;
  if (s == "answer") return Role::answer;
  throw PreconditionError("unknown role: " + s);
}

struct TaskExample {
  Sequence tokens;
  std::vector<Role> roles;
  int target = 0;
  json meta = json::object();
};

struct Dataset {
  std::string task;
  Vocabulary vocab;
  int n_classes = 0;
  json params = json::object();
  std::vector<TaskExample> examples;

  std::size_t size() const { return examples.size(); }
  int seq_len() const { return examples.empty() ? 0 : static_cast<int>(examples.front().tokens.size()); }
};

inline std::vector<Role> roles_of(const Sequence& tokens, const Vocabulary& v) {
  std::vector<Role> roles;
  roles.reserve(tokens.size());
  for (int t : tokens) {
    roles.push_back(t == v.sign() ? Role::sign : (v.is_answer(t) ? Role::answer : Role::question));
  }
  return roles;
}

/// Number of injections from k items into n items, n!/(n-k)!. Throws on uint64 overflow.
inline std::uint64_t falling_factorial(int n, int k) {
  require(n >= 0 && k >= 0, "falling_factorial: negative argument");
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 0; i < k; ++i) {
    const auto f = static_cast<std::uint64_t>(n - i);
    require(r <= std::numeric_limits<std::uint64_t>::max() / f, "falling_factorial: overflow");
    r *= f;
  }
  return r;
}

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  require(b == 0 || a <= std::numeric_limits<std::uint64_t>::max() / b, "count overflow");
  return a * b;
}

/// The idx-th injective k-tuple over [0, n) in lexicographic order.
inline std::vector<int> nth_injection(int n, int k, std::uint64_t idx) {
  require(idx < falling_factorial(n, k), "nth_injection: index out of range");
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) {
    const std::uint64_t block = falling_factorial(n - t - 1, k - t - 1);
    const auto pick = static_cast<std::size_t>(idx / block);
    idx %= block;
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

/// All injective k-tuples over [0, n) in lexicographic order.
inline std::vector<std::vector<int>> injections(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  auto rec = [&](auto&& self) -> void {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      used[static_cast<std::size_t>(i)] = true;
      cur.push_back(i);
      self(self);
      cur.pop_back();
      used[static_cast<std::size_t>(i)] = false;
    }
  };
  if (k <= n) rec(rec);
  return out;
}

// ---------------------------------------------------------------------------
// Templates

/// Wildcard string in restricted-growth form: first occurrences are numbered 0, 1, 2, ...
struct Template {
  std::vector<int> symbols;

  int length() const { return static_cast<int>(symbols.size()); }
  int n_wildcards() const {
    return symbols.empty() ? 0 : *std::max_element(symbols.begin(), symbols.end()) + 1;
  }
  bool is_canonical() const {
    if (symbols.empty() || symbols[0] != 0) return false;
    int mx = 0;
    for (int s : symbols) {
      if (s < 0 || s > mx + 1) return false;
      mx = std::max(mx, s);
    }
    return true;
  }
  /// Greek-letter rendering, e.g. "αβα".
  std::string str() const {
    static const char* greek[] = {"α", "β", "γ", "δ", "ε", "ζ", "η", "θ", "ι", "κ", "λ", "μ"};
    std::string s;
    for (int w : symbols) s += w < 12 ? greek[w] : "w" + std::to_string(w);
    return s;
  }
  auto operator<=>(const Template&) const = default;
};

/// Restricted-growth strings of length l, lexicographic. Count is Bell(l).
inline std::vector<Template> enumerate_templates(int l) {
  require(l >= 1, "enumerate_templates: l must be >= 1");
  std::vector<Template> out;
  std::vector<int> cur{0};
  auto rec = [&](auto&& self, int mx) -> void {
    if (static_cast<int>(cur.size()) == l) {
      out.push_back({cur});
      return;
    }
    for (int v = 0; v <= mx + 1; ++v) {
      cur.push_back(v);
      self(self, std::max(mx, v));
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

inline Template canonical_template_of(const Sequence& seq) {
  Template t;
  std::vector<int> seen;
  t.symbols.reserve(seq.size());
  for (int tok : seq) {
    auto it = std::find(seen.begin(), seen.end(), tok);
    if (it == seen.end()) {
      t.symbols.push_back(static_cast<int>(seen.size()));
      seen.push_back(tok);
    } else {
      t.symbols.push_back(static_cast<int>(it - seen.begin()));
    }
  }
  return t;
}

/// Injective wildcard -> token assignment.
struct SubstitutionMap {
  std::vector<int> assignment;

  bool is_injective() const {
    std::set<int> s(assignment.begin(), assignment.end());
    return s.size() == assignment.size();
  }
};

inline Sequence substitute(const Template& t, const SubstitutionMap& s) {
  require(static_cast<int>(s.assignment.size()) >= t.n_wildcards(),
          "substitute: map is not defined on every wildcard");
  require(s.is_injective(), "substitute: map is not injective");
  Sequence out;
  out.reserve(t.symbols.size());
  for (int w : t.symbols) out.push_back(s.assignment[static_cast<std::size_t>(w)]);
  return out;
}

inline std::uint64_t template_count(const Template& t, int alphabet_size) {
  return falling_factorial(alphabet_size, t.n_wildcards());
}

/// idx-th sequence of a template, maps in lexicographic order.
inline Sequence nth_sequence_of_template(const Template& t, int alphabet_size, std::uint64_t idx) {
  return substitute(t, {nth_injection(alphabet_size, t.n_wildcards(), idx)});
}

/// Every sequence generated by t over an alphabet of the given size.
inline std::vector<Sequence> sequences_of_template(const Template& t, int alphabet_size) {
  require(alphabet_size >= t.n_wildcards(), "sequences_of_template: alphabet too small");
  std::vector<Sequence> out;
  for (auto& m : injections(alphabet_size, t.n_wildcards())) out.push_back(substitute(t, {m}));
  return out;
}

// ---------------------------------------------------------------------------
// Generators

/// N distinct sequences over the question alphabet, each followed by the sign token,
/// labelled by a seeded permutation of 0..N-1.
inline Dataset gen_sc(int n_examples, int seq_len, const Vocabulary& vocab, std::uint64_t seed) {
  require(n_examples >= 1 && seq_len >= 1, "gen_sc: counts must be >= 1");
  require(vocab.n_question >= 1, "gen_sc: empty alphabet");
  double space = 1.0;
  for (int i = 0; i < seq_len; ++i) space *= vocab.n_question;
  require(space >= n_examples, "gen_sc: not enough distinct sequences");
  Rng rng(seed);
  std::set<Sequence> seen;
  std::vector<Sequence> seqs;
  if (space <= 4.0 * n_examples) {
    const auto total = static_cast<int>(space);
    for (int idx : rng.sample_distinct(total, n_examples)) {
      Sequence s(static_cast<std::size_t>(seq_len));
      int r = idx;
      for (int p = seq_len - 1; p >= 0; --p) {
        s[static_cast<std::size_t>(p)] = r % vocab.n_question;
        r /= vocab.n_question;
      }
      seqs.push_back(std::move(s));
    }
  } else {
    while (static_cast<int>(seqs.size()) < n_examples) {
      Sequence s(static_cast<std::size_t>(seq_len));
      for (auto& x : s) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab.n_question)));
      if (seen.insert(s).second) seqs.push_back(std::move(s));
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n_examples));
  for (int i = 0; i < n_examples; ++i) labels[static_cast<std::size_t>(i)] = i;
  rng.shuffle(labels);

  Dataset ds;
  ds.task = "sc";
  ds.vocab = vocab;
  ds.n_classes = n_examples;
  ds.params = {{"n_examples", n_examples}, {"seq_len", seq_len}, {"seed", seed}};
  for (int i = 0; i < n_examples; ++i) {
    TaskExample ex;
    ex.tokens = seqs[static_cast<std::size_t>(i)];
    ex.tokens.push_back(vocab.sign());
    ex.roles = roles_of(ex.tokens, vocab);
    ex.target = labels[static_cast<std::size_t>(i)];
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

inline TaskExample icqa_example(const Vocabulary& v, const std::vector<int>& pi,
                                const std::vector<int>& pi_prime, int c) {
  TaskExample ex;
  for (std::size_t t = 0; t < pi.size(); ++t) {
    ex.tokens.push_back(v.question(pi[t]));
    ex.tokens.push_back(v.sign());
    ex.tokens.push_back(v.answer(pi_prime[t]));
  }
  ex.tokens.push_back(v.question(pi[static_cast<std::size_t>(c)]));
  ex.tokens.push_back(v.sign());
  ex.roles = roles_of(ex.tokens, v);
  ex.target = pi_prime[static_cast<std::size_t>(c)];
  ex.meta = {{"pi", pi}, {"pi_prime", pi_prime}, {"c", c}};
  return ex;
}

/// Every in-context QA example: k question-sign-answer triples, then a context question and the sign.
inline Dataset gen_icqa(int n_q, int n_a, int k) {
  require(k >= 1, "gen_icqa: k must be >= 1");
  require(k <= n_q && k <= n_a, "gen_icqa: k exceeds min(n_q, n_a)");
  const std::uint64_t size =
      checked_mul(checked_mul(falling_factorial(n_q, k), falling_factorial(n_a, k)), static_cast<std::uint64_t>(k));
  require(size <= 10'000'000, "gen_icqa: dataset too large to enumerate");
  Dataset ds;
  ds.task = "icqa";
  ds.vocab = {n_q, n_a};
  ds.n_classes = n_a;
  ds.params = {{"n_q", n_q}, {"n_a", n_a}, {"k", k}};
  const auto qs = injections(n_q, k);
  const auto as = injections(n_a, k);
  ds.examples.reserve(static_cast<std::size_t>(size));
  for (const auto& pi : qs)
    for (const auto& pp : as)
      for (int c = 0; c < k; ++c) ds.examples.push_back(icqa_example(ds.vocab, pi, pp, c));
  return ds;
}

/// The four-example toy instance over questions {a, b} and answers {x, y}.
inline Dataset toy_icqa() {
  Dataset ds;
  ds.task = "toy-icqa";
  ds.vocab = {2, 2};
  ds.n_classes = 2;
  ds.params = json::object();
  const int a = 0, b = 1;
  const int x = 0, y = 1;
  ds.examples.push_back(icqa_example(ds.vocab, {a, b}, {x, y}, 0));
  ds.examples.push_back(icqa_example(ds.vocab, {a, b}, {y, x}, 1));
  ds.examples.push_back(icqa_example(ds.vocab, {a, b}, {y, x}, 0));
  ds.examples.push_back(icqa_example(ds.vocab, {a, b}, {x, y}, 1));
  return ds;
}

/// Every sequence of length l over the alphabet with its template index as label.
inline Dataset gen_tm(int l, int alphabet_size) {
  require(l >= 1, "gen_tm: l must be >= 1");
  require(alphabet_size >= l, "gen_tm: alphabet smaller than l");
  const auto templates = enumerate_templates(l);
  Dataset ds;
  ds.task = "tm";
  ds.vocab = {alphabet_size, 0};
  ds.n_classes = static_cast<int>(templates.size());
  ds.params = {{"l", l}, {"alphabet", alphabet_size}};
  for (std::size_t ti = 0; ti < templates.size(); ++ti) {
    for (auto& s : sequences_of_template(templates[ti], alphabet_size)) {
      TaskExample ex;
      ex.tokens = s;
      ex.tokens.push_back(ds.vocab.sign());
      ex.roles = roles_of(ex.tokens, ds.vocab);
      ex.target = static_cast<int>(ti);
      ex.meta = {{"template", static_cast<int>(ti)}};
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

/// Template-matching examples for a fixed list of full substitution maps (l wildcards each):
/// every template of length l under every map, so label classes are balanced.
inline Dataset gen_tm_maps(int l, int alphabet_size, const std::vector<SubstitutionMap>& maps) {
  const auto templates = enumerate_templates(l);
  Dataset ds;
  ds.task = "tm";
  ds.vocab = {alphabet_size, 0};
  ds.n_classes = static_cast<int>(templates.size());
  ds.params = {{"l", l}, {"alphabet", alphabet_size}, {"maps", static_cast<int>(maps.size())}};
  for (std::size_t mi = 0; mi < maps.size(); ++mi) {
    require(static_cast<int>(maps[mi].assignment.size()) == l, "gen_tm_maps: map must cover l wildcards");
    for (std::size_t ti = 0; ti < templates.size(); ++ti) {
      TaskExample ex;
      ex.tokens = substitute(templates[ti], maps[mi]);
      ex.tokens.push_back(ds.vocab.sign());
      for (int t : ex.tokens) require(t < alphabet_size || t == ds.vocab.sign(), "gen_tm_maps: token out of range");
      ex.roles = roles_of(ex.tokens, ds.vocab);
      ex.target = static_cast<int>(ti);
      ex.meta = {{"template", static_cast<int>(ti)}, {"map", static_cast<int>(mi)}};
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

/// Distinct injective maps of l wildcards into the alphabet, seeded.
inline std::vector<SubstitutionMap> sample_maps(int l, int alphabet_size, int count, std::uint64_t seed) {
  const std::uint64_t total = falling_factorial(alphabet_size, l);
  require(static_cast<std::uint64_t>(count) <= total, "sample_maps: not enough distinct maps");
  Rng rng(seed);
  std::unordered_set<std::uint64_t> seen;
  std::vector<SubstitutionMap> out;
  while (static_cast<int>(out.size()) < count) {
    const std::uint64_t idx = rng.below(total);
    if (seen.insert(idx).second) out.push_back({nth_injection(alphabet_size, l, idx)});
  }
  return out;
}

/// Parameters of the in-context template-matching task.
struct IctmSpec {
  int l = 2;
  int alphabet_size = 4;
  int n_templates = 2;
  int n_a = 3;
  int k = 2;

  int seq_len() const { return k * (l + 2) + l + 1; }
};

/// Index space of all in-context template-matching examples.
///
/// An index decodes to (answer tuple, template tuple, c, one sequence per context block, query sequence).
class IctmSpace {
 public:
  explicit IctmSpace(const IctmSpec& spec) : spec_(spec) {
    require(spec.l >= 1 && spec.k >= 1, "gen_ictm: l and k must be >= 1");
    templates_ = enumerate_templates(spec.l);
    require(spec.n_templates >= 1 && spec.n_templates <= static_cast<int>(templates_.size()),
            "gen_ictm: n_templates must be in [1, Bell(l)]");
    templates_.resize(static_cast<std::size_t>(spec.n_templates));
    require(spec.k <= spec.n_templates && spec.k <= spec.n_a, "gen_ictm: k exceeds min(n_templates, n_a)");
    require(spec.alphabet_size >= spec.l, "gen_ictm: alphabet smaller than l");
    counts_.reserve(templates_.size());
    for (const auto& t : templates_) counts_.push_back(template_count(t, spec.alphabet_size));
    n_answers_ = falling_factorial(spec.n_a, spec.k);
    for (auto& pi : injections(spec.n_templates, spec.k)) {
      for (int c = 0; c < spec.k; ++c) {
        std::uint64_t w = counts_[static_cast<std::size_t>(pi[static_cast<std::size_t>(c)])];
        for (int t : pi) w = checked_mul(w, counts_[static_cast<std::size_t>(t)]);
        cells_.push_back({pi, c, w, inner_total_});
        inner_total_ += w;
        require(inner_total_ >= w, "gen_ictm: count overflow");
      }
    }
    total_ = checked_mul(inner_total_, n_answers_);
  }

  std::uint64_t size() const { return total_; }
  const std::vector<Template>& templates() const { return templates_; }
  Vocabulary vocab() const { return {spec_.alphabet_size, spec_.n_a}; }

  TaskExample decode(std::uint64_t idx) const {
    require(idx < total_, "IctmSpace: index out of range");
    const auto pp = nth_injection(spec_.n_a, spec_.k, idx % n_answers_);
    std::uint64_t r = idx / n_answers_;
    auto it = std::upper_bound(cells_.begin(), cells_.end(), r,
                               [](std::uint64_t v, const Cell& cell) { return v < cell.offset; });
    const Cell& cell = *(it - 1);
    r -= cell.offset;
    const Vocabulary v = vocab();
    TaskExample ex;
    json blocks = json::array();
    for (int t = 0; t < spec_.k; ++t) {
      const int ti = cell.pi[static_cast<std::size_t>(t)];
      const std::uint64_t n = counts_[static_cast<std::size_t>(ti)];
      const std::uint64_t si = r % n;
      r /= n;
      blocks.push_back(si);
      for (int tok : nth_sequence_of_template(templates_[static_cast<std::size_t>(ti)], spec_.alphabet_size, si))
        ex.tokens.push_back(tok);
      ex.tokens.push_back(v.sign());
      ex.tokens.push_back(v.answer(pp[static_cast<std::size_t>(t)]));
    }
    const int qt = cell.pi[static_cast<std::size_t>(cell.c)];
    const std::uint64_t qi = r % counts_[static_cast<std::size_t>(qt)];
    for (int tok : nth_sequence_of_template(templates_[static_cast<std::size_t>(qt)], spec_.alphabet_size, qi))
      ex.tokens.push_back(tok);
    ex.tokens.push_back(v.sign());
    ex.roles = roles_of(ex.tokens, v);
    ex.target = pp[static_cast<std::size_t>(cell.c)];
    ex.meta = {{"pi", cell.pi}, {"pi_prime", pp}, {"c", cell.c}, {"blocks", blocks}, {"query", qi}, {"index", idx}};
    return ex;
  }

 private:
  struct Cell {
    std::vector<int> pi;
    int c;
    std::uint64_t weight;
    std::uint64_t offset;
  };
  IctmSpec spec_;
  std::vector<Template> templates_;
  std::vector<std::uint64_t> counts_;
  std::vector<Cell> cells_;
  std::uint64_t n_answers_ = 0;
  std::uint64_t inner_total_ = 0;
  std::uint64_t total_ = 0;
};

/// In-context template matching over the first n_templates canonical templates.
/// The full space is enumerated when it has at most `cap` examples; otherwise `cap` distinct
/// examples are drawn uniformly from it with the given seed.
inline Dataset gen_ictm(const IctmSpec& spec, std::uint64_t cap = 100'000, std::uint64_t seed = 0) {
  IctmSpace space(spec);
  Dataset ds;
  ds.task = "ictm";
  ds.vocab = space.vocab();
  ds.n_classes = spec.n_a;
  const bool sampled = space.size() > cap;
  ds.params = {{"l", spec.l},
               {"alphabet", spec.alphabet_size},
               {"n_templates", spec.n_templates},
               {"n_a", spec.n_a},
               {"k", spec.k},
               {"space_size", space.size()},
               {"sampled", sampled},
               {"sample_size", sampled ? cap : space.size()},
               {"seed", seed}};
  if (!sampled) {
    ds.examples.reserve(static_cast<std::size_t>(space.size()));
    for (std::uint64_t i = 0; i < space.size(); ++i) ds.examples.push_back(space.decode(i));
    return ds;
  }
  Rng rng(seed);
  std::unordered_set<std::uint64_t> seen;
  ds.examples.reserve(static_cast<std::size_t>(cap));
  while (ds.examples.size() < cap) {
    const std::uint64_t idx = rng.below(space.size());
    if (seen.insert(idx).second) ds.examples.push_back(space.decode(idx));
  }
  return ds;
}

/// Seeded split into (train, eval) with the first `n_train` of a shuffled order going to train.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_train, std::uint64_t seed) {
  require(n_train <= ds.size(), "split_dataset: n_train exceeds dataset size");
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  Dataset a = ds, b = ds;
  a.examples.clear();
  b.examples.clear();
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? a : b).examples.push_back(ds.examples[order[i]]);
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// JSON Lines IO

inline json header_json(const Dataset& ds) {
  return {{"header", true},
          {"task", ds.task},
          {"vocabulary", {{"n_question", ds.vocab.n_question}, {"n_answer", ds.vocab.n_answer},
                          {"d_token", ds.vocab.d_token()}, {"sign", ds.vocab.sign()}}},
          {"n_classes", ds.n_classes},
          {"size", ds.size()},
          {"params", ds.params}};
}

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  os << header_json(ds).dump() << '\n';
  for (const auto& ex : ds.examples) {
    json roles = json::array();
    for (Role r : ex.roles) roles.push_back(to_string(r));
    os << json{{"tokens", ex.tokens}, {"roles", roles}, {"target", ex.target}, {"meta", ex.meta}}.dump() << '\n';
  }
}

inline Dataset read_dataset(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "read_dataset: missing header line");
  const json h = json::parse(line);
  require(h.value("header", false), "read_dataset: first line is not a header");
  Dataset ds;
  ds.task = h.at("task").get<std::string>();
  ds.vocab = {h.at("vocabulary").at("n_question").get<int>(), h.at("vocabulary").at("n_answer").get<int>()};
  ds.n_classes = h.at("n_classes").get<int>();
  ds.params = h.at("params");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    TaskExample ex;
    ex.tokens = j.at("tokens").get<Sequence>();
    for (const auto& r : j.at("roles")) ex.roles.push_back(parse_role(r.get<std::string>()));
    ex.target = j.at("target").get<int>();
    ex.meta = j.value("meta", json::object());
    require(ex.roles.size() == ex.tokens.size(), "read_dataset: roles and tokens differ in length");
    for (int t : ex.tokens) require(t >= 0 && t < ds.vocab.d_token(), "read_dataset: token out of range");
    require(ex.target >= 0 && ex.target < ds.n_classes, "read_dataset: target out of range");
    ds.examples.push_back(std::move(ex));
  }
  require(ds.size() == h.at("size").get<std::size_t>(), "read_dataset: size mismatch with header");
  return ds;
}

}  // namespace attnlab

#endif  // ATTNLAB_TASKS_HPP
