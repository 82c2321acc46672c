#include "hopgraph/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "hopgraph/text.hpp"

namespace hopgraph {

namespace {

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

bool is_word(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

std::vector<std::string> answer_tokens(std::string_view s) { return split_whitespace(normalize_answer(s)); }

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string lowered = to_lower(text);
  std::string no_punct;
  for (unsigned char c : lowered)
    if (!is_ascii_punct(c)) no_punct.push_back(static_cast<char>(c));

  std::string no_articles;
  std::size_t i = 0;
  while (i < no_punct.size()) {
    if (!is_word(no_punct[i])) {
      no_articles.push_back(no_punct[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < no_punct.size() && is_word(no_punct[j])) ++j;
    const std::string_view word(no_punct.data() + i, j - i);
    if (word == "a" || word == "an" || word == "the") no_articles.push_back(' ');
    else no_articles.append(word);
    i = j;
  }
  return join(split_whitespace(no_articles), " ");
}

int exact_match(std::string_view prediction, std::string_view gold) {
  return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

double token_f1(std::string_view prediction, std::string_view gold) {
  const auto p = answer_tokens(prediction);
  const auto g = answer_tokens(gold);
  if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  int same = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  if (same == 0) return 0.0;
  const double precision = static_cast<double>(same) / static_cast<double>(p.size());
  const double recall = static_cast<double>(same) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::string_view to_string(EvalMode m) { return m == EvalMode::CoT ? "cot" : "direct"; }

EvalMode eval_mode_from_string(std::string_view s) {
  if (s == "direct") return EvalMode::DirectAnswer;
  if (s == "cot") return EvalMode::CoT;
  throw UserError("unknown evaluation mode '" + std::string(s) + "' (expected direct or cot)");
}

const std::vector<std::string>& default_answer_markers() {
  static const std::vector<std::string> markers = {"answer is", "answer:"};
  return markers;
}

std::string extract_final_answer(std::string_view response, EvalMode mode, const std::vector<std::string>& markers) {
  if (mode == EvalMode::DirectAnswer) return trim(response);
  const std::string lower = to_lower(response);
  std::size_t best = std::string::npos;
  std::size_t best_len = 0;
  for (const auto& m : markers) {
    const auto pos = lower.rfind(to_lower(m));
    if (pos != std::string::npos && (best == std::string::npos || pos > best)) {
      best = pos;
      best_len = m.size();
    }
  }
  std::string tail;
  if (best != std::string::npos) {
    tail = std::string(response.substr(best + best_len));
    tail = trim(tail.substr(0, tail.find('\n')));
    if (!tail.empty() && tail.front() == ':') tail = trim(tail.substr(1));
    auto sentences = split_sentences(tail);
    if (!sentences.empty()) tail = sentences.front();
  } else {
    auto sentences = split_sentences(response);
    tail = sentences.empty() ? "" : sentences.back();
    const auto colon = tail.rfind(':');
    if (colon != std::string::npos) tail = trim(tail.substr(colon + 1));
  }
  while (!tail.empty() && (tail.back() == '.' || tail.back() == '!' || tail.back() == '?')) tail.pop_back();
  return trim(tail);
}

namespace {

struct Accumulator {
  long items = 0, missing = 0;
  double em = 0, f1 = 0;
  void add(double e, double f, bool miss) {
    ++items;
    em += e;
    f1 += f;
    if (miss) ++missing;
  }
  Stratum finish() const {
    Stratum s;
    s.items = items;
    s.missing = missing;
    if (items) {
      s.em = em / static_cast<double>(items);
      s.f1 = f1 / static_cast<double>(items);
    }
    return s;
  }
};

}  // namespace

EvalResult evaluate_run(const std::vector<EvalItem>& items, const std::map<std::string, std::string>& predictions,
                        EvalMode mode) {
  // Sorting by id makes the floating-point sums independent of input order.
  std::vector<const EvalItem*> order;
  for (const auto& it : items) order.push_back(&it);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });

  Accumulator overall;
  std::map<std::string, Accumulator> by_domain;
  std::map<int, Accumulator> by_hop;
  std::map<std::string, std::map<int, Accumulator>> by_domain_hop;
  std::set<std::string> known;
  for (const EvalItem* item : order) {
    known.insert(item->id);
    auto p = predictions.find(item->id);
    double em = 0, f1 = 0;
    const bool miss = p == predictions.end();
    if (!miss) {
      const std::string pred = extract_final_answer(p->second, mode);
      em = exact_match(pred, item->gold);
      f1 = token_f1(pred, item->gold);
    }
    const std::string domain(to_string(item->domain));
    overall.add(em, f1, miss);
    by_domain[domain].add(em, f1, miss);
    by_hop[item->hop_count].add(em, f1, miss);
    by_domain_hop[domain][item->hop_count].add(em, f1, miss);
  }

  EvalResult r;
  r.mode = mode;
  r.overall = overall.finish();
  for (const auto& [k, v] : by_domain) r.by_domain[k] = v.finish();
  for (const auto& [k, v] : by_hop) r.by_hop[k] = v.finish();
  for (const auto& [d, hops] : by_domain_hop)
    for (const auto& [h, v] : hops) r.by_domain_hop[d][h] = v.finish();
  for (const auto& [id, _] : predictions)
    if (!known.count(id)) r.unknown_prediction_ids.push_back(id);
  return r;
}

std::map<std::string, std::string> read_predictions(const std::string& jsonl_text) {
  std::map<std::string, std::string> out;
  std::istringstream in(jsonl_text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("response") || !j["id"].is_string() ||
        !j["response"].is_string())
      throw UserError("predictions line " + std::to_string(line_no) + ": expected {\"id\", \"response\"}");
    if (!out.emplace(j["id"].get<std::string>(), j["response"].get<std::string>()).second)
      throw UserError("predictions line " + std::to_string(line_no) + ": duplicate id " + j["id"].get<std::string>());
  }
  return out;
}

namespace {

Json stratum_json(const Stratum& s) {
  return Json{{"items", s.items}, {"missing", s.missing}, {"em", s.em}, {"f1", s.f1}};
}

}  // namespace

Json to_json(const EvalResult& r) {
  Json j;
  j["mode"] = std::string(to_string(r.mode));
  j["overall"] = stratum_json(r.overall);
  j["by_domain"] = Json::object();
  for (const auto& [k, v] : r.by_domain) j["by_domain"][k] = stratum_json(v);
  j["by_hop"] = Json::object();
  for (const auto& [k, v] : r.by_hop) j["by_hop"][std::to_string(k)] = stratum_json(v);
  j["by_domain_hop"] = Json::object();
  for (const auto& [d, hops] : r.by_domain_hop)
    for (const auto& [h, v] : hops) j["by_domain_hop"][d][std::to_string(h)] = stratum_json(v);
  j["unknown_prediction_ids"] = r.unknown_prediction_ids;
  return j;
}

std::string format_eval_table(const EvalResult& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s %8s\n", "stratum", "items", "missing", "EM", "F1");
  out << buf;
  auto row = [&](const std::string& name, const Stratum& s) {
    std::snprintf(buf, sizeof buf, "%-12s %8ld %8ld %8.2f %8.2f\n", name.c_str(), s.items, s.missing, 100 * s.em,
                  100 * s.f1);
    out << buf;
  };
  for (const auto& [k, v] : r.by_domain) row(k, v);
  for (const auto& [k, v] : r.by_hop) row("hops=" + std::to_string(k), v);
  row("overall", r.overall);
  return out.str();
}

}  // namespace hopgraph
