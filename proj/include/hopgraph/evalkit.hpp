#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/common.hpp"
#include "hopgraph/graph.hpp"

namespace hopgraph {

// SQuAD v1.1 normalization: lowercase, drop ASCII punctuation, drop the
// articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

int exact_match(std::string_view prediction, std::string_view gold);

// Token-bag F1 after normalization. Two empty answers score 1, one empty
// answer scores 0.
double token_f1(std::string_view prediction, std::string_view gold);

enum class EvalMode { DirectAnswer, CoT };
std::string_view to_string(EvalMode m);
EvalMode eval_mode_from_string(std::string_view s);

// Markers searched (case-insensitively, last occurrence wins) in CoT mode.
const std::vector<std::string>& default_answer_markers();

// DirectAnswer: the trimmed response. CoT: the text after the last marker up
// to the end of its line or sentence; without a marker, the last sentence (or
// the part after its last colon).
std::string extract_final_answer(std::string_view response, EvalMode mode,
                                 const std::vector<std::string>& markers = default_answer_markers());

struct EvalItem {
  std::string id;
  Domain domain = Domain::NI;
  int hop_count = 0;
  std::string question;
  std::string gold;
};

struct Stratum {
  long items = 0;
  long missing = 0;  // scored 0
  double em = 0.0;   // mean over items
  double f1 = 0.0;
};

struct EvalResult {
  EvalMode mode = EvalMode::DirectAnswer;
  Stratum overall;
  std::map<std::string, Stratum> by_domain;
  std::map<int, Stratum> by_hop;
  std::map<std::string, std::map<int, Stratum>> by_domain_hop;
  std::vector<std::string> unknown_prediction_ids;  // predictions with no test item
};

// `predictions` maps item id to raw model response.
EvalResult evaluate_run(const std::vector<EvalItem>& items, const std::map<std::string, std::string>& predictions,
                        EvalMode mode);

// Reads {"id": ..., "response": ...} lines.
std::map<std::string, std::string> read_predictions(const std::string& jsonl_text);

Json to_json(const EvalResult& r);
std::string format_eval_table(const EvalResult& r);

}  // namespace hopgraph
