#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/graph.hpp"
#include "hopgraph/llm.hpp"
#include "hopgraph/qa_gen.hpp"

namespace hopgraph {

enum class Modality { TextOnly, VisualOnly };
std::string_view to_string(Modality m);

// One modality's share of a graph, serialized for a text-only judge.
// TextOnly: textual nodes and text-text edges. VisualOnly: visual nodes with
// their attributes and edges between visual nodes of the same image.
// Text-visual edges and cross-image visual relations are in neither view.
struct ModalityView {
  Modality modality = Modality::TextOnly;
  std::vector<std::string> nodes;
  std::vector<std::string> edges;
  std::vector<std::size_t> edge_indices;
};

ModalityView build_modality_view(const ContentGraph& g, Modality modality);
std::string serialize_view(const ModalityView& view);

enum class Verdict { Pass, Fail, Undetermined };
std::string_view to_string(Verdict v);

// Removal rule for one question: fail iff for some modality every judge
// answered correctly. `correct[m][j]` is judge j's outcome on modality m.
Verdict unanimity_verdict(const std::vector<std::vector<bool>>& correct);

Verdict check_intermediate_mentions(const QARecord& record);

struct JudgeReport {
  Verdict verdict = Verdict::Pass;
  // modality -> one answer per judge ("" when the call failed)
  std::map<std::string, std::vector<std::string>> answers;
  std::string detail;
};

// Asks every judge the question on each modality view at temperature 0.
// Provider failure on any call (after the gateway's retries) makes the
// outcome Undetermined.
JudgeReport single_modality_test(const QARecord& record, const ContentGraph& g, Gateway& gateway,
                                 const std::vector<std::string>& judges, std::string_view key);

inline constexpr std::size_t kMaxCotSentences = 10;
Verdict prune_cot(const QARecord& record);

struct FilterItem {
  std::string record_id;
  QARecord record;
  const ContentGraph* graph = nullptr;
};

struct FilterLedger {
  long input = 0;
  long failed_mentions = 0;
  long failed_modality = 0;
  long undetermined = 0;
  long failed_cot = 0;
  long survivors = 0;
  std::vector<Json> entries;  // one per decided stage per record
};

Json to_json(const FilterLedger& l);

struct FilterOutcome {
  std::vector<FilterItem> survivors;
  FilterLedger ledger;
};

// Mentions, then modality judging, then CoT length; a record leaves at its
// first failing stage, so later stages never see it. Survivors carry
// "pass" verdicts for all three stages.
FilterOutcome run_filters(std::vector<FilterItem> items, Gateway& gateway, const std::vector<std::string>& judges);

inline const std::vector<std::string>& default_judges() {
  static const std::vector<std::string> judges = {"Qwen3-30B-A3B-Instruct-2507", "gemma-3-27b-it",
                                                  "Mistral-Small-3.2-24B-Instruct-2506"};
  return judges;
}

}  // namespace hopgraph
