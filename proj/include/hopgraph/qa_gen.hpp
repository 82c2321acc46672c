#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/chain.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/llm.hpp"
#include "hopgraph/rng.hpp"

namespace hopgraph {

struct QARecord {
  std::string question;
  std::string answer;
  std::vector<std::string> cot_sentences;
  ChainSubgraph chain;
  Domain domain = Domain::NI;
  int hop_count = 0;
  std::map<std::string, std::string> filter_verdicts;  // stage -> pass/fail/na
  std::vector<std::string> exchange_ids;
};

Json to_json(const QARecord& r);
QARecord qa_from_json(const Json& j);

// Problems with a record: chain invariants, answer/hop agreement, question
// mentions of intermediate entities. Empty when valid.
std::vector<std::string> validate_qa_record(const QARecord& r, HopBounds bounds);

// Sets chain.answer_value and returns the answer: a uniformly chosen
// attribute of the terminal for attribute answers, the terminal name
// otherwise. Throws UserError for an attribute answer on a terminal without
// attributes.
std::string select_answer(ChainSubgraph& chain, Rng& rng);

// Entities strictly inside the chain; the question must not name them.
std::vector<const EntityNode*> intermediate_nodes(const ChainSubgraph& chain);

// Surface forms checked for an intermediate: its name, display name, and the
// parenthetical proper name of typed entities. Bare type words are allowed.
std::vector<std::string> banned_mentions(const EntityNode& node);

// True when the question names any intermediate entity (case-insensitive,
// word boundaries).
bool mentions_intermediate(std::string_view question, const ChainSubgraph& chain);

// Triple list handed to the question prompt, oriented along the path. An
// edge walked against its direction keeps its endpoints in path order and
// spells the stored fact out as the relation ("<subject> <relation>
// <object>"). Attribute answers add a final (terminal, "is", value) triple.
Json chain_triples(const ContentGraph& g, const ChainSubgraph& chain);

// Same facts in the CoT prompt's subgraph format, with an "image" field for
// facts grounded in an image or figure.
Json chain_cot_subgraph(const ContentGraph& g, const ChainSubgraph& chain);

struct QaOptions {
  std::string model_id = "stub";
  double temperature = kGenerationTemperature;
  int max_qa_per_sample = 3;
  int max_chain_draws = 12;
  // Weight of h = 1..5 (index h-1); hops outside the domain bounds are dropped.
  std::vector<double> hop_weights = {109735, 12271, 12592, 19183, 0};
  ChainSamplingOptions sampling;
};

struct QuestionResult {
  std::optional<std::string> question;
  std::string rejection;  // reason of the last failed attempt
  std::vector<std::string> exchange_ids;
};

// Prompts for a question, validating (a) no intermediate mention and (b) the
// returned answer equals `answer` after normalization. One regeneration.
QuestionResult generate_question(const ContentGraph& g, const ChainSubgraph& chain, const std::string& answer,
                                 Gateway& gateway, const QaOptions& options, std::string_view key);

// Problems with a CoT: last sentence lacks the answer, banned meta-phrases,
// missing source attributions for the modalities the chain touches.
std::vector<std::string> cot_problems(const std::vector<std::string>& sentences, const ChainSubgraph& chain,
                                      const std::string& answer);
const std::vector<std::string>& banned_cot_phrases();

struct CotResult {
  std::optional<std::vector<std::string>> sentences;
  std::string rejection;
  std::vector<std::string> exchange_ids;
};

CotResult generate_cot(const ContentGraph& g, const ChainSubgraph& chain, const std::string& question,
                       const std::string& answer, Gateway& gateway, const QaOptions& options, std::string_view key);

// Draws hop counts and chains, then question and CoT, until
// `max_qa_per_sample` records are accepted or the draw budget is spent.
// Each chain is used at most once.
std::vector<QARecord> generate_qa_for_sample(const ContentGraph& g, Gateway& gateway, Rng& rng,
                                             const QaOptions& options, std::string_view key);

}  // namespace hopgraph
