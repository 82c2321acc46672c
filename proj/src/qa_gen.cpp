#include "hopgraph/qa_gen.hpp"

#include <set>

#include "hopgraph/augment.hpp"
#include "hopgraph/evalkit.hpp"
#include "hopgraph/text.hpp"

namespace hopgraph {

Json to_json(const QARecord& r) {
  Json j;
  j["question"] = r.question;
  j["answer"] = r.answer;
  j["cot_sentences"] = r.cot_sentences;
  j["chain"] = to_json(r.chain);
  j["domain"] = std::string(to_string(r.domain));
  j["hop_count"] = r.hop_count;
  j["filter_verdicts"] = Json::object();
  for (const auto& [k, v] : r.filter_verdicts) j["filter_verdicts"][k] = v;
  j["exchange_ids"] = r.exchange_ids;
  return j;
}

QARecord qa_from_json(const Json& j) {
  QARecord r;
  r.question = j.at("question").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.cot_sentences = j.at("cot_sentences").get<std::vector<std::string>>();
  r.chain = chain_from_json(j.at("chain"));
  r.domain = domain_from_string(j.at("domain").get<std::string>());
  r.hop_count = j.at("hop_count").get<int>();
  const Json verdicts = j.value("filter_verdicts", Json::object());
  for (const auto& [k, v] : verdicts.items()) r.filter_verdicts[k] = v.get<std::string>();
  r.exchange_ids = j.value("exchange_ids", std::vector<std::string>{});
  return r;
}

std::vector<const EntityNode*> intermediate_nodes(const ChainSubgraph& chain) { return chain.interior_nodes(); }

std::vector<std::string> banned_mentions(const EntityNode& node) {
  std::vector<std::string> out{node.name};
  auto add = [&](const std::string& s) {
    if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  };
  add(node.display_name);
  if (is_typed_entity(node.display_name)) add(parenthetical_name(node.display_name));
  return out;
}

bool mentions_intermediate(std::string_view question, const ChainSubgraph& chain) {
  for (const EntityNode* n : intermediate_nodes(chain))
    for (const auto& form : banned_mentions(*n))
      if (contains_phrase(question, form)) return true;
  return false;
}

std::vector<std::string> validate_qa_record(const QARecord& r, HopBounds bounds) {
  auto problems = validate_chain(r.chain, bounds);
  if (r.answer.empty()) problems.push_back("empty answer");
  if (r.question.empty()) problems.push_back("empty question");
  if (r.hop_count != r.chain.hop_count) problems.push_back("hop_count differs from the chain");
  if (r.domain != r.chain.domain) problems.push_back("domain differs from the chain");
  if (!r.chain.nodes.empty()) {
    const std::string expected =
        r.chain.answer_kind == AnswerKind::Attribute ? r.chain.answer_value : r.chain.terminal().name;
    if (r.answer != expected) problems.push_back("answer does not match the chain terminal");
  }
  if (mentions_intermediate(r.question, r.chain)) problems.push_back("question names an intermediate entity");
  return problems;
}

std::string select_answer(ChainSubgraph& chain, Rng& rng) {
  const auto& terminal = chain.terminal();
  if (chain.answer_kind == AnswerKind::Attribute || chain.hop_count == 1) {
    if (terminal.attributes.empty())
      throw UserError("chain terminal " + terminal.id + " has no attribute to answer with");
    chain.answer_kind = AnswerKind::Attribute;
    chain.answer_value = terminal.attributes[rng.uniform_index(terminal.attributes.size())];
    return chain.answer_value;
  }
  chain.answer_value.clear();
  return terminal.name;
}

namespace {

std::string label_of(const ContentGraph& g, const EntityNode& n) {
  if (!n.is_visual()) return n.display_name;
  return n.name + " (" + image_reference(g, *n.image_index) + ")";
}

std::string mention_of(const EntityNode& n) {
  if (!n.is_visual() && is_typed_entity(n.display_name)) return parenthetical_name(n.display_name);
  return n.name;
}

bool walked_forward(const ChainSubgraph& chain, std::size_t i) {
  return chain.edges[i].subject_id == chain.node_path[i];
}

// Where a fact along the chain can be read from.
std::string fact_source(const ContentGraph& g, const EntityNode& a, const EntityNode& b) {
  if (a.is_visual() && b.is_visual()) return image_reference(g, *a.image_index);
  return "text context";
}

std::string source_phrase(const std::string& source) {
  if (source == "text context") return "From the text context";
  if (source == "Image") return "From the image";
  return "From " + to_lower(source);
}

}  // namespace

Json chain_triples(const ContentGraph& g, const ChainSubgraph& chain) {
  Json out = Json::array();
  for (std::size_t i = 0; i < chain.edges.size(); ++i) {
    const auto& a = chain.nodes[i];
    const auto& b = chain.nodes[i + 1];
    const auto& e = chain.edges[i];
    std::string relation = e.relation;
    if (!walked_forward(chain, i)) relation = label_of(g, b) + " " + e.relation + " " + label_of(g, a);
    out.push_back(Json{{"subject", label_of(g, a)}, {"relation", relation}, {"object", label_of(g, b)}});
  }
  if (chain.answer_kind == AnswerKind::Attribute)
    out.push_back(Json{{"subject", label_of(g, chain.terminal())}, {"relation", "is"}, {"object", chain.answer_value}});
  return out;
}

Json chain_cot_subgraph(const ContentGraph& g, const ChainSubgraph& chain) {
  Json out = Json::array();
  for (std::size_t i = 0; i < chain.edges.size(); ++i) {
    const auto& e = chain.edges[i];
    const EntityNode* s = g.find(e.subject_id);
    const EntityNode* o = g.find(*e.object_id);
    if (!s || !o) throw UserError("chain edge endpoints missing from graph");
    Json fact{{"subject", label_of(g, *s)}, {"object", label_of(g, *o)}, {"relation", e.relation}};
    const std::string src = fact_source(g, *s, *o);
    if (src != "text context") fact["image"] = to_lower(src);
    out.push_back(std::move(fact));
  }
  if (chain.answer_kind == AnswerKind::Attribute) {
    const auto& t = chain.terminal();
    out.push_back(Json{{"subject", label_of(g, t)},
                       {"object", chain.answer_value},
                       {"relation", "is"},
                       {"image", to_lower(image_reference(g, *t.image_index))}});
  }
  return out;
}

QuestionResult generate_question(const ContentGraph& g, const ChainSubgraph& chain, const std::string& answer,
                                 Gateway& gateway, const QaOptions& options, std::string_view key) {
  const Json triples = chain_triples(g, chain);
  std::vector<std::string> lines;
  for (const auto& t : triples) lines.push_back(t.dump());

  std::vector<std::string> hidden;
  for (const EntityNode* n : intermediate_nodes(chain)) hidden.push_back(label_of(g, *n));
  if (chain.answer_kind == AnswerKind::Attribute) hidden.push_back(label_of(g, chain.terminal()));

  const auto& head = chain.nodes.front();
  const auto& terminal = chain.terminal();
  Json hints{{"answer", answer},
             {"answer_kind", std::string(to_string(chain.answer_kind))},
             {"head", mention_of(head)},
             {"terminal_ref", image_reference(g, *terminal.image_index)},
             {"hop_count", chain.hop_count}};
  const Bindings bindings{{"triples", join(lines, ",\n  ")},
                          {"last_object", answer},
                          {"intermediate_objects", hidden.empty() ? "none" : join(hidden, ", ")}};

  QuestionResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto x = gateway.run("qa_generation", bindings, options.model_id, {options.temperature, 512}, hints,
                         std::string(key) + "/question/" + std::to_string(attempt));
    result.exchange_ids.push_back(x.exchange_id);
    if (!x.ok()) {
      result.rejection = "unparseable: " + x.parse_failure;
      continue;
    }
    const std::string question = trim((*x.parsed_payload)["question"].get<std::string>());
    const std::string returned = (*x.parsed_payload)["answer"].get<std::string>();
    if (mentions_intermediate(question, chain)) {
      result.rejection = "question names an intermediate entity";
      continue;
    }
    if (normalize_answer(returned) != normalize_answer(answer)) {
      result.rejection = "returned answer '" + returned + "' differs from '" + answer + "'";
      continue;
    }
    result.question = question;
    result.rejection.clear();
    break;
  }
  return result;
}

const std::vector<std::string>& banned_cot_phrases() {
  static const std::vector<std::string> phrases = {"from the subgraph", "the relation shows", "the entity indicates"};
  return phrases;
}

std::vector<std::string> cot_problems(const std::vector<std::string>& sentences, const ChainSubgraph& chain,
                                      const std::string& answer) {
  std::vector<std::string> problems;
  if (sentences.empty()) return {"empty reasoning"};
  if (!contains_phrase(normalize_answer(sentences.back()), normalize_answer(answer)))
    problems.push_back("last sentence does not state the answer");
  const std::string all = to_lower(join(sentences, " "));
  for (const auto& p : banned_cot_phrases())
    if (all.find(p) != std::string::npos) problems.push_back("uses the phrase \"" + p + "\"");

  bool has_visual = false, has_textual = false;
  for (const auto& n : chain.nodes) (n.is_visual() ? has_visual : has_textual) = true;
  if (has_textual && all.find("from the text context") == std::string::npos)
    problems.push_back("no \"from the text context\" attribution");
  if (has_visual) {
    const bool figure_domain = chain.domain == Domain::SP;
    const bool cited = figure_domain ? (all.find("from figure") != std::string::npos ||
                                        all.find("from table") != std::string::npos)
                                     : (all.find("from image") != std::string::npos ||
                                        all.find("from the image") != std::string::npos);
    if (!cited) problems.push_back(figure_domain ? "no figure/table attribution" : "no image attribution");
  }
  return problems;
}

CotResult generate_cot(const ContentGraph& g, const ChainSubgraph& chain, const std::string& question,
                       const std::string& answer, Gateway& gateway, const QaOptions& options, std::string_view key) {
  Json steps = Json::array();
  for (std::size_t i = 0; i < chain.edges.size(); ++i) {
    const auto& e = chain.edges[i];
    const EntityNode* s = g.find(e.subject_id);
    const EntityNode* o = g.find(*e.object_id);
    steps.push_back(Json{{"source", source_phrase(fact_source(g, *s, *o))},
                         {"fact", mention_of(*s) + " " + e.relation + " " + mention_of(*o)}});
  }
  const auto& t = chain.terminal();
  const std::string terminal_source = source_phrase(image_reference(g, *t.image_index));
  if (chain.answer_kind == AnswerKind::Attribute)
    steps.push_back(Json{{"source", terminal_source}, {"fact", "the " + t.name + " is " + answer}});
  else
    steps.push_back(Json{{"source", terminal_source}, {"fact", "this entity is the " + t.name}});
  const Json hints{{"answer", answer}, {"steps", steps}};
  const Bindings bindings{{"question", question}, {"answer", answer}, {"subgraph", chain_cot_subgraph(g, chain).dump()}};

  CotResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto x = gateway.run("cot_generation", bindings, options.model_id, {options.temperature, 1024}, hints,
                         std::string(key) + "/cot/" + std::to_string(attempt));
    result.exchange_ids.push_back(x.exchange_id);
    if (!x.ok()) {
      result.rejection = x.parse_failure;
      continue;
    }
    auto sentences = split_sentences(x.parsed_payload->get<std::string>());
    auto problems = cot_problems(sentences, chain, answer);
    if (!problems.empty()) {
      result.rejection = join(problems, "; ");
      continue;
    }
    result.sentences = std::move(sentences);
    result.rejection.clear();
    break;
  }
  return result;
}

std::vector<QARecord> generate_qa_for_sample(const ContentGraph& g, Gateway& gateway, Rng& rng,
                                             const QaOptions& options, std::string_view key) {
  const HopBounds bounds = options.sampling.bounds ? *options.sampling.bounds : default_hop_bounds(g.domain);
  std::vector<double> weights(options.hop_weights.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const int h = static_cast<int>(i) + 1;
    if (h >= bounds.min_hops && h <= bounds.max_hops && options.hop_weights[i] > 0) {
      weights[i] = options.hop_weights[i];
      any = true;
    }
  }
  std::vector<QARecord> out;
  if (!any) return out;

  std::set<std::string> used;
  for (int draw = 0; draw < options.max_chain_draws && static_cast<int>(out.size()) < options.max_qa_per_sample;
       ++draw) {
    const int h = static_cast<int>(rng.weighted_index(weights)) + 1;
    auto chain = sample_chain(g, h, rng, options.sampling);
    if (!chain || !used.insert(chain_key(*chain)).second) continue;

    QARecord rec;
    rec.answer = select_answer(*chain, rng);
    const std::string item_key = std::string(key) + "/qa/" + std::to_string(draw);
    auto q = generate_question(g, *chain, rec.answer, gateway, options, item_key);
    rec.exchange_ids = q.exchange_ids;
    if (!q.question) continue;
    auto cot = generate_cot(g, *chain, *q.question, rec.answer, gateway, options, item_key);
    rec.exchange_ids.insert(rec.exchange_ids.end(), cot.exchange_ids.begin(), cot.exchange_ids.end());
    if (!cot.sentences) continue;
    rec.question = *q.question;
    rec.cot_sentences = std::move(*cot.sentences);
    rec.domain = g.domain;
    rec.hop_count = chain->hop_count;
    rec.chain = std::move(*chain);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace hopgraph
