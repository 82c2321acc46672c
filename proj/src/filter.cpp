#include "hopgraph/filter.hpp"

#include <algorithm>

#include "hopgraph/evalkit.hpp"
#include "hopgraph/text.hpp"

namespace hopgraph {

std::string_view to_string(Modality m) { return m == Modality::TextOnly ? "text_only" : "visual_only"; }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Undetermined: return "undetermined";
  }
  return "pass";
}

ModalityView build_modality_view(const ContentGraph& g, Modality modality) {
  ModalityView view;
  view.modality = modality;
  const bool want_visual = modality == Modality::VisualOnly;
  for (const auto& n : g.nodes) {
    if (n.is_visual() != want_visual) continue;
    std::string line = prompt_label(g, n);
    if (want_visual && !n.attributes.empty()) line += ": " + join(n.attributes, ", ");
    view.nodes.push_back(line);
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const EntityNode* s = g.find(e.subject_id);
    if (!s || s->is_visual() != want_visual) continue;
    std::string line = "(" + prompt_label(g, *s) + ", " + e.relation;
    if (!e.is_solo()) {
      const EntityNode* o = g.find(*e.object_id);
      if (!o || o->is_visual() != want_visual) continue;
      if (want_visual && s->image_index != o->image_index) continue;
      line += ", " + prompt_label(g, *o);
    }
    view.edges.push_back(line + ")");
    view.edge_indices.push_back(i);
  }
  return view;
}

std::string serialize_view(const ModalityView& view) {
  std::string out = "Entities:\n";
  for (const auto& n : view.nodes) out += "- " + n + "\n";
  out += "Relations:\n";
  for (const auto& e : view.edges) out += "- " + e + "\n";
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

Verdict unanimity_verdict(const std::vector<std::vector<bool>>& correct) {
  for (const auto& judges : correct) {
    if (judges.empty()) continue;
    if (std::all_of(judges.begin(), judges.end(), [](bool c) { return c; })) return Verdict::Fail;
  }
  return Verdict::Pass;
}

Verdict check_intermediate_mentions(const QARecord& record) {
  return mentions_intermediate(record.question, record.chain) ? Verdict::Fail : Verdict::Pass;
}

JudgeReport single_modality_test(const QARecord& record, const ContentGraph& g, Gateway& gateway,
                                 const std::vector<std::string>& judges, std::string_view key) {
  JudgeReport report;
  std::vector<std::vector<bool>> correct;
  bool undetermined = false;
  for (Modality m : {Modality::TextOnly, Modality::VisualOnly}) {
    const std::string facts = serialize_view(build_modality_view(g, m));
    std::vector<bool> row;
    auto& answers = report.answers[std::string(to_string(m))];
    for (const auto& judge : judges) {
      const Json hints{{"gold", record.answer}, {"modality", std::string(to_string(m))}, {"judge", judge}};
      try {
        auto x = gateway.run("modality_judge", {{"facts", facts}, {"question", record.question}}, judge,
                             {kJudgeTemperature, 64}, hints,
                             std::string(key) + "/judge/" + std::string(to_string(m)) + "/" + judge);
        const std::string answer = x.ok() ? x.parsed_payload->get<std::string>() : "";
        answers.push_back(answer);
        row.push_back(x.ok() && exact_match(answer, record.answer) == 1);
      } catch (const ProviderError& e) {
        answers.push_back("");
        row.push_back(false);
        undetermined = true;
        report.detail = e.what();
      }
    }
    correct.push_back(std::move(row));
  }
  report.verdict = undetermined ? Verdict::Undetermined : unanimity_verdict(correct);
  return report;
}

Verdict prune_cot(const QARecord& record) {
  std::size_t count = 0;
  for (const auto& s : record.cot_sentences) count += split_sentences(s).size();
  return count > kMaxCotSentences ? Verdict::Fail : Verdict::Pass;
}

Json to_json(const FilterLedger& l) {
  return Json{{"input", l.input},
              {"failed_mentions", l.failed_mentions},
              {"failed_modality", l.failed_modality},
              {"undetermined", l.undetermined},
              {"failed_cot", l.failed_cot},
              {"survivors", l.survivors}};
}

FilterOutcome run_filters(std::vector<FilterItem> items, Gateway& gateway, const std::vector<std::string>& judges) {
  FilterOutcome out;
  auto& ledger = out.ledger;
  for (auto& item : items) {
    ++ledger.input;
    auto& verdicts = item.record.filter_verdicts;
    verdicts = {{"mentions", "na"}, {"modality", "na"}, {"cot_length", "na"}};
    auto note = [&](const std::string& stage, Verdict v, Json extra = Json::object()) {
      verdicts[stage] = std::string(to_string(v));
      Json entry{{"record_id", item.record_id}, {"stage", stage}, {"verdict", std::string(to_string(v))}};
      for (auto& [k, val] : extra.items()) entry[k] = val;
      ledger.entries.push_back(std::move(entry));
    };

    const Verdict mention = check_intermediate_mentions(item.record);
    note("mentions", mention);
    if (mention != Verdict::Pass) {
      ++ledger.failed_mentions;
      continue;
    }

    if (!item.graph) throw UserError("filter item " + item.record_id + " has no graph");
    auto judged = single_modality_test(item.record, *item.graph, gateway, judges, item.record_id);
    Json answers = Json::object();
    for (const auto& [m, a] : judged.answers) answers[m] = a;
    note("modality", judged.verdict, Json{{"judge_answers", answers}});
    if (judged.verdict == Verdict::Undetermined) {
      ++ledger.undetermined;
      continue;
    }
    if (judged.verdict == Verdict::Fail) {
      ++ledger.failed_modality;
      continue;
    }

    const Verdict cot = prune_cot(item.record);
    note("cot_length", cot);
    if (cot != Verdict::Pass) {
      ++ledger.failed_cot;
      continue;
    }
    ++ledger.survivors;
    out.survivors.push_back(std::move(item));
  }
  return out;
}

}  // namespace hopgraph
