#include "hopgraph/dataset.hpp"

#include <cstdio>
#include <set>

#include "hopgraph/text.hpp"

namespace hopgraph {

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw UserError("unknown split '" + std::string(s) + "' (expected train or test)");
}

std::string compute_sample_id(Domain domain, const std::vector<std::string>& image_refs, std::string_view context) {
  const Json key = Json::array({std::string(to_string(domain)), Json(image_refs), std::string(context)});
  return sha256_hex(key.dump()).substr(0, 16);
}

Json to_json(const DatasetSample& s) {
  Json qa = Json::array();
  for (const auto& r : s.qa) qa.push_back(to_json(r));
  return Json{{"sample_id", s.sample_id},
              {"domain", std::string(to_string(s.domain))},
              {"image_refs", s.image_refs},
              {"context", s.context},
              {"qa", qa},
              {"split", std::string(to_string(s.split))}};
}

DatasetSample sample_from_json(const Json& j) {
  DatasetSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.domain = domain_from_string(j.at("domain").get<std::string>());
  s.image_refs = j.at("image_refs").get<std::vector<std::string>>();
  s.context = j.at("context").get<std::string>();
  for (const auto& r : j.at("qa")) s.qa.push_back(qa_from_json(r));
  s.split = split_from_string(j.at("split").get<std::string>());
  return s;
}

std::vector<std::string> validate_sample(const DatasetSample& s) {
  std::vector<std::string> problems;
  if (s.image_refs.empty()) problems.push_back("no image references");
  if (s.qa.empty()) problems.push_back("no QA pairs");
  if (s.sample_id != compute_sample_id(s.domain, s.image_refs, s.context))
    problems.push_back("sample_id does not match the content hash");
  for (std::size_t k = 0; k < s.qa.size(); ++k) {
    const auto& r = s.qa[k];
    if (r.domain != s.domain) problems.push_back("qa " + std::to_string(k) + ": domain differs from the sample");
    for (const auto& p : validate_qa_record(r, default_hop_bounds(s.domain)))
      problems.push_back("qa " + std::to_string(k) + ": " + p);
  }
  return problems;
}

std::string dataset_jsonl(const std::vector<DatasetSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += to_json(s).dump() + "\n";
  return out;
}

std::vector<DatasetSample> parse_dataset_jsonl(std::string_view text, std::string_view source) {
  std::vector<DatasetSample> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw UserError(where + ": malformed JSON");
    try {
      out.push_back(sample_from_json(j));
    } catch (const Json::exception& e) {
      throw UserError(where + ": " + e.what());
    }
  }
  return out;
}

Json dataset_manifest(const std::vector<DatasetSample>& samples, std::string_view file_content) {
  long qa = 0;
  std::map<std::string, long> by_domain, by_split;
  for (const auto& s : samples) {
    qa += static_cast<long>(s.qa.size());
    ++by_domain[std::string(to_string(s.domain))];
    ++by_split[std::string(to_string(s.split))];
  }
  Json domains = Json::object();
  for (const char* d : {"NI", "VF", "SP"})
    if (by_domain.count(d)) domains[d] = by_domain[d];
  Json splits = Json::object();
  for (const char* sp : {"train", "test"})
    if (by_split.count(sp)) splits[sp] = by_split[sp];
  return Json{{"samples", samples.size()},
              {"qa", qa},
              {"by_domain", domains},
              {"by_split", splits},
              {"sha256", sha256_hex(file_content)}};
}

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path) {
  return dataset_path.string() + ".manifest.json";
}

Json write_dataset(const std::vector<DatasetSample>& samples, const std::filesystem::path& path) {
  const std::string content = dataset_jsonl(samples);
  const Json manifest = dataset_manifest(samples, content);
  write_file_atomic(path, content);
  write_file_atomic(manifest_path_for(path), manifest.dump(2) + "\n");
  return manifest;
}

std::vector<DatasetSample> read_dataset(const std::filesystem::path& path) {
  return parse_dataset_jsonl(read_file(path), path.string());
}

std::vector<Json> to_training_format(const DatasetSample& sample) {
  if (sample.split != Split::Train) throw UserError("sample " + sample.sample_id + " is not in the train split");
  std::string prefix;
  for (std::size_t i = 0; i < sample.image_refs.size(); ++i) prefix += "<image>\n";
  prefix += sample.context + "\n\n";

  std::vector<Json> out;
  for (const char* format : {"direct", "cot"}) {
    Json messages = Json::array();
    for (std::size_t k = 0; k < sample.qa.size(); ++k) {
      const auto& r = sample.qa[k];
      messages.push_back(Json{{"role", "user"}, {"content", (k == 0 ? prefix : std::string()) + r.question}});
      const std::string reply = std::string(format) == "direct" ? r.answer : join(r.cot_sentences, " ");
      messages.push_back(Json{{"role", "assistant"}, {"content", reply}});
    }
    out.push_back(Json{{"id", sample.sample_id + ":" + format},
                       {"sample_id", sample.sample_id},
                       {"format", format},
                       {"images", sample.image_refs},
                       {"messages", messages}});
  }
  return out;
}

std::size_t context_tokens(const DatasetSample& s) { return split_whitespace(s.context).size(); }

StatsTable compute_stats(const std::vector<DatasetSample>& samples) {
  struct Sums {
    long samples = 0, images = 0, tokens = 0, qa = 0;
    std::map<int, long> hops;
  };
  std::map<std::pair<std::string, std::string>, Sums> sums;
  for (const auto& s : samples) {
    auto& acc = sums[{std::string(to_string(s.domain)), std::string(to_string(s.split))}];
    ++acc.samples;
    acc.images += static_cast<long>(s.image_refs.size());
    acc.tokens += static_cast<long>(context_tokens(s));
    acc.qa += static_cast<long>(s.qa.size());
    for (const auto& r : s.qa) ++acc.hops[r.hop_count];
  }
  StatsTable table;
  for (const auto& [key, acc] : sums) {
    StatsRow row;
    row.samples = acc.samples;
    row.avg_images = static_cast<double>(acc.images) / static_cast<double>(acc.samples);
    row.avg_tokens = static_cast<double>(acc.tokens) / static_cast<double>(acc.samples);
    row.qa = acc.qa;
    row.per_hop = acc.hops;
    table[key] = row;
  }
  return table;
}

Json to_json(const StatsTable& t) {
  Json rows = Json::array();
  for (const auto& [key, row] : t) {
    Json hops = Json::object();
    for (const auto& [h, n] : row.per_hop) hops[std::to_string(h)] = n;
    rows.push_back(Json{{"domain", key.first},
                        {"split", key.second},
                        {"samples", row.samples},
                        {"avg_images", row.avg_images},
                        {"avg_tokens", row.avg_tokens},
                        {"qa", row.qa},
                        {"qa_by_hop", hops}});
  }
  return Json{{"rows", rows}};
}

std::string format_stats_table(const StatsTable& t) {
  const std::vector<std::string> domains = {"NI", "VF", "SP"};
  auto cell = [](const std::string& s, int width) {
    return s.size() >= static_cast<std::size_t>(width) ? s : std::string(width - s.size(), ' ') + s;
  };
  auto fixed = [](double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return std::string(buf);
  };
  std::string out = "split  statistic           " + cell("NI", 10) + cell("VF", 10) + cell("SP", 10) + "\n";
  for (const char* split : {"train", "test"}) {
    std::set<int> hops;
    bool any = false;
    for (const auto& d : domains) {
      auto it = t.find({d, split});
      if (it == t.end()) continue;
      any = true;
      for (const auto& [h, n] : it->second.per_hop) hops.insert(h);
    }
    if (!any) continue;
    auto line = [&](const std::string& name, auto value) {
      std::string row = std::string(split) + std::string(7 - std::string(split).size(), ' ') + name +
                        std::string(20 - name.size(), ' ');
      for (const auto& d : domains) {
        auto it = t.find({d, split});
        row += cell(it == t.end() ? "-" : value(it->second), 10);
      }
      out += row + "\n";
    };
    line("samples", [](const StatsRow& r) { return std::to_string(r.samples); });
    line("avg images/sample", [&](const StatsRow& r) { return fixed(r.avg_images, 1); });
    line("avg tokens/sample", [&](const StatsRow& r) { return fixed(r.avg_tokens, 0); });
    line("qa", [](const StatsRow& r) { return std::to_string(r.qa); });
    for (int h : hops)
      line("  " + std::to_string(h + 1) + "-hop", [h](const StatsRow& r) {
        auto it = r.per_hop.find(h);
        return std::to_string(it == r.per_hop.end() ? 0 : it->second);
      });
  }
  return out;
}

std::vector<EvalItem> eval_items(const std::vector<DatasetSample>& samples) {
  std::vector<EvalItem> out;
  for (const auto& s : samples) {
    if (s.split != Split::Test) continue;
    for (std::size_t k = 0; k < s.qa.size(); ++k)
      out.push_back({s.sample_id + ":" + std::to_string(k), s.domain, s.qa[k].hop_count, s.qa[k].question,
                     s.qa[k].answer});
  }
  return out;
}

}  // namespace hopgraph
