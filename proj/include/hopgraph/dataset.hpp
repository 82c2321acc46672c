#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/evalkit.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/qa_gen.hpp"

namespace hopgraph {

enum class Split { Train, Test };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct DatasetSample {
  std::string sample_id;
  Domain domain = Domain::NI;
  std::vector<std::string> image_refs;
  std::string context;
  std::vector<QARecord> qa;
  Split split = Split::Train;
};

// Content hash of (domain, image_refs, context); 16 hex characters.
std::string compute_sample_id(Domain domain, const std::vector<std::string>& image_refs, std::string_view context);

Json to_json(const DatasetSample& s);
DatasetSample sample_from_json(const Json& j);

// Empty image list or QA list, id not matching the content hash, or QA
// records failing re-validation.
std::vector<std::string> validate_sample(const DatasetSample& s);

// One JSON document per line, in the given order.
std::string dataset_jsonl(const std::vector<DatasetSample>& samples);
std::vector<DatasetSample> parse_dataset_jsonl(std::string_view text, std::string_view source = "<input>");

// {"samples", "qa", "by_domain", "by_split", "sha256"}; domains and splits
// with no sample are omitted.
Json dataset_manifest(const std::vector<DatasetSample>& samples, std::string_view file_content);

// Writes <path> and <path>.manifest.json atomically; returns the manifest.
Json write_dataset(const std::vector<DatasetSample>& samples, const std::filesystem::path& path);
std::vector<DatasetSample> read_dataset(const std::filesystem::path& path);
std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path);

// Two conversations per training sample, one answering directly and one
// with the reasoning. All QA pairs of the sample become consecutive turns;
// the first user turn carries one "<image>" line per image and the context.
// Throws UserError for test samples.
std::vector<Json> to_training_format(const DatasetSample& sample);

// Whitespace tokens of the context.
std::size_t context_tokens(const DatasetSample& s);

struct StatsRow {
  long samples = 0;
  double avg_images = 0;
  double avg_tokens = 0;
  long qa = 0;
  std::map<int, long> per_hop;  // keyed by h (edge count)
};

// Keyed by (domain, split).
using StatsTable = std::map<std::pair<std::string, std::string>, StatsRow>;

StatsTable compute_stats(const std::vector<DatasetSample>& samples);
Json to_json(const StatsTable& t);
// Aligned text table; hop rows are labelled by fact count ("2-hop" for h=1).
std::string format_stats_table(const StatsTable& t);

// One evaluation item per QA pair of each test sample; id "<sample_id>:<k>".
std::vector<EvalItem> eval_items(const std::vector<DatasetSample>& samples);

}  // namespace hopgraph
