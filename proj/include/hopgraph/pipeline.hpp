#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hopgraph/augment.hpp"
#include "hopgraph/embeddings.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/llm.hpp"
#include "hopgraph/qa_gen.hpp"

namespace hopgraph {

namespace fs = std::filesystem;

struct ProviderConfig {
  std::string kind = "synthetic";  // "synthetic" | "openai"
  std::string base_url;
  std::string api_key_env = "HOPGRAPH_API_KEY";
  int timeout_seconds = 120;
  double judge_hit_rate = 0.3;  // synthetic judges only
};

struct EmbeddingConfig {
  std::string kind = "hashing";  // "hashing" | "recorded" | "service"
  std::string path;              // recorded vectors
  bool hashing_fallback = false;  // recorded: unknown inputs go to the hashing embedder
  std::string base_url = "http://127.0.0.1:8088";
  std::string secret_env = "HOPGRAPH_EMBED_SECRET";
  int timeout_seconds = 60;
  std::size_t max_batch = 64;
  std::size_t hashing_dim = 256;
};

struct PipelineInputs {
  std::vector<std::string> scenes;  // scene-graph JSON files
  std::vector<std::string> videos;  // video description JSON files
  std::vector<std::string> papers;  // directories holding main.tex and figures.json
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int min_images = 1;
  int max_images = 6;
  int ni_samples = 8;
  std::string image_ref_template = "images/{image_id}.jpg";
  // Probability of h = 1..5.
  std::vector<double> hop_distribution = {109735.0 / 153781, 12271.0 / 153781, 12592.0 / 153781,
                                          19183.0 / 153781, 0.0};
  std::map<Domain, HopBounds> hop_bounds = {
      {Domain::NI, {1, 5}}, {Domain::VF, {1, 5}}, {Domain::SP, {1, 4}}};
  int max_qa_per_sample = 3;
  int max_chain_draws = 12;
  double attribute_answer_probability = 0.5;
  std::vector<std::string> judges = {"Qwen3-30B-A3B-Instruct-2507", "gemma-3-27b-it",
                                     "Mistral-Small-3.2-24B-Instruct-2506"};
  std::string generation_model = "Qwen3-30B-A3B-Instruct-2507";
  double threshold = 0.6;
  int concurrency = 8;
  double test_fraction = 0.1;
  int max_nodes_per_image = 4;
  int min_categories = 1;
  int max_categories = 2;
  int max_attempts = 4;
  int initial_backoff_ms = 250;
  ProviderConfig provider;
  EmbeddingConfig embeddings;
  PipelineInputs inputs;
};

// Unknown keys are rejected so typos do not pass silently. Relative input
// and embedding paths are resolved against `base_dir`.
PipelineConfig config_from_json(const Json& j, const fs::path& base_dir = {});
Json to_json(const PipelineConfig& c);
// Empty when the configuration is usable.
std::vector<std::string> validate_config(const PipelineConfig& c);
PipelineConfig load_config(const fs::path& path);

// What travels between stages: one sample in the making per JSONL line.
struct WorkRecord {
  std::string sample_key;
  Domain domain = Domain::NI;
  std::vector<std::string> image_refs;
  ContentGraph graph;
  std::optional<std::string> context;
  std::vector<QARecord> qa;
  Json notes = Json::object();
};

Json to_json(const WorkRecord& r);
WorkRecord work_record_from_json(const Json& j);
std::vector<WorkRecord> read_work_records(const fs::path& path);
void write_work_records(const std::vector<WorkRecord>& records, const fs::path& path);

struct StageReport {
  std::string stage;
  bool up_to_date = false;  // outputs already matched the inputs and config
  long input = 0;
  long output = 0;
  Json details = Json::object();
};
Json to_json(const StageReport& r);

std::shared_ptr<LlmProvider> make_provider(const PipelineConfig& c);
std::shared_ptr<Embedder> make_embedder(const PipelineConfig& c);

class Pipeline {
 public:
  // Null provider/embedder are built from the configuration.
  Pipeline(PipelineConfig config, fs::path work_dir, std::shared_ptr<LlmProvider> provider = nullptr,
           std::shared_ptr<Embedder> embedder = nullptr);

  StageReport ingest_scene(const std::vector<fs::path>& scene_files, const fs::path& out);
  StageReport ingest_video(const std::vector<fs::path>& video_files, const fs::path& out);
  StageReport ingest_paper(const std::vector<fs::path>& paper_dirs, const fs::path& out);
  StageReport augment(const std::vector<fs::path>& in, const fs::path& out);
  StageReport gen_context(const fs::path& in, const fs::path& out);
  StageReport gen_qa(const fs::path& in, const fs::path& out);
  // Writes survivors to `out` and the per-stage verdicts to `ledger`.
  StageReport filter(const fs::path& in, const fs::path& out, const fs::path& ledger);
  // Writes the dataset, its manifest, training conversations and test items.
  StageReport package(const fs::path& in, const fs::path& dataset);
  StageReport stats(const fs::path& dataset, const fs::path& out_json);
  // Audit bundles for the test split, one file per sample.
  StageReport audit_export(const fs::path& dataset, const fs::path& out_dir, long limit);

  // Every stage from the configured inputs to the dataset and its statistics
  // under the work directory.
  std::vector<StageReport> run_all();

  const PipelineConfig& config() const { return config_; }
  Gateway& gateway() { return *gateway_; }

 private:
  template <typename Fn>
  StageReport run_stage(const std::string& name, const std::vector<fs::path>& inputs,
                        const std::vector<fs::path>& outputs, Fn&& body);
  QaOptions qa_options(Domain d) const;

  PipelineConfig config_;
  fs::path work_dir_;
  std::shared_ptr<LlmProvider> provider_;
  std::shared_ptr<Embedder> embedder_;
  std::unique_ptr<Gateway> gateway_;
};

}  // namespace hopgraph
