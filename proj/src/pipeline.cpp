#include "hopgraph/pipeline.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <set>
#include <thread>

#include "hopgraph/context_gen.hpp"
#include "hopgraph/context_subgraph.hpp"
#include "hopgraph/dataset.hpp"
#include "hopgraph/filter.hpp"
#include "hopgraph/ingest_paper.hpp"
#include "hopgraph/ingest_scene.hpp"
#include "hopgraph/ingest_video.hpp"
#include "hopgraph/providers.hpp"
#include "hopgraph/scene_graph.hpp"
#include "hopgraph/synthetic_provider.hpp"
#include "hopgraph/text.hpp"

namespace hopgraph {

// ---------------------------------------------------------------- config

namespace {

template <typename T>
void read_field(const Json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw UserError(std::string("config field \"") + key + "\" has the wrong type");
  }
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw UserError("unknown config key \"" + where + k + "\"");
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

}  // namespace

PipelineConfig config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw UserError("config must be a JSON object");
  reject_unknown(j,
                 {"seed", "min_images", "max_images", "ni_samples", "image_ref_template", "hop_distribution",
                  "hop_bounds", "max_qa_per_sample", "max_chain_draws", "attribute_answer_probability", "judges",
                  "generation_model", "threshold", "concurrency", "test_fraction", "max_nodes_per_image",
                  "min_categories", "max_categories", "max_attempts", "initial_backoff_ms", "provider",
                  "embeddings", "inputs"},
                 "");
  PipelineConfig c;
  read_field(j, "seed", c.seed);
  read_field(j, "min_images", c.min_images);
  read_field(j, "max_images", c.max_images);
  read_field(j, "ni_samples", c.ni_samples);
  read_field(j, "image_ref_template", c.image_ref_template);
  read_field(j, "hop_distribution", c.hop_distribution);
  if (j.contains("hop_bounds")) {
    const auto& hb = j["hop_bounds"];
    if (!hb.is_object()) throw UserError("config field \"hop_bounds\" must be an object");
    for (const auto& [d, b] : hb.items()) {
      HopBounds bounds;
      read_field(b, "min", bounds.min_hops);
      read_field(b, "max", bounds.max_hops);
      c.hop_bounds[domain_from_string(d)] = bounds;
    }
  }
  read_field(j, "max_qa_per_sample", c.max_qa_per_sample);
  read_field(j, "max_chain_draws", c.max_chain_draws);
  read_field(j, "attribute_answer_probability", c.attribute_answer_probability);
  read_field(j, "judges", c.judges);
  read_field(j, "generation_model", c.generation_model);
  read_field(j, "threshold", c.threshold);
  read_field(j, "concurrency", c.concurrency);
  read_field(j, "test_fraction", c.test_fraction);
  read_field(j, "max_nodes_per_image", c.max_nodes_per_image);
  read_field(j, "min_categories", c.min_categories);
  read_field(j, "max_categories", c.max_categories);
  read_field(j, "max_attempts", c.max_attempts);
  read_field(j, "initial_backoff_ms", c.initial_backoff_ms);
  if (j.contains("provider")) {
    const auto& p = j["provider"];
    reject_unknown(p, {"kind", "base_url", "api_key_env", "timeout_seconds", "judge_hit_rate"}, "provider.");
    read_field(p, "kind", c.provider.kind);
    read_field(p, "base_url", c.provider.base_url);
    read_field(p, "api_key_env", c.provider.api_key_env);
    read_field(p, "timeout_seconds", c.provider.timeout_seconds);
    read_field(p, "judge_hit_rate", c.provider.judge_hit_rate);
  }
  if (j.contains("embeddings")) {
    const auto& e = j["embeddings"];
    reject_unknown(e,
                   {"kind", "path", "hashing_fallback", "base_url", "secret_env", "timeout_seconds", "max_batch",
                    "hashing_dim"},
                   "embeddings.");
    read_field(e, "kind", c.embeddings.kind);
    read_field(e, "path", c.embeddings.path);
    read_field(e, "hashing_fallback", c.embeddings.hashing_fallback);
    read_field(e, "base_url", c.embeddings.base_url);
    read_field(e, "secret_env", c.embeddings.secret_env);
    read_field(e, "timeout_seconds", c.embeddings.timeout_seconds);
    read_field(e, "max_batch", c.embeddings.max_batch);
    read_field(e, "hashing_dim", c.embeddings.hashing_dim);
    c.embeddings.path = resolve(base_dir, c.embeddings.path);
  }
  if (j.contains("inputs")) {
    const auto& in = j["inputs"];
    reject_unknown(in, {"scenes", "videos", "papers"}, "inputs.");
    read_field(in, "scenes", c.inputs.scenes);
    read_field(in, "videos", c.inputs.videos);
    read_field(in, "papers", c.inputs.papers);
    for (auto* list : {&c.inputs.scenes, &c.inputs.videos, &c.inputs.papers})
      for (auto& p : *list) p = resolve(base_dir, p);
  }
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json bounds = Json::object();
  for (const auto& [d, b] : c.hop_bounds) bounds[std::string(to_string(d))] = Json{{"min", b.min_hops}, {"max", b.max_hops}};
  return Json{{"seed", c.seed},
              {"min_images", c.min_images},
              {"max_images", c.max_images},
              {"ni_samples", c.ni_samples},
              {"image_ref_template", c.image_ref_template},
              {"hop_distribution", c.hop_distribution},
              {"hop_bounds", bounds},
              {"max_qa_per_sample", c.max_qa_per_sample},
              {"max_chain_draws", c.max_chain_draws},
              {"attribute_answer_probability", c.attribute_answer_probability},
              {"judges", c.judges},
              {"generation_model", c.generation_model},
              {"threshold", c.threshold},
              {"concurrency", c.concurrency},
              {"test_fraction", c.test_fraction},
              {"max_nodes_per_image", c.max_nodes_per_image},
              {"min_categories", c.min_categories},
              {"max_categories", c.max_categories},
              {"max_attempts", c.max_attempts},
              {"initial_backoff_ms", c.initial_backoff_ms},
              {"provider",
               {{"kind", c.provider.kind},
                {"base_url", c.provider.base_url},
                {"api_key_env", c.provider.api_key_env},
                {"timeout_seconds", c.provider.timeout_seconds},
                {"judge_hit_rate", c.provider.judge_hit_rate}}},
              {"embeddings",
               {{"kind", c.embeddings.kind},
                {"path", c.embeddings.path},
                {"hashing_fallback", c.embeddings.hashing_fallback},
                {"base_url", c.embeddings.base_url},
                {"secret_env", c.embeddings.secret_env},
                {"timeout_seconds", c.embeddings.timeout_seconds},
                {"max_batch", c.embeddings.max_batch},
                {"hashing_dim", c.embeddings.hashing_dim}}},
              {"inputs",
               {{"scenes", c.inputs.scenes}, {"videos", c.inputs.videos}, {"papers", c.inputs.papers}}}};
}

std::vector<std::string> validate_config(const PipelineConfig& c) {
  std::vector<std::string> problems;
  if (c.min_images < 1 || c.max_images < c.min_images || c.max_images > 6)
    problems.push_back("image count range must satisfy 1 <= min_images <= max_images <= 6");
  if (c.ni_samples < 0) problems.push_back("ni_samples must not be negative");
  if (c.hop_distribution.size() != 5) problems.push_back("hop_distribution needs one probability for each h = 1..5");
  double total = 0;
  for (double p : c.hop_distribution) {
    if (p < 0 || !std::isfinite(p)) problems.push_back("hop probabilities must be finite and non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) problems.push_back("hop probabilities must sum to 1");
  for (const auto& [d, b] : c.hop_bounds) {
    const int cap = default_hop_bounds(d).max_hops;
    if (b.min_hops < 1 || b.max_hops < b.min_hops || b.max_hops > cap)
      problems.push_back(std::string(to_string(d)) + " hop bounds must satisfy 1 <= min <= max <= " +
                         std::to_string(cap));
  }
  if (c.max_qa_per_sample < 1) problems.push_back("max_qa_per_sample must be at least 1");
  if (c.max_chain_draws < 1) problems.push_back("max_chain_draws must be at least 1");
  if (c.attribute_answer_probability < 0 || c.attribute_answer_probability > 1)
    problems.push_back("attribute_answer_probability must lie in [0, 1]");
  if (c.judges.size() != 3) problems.push_back("exactly three judge models are required");
  if (c.threshold < -1 || c.threshold > 1) problems.push_back("threshold must lie in [-1, 1]");
  if (c.concurrency < 1 || c.concurrency > 1024) problems.push_back("concurrency must lie in 1..1024");
  if (c.test_fraction < 0 || c.test_fraction > 1) problems.push_back("test_fraction must lie in [0, 1]");
  if (c.min_categories < 1 || c.max_categories < c.min_categories || c.max_categories > 6)
    problems.push_back("category range must satisfy 1 <= min_categories <= max_categories <= 6");
  if (c.max_nodes_per_image < 0) problems.push_back("max_nodes_per_image must not be negative");
  if (c.max_attempts < 1) problems.push_back("max_attempts must be at least 1");
  if (c.provider.kind != "synthetic" && c.provider.kind != "openai")
    problems.push_back("provider.kind must be synthetic or openai");
  if (c.provider.kind == "openai" && c.provider.base_url.empty())
    problems.push_back("provider.base_url is required for the openai provider");
  if (c.embeddings.kind != "hashing" && c.embeddings.kind != "recorded" && c.embeddings.kind != "service")
    problems.push_back("embeddings.kind must be hashing, recorded or service");
  if (c.embeddings.kind == "recorded" && c.embeddings.path.empty())
    problems.push_back("embeddings.path is required for recorded embeddings");
  return problems;
}

PipelineConfig load_config(const fs::path& path) {
  Json j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw UserError(path.string() + ": malformed JSON");
  PipelineConfig c = config_from_json(j, path.parent_path());
  if (auto problems = validate_config(c); !problems.empty())
    throw UserError(path.string() + ": " + join(problems, "; "));
  return c;
}

// ---------------------------------------------------------------- records

Json to_json(const WorkRecord& r) {
  Json qa = Json::array();
  for (const auto& q : r.qa) qa.push_back(to_json(q));
  return Json{{"sample_key", r.sample_key},
              {"domain", std::string(to_string(r.domain))},
              {"image_refs", r.image_refs},
              {"graph", to_json(r.graph)},
              {"context", r.context ? Json(*r.context) : Json(nullptr)},
              {"qa", qa},
              {"notes", r.notes}};
}

WorkRecord work_record_from_json(const Json& j) {
  WorkRecord r;
  r.sample_key = j.at("sample_key").get<std::string>();
  r.domain = domain_from_string(j.at("domain").get<std::string>());
  r.image_refs = j.at("image_refs").get<std::vector<std::string>>();
  r.graph = graph_from_json(j.at("graph"));
  if (j.contains("context") && !j["context"].is_null()) r.context = j["context"].get<std::string>();
  if (j.contains("qa"))
    for (const auto& q : j["qa"]) r.qa.push_back(qa_from_json(q));
  if (j.contains("notes")) r.notes = j["notes"];
  return r;
}

std::vector<WorkRecord> read_work_records(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<WorkRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw UserError(where + ": malformed JSON");
    try {
      out.push_back(work_record_from_json(j));
    } catch (const Json::exception& e) {
      throw UserError(where + ": " + e.what());
    }
  }
  return out;
}

void write_work_records(const std::vector<WorkRecord>& records, const fs::path& path) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  write_file_atomic(path, out);
}

Json to_json(const StageReport& r) {
  return Json{{"stage", r.stage}, {"up_to_date", r.up_to_date}, {"input", r.input}, {"output", r.output},
              {"details", r.details}};
}

// ---------------------------------------------------------------- plumbing

std::shared_ptr<LlmProvider> make_provider(const PipelineConfig& c) {
  if (c.provider.kind == "synthetic") return std::make_shared<SyntheticProvider>(c.seed, c.provider.judge_hit_rate);
  const char* key = std::getenv(c.provider.api_key_env.c_str());
  if (!key || !*key) throw UserError("environment variable " + c.provider.api_key_env + " holds no API key");
  return std::make_shared<OpenAiCompatibleProvider>(
      HttpProviderConfig{c.provider.base_url, key, c.provider.timeout_seconds});
}

std::shared_ptr<Embedder> make_embedder(const PipelineConfig& c) {
  const auto& e = c.embeddings;
  if (e.kind == "hashing") return std::make_shared<HashingEmbedder>(e.hashing_dim);
  if (e.kind == "recorded") {
    auto rec = std::make_shared<RecordedEmbeddings>(RecordedEmbeddings::load(e.path));
    if (e.hashing_fallback) rec->set_fallback(std::make_shared<HashingEmbedder>(e.hashing_dim));
    return rec;
  }
  EmbedServiceConfig sc;
  sc.base_url = e.base_url;
  sc.timeout_seconds = e.timeout_seconds;
  sc.max_batch = e.max_batch;
  if (const char* secret = std::getenv(e.secret_env.c_str())) sc.shared_secret = secret;
  return std::make_shared<EmbedServiceClient>(sc);
}

namespace {

// Runs fn(0..n-1) on up to `workers` threads. Results must be written by
// index so that the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      {
        std::lock_guard lock(mutex);
        if (error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::string hash_path(const fs::path& p) {
  if (!fs::exists(p)) return "missing";
  if (!fs::is_directory(p)) return sha256_hex(read_file(p));
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(p))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += fs::relative(f, p).generic_string() + "\n" + sha256_hex(read_file(f)) + "\n";
  return sha256_hex(acc);
}

std::string zero_padded(std::size_t k) {
  std::string s = std::to_string(k);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

std::string image_ref_for(const std::string& pattern, const std::string& image_id) {
  std::string out = pattern;
  const std::string token = "{image_id}";
  for (auto at = out.find(token); at != std::string::npos; at = out.find(token, at + image_id.size()))
    out.replace(at, token.size(), image_id);
  return out;
}

fs::path sibling(const fs::path& p, const std::string& name) { return p.parent_path() / name; }

}  // namespace

Pipeline::Pipeline(PipelineConfig config, fs::path work_dir, std::shared_ptr<LlmProvider> provider,
                   std::shared_ptr<Embedder> embedder)
    : config_(std::move(config)),
      work_dir_(std::move(work_dir)),
      provider_(std::move(provider)),
      embedder_(std::move(embedder)) {
  if (auto problems = validate_config(config_); !problems.empty())
    throw UserError("invalid configuration: " + join(problems, "; "));
  if (!provider_) provider_ = make_provider(config_);
  GatewayOptions options;
  options.max_attempts = config_.max_attempts;
  options.initial_backoff = std::chrono::milliseconds(config_.initial_backoff_ms);
  options.concurrency = config_.concurrency;
  if (!work_dir_.empty()) options.log_path = work_dir_ / "logs" / "exchanges.jsonl";
  gateway_ = std::make_unique<Gateway>(provider_, TemplateRegistry::builtin(), options);
}

template <typename Fn>
StageReport Pipeline::run_stage(const std::string& name, const std::vector<fs::path>& inputs,
                                const std::vector<fs::path>& outputs, Fn&& body) {
  Json config = to_json(config_);
  config.erase("inputs");
  config.erase("concurrency");
  if (config_.embeddings.kind == "recorded") config["embeddings"]["path"] = hash_path(config_.embeddings.path);
  Json in = Json::array();
  for (const auto& p : inputs) in.push_back(Json{{"path", p.string()}, {"sha256", hash_path(p)}});
  const std::string config_hash = sha256_hex(config.dump());
  const fs::path manifest = outputs.front().string() + ".stage.json";

  if (fs::exists(manifest)) {
    Json m = Json::parse(read_file(manifest), nullptr, false);
    bool fresh = !m.is_discarded() && m.value("stage", "") == name && m.value("config_sha256", "") == config_hash &&
                 m.contains("inputs") && m["inputs"] == in && m.contains("outputs");
    if (fresh)
      for (const auto& o : m["outputs"])
        fresh = fresh && hash_path(o.at("path").get<std::string>()) == o.at("sha256").get<std::string>();
    if (fresh) {
      StageReport r;
      r.stage = name;
      r.up_to_date = true;
      r.input = m["report"].value("input", 0L);
      r.output = m["report"].value("output", 0L);
      r.details = m["report"].value("details", Json::object());
      return r;
    }
  }

  StageReport report = body();
  report.stage = name;
  Json out = Json::array();
  for (const auto& p : outputs) out.push_back(Json{{"path", p.string()}, {"sha256", hash_path(p)}});
  const Json m{{"stage", name},
               {"config_sha256", config_hash},
               {"inputs", in},
               {"outputs", out},
               {"report", {{"input", report.input}, {"output", report.output}, {"details", report.details}}}};
  write_file_atomic(manifest, m.dump(2) + "\n");
  return report;
}

QaOptions Pipeline::qa_options(Domain d) const {
  QaOptions o;
  o.model_id = config_.generation_model;
  o.max_qa_per_sample = config_.max_qa_per_sample;
  o.max_chain_draws = config_.max_chain_draws;
  o.hop_weights = config_.hop_distribution;
  o.sampling.attribute_answer_probability = config_.attribute_answer_probability;
  o.sampling.bounds = config_.hop_bounds.count(d) ? config_.hop_bounds.at(d) : default_hop_bounds(d);
  return o;
}

// ---------------------------------------------------------------- stages

StageReport Pipeline::ingest_scene(const std::vector<fs::path>& scene_files, const fs::path& out) {
  return run_stage("ingest-scene", scene_files, {out}, [&] {
    std::vector<RawSceneGraph> catalog;
    Json diagnostics = Json::array();
    for (const auto& f : scene_files) {
      auto parsed = parse_scene_file(f.string());
      for (auto& d : parsed.diagnostics) diagnostics.push_back(d);
      for (auto& s : parsed.scenes) catalog.push_back(std::move(s));
    }
    if (catalog.empty()) throw UserError("no scene graphs in the given files");
    Rng rng(derive_seed(config_.seed, "ingest-scene"));
    const auto sets = sample_image_sets(catalog.size(), rng, static_cast<std::size_t>(config_.ni_samples),
                                        config_.min_images, config_.max_images);
    std::vector<WorkRecord> records;
    long empty = 0;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      std::vector<SceneGraph> scenes;
      WorkRecord r;
      r.sample_key = "ni-" + zero_padded(k);
      r.domain = Domain::NI;
      Json discriminators = Json::object();
      for (std::size_t idx : sets[k]) {
        auto unique = filter_unique_entities(to_scene_graph(catalog[idx]));
        Json per_image = Json::object();
        for (const auto& [id, why] : unique.discriminators) per_image[id] = why;
        discriminators[catalog[idx].image_id] = per_image;
        scenes.push_back(std::move(unique.scene));
        r.image_refs.push_back(image_ref_for(config_.image_ref_template, catalog[idx].image_id));
      }
      r.graph = merge_scene_graphs(scenes, Domain::NI);
      if (r.graph.visual_count() == 0) {
        ++empty;
        continue;
      }
      r.notes["discriminators"] = discriminators;
      records.push_back(std::move(r));
    }
    write_work_records(records, out);
    StageReport rep;
    rep.input = static_cast<long>(catalog.size());
    rep.output = static_cast<long>(records.size());
    rep.details = Json{{"image_sets", sets.size()}, {"empty_sets", empty}, {"diagnostics", diagnostics}};
    return rep;
  });
}

StageReport Pipeline::ingest_video(const std::vector<fs::path>& video_files, const fs::path& out) {
  return run_stage("ingest-video", video_files, {out}, [&] {
    if (!embedder_) embedder_ = make_embedder(config_);
    std::vector<std::optional<WorkRecord>> results(video_files.size());
    std::vector<std::string> skipped(video_files.size());
    parallel_for(video_files.size(), config_.concurrency, [&](std::size_t i) {
      const fs::path& file = video_files[i];
      const VideoInput v = parse_video_json(read_file(file), file.string());
      std::vector<std::string> caption_texts, frame_inputs;
      for (const auto& c : v.captions) caption_texts.push_back(c.text);
      for (const auto& f : v.frames) {
        if (config_.embeddings.kind == "service")
          frame_inputs.push_back(httplib::detail::base64_encode(read_file(file.parent_path() / f.ref)));
        else
          frame_inputs.push_back(f.ref);
      }
      const auto caption_vectors = embedder_->embed(EmbedKind::ClipText, caption_texts);
      const auto frame_vectors = embedder_->embed(EmbedKind::ClipImage, frame_inputs);
      const auto choices = select_frames(v.frames, frame_vectors, v.captions, caption_vectors);

      const std::string key = "vf-" + v.video_id;
      auto converted = captions_to_graph(v.captions, *gateway_, {config_.generation_model, kGenerationTemperature}, key);
      if (!converted.graph) {
        skipped[i] = v.video_id + ": " + join(converted.problems, "; ");
        return;
      }
      WorkRecord r;
      r.sample_key = key;
      r.domain = Domain::VF;
      r.graph = std::move(*converted.graph);
      Json frames = Json::array();
      for (const auto& ch : choices) {
        r.image_refs.push_back(v.frames[ch.frame].ref);
        frames.push_back(Json{{"ref", v.frames[ch.frame].ref},
                              {"timestamp", v.frames[ch.frame].timestamp_s},
                              {"similarity", ch.similarity}});
      }
      r.notes["captions"] = caption_texts;
      r.notes["frames"] = frames;
      r.notes["bundle"] = to_json(*converted.bundle);
      results[i] = std::move(r);
    });
    std::vector<WorkRecord> records;
    std::set<std::string> keys;
    Json skipped_json = Json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!results[i]) {
        skipped_json.push_back(skipped[i]);
        continue;
      }
      if (!keys.insert(results[i]->sample_key).second)
        throw UserError("video id of " + video_files[i].string() + " is used twice");
      records.push_back(std::move(*results[i]));
    }
    write_work_records(records, out);
    StageReport rep;
    rep.input = static_cast<long>(video_files.size());
    rep.output = static_cast<long>(records.size());
    rep.details = Json{{"skipped", skipped_json}};
    return rep;
  });
}

StageReport Pipeline::ingest_paper(const std::vector<fs::path>& paper_dirs, const fs::path& out) {
  return run_stage("ingest-paper", paper_dirs, {out}, [&] {
    if (!embedder_) embedder_ = make_embedder(config_);
    PaperOptions options;
    options.model_id = config_.generation_model;
    options.threshold = config_.threshold;
    std::vector<std::optional<WorkRecord>> results(paper_dirs.size());
    std::vector<std::string> skipped(paper_dirs.size());
    parallel_for(paper_dirs.size(), config_.concurrency, [&](std::size_t i) {
      const fs::path& dir = paper_dirs[i];
      const std::string name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
      const std::string key = "sp-" + name;
      const TexDocument doc = segment_paragraphs(read_file(dir / "main.tex"));
      const auto figures = parse_figure_manifest(read_file(dir / "figures.json"), (dir / "figures.json").string());

      auto inventory = extract_entity_inventory(doc.paragraphs, *gateway_, options, key);
      if (inventory.failure) {
        skipped[i] = name + ": entity inventory failed: " + *inventory.failure;
        return;
      }
      const auto& entities = inventory.relations;
      std::vector<TextRelation> text_relations;
      std::vector<VisualRelation> visual_relations;
      Json dropped = Json::array();
      for (const auto& p : doc.paragraphs) {
        if (p.kind == ParagraphKind::Plain) {
          auto x = extract_text_relations(p, entities, *gateway_, options, key);
          if (x.failure) dropped.push_back("paragraph " + std::to_string(p.index) + ": " + *x.failure);
          for (auto& d : x.dropped) dropped.push_back(d);
          text_relations.insert(text_relations.end(), x.relations.begin(), x.relations.end());
        } else {
          auto x = extract_visual_relations(p, entities, figures, *gateway_, options, key);
          if (x.failure) dropped.push_back("paragraph " + std::to_string(p.index) + ": " + *x.failure);
          for (auto& d : x.dropped) dropped.push_back(d);
          visual_relations.insert(visual_relations.end(), x.relations.begin(), x.relations.end());
        }
      }
      auto built = build_paper_graph(text_relations, visual_relations, figures, entities);
      if (!built) {
        skipped[i] = name + ": no figure-grounded relation";
        return;
      }
      std::vector<std::string> kept;
      Json removed = Json::array();
      for (const auto& p : doc.paragraphs) {
        auto filtered = filter_sentences(p, visual_relations, *embedder_, config_.threshold);
        if (!filtered.removed.empty()) removed.push_back(Json{{"paragraph", p.index}, {"sentences", filtered.removed}});
        if (!filtered.text.empty()) kept.push_back(filtered.text);
      }
      WorkRecord r;
      r.sample_key = key;
      r.domain = Domain::SP;
      r.graph = std::move(built->graph);
      for (const auto& f : built->images) r.image_refs.push_back(f.image);
      r.context = join(kept, "\n\n");
      r.notes["removed_sentences"] = removed;
      r.notes["dropped_relations"] = dropped;
      r.notes["diagnostics"] = doc.diagnostics;
      results[i] = std::move(r);
    });
    std::vector<WorkRecord> records;
    Json skipped_json = Json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i]) records.push_back(std::move(*results[i]));
      else skipped_json.push_back(skipped[i]);
    }
    write_work_records(records, out);
    StageReport rep;
    rep.input = static_cast<long>(paper_dirs.size());
    rep.output = static_cast<long>(records.size());
    rep.details = Json{{"skipped", skipped_json}};
    return rep;
  });
}

StageReport Pipeline::augment(const std::vector<fs::path>& in, const fs::path& out) {
  return run_stage("augment", in, {out}, [&] {
    std::vector<WorkRecord> records;
    std::set<std::string> keys;
    for (const auto& f : in)
      for (auto& r : read_work_records(f)) {
        if (!keys.insert(r.sample_key).second) throw UserError("sample key " + r.sample_key + " appears twice");
        records.push_back(std::move(r));
      }
    AugmentOptions options;
    options.max_nodes_per_image = config_.max_nodes_per_image;
    options.min_categories = config_.min_categories;
    options.max_categories = config_.max_categories;
    options.model_id = config_.generation_model;
    std::vector<bool> keep(records.size(), true);
    parallel_for(records.size(), config_.concurrency, [&](std::size_t i) {
      auto& r = records[i];
      if (r.domain == Domain::SP) return;
      Rng rng(derive_seed(config_.seed, "augment/" + r.sample_key));
      std::map<int, std::string> captions;
      if (r.notes.contains("captions"))
        for (std::size_t k = 0; k < r.notes["captions"].size(); ++k)
          captions[static_cast<int>(k)] = r.notes["captions"][k].get<std::string>();
      AugmentReport report;
      auto with_nodes = generate_text_nodes(r.graph, *gateway_, rng, options, report, r.sample_key, captions);
      r.graph = generate_text_edges(with_nodes, *gateway_, options, report, r.sample_key);
      r.notes["augment"] = Json{{"nodes_added", report.nodes_added},
                                {"edges_added", report.edges_added},
                                {"rejections", report.rejections}};
      keep[i] = r.graph.textual_count() > 0;
    });
    std::vector<WorkRecord> kept;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (keep[i]) kept.push_back(std::move(records[i]));
    write_work_records(kept, out);
    StageReport rep;
    rep.input = static_cast<long>(records.size());
    rep.output = static_cast<long>(kept.size());
    rep.details = Json{{"without_textual_nodes", rep.input - rep.output}};
    return rep;
  });
}

StageReport Pipeline::gen_context(const fs::path& in, const fs::path& out) {
  return run_stage("gen-context", {in}, {out}, [&] {
    auto records = read_work_records(in);
    std::vector<bool> keep(records.size(), true);
    ContextOptions options;
    options.model_id = config_.generation_model;
    parallel_for(records.size(), config_.concurrency, [&](std::size_t i) {
      auto& r = records[i];
      if (r.domain == Domain::SP) {
        keep[i] = r.context.has_value() && !r.context->empty();
        return;
      }
      Rng rng(derive_seed(config_.seed, "context/" + r.sample_key));
      std::vector<std::pair<std::string, ContextSubgraph>> views;
      if (r.domain == Domain::VF) {
        views.emplace_back(r.sample_key + "/all", extract_whole_context(r.graph));
      } else {
        const auto assignment = assign_cross_image_edges(r.graph, rng);
        for (int img = 0; img < r.graph.image_count; ++img)
          views.emplace_back(r.sample_key + "/img" + std::to_string(img),
                             extract_context_subgraph(r.graph, img, assignment));
      }
      std::vector<std::string> parts;
      Json styles = Json::array();
      for (const auto& [key, view] : views) {
        if (view.edge_indices.empty()) continue;
        const std::string& style = pick_style(rng);
        auto result = generate_context(r.graph, view, style, *gateway_, options, key);
        if (!result.text) {
          keep[i] = false;
          r.notes["context_failure"] = key;
          return;
        }
        styles.push_back(style);
        parts.push_back(*result.text);
      }
      keep[i] = !parts.empty();
      r.context = join(parts, "\n\n");
      r.notes["context_styles"] = styles;
    });
    std::vector<WorkRecord> kept;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (keep[i]) kept.push_back(std::move(records[i]));
    write_work_records(kept, out);
    StageReport rep;
    rep.input = static_cast<long>(records.size());
    rep.output = static_cast<long>(kept.size());
    return rep;
  });
}

StageReport Pipeline::gen_qa(const fs::path& in, const fs::path& out) {
  return run_stage("gen-qa", {in}, {out}, [&] {
    auto records = read_work_records(in);
    parallel_for(records.size(), config_.concurrency, [&](std::size_t i) {
      auto& r = records[i];
      Rng rng(derive_seed(config_.seed, "qa/" + r.sample_key));
      r.qa = generate_qa_for_sample(r.graph, *gateway_, rng, qa_options(r.domain), r.sample_key);
    });
    std::vector<WorkRecord> kept;
    long qa = 0;
    std::map<int, long> hops;
    for (auto& r : records) {
      if (r.qa.empty()) continue;
      qa += static_cast<long>(r.qa.size());
      for (const auto& q : r.qa) ++hops[q.hop_count];
      kept.push_back(std::move(r));
    }
    write_work_records(kept, out);
    Json by_hop = Json::object();
    for (const auto& [h, n] : hops) by_hop[std::to_string(h)] = n;
    StageReport rep;
    rep.input = static_cast<long>(records.size());
    rep.output = static_cast<long>(kept.size());
    rep.details = Json{{"qa", qa}, {"qa_by_hop", by_hop}};
    return rep;
  });
}

StageReport Pipeline::filter(const fs::path& in, const fs::path& out, const fs::path& ledger_path) {
  return run_stage("filter", {in}, {out, ledger_path}, [&] {
    auto records = read_work_records(in);
    std::vector<FilterOutcome> outcomes(records.size());
    parallel_for(records.size(), config_.concurrency, [&](std::size_t i) {
      auto& r = records[i];
      std::vector<FilterItem> items;
      for (std::size_t k = 0; k < r.qa.size(); ++k)
        items.push_back({r.sample_key + ":" + std::to_string(k), r.qa[k], &r.graph});
      outcomes[i] = run_filters(std::move(items), *gateway_, config_.judges);
    });
    FilterLedger total;
    std::string ledger_lines;
    std::vector<WorkRecord> kept;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& l = outcomes[i].ledger;
      total.input += l.input;
      total.failed_mentions += l.failed_mentions;
      total.failed_modality += l.failed_modality;
      total.undetermined += l.undetermined;
      total.failed_cot += l.failed_cot;
      total.survivors += l.survivors;
      for (const auto& e : l.entries) ledger_lines += e.dump() + "\n";
      if (outcomes[i].survivors.empty()) continue;
      records[i].qa.clear();
      for (auto& item : outcomes[i].survivors) records[i].qa.push_back(std::move(item.record));
      kept.push_back(std::move(records[i]));
    }
    write_work_records(kept, out);
    write_file_atomic(ledger_path, ledger_lines);
    StageReport rep;
    rep.input = static_cast<long>(records.size());
    rep.output = static_cast<long>(kept.size());
    rep.details = to_json(total);
    return rep;
  });
}

StageReport Pipeline::package(const fs::path& in, const fs::path& dataset) {
  const fs::path conversations = sibling(dataset, "train_conversations.jsonl");
  const fs::path test_items = sibling(dataset, "test_items.jsonl");
  return run_stage("package", {in}, {dataset, manifest_path_for(dataset), conversations, test_items}, [&] {
    auto records = read_work_records(in);
    std::vector<DatasetSample> samples;
    std::set<std::string> ids;
    long duplicates = 0;
    for (auto& r : records) {
      DatasetSample s;
      s.domain = r.domain;
      s.image_refs = r.image_refs;
      s.context = r.context.value_or("");
      s.qa = std::move(r.qa);
      s.sample_id = compute_sample_id(s.domain, s.image_refs, s.context);
      if (!ids.insert(s.sample_id).second) {
        ++duplicates;
        continue;
      }
      Rng rng(derive_seed(config_.seed, "split/" + s.sample_id));
      s.split = rng.uniform01() < config_.test_fraction ? Split::Test : Split::Train;
      if (auto problems = validate_sample(s); !problems.empty())
        throw UserError("sample " + r.sample_key + " fails validation: " + join(problems, "; "));
      samples.push_back(std::move(s));
    }
    const Json manifest = write_dataset(samples, dataset);
    std::string conv, items;
    for (const auto& s : samples)
      if (s.split == Split::Train)
        for (const auto& c : to_training_format(s)) conv += c.dump() + "\n";
    for (const auto& it : eval_items(samples))
      items += Json{{"id", it.id},
                    {"domain", std::string(to_string(it.domain))},
                    {"hop_count", it.hop_count},
                    {"question", it.question},
                    {"gold", it.gold}}
                   .dump() +
               "\n";
    write_file_atomic(conversations, conv);
    write_file_atomic(test_items, items);
    StageReport rep;
    rep.input = static_cast<long>(records.size());
    rep.output = static_cast<long>(samples.size());
    rep.details = Json{{"manifest", manifest}, {"duplicates", duplicates}};
    return rep;
  });
}

StageReport Pipeline::stats(const fs::path& dataset, const fs::path& out_json) {
  fs::path out_txt = out_json;
  out_txt.replace_extension(".txt");
  return run_stage("stats", {dataset}, {out_json, out_txt}, [&] {
    const auto samples = read_dataset(dataset);
    const auto table = compute_stats(samples);
    const Json j = to_json(table);
    write_file_atomic(out_json, j.dump(2) + "\n");
    write_file_atomic(out_txt, format_stats_table(table));
    StageReport rep;
    rep.input = static_cast<long>(samples.size());
    rep.output = static_cast<long>(table.size());
    rep.details = j;
    return rep;
  });
}

StageReport Pipeline::audit_export(const fs::path& dataset, const fs::path& out_dir, long limit) {
  const fs::path index = out_dir / "index.json";
  return run_stage("audit-export", {dataset}, {index}, [&] {
    const auto samples = read_dataset(dataset);
    fs::create_directories(out_dir);
    Json listed = Json::array();
    for (const auto& s : samples) {
      if (s.split != Split::Test) continue;
      if (limit > 0 && static_cast<long>(listed.size()) >= limit) break;
      Json qa = Json::array();
      for (const auto& r : s.qa) {
        const std::string last = r.cot_sentences.empty() ? "" : r.cot_sentences.back();
        qa.push_back(Json{{"question", r.question},
                          {"answer", r.answer},
                          {"cot", r.cot_sentences},
                          {"hop_count", r.hop_count},
                          {"subgraph", to_json(r.chain)},
                          {"automatic_checks",
                           {{"intermediate_mentions", mentions_intermediate(r.question, r.chain) ? "fail" : "pass"},
                            {"cot_sentences", r.cot_sentences.size()},
                            {"answer_in_last_sentence",
                             contains_phrase(normalize_answer(last), normalize_answer(r.answer))}}},
                          {"rater",
                           {{"answer_correct", nullptr},
                            {"requires_both_modalities", nullptr},
                            {"reasoning_faithful", nullptr},
                            {"question_clear", nullptr},
                            {"notes", ""}}}});
      }
      const Json bundle{{"sample_id", s.sample_id},
                        {"domain", std::string(to_string(s.domain))},
                        {"images", s.image_refs},
                        {"context", s.context},
                        {"qa", qa}};
      write_file_atomic(out_dir / (s.sample_id + ".json"), bundle.dump(2) + "\n");
      listed.push_back(s.sample_id);
    }
    write_file_atomic(index, Json{{"samples", listed}}.dump(2) + "\n");
    StageReport rep;
    rep.input = static_cast<long>(samples.size());
    rep.output = static_cast<long>(listed.size());
    return rep;
  });
}

std::vector<StageReport> Pipeline::run_all() {
  const auto& in = config_.inputs;
  if (in.scenes.empty() && in.videos.empty() && in.papers.empty())
    throw UserError("the configuration lists no inputs");
  fs::create_directories(work_dir_);
  auto paths = [](const std::vector<std::string>& v) { return std::vector<fs::path>(v.begin(), v.end()); };
  std::vector<StageReport> reports;
  std::vector<fs::path> graphs;
  if (!in.scenes.empty()) {
    graphs.push_back(work_dir_ / "graphs_ni.jsonl");
    reports.push_back(ingest_scene(paths(in.scenes), graphs.back()));
  }
  if (!in.videos.empty()) {
    graphs.push_back(work_dir_ / "graphs_vf.jsonl");
    reports.push_back(ingest_video(paths(in.videos), graphs.back()));
  }
  if (!in.papers.empty()) {
    graphs.push_back(work_dir_ / "graphs_sp.jsonl");
    reports.push_back(ingest_paper(paths(in.papers), graphs.back()));
  }
  reports.push_back(augment(graphs, work_dir_ / "augmented.jsonl"));
  reports.push_back(gen_context(work_dir_ / "augmented.jsonl", work_dir_ / "contexts.jsonl"));
  reports.push_back(gen_qa(work_dir_ / "contexts.jsonl", work_dir_ / "qa.jsonl"));
  reports.push_back(filter(work_dir_ / "qa.jsonl", work_dir_ / "filtered.jsonl", work_dir_ / "filter_ledger.jsonl"));
  reports.push_back(package(work_dir_ / "filtered.jsonl", work_dir_ / "dataset.jsonl"));
  reports.push_back(stats(work_dir_ / "dataset.jsonl", work_dir_ / "stats.json"));
  return reports;
}

}  // namespace hopgraph
