#include <CLI11.hpp>

#include <iostream>

#include "hopgraph/dataset.hpp"
#include "hopgraph/evalkit.hpp"
#include "hopgraph/pipeline.hpp"
#include "hopgraph/text.hpp"

using namespace hopgraph;

namespace {

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void print_report(const StageReport& r) {
  std::cout << r.stage << ": " << r.input << " in, " << r.output << " out"
            << (r.up_to_date ? " (up to date)" : "") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build multimodal multi-hop QA datasets from scene graphs, videos and papers"};
  app.require_subcommand(1);
  std::string config_path, work_dir = "work";
  app.add_option("--config", config_path, "pipeline configuration (JSON)");
  app.add_option("--work-dir", work_dir, "directory for logs and intermediate files");

  std::vector<std::string> inputs;
  std::string in, out, ledger, dataset, predictions, mode = "direct";
  long limit = 0;

  auto* scene = app.add_subcommand("ingest-scene", "sample image sets and merge their scene graphs");
  scene->add_option("inputs", inputs, "scene-graph JSON files")->required()->check(CLI::ExistingFile);
  scene->add_option("-o,--out", out)->required();

  auto* video = app.add_subcommand("ingest-video", "pick keyframes and convert captions to graphs");
  video->add_option("inputs", inputs, "video description JSON files")->required()->check(CLI::ExistingFile);
  video->add_option("-o,--out", out)->required();

  auto* paper = app.add_subcommand("ingest-paper", "extract entities and relations from paper sources");
  paper->add_option("inputs", inputs, "directories holding main.tex and figures.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  paper->add_option("-o,--out", out)->required();

  auto* augment = app.add_subcommand("augment", "add textual nodes and edges");
  augment->add_option("inputs", inputs, "graph JSONL files")->required()->check(CLI::ExistingFile);
  augment->add_option("-o,--out", out)->required();

  auto* context = app.add_subcommand("gen-context", "write the textual context of each sample");
  context->add_option("-i,--in", in)->required()->check(CLI::ExistingFile);
  context->add_option("-o,--out", out)->required();

  auto* qa = app.add_subcommand("gen-qa", "sample reasoning chains and write questions");
  qa->add_option("-i,--in", in)->required()->check(CLI::ExistingFile);
  qa->add_option("-o,--out", out)->required();

  auto* filter = app.add_subcommand("filter", "drop leaking, unimodal or unsupported QA pairs");
  filter->add_option("-i,--in", in)->required()->check(CLI::ExistingFile);
  filter->add_option("-o,--out", out)->required();
  filter->add_option("--ledger", ledger, "per-item filter verdicts (JSONL)");

  auto* package = app.add_subcommand("package", "assign splits and write the dataset");
  package->add_option("-i,--in", in)->required()->check(CLI::ExistingFile);
  package->add_option("-o,--out", out)->required();

  auto* stats = app.add_subcommand("stats", "dataset statistics per domain and split");
  stats->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  stats->add_option("-o,--out", out)->required();

  auto* eval = app.add_subcommand("eval", "score model responses on the test split");
  eval->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  eval->add_option("--predictions", predictions)->required()->check(CLI::ExistingFile);
  eval->add_option("--mode", mode)->check(CLI::IsMember({"direct", "cot"}));
  eval->add_option("-o,--out", out, "write the scores as JSON");

  auto* audit = app.add_subcommand("audit-export", "write audit bundles for human raters");
  audit->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  audit->add_option("-o,--out", out)->required();
  audit->add_option("--limit", limit, "maximum number of samples (0 for all)");

  auto* run_all = app.add_subcommand("run-all", "every stage from the configured inputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (eval->parsed()) {
      const auto items = eval_items(read_dataset(dataset));
      const auto result = evaluate_run(items, read_predictions(read_file(predictions)),
                                       eval_mode_from_string(mode));
      if (!out.empty()) write_file_atomic(out, to_json(result).dump(2) + "\n");
      std::cout << format_eval_table(result);
      return 0;
    }

    PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    Pipeline pipeline(std::move(config), work_dir);
    if (scene->parsed()) print_report(pipeline.ingest_scene(as_paths(inputs), out));
    if (video->parsed()) print_report(pipeline.ingest_video(as_paths(inputs), out));
    if (paper->parsed()) print_report(pipeline.ingest_paper(as_paths(inputs), out));
    if (augment->parsed()) print_report(pipeline.augment(as_paths(inputs), out));
    if (context->parsed()) print_report(pipeline.gen_context(in, out));
    if (qa->parsed()) print_report(pipeline.gen_qa(in, out));
    if (filter->parsed())
      print_report(pipeline.filter(in, out, ledger.empty() ? fs::path(out).string() + ".ledger.jsonl" : ledger));
    if (package->parsed()) print_report(pipeline.package(in, out));
    if (stats->parsed()) {
      print_report(pipeline.stats(dataset, out));
      std::cout << read_file(fs::path(out).replace_extension(".txt"));
    }
    if (audit->parsed()) print_report(pipeline.audit_export(dataset, out, limit));
    if (run_all->parsed())
      for (const auto& r : pipeline.run_all()) print_report(r);
    return 0;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return 2;
  } catch (const EmbeddingError& e) {
    std::cerr << "embedding error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
