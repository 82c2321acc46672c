#include <doctest.h>

#include <cmath>

#include "hopgraph/ingest_paper.hpp"
#include "hopgraph/ingest_scene.hpp"
#include "hopgraph/ingest_video.hpp"
#include "hopgraph/providers.hpp"
#include "hopgraph/text.hpp"
#include "support.hpp"

using namespace hopgraph;

namespace {

GatewayOptions no_wait() {
  GatewayOptions o;
  o.sleep = [](std::chrono::milliseconds) {};
  return o;
}

const char* kMalformed[] = {"bad_non_integer_id.json", "bad_non_contiguous_ids.json", "bad_unresolved_target.json",
                            "bad_scene_count.json", "bad_inverse_relation.json"};

SceneGraphBundle load_bundle(const std::string& name) {
  return bundle_from_json(Json::parse(read_file(hgtest::fixture("bundles/" + name))));
}

}  // namespace

TEST_SUITE("ingest_scene") {
  TEST_CASE("scene files parse in file order with dangling targets reported") {
    const auto r = parse_scene_json(R"({"im1": {"width": 5, "objects": {
        "7": {"name": "cup", "attributes": ["red"], "relations": [{"name": "on", "object": "3"}]},
        "3": {"name": "table", "attributes": [], "relations": [{"name": "under", "object": "99"}]}}}})");
    REQUIRE(r.scenes.size() == 1);
    CHECK(r.scenes[0].objects[0].id == "7");
    CHECK(r.scenes[0].objects[1].id == "3");
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].find("99") != std::string::npos);
    const auto s = to_scene_graph(r.scenes[0]);
    CHECK(s.relations.size() == 1);
    CHECK_THROWS_AS(parse_scene_json("{not json"), UserError);
    CHECK_THROWS_AS(parse_scene_json(R"({"im1": {"objects": {"1": {"attributes": []}}}})"), UserError);
  }

  TEST_CASE("the e2e fixture parses cleanly") {
    const auto r = parse_scene_file(hgtest::fixture("e2e/scenes.json").string());
    CHECK(r.scenes.size() == 6);
    CHECK(r.diagnostics.empty());
  }

  TEST_CASE("image set sizes are clamped to the catalog") {
    Rng rng(3);
    for (const auto& set : sample_image_sets(3, rng, 200, 1, 6)) {
      CHECK(set.size() >= 1);
      CHECK(set.size() <= 3);
      std::set<std::size_t> distinct(set.begin(), set.end());
      CHECK(distinct.size() == set.size());
      for (auto i : set) CHECK(i < 3);
    }
    std::set<std::size_t> sizes;
    Rng rng2(4);
    for (const auto& set : sample_image_sets(10, rng2, 500, 2, 4)) sizes.insert(set.size());
    CHECK(sizes == std::set<std::size_t>{2, 3, 4});
    CHECK_THROWS_AS(sample_image_sets(1, rng, 1, 2, 6), UserError);
    CHECK_THROWS_AS(sample_image_sets(0, rng, 1, 1, 6), UserError);
  }
}

TEST_SUITE("ingest_video") {
  TEST_CASE("frame selection follows the hand argmax") {
    // caption 0 covers t in [0, 2] with vector (1, 0):
    //   t0 (0, 1) -> 0, t1 (1, 1) -> 0.707, t2 (1, 0.2) -> 0.981; t3 (1, 0) lies outside
    // caption 1 covers [2, 3] with vector (0, 1):
    //   t2 -> 0.196, t3 -> 0
    const std::vector<VideoFrame> frames = {{0, "f0"}, {1, "f1"}, {2, "f2"}, {3, "f3"}};
    const std::vector<Vector> fv = {{0, 1}, {1, 1}, {1, 0.2}, {1, 0}};
    const std::vector<TimedCaption> caps = {{"a", 0, 2, 0}, {"b", 2, 3, 1}};
    const std::vector<Vector> cv = {{1, 0}, {0, 1}};
    const auto choice = select_frames(frames, fv, caps, cv);
    REQUIRE(choice.size() == 2);
    CHECK(choice[0].frame == 2);
    CHECK(choice[0].similarity == doctest::Approx(1 / std::sqrt(1.04)));
    CHECK(choice[1].frame == 2);
    CHECK(choice[1].similarity == doctest::Approx(0.2 / std::sqrt(1.04)));
  }

  TEST_CASE("ties go to the earliest timestamp whatever the list order") {
    const std::vector<VideoFrame> frames = {{5, "late"}, {4, "early"}, {6, "later"}};
    const std::vector<Vector> fv = {{1, 1}, {1, 1}, {1, 1}};
    const std::vector<TimedCaption> caps = {{"a", 4, 6, 0}};
    const auto choice = select_frames(frames, fv, caps, {{1, 0}});
    CHECK(choice[0].frame == 1);
  }

  TEST_CASE("a caption window without frames is an error") {
    const std::vector<VideoFrame> frames = {{0, "f0"}};
    CHECK_THROWS_AS(select_frames(frames, {{1, 0}}, {{"a", 2, 3, 0}}, {{1, 0}}), UserError);
    CHECK_THROWS_AS(select_frames(frames, {{1, 0, 0}}, {{"a", 0, 3, 0}}, {{1, 0}}), UserError);
  }

  TEST_CASE("candidate timestamps") {
    CHECK(candidate_timestamps(2, 4) == std::vector<double>{2, 3, 4});
    CHECK(candidate_timestamps(0, 1, 2) == std::vector<double>{0, 0.5, 1});
  }

  TEST_CASE("every malformed bundle is rejected and the valid one converts") {
    const auto good = load_bundle("valid.json");
    CHECK(validate_bundle(good, 2).empty());
    for (const char* name : kMalformed) CHECK_MESSAGE(!validate_bundle(load_bundle(name), 2).empty(), name);
    const auto g = bundle_to_graph(good, 2);
    CHECK(validate_graph(g).empty());
    CHECK(g.image_count == 2);
    CHECK(g.domain == Domain::VF);
    CHECK(g.visual_count() == 3);
    CHECK(to_json(bundle_from_json(to_json(good))) == to_json(good));
  }

  TEST_CASE("captions to graph regenerates once") {
    const std::vector<TimedCaption> caps = {{"A woman holds a bottle", 0, 3, 0}, {"A cat sleeps", 3, 6, 1}};
    auto p = std::make_shared<ScriptedProvider>();
    p->push(read_file(hgtest::fixture("bundles/bad_unresolved_target.json")));
    p->push(read_file(hgtest::fixture("bundles/valid.json")));
    Gateway gw(p, TemplateRegistry::builtin(), no_wait());
    auto r = captions_to_graph(caps, gw, {}, "v");
    REQUIRE(r.graph);
    CHECK(p->call_count() == 2);
    CHECK(annotate_captions(caps).find("Scene 2") != std::string::npos);

    auto q = std::make_shared<ScriptedProvider>();
    q->push(read_file(hgtest::fixture("bundles/bad_scene_count.json")));
    q->push(read_file(hgtest::fixture("bundles/bad_inverse_relation.json")));
    Gateway gw2(q, TemplateRegistry::builtin(), no_wait());
    auto r2 = captions_to_graph(caps, gw2, {}, "v");
    CHECK_FALSE(r2.graph);
    CHECK_FALSE(r2.problems.empty());
  }

  TEST_CASE("video files") {
    const auto v = parse_video_json(read_file(hgtest::fixture("e2e/video_kitchen01.json")));
    CHECK(v.captions.size() == 3);
    CHECK(v.captions[2].scene_index == 2);
    CHECK_THROWS_AS(parse_video_json(R"({"video_id": "x", "captions": [{"text": "a", "start": 3, "end": 1}], "frames": []})"),
                    UserError);
  }
}

TEST_SUITE("ingest_paper") {
  TEST_CASE("segmentation strips comments and resolves figure references") {
    const auto doc = segment_paragraphs(read_file(hgtest::fixture("paper_filter/main.tex")));
    REQUIRE(doc.paragraphs.size() == 2);
    CHECK(doc.diagnostics.empty());
    REQUIRE(doc.floats.size() == 1);
    CHECK(doc.floats[0].label == "Figure 1");
    const auto& plain = doc.paragraphs[0];
    CHECK(plain.kind == ParagraphKind::Plain);
    CHECK(plain.text.find("trained separately") == std::string::npos);
    CHECK(plain.sentences.size() == 2);
    const auto& fig = doc.paragraphs[1];
    CHECK(fig.kind == ParagraphKind::FigureReferencing);
    CHECK(fig.figure_refs == std::vector<std::string>{"Figure 1"});
    CHECK(fig.sentences == std::vector<std::string>{"As shown in Figure 1, the probe peaks at layer six.",
                                                    "The probe drops sharply after layer nine.",
                                                    "Training took two hours on one GPU.",
                                                    "We thank the reviewers for their comments."});
    CHECK(strip_tex_comments("50\\% done % gone") == "50\\% done ");
  }

  TEST_CASE("sentence removal follows the cosine table") {
    const auto doc = segment_paragraphs(read_file(hgtest::fixture("paper_filter/main.tex")));
    const auto& para = doc.paragraphs[1];
    REQUIRE(para.sentences.size() == 4);
    RecordedEmbeddings rec;
    // relations: a = (1, 0, 0), b = (0, 1, 0)
    rec.add(EmbedKind::Sentence, "probe peaks at layer six", {1, 0, 0});
    rec.add(EmbedKind::Sentence, "probe drops after layer nine", {0, 1, 0});
    // max cosine per sentence: 0.8, 0.6 (exactly the threshold), 1/sqrt(5), 0
    const std::vector<Vector> sv = {{3, 4, 0}, {3, 0, 4}, {1, 0, 2}, {0, 0, 1}};
    for (std::size_t i = 0; i < 4; ++i) rec.add(EmbedKind::Sentence, para.sentences[i], sv[i]);
    std::vector<VisualRelation> rels(2);
    rels[0].description = "probe peaks at layer six";
    rels[1].description = "probe drops after layer nine";
    const auto r = filter_sentences(para, rels, rec, 0.6);
    CHECK(r.removed == std::vector<int>{0, 1});
    CHECK(r.retained == std::vector<int>{2, 3});
    REQUIRE(r.max_similarity.size() == 4);
    CHECK(r.max_similarity[0] == doctest::Approx(0.8));
    CHECK(r.max_similarity[1] == 0.6);
    CHECK(r.max_similarity[2] == doctest::Approx(1 / std::sqrt(5.0)));
    CHECK(r.max_similarity[3] == 0.0);
    CHECK(r.text == para.sentences[2] + " " + para.sentences[3]);
  }

  TEST_CASE("plain paragraphs come back byte-identical without embedding calls") {
    const auto doc = segment_paragraphs(read_file(hgtest::fixture("paper_filter/main.tex")));
    RecordedEmbeddings empty;  // any lookup would throw
    std::vector<VisualRelation> rels(1);
    rels[0].description = "anything";
    const auto r = filter_sentences(doc.paragraphs[0], rels, empty, 0.6);
    CHECK(r.text == doc.paragraphs[0].text);
    CHECK(r.removed.empty());
    CHECK(r.max_similarity.empty());
    CHECK(filter_sentences(doc.paragraphs[1], {}, empty, 0.6).text == doc.paragraphs[1].text);
  }

  TEST_CASE("figure manifest and graph construction") {
    const auto figs = parse_figure_manifest(read_file(hgtest::fixture("paper_filter/figures.json")));
    REQUIRE(figs.size() == 1);
    CHECK(figs[0].label == "Figure 1");
    VisualRelation v{"probe", "layer six", "peaks at", "Figure 1", {0}, 1};
    TextRelation t{"probe", "encoder", "reads", 0};
    const auto pg = build_paper_graph({t}, {v}, figs, {"probe", "layer six", "encoder"});
    REQUIRE(pg);
    CHECK(validate_graph(pg->graph).empty());
    CHECK(pg->graph.domain == Domain::SP);
    CHECK(pg->graph.visual_count() == 2);
    CHECK(pg->graph.textual_count() == 1);
    CHECK(image_reference(pg->graph, 0) == "Figure 1");
    CHECK_FALSE(build_paper_graph({t}, {}, figs, {"probe", "encoder"}));
    CHECK_THROWS_AS(build_paper_graph({t}, {v}, figs, {"probe", "encoder"}), UserError);
  }
}
