#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/embeddings.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/llm.hpp"

namespace hopgraph {

struct TimedCaption {
  std::string text;
  double start_s = 0;
  double end_s = 0;
  int scene_index = 0;  // position in the input list
};

// Video description file:
//   {"video_id": str,
//    "captions": [{"text": str, "start": s, "end": s}],
//    "frames":   [{"timestamp": s, "ref": "frames/v_0003.jpg"}]}
// Frames are extracted beforehand (one per second inside caption windows).
struct VideoFrame {
  double timestamp_s = 0;
  std::string ref;
};

struct VideoInput {
  std::string video_id;
  std::vector<TimedCaption> captions;
  std::vector<VideoFrame> frames;
};

// Throws UserError on malformed JSON, missing fields or start > end.
VideoInput parse_video_json(std::string_view text, std::string_view source = "<input>");

// Sampling times for candidate frames: start, start + 1/fps, ... up to end.
std::vector<double> candidate_timestamps(double start_s, double end_s, double fps = 1.0);

struct FrameChoice {
  std::size_t frame = 0;  // index into the frame list
  double similarity = 0;
};

// For each caption, the frame inside [start_s, end_s] whose embedding has
// the highest cosine with the caption embedding; ties go to the earliest
// timestamp. Throws UserError when a caption window holds no frame or
// dimensions differ.
std::vector<FrameChoice> select_frames(const std::vector<VideoFrame>& frames, const std::vector<Vector>& frame_vectors,
                                       const std::vector<TimedCaption>& captions,
                                       const std::vector<Vector>& caption_vectors);

struct BundleEntity {
  std::string id;
  std::string entity;
  std::vector<std::string> attributes;
};

struct BundleRelation {
  std::string source;
  std::optional<std::string> target;  // empty for a solo action
  std::string relation;
};

struct BundleScene {
  std::string scene;
  std::vector<BundleRelation> relations;
};

// Caption-to-graph payload: global entity inventory plus one relation list
// per caption.
struct SceneGraphBundle {
  std::vector<BundleEntity> entities;
  std::vector<BundleScene> scenes;
};

// Throws UserError when the document does not have the bundle shape.
SceneGraphBundle bundle_from_json(const Json& j);
Json to_json(const SceneGraphBundle& b);

// Problems with a bundle: ids that are not stringified integers or not the
// contiguous set 1..n, relations naming unknown ids, scene count differing
// from `caption_count`, duplicate or inverse-duplicate relations within a
// scene. Empty when valid.
std::vector<std::string> validate_bundle(const SceneGraphBundle& b, std::size_t caption_count);

// Video-frame graph: one image per caption, entities visual and anchored to
// the first scene they take part in, relations tagged with their scene.
// Entities without any relation are left out.
ContentGraph bundle_to_graph(const SceneGraphBundle& b, std::size_t caption_count);

// "Scene N (start-end s): caption" lines for the prompt.
std::string annotate_captions(const std::vector<TimedCaption>& captions);

struct CaptionGraphOptions {
  std::string model_id = "stub";
  double temperature = kGenerationTemperature;
};

struct CaptionGraphResult {
  std::optional<ContentGraph> graph;
  std::optional<SceneGraphBundle> bundle;
  std::vector<std::string> problems;  // of the last attempt
  std::vector<std::string> exchange_ids;
};

// One exchange over all captions, validated, with one regeneration.
CaptionGraphResult captions_to_graph(const std::vector<TimedCaption>& captions, Gateway& gateway,
                                     const CaptionGraphOptions& options, std::string_view key);

}  // namespace hopgraph
