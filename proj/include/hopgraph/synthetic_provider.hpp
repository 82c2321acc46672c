#pragma once

#include <cstdint>
#include <string>

#include "hopgraph/llm.hpp"
#include "hopgraph/rng.hpp"

namespace hopgraph {

// Offline stand-in for a text model. Answers every builtin template with a
// well-formed completion derived from the request hints, so the pipeline can
// run end to end without network access. Output depends only on the request
// and the seed.
//
// Judges answer the gold answer with probability `judge_hit_rate`, decided by
// a hash of (seed, judge, modality, question).
class SyntheticProvider : public LlmProvider {
 public:
  explicit SyntheticProvider(std::uint64_t seed = 0, double judge_hit_rate = 0.3)
      : seed_(seed), judge_hit_rate_(judge_hit_rate) {}

  std::string complete(const CompletionRequest& request) override;

 private:
  std::string dispatch(const CompletionRequest& request, Rng& rng) const;

  std::uint64_t seed_;
  double judge_hit_rate_;
};

}  // namespace hopgraph
