// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corpus/types.hpp"

namespace depscreen {

inline constexpr int kSynthFirstId = 1000;
inline constexpr int kSynthExemplarFirstId = 2000;

// Phrases that only depressed synthetic patients say. The stub LLM backend
// keys on the same list.
const std::vector<std::string>& synthetic_marker_phrases();

// Deterministic desk-scale corpus in the real schema. Exactly
// round(n * depressed_fraction) interviews are depressed; ids start at 1000.
// Depressed patients get lower, flatter pitch, damped facial action units
// (lower means, less AU06/AU12 movement) and marker phrases in transcripts.
std::vector<Interview> synth_corpus(int n, double depressed_fraction, std::uint64_t seed);

// Four labeled interviews (two per class) for few-shot prompts, with ids
// disjoint from synth_corpus output.
std::vector<Interview> synth_exemplars(std::uint64_t seed);

// One interview; exposed for fixtures.
Interview synth_interview(int id, bool depressed, std::uint64_t seed, double min_patient_seconds = 42.0);

// Writes <root>/<id>_P/..., <root>/labels.csv, an empty
// <root>/error_manifest.json and <root>/exemplars/ (when exemplars given).
void write_corpus(const std::filesystem::path& root, const std::vector<Interview>& interviews,
                  const std::vector<Interview>& exemplars = {});

}  // namespace depscreen
