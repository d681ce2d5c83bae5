// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "corpus/types.hpp"

namespace depscreen {

struct LabelEntry {
  int phq8_score = 0;
  Label label = Label::kNotDepressed;
};

// AVEC-style label table: Participant_ID, PHQ8_Binary, PHQ8_Score. The
// binary column is stored as read, even when it disagrees with the score.
using LabelTable = std::map<int, LabelEntry>;

LabelTable read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelTable& labels);

std::vector<Utterance> read_transcript(const std::filesystem::path& path);
void write_transcript(const std::filesystem::path& path, const std::vector<Utterance>& utterances);

std::vector<FauFrame> read_fau_table(const std::filesystem::path& path);
void write_fau_table(const std::filesystem::path& path, const std::vector<FauFrame>& frames);

struct CorpusPaths {
  std::filesystem::path dir, audio, transcript, fau;
};
CorpusPaths interview_paths(const std::filesystem::path& root, int id);

struct LoadOptions {
  bool require_label = true;
};

Interview load_interview(const std::filesystem::path& root, int id, const LoadOptions& options = {});
void write_interview(const std::filesystem::path& root, const Interview& interview);

// Ids of every <id>_P directory under root, ascending.
std::vector<int> list_interview_ids(const std::filesystem::path& root);

std::string format_double(double v);
double parse_double(std::string_view s, std::string_view context);
int parse_int(std::string_view s, std::string_view context);

}  // namespace depscreen
