// SPDX-License-Identifier: Apache-2.0
#include "corpus/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "corpus/wav.hpp"

namespace fs = std::filesystem;

namespace depscreen {

std::string_view speaker_name(Speaker s) {
  switch (s) {
    case Speaker::kEllie: return "Ellie";
    case Speaker::kParticipant: return "Participant";
    case Speaker::kTherapist: return "Therapist";
    case Speaker::kPatient: return "Patient";
  }
  return "?";
}

std::optional<Speaker> parse_speaker(std::string_view name) {
  if (name == "Ellie") return Speaker::kEllie;
  if (name == "Participant") return Speaker::kParticipant;
  if (name == "Therapist") return Speaker::kTherapist;
  if (name == "Patient") return Speaker::kPatient;
  return std::nullopt;
}

std::vector<std::string> validate_interview(const Interview& iv) {
  std::vector<std::string> problems;
  const double duration = iv.duration_seconds();
  if (iv.phq8_score && (*iv.phq8_score < 0 || *iv.phq8_score > 24)) {
    problems.push_back("phq8 score out of range");
  }
  if (iv.phq8_score.has_value() != iv.label.has_value()) problems.push_back("score/label presence mismatch");
  if (iv.phq8_score && iv.label && label_for_score(*iv.phq8_score) != *iv.label) {
    problems.push_back("label disagrees with phq8 cutoff");
  }
  double prev_stop = 0.0;
  for (std::size_t i = 0; i < iv.utterances.size(); ++i) {
    const auto& u = iv.utterances[i];
    if (!(u.start_time < u.stop_time)) problems.push_back("utterance " + std::to_string(i) + " has start >= stop");
    if (u.start_time < 0.0 || u.stop_time > duration + 1e-9) {
      problems.push_back("utterance " + std::to_string(i) + " outside audio");
    }
    if (i > 0 && u.start_time < prev_stop - 1e-9) {
      problems.push_back("utterance " + std::to_string(i) + " overlaps or is out of order");
    }
    prev_stop = u.stop_time;
  }
  const double expected_frames = kFauFrameRate * duration;
  if (std::abs(static_cast<double>(iv.fau_track.size()) - expected_frames) > 30.0) {
    problems.push_back("fau track length " + std::to_string(iv.fau_track.size()) + " vs expected " +
                       std::to_string(expected_frames));
  }
  for (const auto& f : iv.fau_track) {
    for (auto p : f.presences) {
      if (p > 1) {
        problems.push_back("non-binary presence flag");
        return problems;
      }
    }
  }
  return problems;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view context) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    fail(ErrorCode::kMalformedCsv, std::string(context) + ": bad number '" + t + "'");
  }
  return v;
}

int parse_int(std::string_view s, std::string_view context) {
  const double v = parse_double(s, context);
  if (v != std::floor(v)) fail(ErrorCode::kMalformedCsv, std::string(context) + ": expected integer");
  return static_cast<int>(v);
}

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name, const fs::path& path) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    fail(ErrorCode::kMalformedCsv, path.string() + ": missing column " + std::string(name));
  }
};

Table read_table(const fs::path& path, char delim) {
  if (!fs::exists(path)) fail(ErrorCode::kMissingFile, path.string());
  std::istringstream in(read_text_file(path));
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line, delim);
    for (auto& c : cells) c = trim(c);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      fail(ErrorCode::kMalformedCsv, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(t.header.size()) + " columns, got " +
                                         std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) fail(ErrorCode::kMalformedCsv, path.string() + ": empty file");
  return t;
}

}  // namespace

LabelTable read_labels(const fs::path& path) {
  const Table t = read_table(path, ',');
  const auto id_col = t.column("Participant_ID", path);
  const auto bin_col = t.column("PHQ8_Binary", path);
  const auto score_col = t.column("PHQ8_Score", path);
  LabelTable out;
  for (const auto& row : t.rows) {
    const int id = parse_int(row[id_col], path.string());
    const int bin = parse_int(row[bin_col], path.string());
    if (bin != 0 && bin != 1) fail(ErrorCode::kMalformedCsv, path.string() + ": PHQ8_Binary must be 0/1");
    out[id] = LabelEntry{parse_int(row[score_col], path.string()),
                         bin == 1 ? Label::kDepressed : Label::kNotDepressed};
  }
  return out;
}

void write_labels(const fs::path& path, const LabelTable& labels) {
  std::ostringstream out;
  out << "Participant_ID,PHQ8_Binary,PHQ8_Score\n";
  for (const auto& [id, e] : labels) out << id << ',' << label_bit(e.label) << ',' << e.phq8_score << '\n';
  write_file_atomic(path, out.str());
}

std::vector<Utterance> read_transcript(const fs::path& path) {
  const Table t = read_table(path, '\t');
  const auto start_col = t.column("start_time", path);
  const auto stop_col = t.column("stop_time", path);
  const auto speaker_col = t.column("speaker", path);
  const auto value_col = t.column("value", path);
  std::vector<Utterance> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    const auto speaker = parse_speaker(row[speaker_col]);
    if (!speaker) fail(ErrorCode::kUnknownSpeaker, path.string() + ": '" + row[speaker_col] + "'");
    out.push_back(Utterance{*speaker, parse_double(row[start_col], path.string()),
                            parse_double(row[stop_col], path.string()), row[value_col]});
  }
  return out;
}

void write_transcript(const fs::path& path, const std::vector<Utterance>& utterances) {
  std::ostringstream out;
  out << "start_time\tstop_time\tspeaker\tvalue\n";
  for (const auto& u : utterances) {
    out << format_double(u.start_time) << '\t' << format_double(u.stop_time) << '\t' << speaker_name(u.speaker)
        << '\t' << u.text << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<FauFrame> read_fau_table(const fs::path& path) {
  const Table t = read_table(path, ',');
  const auto ts_col = t.column("timestamp", path);
  std::array<std::size_t, kFauColumns> cols{};
  for (std::size_t j = 0; j < kFauColumns; ++j) cols[j] = t.column(kFauColumnNames[j], path);
  std::vector<FauFrame> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    FauFrame f;
    f.timestamp = parse_double(row[ts_col], path.string());
    for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
      f.intensities[j] = std::max(0.0, parse_double(row[cols[j]], path.string()));
    }
    for (std::size_t j = 0; j < kFauPresenceCount; ++j) {
      const double p = parse_double(row[cols[kFauIntensityCount + j]], path.string());
      if (p != 0.0 && p != 1.0) fail(ErrorCode::kMalformedCsv, path.string() + ": presence flag must be 0/1");
      f.presences[j] = static_cast<std::uint8_t>(p);
    }
    out.push_back(f);
  }
  return out;
}

void write_fau_table(const fs::path& path, const std::vector<FauFrame>& frames) {
  std::ostringstream out;
  out << "timestamp";
  for (auto name : kFauColumnNames) out << ',' << name;
  out << '\n';
  for (const auto& f : frames) {
    out << format_double(f.timestamp);
    for (double v : f.intensities) out << ',' << format_double(v);
    for (auto p : f.presences) out << ',' << static_cast<int>(p);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

CorpusPaths interview_paths(const fs::path& root, int id) {
  const std::string prefix = std::to_string(id);
  CorpusPaths p;
  p.dir = root / (prefix + "_P");
  p.audio = p.dir / (prefix + "_AUDIO.wav");
  p.transcript = p.dir / (prefix + "_TRANSCRIPT.csv");
  p.fau = p.dir / (prefix + "_FAU.csv");
  if (!fs::exists(p.fau) && fs::exists(p.dir / (prefix + "_CLNF_AUs.txt"))) {
    p.fau = p.dir / (prefix + "_CLNF_AUs.txt");
  }
  return p;
}

Interview load_interview(const fs::path& root, int id, const LoadOptions& options) {
  const CorpusPaths p = interview_paths(root, id);
  for (const auto& f : {p.audio, p.transcript, p.fau}) {
    if (!fs::exists(f)) fail(ErrorCode::kMissingFile, f.string());
  }
  Interview iv;
  iv.id = id;
  WavData wav = read_wav(p.audio);
  if (wav.sample_rate != kSampleRate) {
    fail(ErrorCode::kSampleRateMismatch,
         p.audio.string() + ": " + std::to_string(wav.sample_rate) + " Hz, expected 16000 Hz");
  }
  iv.audio = std::move(wav.samples);
  iv.utterances = read_transcript(p.transcript);
  iv.fau_track = read_fau_table(p.fau);

  const fs::path labels_path = root / "labels.csv";
  if (fs::exists(labels_path)) {
    const LabelTable labels = read_labels(labels_path);
    if (auto it = labels.find(id); it != labels.end()) {
      iv.phq8_score = it->second.phq8_score;
      iv.label = it->second.label;
    }
  } else if (options.require_label) {
    fail(ErrorCode::kMissingFile, labels_path.string());
  }
  if (options.require_label && !iv.label) {
    fail(ErrorCode::kMissingFile, labels_path.string() + ": no entry for interview " + std::to_string(id));
  }
  return iv;
}

void write_interview(const fs::path& root, const Interview& iv) {
  const CorpusPaths p = interview_paths(root, iv.id);
  fs::create_directories(p.dir);
  write_wav(p.audio, iv.audio, kSampleRate, WavEncoding::kFloat32);
  write_transcript(p.transcript, iv.utterances);
  write_fau_table(p.dir / (std::to_string(iv.id) + "_FAU.csv"), iv.fau_track);
}

std::vector<int> list_interview_ids(const fs::path& root) {
  std::vector<int> ids;
  if (!fs::exists(root)) fail(ErrorCode::kMissingFile, root.string());
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() < 3 || name.substr(name.size() - 2) != "_P") continue;
    const std::string num = name.substr(0, name.size() - 2);
    int id = 0;
    const auto res = std::from_chars(num.data(), num.data() + num.size(), id);
    if (res.ec == std::errc() && res.ptr == num.data() + num.size()) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace depscreen
