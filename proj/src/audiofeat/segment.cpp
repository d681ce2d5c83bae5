// SPDX-License-Identifier: Apache-2.0
#include "audiofeat/segment.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace depscreen {

void PatientTimeline::append(std::size_t source_start, std::size_t length) {
  if (length == 0) return;
  pieces_.push_back(Piece{source_start, total_, length});
  total_ += length;
}

double PatientTimeline::source_seconds(double concat_sample) const {
  if (pieces_.empty()) return 0.0;
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), concat_sample,
                             [](double pos, const Piece& p) { return pos < static_cast<double>(p.concat_start); });
  const Piece& p = it == pieces_.begin() ? pieces_.front() : *std::prev(it);
  const double within = concat_sample - static_cast<double>(p.concat_start);
  return (static_cast<double>(p.source_start) + within) / kSampleRate;
}

AudioSegmentation segment_patient_audio(const Interview& interview) {
  AudioSegmentation out;
  const std::size_t n = interview.audio.size();
  bool any_patient = false;
  for (const auto& u : interview.utterances) {
    if (!is_patient(u.speaker)) continue;
    any_patient = true;
    const auto a = std::min(n, static_cast<std::size_t>(std::max(0LL, std::llround(u.start_time * kSampleRate))));
    const auto b = std::min(n, static_cast<std::size_t>(std::max(0LL, std::llround(u.stop_time * kSampleRate))));
    if (b > a) out.timeline.append(a, b - a);
  }
  if (!any_patient) fail(ErrorCode::kNoPatientSpeech, "interview " + std::to_string(interview.id));

  const std::size_t total = out.timeline.total_samples();
  const std::size_t n_segments = total / kSegmentSamples;
  out.discarded_samples = total - n_segments * kSegmentSamples;
  out.segments.assign(n_segments, Waveform(kSegmentSamples));
  for (const auto& piece : out.timeline.pieces()) {
    for (std::size_t i = 0; i < piece.length; ++i) {
      const std::size_t pos = piece.concat_start + i;
      const std::size_t seg = pos / kSegmentSamples;
      if (seg >= n_segments) break;
      out.segments[seg][pos % kSegmentSamples] = interview.audio[piece.source_start + i];
    }
  }
  return out;
}

}  // namespace depscreen
