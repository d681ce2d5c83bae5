// SPDX-License-Identifier: Apache-2.0
#include "audiofeat/mfcc.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "common/error.hpp"

namespace depscreen {
namespace {

// FFTW planning is not thread safe; execution on distinct buffers is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

int MfccConfig::window_samples() const {
  return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
}

int MfccConfig::hop_samples() const {
  const double hop = hop_ms() * sample_rate / 1000.0;
  if (std::abs(hop - std::round(hop)) > 1e-9 || hop < 1.0) {
    fail(ErrorCode::kInvalidArgument, "hop must be a positive whole number of samples");
  }
  return static_cast<int>(std::lround(hop));
}

void MfccConfig::validate() const {
  if (!(overlap_ms < window_ms) || overlap_ms < 0.0) fail(ErrorCode::kInvalidArgument, "overlap_ms must be < window_ms");
  if (n_mfcc < 1 || n_mfcc > n_mels) fail(ErrorCode::kInvalidArgument, "n_mfcc must be in [1, n_mels]");
  if (!(fmax_hz > fmin_hz) || fmax_hz > sample_rate / 2.0) fail(ErrorCode::kInvalidArgument, "bad mel frequency range");
  (void)hop_samples();
}

std::size_t MfccConfig::frame_count(std::size_t n) const {
  const auto w = static_cast<std::size_t>(window_samples());
  const auto h = static_cast<std::size_t>(hop_samples());
  if (framing == FramingPolicy::kPaddedCentered) return 1 + n / h;
  if (n < w) return 0;
  return 1 + (n - w) / h;
}

double hz_to_mel_slaney(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz_slaney(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

struct MfccExtractor::Plan {
  int n_fft = 0;
  fftw_plan plan = nullptr;
};

MfccExtractor::MfccExtractor(const MfccConfig& cfg) : cfg_(cfg), plan_(std::make_unique<Plan>()) {
  cfg_.validate();
  const int n_fft = cfg_.window_samples();
  const int n_bins = n_fft / 2 + 1;
  plan_->n_fft = n_fft;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    double* in = fftw_alloc_real(static_cast<std::size_t>(n_fft));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
    plan_->plan = fftw_plan_dft_r2c_1d(n_fft, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }

  // Periodic Hann.
  window_.resize(n_fft);
  for (int i = 0; i < n_fft; ++i) window_[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n_fft);

  // Triangular filters on the Slaney mel scale with area normalization.
  const int n_mels = cfg_.n_mels;
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  const double mel_lo = hz_to_mel_slaney(cfg_.fmin_hz);
  const double mel_hi = hz_to_mel_slaney(cfg_.fmax_hz);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz_slaney(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_mels + 1));
  }
  mel_ = RowMatrix::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    const double enorm = 2.0 / (hi - lo);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg_.sample_rate / n_fft;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      mel_(m, k) = std::max(0.0, std::min(up, down)) * enorm;
    }
  }

  dct_.resize(cfg_.n_mfcc, n_mels);
  for (int k = 0; k < cfg_.n_mfcc; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_mels) : std::sqrt(2.0 / n_mels);
    for (int n = 0; n < n_mels; ++n) dct_(k, n) = scale * std::cos(kPi * k * (2.0 * n + 1.0) / (2.0 * n_mels));
  }
}

MfccExtractor::~MfccExtractor() {
  if (plan_ && plan_->plan) {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan_->plan);
  }
}

MfccMatrix MfccExtractor::extract(std::span<const float> w) const {
  const int n_fft = plan_->n_fft;
  const int hop = cfg_.hop_samples();
  const int n_bins = n_fft / 2 + 1;
  const bool centered = cfg_.framing == FramingPolicy::kPaddedCentered;
  if (w.size() < static_cast<std::size_t>(n_fft)) {
    fail(ErrorCode::kTooShort, "waveform shorter than one analysis window");
  }
  const std::size_t n_frames = cfg_.frame_count(w.size());
  const long offset = centered ? n_fft / 2 : 0;

  double* in = fftw_alloc_real(static_cast<std::size_t>(n_fft));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
  Eigen::VectorXd magnitude(n_bins);
  RowMatrix log_mel(static_cast<Eigen::Index>(n_frames), cfg_.n_mels);
  const long n = static_cast<long>(w.size());
  for (std::size_t f = 0; f < n_frames; ++f) {
    const long start = static_cast<long>(f) * hop - offset;
    for (int i = 0; i < n_fft; ++i) {
      const long idx = start + i;
      const double x = (idx >= 0 && idx < n) ? w[static_cast<std::size_t>(idx)] : 0.0;
      in[i] = x * window_[i];
    }
    fftw_execute_dft_r2c(plan_->plan, in, out);
    for (int k = 0; k < n_bins; ++k) magnitude[k] = std::hypot(out[k][0], out[k][1]);
    const Eigen::VectorXd mel = mel_ * magnitude;
    for (int m = 0; m < cfg_.n_mels; ++m) {
      log_mel(static_cast<Eigen::Index>(f), m) = std::log10(std::max(mel[m], 1e-10));
    }
  }
  fftw_free(in);
  fftw_free(out);

  MfccMatrix result;
  result.values = log_mel * dct_.transpose();
  return result;
}

MfccMatrix extract_mfcc(std::span<const float> waveform, const MfccConfig& cfg) {
  const MfccExtractor extractor(cfg);
  return extractor.extract(waveform);
}

MfccMatrix cmvn(const MfccMatrix& m) {
  const auto rows = m.values.rows();
  if (rows < 2) fail(ErrorCode::kTooFewFrames, "cmvn needs at least two frames");
  MfccMatrix out;
  out.values.resize(rows, m.values.cols());
  for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
    const auto col = m.values.col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double scale = std::max(1.0, std::abs(mean));
    if (var <= (1e-12 * scale) * (1e-12 * scale)) {
      out.values.col(c).setZero();
    } else {
      out.values.col(c) = (col.array() - mean) / std::sqrt(var);
    }
  }
  return out;
}

}  // namespace depscreen
