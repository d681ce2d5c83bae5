// SPDX-License-Identifier: Apache-2.0
#include "audiofeat/augment.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <cstdio>
#include <mutex>

#include "common/error.hpp"
#include "common/random.hpp"

namespace depscreen {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kStftSize = 2048;
constexpr int kStftHop = 512;

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

using Spectrogram = std::vector<std::vector<std::complex<double>>>;  // [frame][bin]

struct StftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  StftPlans() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    double* r = fftw_alloc_real(kStftSize);
    fftw_complex* c = fftw_alloc_complex(kStftSize / 2 + 1);
    forward = fftw_plan_dft_r2c_1d(kStftSize, r, c, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(kStftSize, c, r, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
  }
  ~StftPlans() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
  }
};

const StftPlans& plans() {
  static const StftPlans p;
  return p;
}

std::vector<double> hann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

// Centered STFT with zero padding of n_fft/2 on both sides.
Spectrogram stft(std::span<const float> x) {
  const auto win = hann(kStftSize);
  const long n = static_cast<long>(x.size());
  const long n_frames = 1 + n / kStftHop;
  const int n_bins = kStftSize / 2 + 1;
  double* in = fftw_alloc_real(kStftSize);
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
  Spectrogram spec(static_cast<std::size_t>(n_frames), std::vector<std::complex<double>>(static_cast<std::size_t>(n_bins)));
  for (long f = 0; f < n_frames; ++f) {
    const long start = f * kStftHop - kStftSize / 2;
    for (int i = 0; i < kStftSize; ++i) {
      const long idx = start + i;
      in[i] = (idx >= 0 && idx < n ? x[static_cast<std::size_t>(idx)] : 0.0) * win[static_cast<std::size_t>(i)];
    }
    fftw_execute_dft_r2c(plans().forward, in, out);
    for (int k = 0; k < n_bins; ++k) spec[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)] = {out[k][0], out[k][1]};
  }
  fftw_free(in);
  fftw_free(out);
  return spec;
}

std::vector<double> istft(const Spectrogram& spec, std::size_t length) {
  const auto win = hann(kStftSize);
  const int n_bins = kStftSize / 2 + 1;
  const std::size_t padded = static_cast<std::size_t>(kStftSize) + (spec.size() - 1) * kStftHop;
  std::vector<double> acc(padded, 0.0), norm(padded, 0.0);
  double* out = fftw_alloc_real(kStftSize);
  fftw_complex* in = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
  for (std::size_t f = 0; f < spec.size(); ++f) {
    for (int k = 0; k < n_bins; ++k) {
      in[k][0] = spec[f][static_cast<std::size_t>(k)].real();
      in[k][1] = spec[f][static_cast<std::size_t>(k)].imag();
    }
    fftw_execute_dft_c2r(plans().inverse, in, out);
    const std::size_t start = f * kStftHop;
    for (int i = 0; i < kStftSize; ++i) {
      const double wv = win[static_cast<std::size_t>(i)];
      acc[start + static_cast<std::size_t>(i)] += out[i] / kStftSize * wv;
      norm[start + static_cast<std::size_t>(i)] += wv * wv;
    }
  }
  fftw_free(out);
  fftw_free(in);
  std::vector<double> y(length, 0.0);
  const std::size_t off = kStftSize / 2;
  for (std::size_t i = 0; i < length && i + off < padded; ++i) {
    const double nv = norm[i + off];
    y[i] = nv > 1e-10 ? acc[i + off] / nv : 0.0;
  }
  return y;
}

Spectrogram phase_vocoder(const Spectrogram& spec, double rate) {
  const std::size_t n_frames = spec.size();
  const std::size_t n_bins = spec.front().size();
  std::vector<double> phi_advance(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) phi_advance[k] = kPi * kStftHop * static_cast<double>(k) / (n_bins - 1);

  std::vector<double> phase_acc(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) phase_acc[k] = std::arg(spec[0][k]);

  const std::vector<std::complex<double>> zeros(n_bins);
  auto column = [&](std::size_t f) -> const std::vector<std::complex<double>>& {
    return f < n_frames ? spec[f] : zeros;
  };

  Spectrogram out;
  for (double step = 0.0; step < static_cast<double>(n_frames); step += rate) {
    const auto f = static_cast<std::size_t>(step);
    const double alpha = step - static_cast<double>(f);
    const auto& c0 = column(f);
    const auto& c1 = column(f + 1);
    std::vector<std::complex<double>> frame(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double mag = (1.0 - alpha) * std::abs(c0[k]) + alpha * std::abs(c1[k]);
      frame[k] = std::polar(mag, phase_acc[k]);
      double dphase = std::arg(c1[k]) - std::arg(c0[k]) - phi_advance[k];
      dphase -= 2.0 * kPi * std::round(dphase / (2.0 * kPi));
      phase_acc[k] += phi_advance[k] + dphase;
    }
    out.push_back(std::move(frame));
  }
  return out;
}

double sinc(double x) { return std::abs(x) < 1e-12 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

}  // namespace

std::string AugmentTag::str() const {
  if (original) return "orig";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ps%.1f%s", semitones, noise ? "+noise" : "");
  return buf;
}

AugmentTag AugmentTag::parse(const std::string& s) {
  if (s == "orig") return AugmentTag{};
  double st = 0.0;
  if (s.rfind("ps", 0) != 0 || std::sscanf(s.c_str() + 2, "%lf", &st) != 1) {
    fail(ErrorCode::kValidation, "bad augmentation tag '" + s + "'");
  }
  return AugmentTag{st, s.find("+noise") != std::string::npos, false};
}

Waveform resample_to_length(std::span<const float> in, std::size_t out_len) {
  Waveform out(out_len, 0.0f);
  if (in.empty() || out_len == 0) return out;
  const double step = static_cast<double>(in.size()) / static_cast<double>(out_len);
  const double cutoff = std::min(1.0, 1.0 / step);
  const double half_width = 16.0 / cutoff;

  // Tabulated Hann-tapered sinc, linearly interpolated.
  constexpr int kTableRes = 512;
  const auto table_len = static_cast<std::size_t>(std::ceil(half_width * kTableRes)) + 2;
  std::vector<double> table(table_len);
  for (std::size_t t = 0; t < table_len; ++t) {
    const double d = static_cast<double>(t) / kTableRes;
    table[t] = d >= half_width ? 0.0 : cutoff * sinc(cutoff * d) * (0.5 + 0.5 * std::cos(kPi * d / half_width));
  }
  auto kernel = [&](double d) {
    const double x = std::abs(d) * kTableRes;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= table_len) return 0.0;
    const double frac = x - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
  };

  const long n = static_cast<long>(in.size());
  for (std::size_t j = 0; j < out_len; ++j) {
    const double pos = static_cast<double>(j) * step;
    const long lo = static_cast<long>(std::ceil(pos - half_width));
    const long hi = static_cast<long>(std::floor(pos + half_width));
    double acc = 0.0;
    for (long i = std::max(0L, lo); i <= std::min(n - 1, hi); ++i) {
      acc += in[static_cast<std::size_t>(i)] * kernel(pos - static_cast<double>(i));
    }
    out[j] = static_cast<float>(acc);
  }
  return out;
}

Waveform pitch_shift(std::span<const float> w, double semitones, int /*sample_rate*/) {
  if (semitones == 0.0 || w.empty()) return Waveform(w.begin(), w.end());
  const double rate = std::pow(2.0, -semitones / 12.0);
  const auto stretched_len = static_cast<std::size_t>(std::llround(static_cast<double>(w.size()) / rate));
  const std::vector<double> stretched = istft(phase_vocoder(stft(w), rate), stretched_len);
  const Waveform as_float(stretched.begin(), stretched.end());
  return resample_to_length(as_float, w.size());
}

Waveform inject_noise(std::span<const float> w, double amplitude, std::uint64_t seed) {
  if (!(amplitude > 0.0)) fail(ErrorCode::kInvalidArgument, "noise amplitude must be positive");
  Rng rng(seed);
  Waveform out(w.begin(), w.end());
  for (auto& s : out) s = static_cast<float>(s + uniform(rng, -amplitude, amplitude));
  return out;
}

std::vector<AugmentedSample> make_augmented_set(std::span<const float> w, std::uint64_t seed,
                                                const AugmentConfig& cfg) {
  std::vector<AugmentTag> grid;
  for (double st : cfg.semitones) {
    grid.push_back(AugmentTag{st, false, false});
    grid.push_back(AugmentTag{st, true, false});
  }
  Rng rng(derive_seed(seed, {0xA06}));
  for (std::size_t i = grid.size() - 1; i > 0; --i) std::swap(grid[i], grid[uniform_index(rng, i + 1)]);

  std::vector<AugmentedSample> out;
  out.reserve(grid.size() + 1);
  out.push_back({Waveform(w.begin(), w.end()), AugmentTag{}});
  std::map<double, Waveform> shifts;  // clean and noisy variants share one shift
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const AugmentTag& tag = grid[i];
    auto it = shifts.find(tag.semitones);
    if (it == shifts.end()) it = shifts.emplace(tag.semitones, pitch_shift(w, tag.semitones)).first;
    Waveform shifted = it->second;
    if (tag.noise) shifted = inject_noise(shifted, cfg.noise_amplitude, derive_seed(seed, {0x4015E, i}));
    out.push_back({std::move(shifted), tag});
  }
  return out;
}

}  // namespace depscreen
