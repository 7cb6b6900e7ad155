#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "aedf/tensor.hpp"
#include "aedf/wav.hpp"

namespace aedf {

/// Front-end recipe: 22.05 kHz input, 1024-sample Hann frames with hop 309
/// (46 ms / 14 ms rounded to a power-of-two FFT), 80 mel bands over
/// 50-11000 Hz, log floor 1e-10.
struct FeatureParams {
    int sample_rate = 22050;
    int win = 1024;
    int hop = 309;
    int n_mels = 80;
    double f_min = 50.0;
    double f_max = 11000.0;
    double floor_eps = 1e-10;

    int frame_count(std::size_t n_samples) const {
        return static_cast<int>((n_samples - static_cast<std::size_t>(win)) /
                                static_cast<std::size_t>(hop)) +
               1;
    }
};

struct MelFilterbank {
    int n_mels = 0;
    int n_bins = 0;  // win/2 + 1
    double f_min = 0.0;
    double f_max = 0.0;
    std::vector<float> weights;        // n_mels x n_bins, row-major
    std::vector<double> center_freqs;  // Hz, one per band

    float weight(int band, int bin) const {
        return weights[static_cast<std::size_t>(band) * n_bins + bin];
    }
};

struct LogMelSpectrogram {
    Tensor values;  // 1 x n_mels x frames
    int frames = 0;
    double hop_seconds = 0.0;
    double win_seconds = 0.0;
    std::string source_id;
};

namespace dsp_detail {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * 3.14159265358979323846 / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] =
            0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / n);
    return w;
}

}  // namespace dsp_detail

/// Triangular filters with centers equally spaced on the mel scale.
inline MelFilterbank build_mel_filterbank(const FeatureParams& p) {
    if (p.f_min <= 0 || p.f_max <= p.f_min)
        throw ConfigError("mel filterbank needs 0 < f_min < f_max");
    if (p.f_max > p.sample_rate / 2.0)
        throw ConfigError(cat("mel f_max ", p.f_max, " exceeds Nyquist ", p.sample_rate / 2.0));

    MelFilterbank fb;
    fb.n_mels = p.n_mels;
    fb.n_bins = p.win / 2 + 1;
    fb.f_min = p.f_min;
    fb.f_max = p.f_max;
    fb.weights.assign(static_cast<std::size_t>(fb.n_mels) * fb.n_bins, 0.0f);
    fb.center_freqs.resize(static_cast<std::size_t>(fb.n_mels));

    const double mel_lo = dsp_detail::hz_to_mel(p.f_min);
    const double mel_hi = dsp_detail::hz_to_mel(p.f_max);
    std::vector<double> edges(static_cast<std::size_t>(p.n_mels) + 2);
    for (int i = 0; i < p.n_mels + 2; ++i)
        edges[static_cast<std::size_t>(i)] =
            dsp_detail::mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (p.n_mels + 1));

    const double bin_hz = static_cast<double>(p.sample_rate) / p.win;
    for (int m = 0; m < p.n_mels; ++m) {
        const double lo = edges[static_cast<std::size_t>(m)];
        const double mid = edges[static_cast<std::size_t>(m) + 1];
        const double hi = edges[static_cast<std::size_t>(m) + 2];
        fb.center_freqs[static_cast<std::size_t>(m)] = mid;
        for (int k = 0; k < fb.n_bins; ++k) {
            const double f = k * bin_hz;
            double w = 0.0;
            if (f > lo && f < hi) w = (f <= mid) ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            fb.weights[static_cast<std::size_t>(m) * fb.n_bins + k] = static_cast<float>(w);
        }
    }
    return fb;
}

/// Hann-windowed magnitude-squared STFT, mel projection, log(x + floor).
/// Frame count is floor((n - win)/hop) + 1.
inline LogMelSpectrogram log_mel(const AudioClip& clip, const MelFilterbank& fb,
                                 const FeatureParams& p) {
    if (clip.sample_rate != p.sample_rate)
        throw InputError(cat("log_mel: clip rate ", clip.sample_rate, " Hz, expected ",
                             p.sample_rate));
    if (clip.samples.size() < static_cast<std::size_t>(p.win))
        throw InputError(cat("log_mel: clip of ", clip.samples.size(),
                             " samples is shorter than one ", p.win, "-sample window"));

    const int frames = p.frame_count(clip.samples.size());
    const int n_bins = p.win / 2 + 1;
    static thread_local std::vector<std::complex<double>> buf;
    buf.assign(static_cast<std::size_t>(p.win), {0.0, 0.0});
    const auto window = dsp_detail::hann_window(p.win);

    LogMelSpectrogram out;
    out.frames = frames;
    out.hop_seconds = static_cast<double>(p.hop) / p.sample_rate;
    out.win_seconds = static_cast<double>(p.win) / p.sample_rate;
    out.source_id = clip.source_id;
    out.values = Tensor(Shape{1, p.n_mels, frames});

    std::vector<double> power(static_cast<std::size_t>(n_bins));
    for (int t = 0; t < frames; ++t) {
        const std::size_t start = static_cast<std::size_t>(t) * p.hop;
        for (int i = 0; i < p.win; ++i)
            buf[static_cast<std::size_t>(i)] = {
                static_cast<double>(clip.samples[start + static_cast<std::size_t>(i)]) *
                    window[static_cast<std::size_t>(i)],
                0.0};
        dsp_detail::fft_inplace(buf);
        for (int k = 0; k < n_bins; ++k) power[static_cast<std::size_t>(k)] = std::norm(buf[static_cast<std::size_t>(k)]);

        for (int m = 0; m < p.n_mels; ++m) {
            const float* w = fb.weights.data() + static_cast<std::size_t>(m) * fb.n_bins;
            double acc = 0.0;
            for (int k = 0; k < n_bins; ++k) acc += w[k] * power[static_cast<std::size_t>(k)];
            out.values.data()[static_cast<std::size_t>(m) * frames + t] =
                static_cast<float>(std::log(acc + p.floor_eps));
        }
    }
    return out;
}

}  // namespace aedf
