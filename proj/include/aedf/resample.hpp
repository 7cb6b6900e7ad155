#pragma once

#include <cmath>
#include <vector>

#include "aedf/wav.hpp"

namespace aedf {

namespace resample_detail {

// Modified Bessel function of the first kind, order zero (power series).
inline double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = 3.14159265358979323846 * x;
    return std::sin(px) / px;
}

}  // namespace resample_detail

/// Polyphase windowed-sinc downsampler (Kaiser beta 8.6, 64 taps). Output
/// length is round(n_in * target/source); per-phase taps are normalized to
/// unit DC gain. Upsampling is not supported.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
    if (clip.samples.empty()) throw InputError("resample: empty clip");
    if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
    if (clip.sample_rate == target_rate) return clip;
    if (clip.sample_rate < target_rate)
        throw UnsupportedError(cat("resample: upsampling ", clip.sample_rate, " -> ", target_rate,
                                   " Hz is not supported"));

    constexpr int kTaps = 64;
    constexpr double kBeta = 8.6;
    const int half = kTaps / 2;
    const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
    const double cutoff = 0.5 * ratio;  // cycles per input sample
    const std::size_t n_in = clip.samples.size();
    const std::size_t n_out =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));

    // Kaiser window sampled once on |r| in [0, 1]; linear interpolation below.
    constexpr int kLutSize = 4096;
    static const std::vector<double> kaiser_lut = [] {
        std::vector<double> lut(kLutSize + 1);
        const double i0_beta = resample_detail::bessel_i0(kBeta);
        for (int i = 0; i <= kLutSize; ++i) {
            const double r = static_cast<double>(i) / kLutSize;
            lut[static_cast<std::size_t>(i)] =
                resample_detail::bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
        }
        return lut;
    }();
    auto window_at = [&](double r) {
        const double a = std::abs(r) * kLutSize;
        const int i = static_cast<int>(a);
        if (i >= kLutSize) return 0.0;
        const double frac = a - i;
        return kaiser_lut[static_cast<std::size_t>(i)] * (1.0 - frac) +
               kaiser_lut[static_cast<std::size_t>(i) + 1] * frac;
    };

    AudioClip out;
    out.sample_rate = target_rate;
    out.source_id = clip.source_id;
    out.samples.resize(n_out);

    for (std::size_t j = 0; j < n_out; ++j) {
        const double center = static_cast<double>(j) / ratio;
        const long n0 = static_cast<long>(std::floor(center));
        double acc = 0.0, norm = 0.0;
        for (long n = n0 - half + 1; n <= n0 + half; ++n) {
            const double d = static_cast<double>(n) - center;
            const double r = d / half;
            if (r <= -1.0 || r >= 1.0) continue;
            const double tap = 2.0 * cutoff * resample_detail::sinc(2.0 * cutoff * d) * window_at(r);
            norm += tap;
            if (n >= 0 && n < static_cast<long>(n_in))
                acc += tap * static_cast<double>(clip.samples[static_cast<std::size_t>(n)]);
        }
        out.samples[j] = static_cast<float>(norm != 0.0 ? acc / norm : 0.0);
    }
    return out;
}

}  // namespace aedf
