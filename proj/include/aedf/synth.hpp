#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aedf/data.hpp"
#include "aedf/rng.hpp"
#include "aedf/wav.hpp"

namespace aedf {

struct BackgroundRecipe {
    std::string noise_color = "pink";  // pink | brown | white
    double noise_level = 0.05;         // target RMS
    std::vector<std::pair<double, double>> hum_components;  // (Hz, amplitude)
    double babble_level = 0.0;         // modulated band-limited noise
    double click_rate_hz = 0.0;        // Poisson transients per second
    double click_level = 0.0;          // peak amplitude
};

struct PositiveRecipe {
    int chirp_count_lo = 1;
    int chirp_count_hi = 10;
    double band_lo_hz = 2000.0;
    double band_hi_hz = 8000.0;
    double duration_lo_s = 0.05;
    double duration_hi_s = 0.3;
    double snr_db_lo = 0.0;
    double snr_db_hi = 20.0;
};

/// Recipe for one synthetic domain. Domain A is a stationary scene (pink
/// noise plus mains hum); domain B is an eventful one (brown noise, babble,
/// transient clicks) so the background statistics genuinely shift.
struct SynthConfig {
    std::string domain = "A";
    std::string dataset_name;  // defaults to synth_<domain>
    BackgroundRecipe background;
    PositiveRecipe positive;
    double clip_seconds = 1.0;
    int sample_rate = 22050;
    double positive_fraction = 0.5;
    std::uint64_t seed = 1;

    static SynthConfig for_domain(const std::string& domain) {
        SynthConfig cfg;
        cfg.domain = domain;
        if (domain == "A") {
            cfg.background.noise_color = "pink";
            cfg.background.noise_level = 0.05;
            cfg.background.hum_components = {{50.0, 0.02}, {100.0, 0.008}};
        } else if (domain == "B") {
            cfg.background.noise_color = "brown";
            cfg.background.noise_level = 0.05;
            cfg.background.babble_level = 0.03;
            cfg.background.click_rate_hz = 6.0;
            cfg.background.click_level = 0.35;
        } else {
            throw ConfigError(cat("unknown synth domain '", domain, "'"));
        }
        return cfg;
    }

    void validate() const {
        if (clip_seconds <= 0 || sample_rate <= 0) throw ConfigError("bad clip length or rate");
        if (positive_fraction <= 0.0 || positive_fraction >= 1.0)
            throw ConfigError("positive fraction must be in (0, 1)");
        if (positive.chirp_count_lo < 1 || positive.chirp_count_hi < positive.chirp_count_lo)
            throw ConfigError("empty chirp count range");
        if (positive.band_hi_hz <= positive.band_lo_hz ||
            positive.band_hi_hz > sample_rate / 2.0)
            throw ConfigError("bad chirp band");
        if (positive.duration_hi_s < positive.duration_lo_s ||
            positive.duration_hi_s > clip_seconds)
            throw ConfigError("bad chirp duration range");
        if (positive.snr_db_hi < positive.snr_db_lo) throw ConfigError("empty SNR range");
    }
};

namespace synth_detail {

inline void add_pink(std::vector<float>& x, Rng& rng, double level) {
    // Paul Kellet's three-pole pinking filter over white gaussian noise.
    double b0 = 0, b1 = 0, b2 = 0;
    std::vector<double> raw(x.size());
    double energy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double white = rng.gaussian();
        b0 = 0.99765 * b0 + white * 0.0990460;
        b1 = 0.96300 * b1 + white * 0.2965164;
        b2 = 0.57000 * b2 + white * 1.0526913;
        raw[i] = b0 + b1 + b2 + white * 0.1848;
        energy += raw[i] * raw[i];
    }
    const double rms = std::sqrt(energy / static_cast<double>(x.size()));
    const double g = rms > 0 ? level / rms : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += static_cast<float>(g * raw[i]);
}

inline void add_brown(std::vector<float>& x, Rng& rng, double level) {
    double acc = 0;
    std::vector<double> raw(x.size());
    double energy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc = 0.995 * acc + rng.gaussian();
        raw[i] = acc;
        energy += acc * acc;
    }
    const double rms = std::sqrt(energy / static_cast<double>(x.size()));
    const double g = rms > 0 ? level / rms : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += static_cast<float>(g * raw[i]);
}

inline void add_white(std::vector<float>& x, Rng& rng, double level) {
    for (auto& s : x) s += static_cast<float>(level * rng.gaussian());
}

inline void add_hum(std::vector<float>& x, Rng& rng, int rate,
                    const std::vector<std::pair<double, double>>& components) {
    for (const auto& [freq, amp] : components) {
        const double phase = rng.uniform(0.0, 6.283185307179586);
        const double w = 6.283185307179586 * freq / rate;
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += static_cast<float>(amp * std::sin(w * static_cast<double>(i) + phase));
    }
}

// Speech-band noise with a slow random amplitude envelope.
inline void add_babble(std::vector<float>& x, Rng& rng, int rate, double level) {
    const double lp_hi = std::exp(-2.0 * 3.14159265358979323846 * 2500.0 / rate);
    const double lp_lo = std::exp(-2.0 * 3.14159265358979323846 * 250.0 / rate);
    const double lp_env = std::exp(-2.0 * 3.14159265358979323846 * 4.0 / rate);
    double y_hi = 0, y_lo = 0, env = 0;
    std::vector<double> raw(x.size());
    double energy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double white = rng.gaussian();
        y_hi = lp_hi * y_hi + (1 - lp_hi) * white;  // keeps < 2.5 kHz
        y_lo = lp_lo * y_lo + (1 - lp_lo) * white;  // keeps < 250 Hz
        const double band = y_hi - y_lo;
        env = lp_env * env + (1 - lp_env) * std::abs(rng.gaussian());
        raw[i] = band * (0.2 + 60.0 * env);
        energy += raw[i] * raw[i];
    }
    const double rms = std::sqrt(energy / static_cast<double>(x.size()));
    const double g = rms > 0 ? level / rms : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += static_cast<float>(g * raw[i]);
}

// Short transients: half damped tone bursts, half filtered noise bursts.
inline void add_clicks(std::vector<float>& x, Rng& rng, int rate, double rate_hz, double level) {
    const double seconds = static_cast<double>(x.size()) / rate;
    // Poisson count via inverse transform on the CDF.
    const double mean = rate_hz * seconds;
    int count = 0;
    {
        double u = rng.uniform();
        double p = std::exp(-mean), cdf = p;
        while (u > cdf && count < 1000) {
            ++count;
            p *= mean / count;
            cdf += p;
        }
    }
    for (int c = 0; c < count; ++c) {
        const std::size_t start = static_cast<std::size_t>(rng.uniform() *
                                                           static_cast<double>(x.size()));
        const double amp = level * rng.uniform(0.4, 1.0);
        const double tau = rng.uniform(0.002, 0.008) * rate;  // decay in samples
        const bool tonal = rng.uniform() < 0.5;
        const double freq = rng.uniform(1500.0, 9000.0);
        const double w = 6.283185307179586 * freq / rate;
        const std::size_t span = std::min(x.size() - start, static_cast<std::size_t>(8.0 * tau));
        for (std::size_t i = 0; i < span; ++i) {
            const double decay = std::exp(-static_cast<double>(i) / tau);
            const double v = tonal ? std::sin(w * static_cast<double>(i)) : rng.gaussian() * 0.5;
            x[start + i] += static_cast<float>(amp * decay * v);
        }
    }
}

inline double rms_of(const std::vector<float>& x) {
    double e = 0;
    for (float v : x) e += static_cast<double>(v) * v;
    return std::sqrt(e / static_cast<double>(x.size()));
}

inline void add_chirps(std::vector<float>& x, Rng& rng, int rate, const PositiveRecipe& r,
                       double background_rms) {
    const int count = rng.uniform_int(r.chirp_count_lo, r.chirp_count_hi);
    for (int c = 0; c < count; ++c) {
        const double dur = rng.uniform(r.duration_lo_s, r.duration_hi_s);
        const std::size_t len = std::max<std::size_t>(8, static_cast<std::size_t>(dur * rate));
        const std::size_t latest = x.size() > len ? x.size() - len : 0;
        const std::size_t start = static_cast<std::size_t>(rng.uniform() *
                                                           static_cast<double>(latest + 1));
        double f0 = rng.uniform(r.band_lo_hz, r.band_hi_hz);
        double f1 = rng.uniform(r.band_lo_hz, r.band_hi_hz);
        // Keep a real sweep; resample the end point when too flat.
        for (int tries = 0; tries < 8 && std::abs(f1 - f0) < 400.0; ++tries)
            f1 = rng.uniform(r.band_lo_hz, r.band_hi_hz);
        const double snr_db = rng.uniform(r.snr_db_lo, r.snr_db_hi);
        const double phase0 = rng.uniform(0.0, 6.283185307179586);

        std::vector<double> chirp(len);
        double energy = 0;
        for (std::size_t i = 0; i < len; ++i) {
            const double t = static_cast<double>(i) / rate;
            const double d = static_cast<double>(len) / rate;
            const double inst_phase =
                phase0 + 6.283185307179586 * (f0 * t + 0.5 * (f1 - f0) * t * t / d);
            const double envelope =
                0.5 - 0.5 * std::cos(6.283185307179586 * static_cast<double>(i) /
                                     static_cast<double>(len));
            chirp[i] = envelope * std::sin(inst_phase);
            energy += chirp[i] * chirp[i];
        }
        const double chirp_rms = std::sqrt(energy / static_cast<double>(len));
        const double target = background_rms * std::pow(10.0, snr_db / 20.0);
        const double g = chirp_rms > 0 ? target / chirp_rms : 0.0;
        for (std::size_t i = 0; i < len && start + i < x.size(); ++i)
            x[start + i] += static_cast<float>(g * chirp[i]);
    }
}

}  // namespace synth_detail

/// Background-only rendering for clip index `i`; the same substream seeds
/// are used by render_clip, so a positive clip is exactly this background
/// plus its chirps.
inline std::vector<float> render_background(const SynthConfig& cfg, std::uint64_t clip_index) {
    const std::size_t n = static_cast<std::size_t>(cfg.clip_seconds * cfg.sample_rate);
    std::vector<float> x(n, 0.0f);
    Rng rng(seed_mix(cfg.seed, 0xb6, clip_index));
    const auto& b = cfg.background;
    if (b.noise_color == "pink")
        synth_detail::add_pink(x, rng, b.noise_level);
    else if (b.noise_color == "brown")
        synth_detail::add_brown(x, rng, b.noise_level);
    else if (b.noise_color == "white")
        synth_detail::add_white(x, rng, b.noise_level);
    else
        throw ConfigError(cat("unknown noise color '", b.noise_color, "'"));
    if (!b.hum_components.empty()) synth_detail::add_hum(x, rng, cfg.sample_rate, b.hum_components);
    if (b.babble_level > 0) synth_detail::add_babble(x, rng, cfg.sample_rate, b.babble_level);
    if (b.click_rate_hz > 0)
        synth_detail::add_clicks(x, rng, cfg.sample_rate, b.click_rate_hz, b.click_level);
    return x;
}

inline std::vector<float> render_clip(const SynthConfig& cfg, std::uint64_t clip_index,
                                      bool positive) {
    std::vector<float> x = render_background(cfg, clip_index);
    if (positive) {
        Rng rng(seed_mix(cfg.seed, 0xf6, clip_index));
        synth_detail::add_chirps(x, rng, cfg.sample_rate, cfg.positive,
                                 synth_detail::rms_of(x));
    }
    return x;
}

/// Generates `n_clips` WAV files plus a manifest CSV in `out_dir`. The label
/// sequence holds exactly round(n * positive_fraction) positives and is a
/// pure function of the seed, as is every sample of every clip.
inline Manifest synth_corpus(const SynthConfig& cfg, int n_clips, const std::string& out_dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    if (n_clips < 1) throw ConfigError("need at least one clip");
    const fs::path out(out_dir);
    if (!out.parent_path().empty() && !fs::exists(out.parent_path()))
        throw IoError(cat("parent of output directory '", out_dir, "' does not exist"));
    fs::create_directory(out);

    const std::string name = cfg.dataset_name.empty() ? cat("synth_", cfg.domain) : cfg.dataset_name;
    const int n_pos = static_cast<int>(std::lround(n_clips * cfg.positive_fraction));
    std::vector<int> labels(static_cast<std::size_t>(n_clips), 0);
    for (int i = 0; i < n_pos; ++i) labels[static_cast<std::size_t>(i)] = 1;
    Rng label_rng(seed_mix(cfg.seed, 0x1a6e15));
    label_rng.shuffle(labels);

    Manifest m;
    m.dataset_name = name;
    int width = 1;
    for (int v = n_clips - 1; v >= 10; v /= 10) ++width;
    for (int i = 0; i < n_clips; ++i) {
        std::string idx = std::to_string(i);
        idx.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(idx.size()))),
                   '0');
        ManifestEntry e;
        e.itemid = cat(name, "_", idx);
        e.label = labels[static_cast<std::size_t>(i)];
        e.wav_path = (out / (e.itemid + ".wav")).string();
        const auto samples = render_clip(cfg, static_cast<std::uint64_t>(i), e.label == 1);
        save_wav(e.wav_path, samples, cfg.sample_rate);
        m.entries.push_back(std::move(e));
    }
    save_manifest(m, (out / (name + ".csv")).string());
    return m;
}

}  // namespace aedf
