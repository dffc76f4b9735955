#pragma once

#include <complex>
#include <string>
#include <vector>

#include "swg/tensor.hpp"

namespace swg {

// 4-channel first-order-ambisonics audio, FOA order W, X, Y, Z.
// Unit-gain W convention (no sqrt(2) factor on W).
struct AudioClip {
    Tensor samples;  // [4 x L]
    size_t sample_rate = 24000;

    size_t length() const { return samples.empty() ? 0 : samples.shape()[1]; }
    void validate() const;
};

struct SpectralConfig {
    size_t n_fft = 1024;  // power of two
    size_t hop = 480;     // 20 ms at 24 kHz
    size_t n_mels = 64;
    double f_min = 50.0;
    double f_max = 12000.0;
    size_t sample_rate = 24000;

    size_t bins() const { return n_fft / 2 + 1; }
    size_t frames_for(size_t length) const {
        return length < n_fft ? 0 : (length - n_fft) / hop + 1;
    }
    // Shortest sample count yielding exactly `frames` STFT frames.
    size_t samples_for_frames(size_t frames) const { return n_fft + hop * (frames - 1); }
    void validate() const;
};

// One-sided complex spectrogram, [channels x frames x bins].
struct Spectrogram {
    size_t channels = 0, frames = 0, bins = 0;
    std::vector<std::complex<double>> data;

    std::complex<double>& at(size_t ch, size_t t, size_t b) {
        return data[(ch * frames + t) * bins + b];
    }
    std::complex<double> at(size_t ch, size_t t, size_t b) const {
        return data[(ch * frames + t) * bins + b];
    }
};

// Frame-wise features [T x F x C], C = 7 (4 log-mel + 3 IV).
struct FeatureTensor {
    Tensor data;
    double frame_rate = 50.0;  // frames per second
};

// Per-channel standardization statistics computed over a training corpus.
struct ChannelStats {
    std::vector<double> mean, stddev;  // size 7
};

// In-place radix-2 FFT; n must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

// Hann-windowed one-sided STFT of all 4 channels.
Spectrogram stft(const AudioClip& clip, const SpectralConfig& cfg);

// Slaney-style triangular mel filterbank, [n_mels x bins].
Tensor mel_filterbank(const SpectralConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// log(mel power + 1e-10), [4 x T x n_mels].
Tensor log_mel(const Spectrogram& spec, const SpectralConfig& cfg);

// Active intensity vectors through the mel filterbank, normalized per bin by
// (|W|^2 + (|X|^2+|Y|^2+|Z|^2)/3 + eps); values in [-1, 1]. [3 x T x n_mels].
Tensor intensity_vectors(const Spectrogram& spec, const SpectralConfig& cfg);

// Channel order [logmelW, logmelX, logmelY, logmelZ, IVx, IVy, IVz]; when
// stats is non-null every channel is standardized with the corpus stats.
FeatureTensor extract_features(const AudioClip& clip, const SpectralConfig& cfg,
                               const ChannelStats* stats = nullptr);

ChannelStats compute_channel_stats(const std::vector<FeatureTensor>& corpus);

// Feature file = SWGT tensor; sidecar text header carries the config echo
// and standardization stats.
void save_features(const std::string& path, const FeatureTensor& f, const SpectralConfig& cfg,
                   const ChannelStats* stats = nullptr);
FeatureTensor load_features(const std::string& path);

}  // namespace swg
