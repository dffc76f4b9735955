#include "swg/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swg {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLogEps = 1e-10;
constexpr double kIvEps = 1e-12;
}  // namespace

void AudioClip::validate() const {
    if (samples.rank() != 2 || samples.shape()[0] != 4)
        throw std::invalid_argument("AudioClip: expected [4 x L] FOA samples, got " +
                                    samples.shape_str());
    for (size_t i = 0; i < samples.numel(); ++i)
        if (std::fabs(samples[i]) > 1.0 + 1e-9)
            throw std::invalid_argument("AudioClip: sample out of [-1,1] range");
}

void SpectralConfig::validate() const {
    if (n_fft == 0 || (n_fft & (n_fft - 1)) != 0)
        throw std::invalid_argument("SpectralConfig: n_fft must be a power of two");
    if (hop == 0 || hop > n_fft)
        throw std::invalid_argument("SpectralConfig: need 0 < hop <= n_fft");
    if (!(f_min < f_max) || f_max > double(sample_rate) / 2.0)
        throw std::invalid_argument("SpectralConfig: need f_min < f_max <= sample_rate/2");
    if (n_mels == 0) throw std::invalid_argument("SpectralConfig: n_mels must be positive");
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: length must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * kPi / double(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

Spectrogram stft(const AudioClip& clip, const SpectralConfig& cfg) {
    cfg.validate();
    if (clip.samples.rank() != 2 || clip.samples.shape()[0] != 4)
        throw std::invalid_argument("stft: expected [4 x L] clip");
    size_t L = clip.length();
    if (L < cfg.n_fft)
        throw std::invalid_argument("stft: clip length " + std::to_string(L) +
                                    " shorter than one frame (" + std::to_string(cfg.n_fft) + ")");
    size_t T = cfg.frames_for(L);
    size_t bins = cfg.bins();
    // periodic Hann
    std::vector<double> window(cfg.n_fft);
    for (size_t i = 0; i < cfg.n_fft; ++i)
        window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * double(i) / double(cfg.n_fft)));

    Spectrogram out;
    out.channels = 4;
    out.frames = T;
    out.bins = bins;
    out.data.resize(4 * T * bins);
    std::vector<std::complex<double>> buf(cfg.n_fft);
    for (size_t ch = 0; ch < 4; ++ch) {
        const double* sig = clip.samples.data() + ch * L;
        for (size_t t = 0; t < T; ++t) {
            for (size_t i = 0; i < cfg.n_fft; ++i)
                buf[i] = sig[t * cfg.hop + i] * window[i];
            fft(buf);
            for (size_t b = 0; b < bins; ++b) out.at(ch, t, b) = buf[b];
        }
    }
    return out;
}

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz < min_log_hz) return hz / f_sp;
    return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel < min_log_mel) return mel * f_sp;
    return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

Tensor mel_filterbank(const SpectralConfig& cfg) {
    cfg.validate();
    size_t bins = cfg.bins();
    Tensor fb({cfg.n_mels, bins});
    double mel_lo = hz_to_mel(cfg.f_min);
    double mel_hi = hz_to_mel(cfg.f_max);
    std::vector<double> edges(cfg.n_mels + 2);
    for (size_t m = 0; m < edges.size(); ++m)
        edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(m) / double(cfg.n_mels + 1));
    double bin_hz = double(cfg.sample_rate) / double(cfg.n_fft);
    for (size_t m = 0; m < cfg.n_mels; ++m) {
        double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
        for (size_t b = 0; b < bins; ++b) {
            double f = double(b) * bin_hz;
            double w = 0.0;
            if (f > lo && f < hi)
                w = (f <= center) ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
            fb.at({m, b}) = w;
        }
    }
    return fb;
}

Tensor log_mel(const Spectrogram& spec, const SpectralConfig& cfg) {
    Tensor fb = mel_filterbank(cfg);
    Tensor out({4, spec.frames, cfg.n_mels});
    for (size_t ch = 0; ch < 4; ++ch)
        for (size_t t = 0; t < spec.frames; ++t)
            for (size_t m = 0; m < cfg.n_mels; ++m) {
                double p = 0.0;
                for (size_t b = 0; b < spec.bins; ++b) {
                    double w = fb.at({m, b});
                    if (w == 0.0) continue;
                    p += w * std::norm(spec.at(ch, t, b));
                }
                out.at({ch, t, m}) = std::log(p + kLogEps);
            }
    return out;
}

Tensor intensity_vectors(const Spectrogram& spec, const SpectralConfig& cfg) {
    if (spec.channels != 4)
        throw std::invalid_argument("intensity_vectors: need a 4-channel spectrogram");
    Tensor fb = mel_filterbank(cfg);
    Tensor out({3, spec.frames, cfg.n_mels});
    for (size_t t = 0; t < spec.frames; ++t)
        for (size_t m = 0; m < cfg.n_mels; ++m) {
            double ix = 0.0, iy = 0.0, iz = 0.0, energy = 0.0;
            for (size_t b = 0; b < spec.bins; ++b) {
                double w = fb.at({m, b});
                if (w == 0.0) continue;
                std::complex<double> cw = std::conj(spec.at(0, t, b));
                std::complex<double> x = spec.at(1, t, b);
                std::complex<double> y = spec.at(2, t, b);
                std::complex<double> z = spec.at(3, t, b);
                ix += w * (cw * x).real();
                iy += w * (cw * y).real();
                iz += w * (cw * z).real();
                energy += w * (std::norm(spec.at(0, t, b)) +
                               (std::norm(x) + std::norm(y) + std::norm(z)) / 3.0);
            }
            double denom = energy + kIvEps;
            out.at({0, t, m}) = ix / denom;
            out.at({1, t, m}) = iy / denom;
            out.at({2, t, m}) = iz / denom;
        }
    return out;
}

FeatureTensor extract_features(const AudioClip& clip, const SpectralConfig& cfg,
                               const ChannelStats* stats) {
    Spectrogram spec = stft(clip, cfg);
    Tensor lm = log_mel(spec, cfg);
    Tensor iv = intensity_vectors(spec, cfg);
    size_t T = spec.frames, F = cfg.n_mels;
    FeatureTensor out;
    out.data = Tensor({T, F, 7});
    out.frame_rate = double(cfg.sample_rate) / double(cfg.hop);
    for (size_t t = 0; t < T; ++t)
        for (size_t f = 0; f < F; ++f) {
            for (size_t ch = 0; ch < 4; ++ch) out.data.at({t, f, ch}) = lm.at({ch, t, f});
            for (size_t ch = 0; ch < 3; ++ch) out.data.at({t, f, 4 + ch}) = iv.at({ch, t, f});
        }
    if (stats) {
        if (stats->mean.size() != 7 || stats->stddev.size() != 7)
            throw std::invalid_argument("extract_features: stats must cover 7 channels");
        for (size_t t = 0; t < T; ++t)
            for (size_t f = 0; f < F; ++f)
                for (size_t c = 0; c < 7; ++c)
                    out.data.at({t, f, c}) =
                        (out.data.at({t, f, c}) - stats->mean[c]) / stats->stddev[c];
    }
    return out;
}

ChannelStats compute_channel_stats(const std::vector<FeatureTensor>& corpus) {
    ChannelStats st;
    st.mean.assign(7, 0.0);
    st.stddev.assign(7, 0.0);
    std::vector<double> sum(7, 0.0), sumsq(7, 0.0);
    size_t count = 0;
    for (const auto& f : corpus) {
        const auto& s = f.data.shape();
        for (size_t t = 0; t < s[0]; ++t)
            for (size_t fr = 0; fr < s[1]; ++fr)
                for (size_t c = 0; c < 7; ++c) {
                    double v = f.data.at({t, fr, c});
                    sum[c] += v;
                    sumsq[c] += v * v;
                }
        count += s[0] * s[1];
    }
    if (count == 0) throw std::invalid_argument("compute_channel_stats: empty corpus");
    for (size_t c = 0; c < 7; ++c) {
        st.mean[c] = sum[c] / double(count);
        double var = sumsq[c] / double(count) - st.mean[c] * st.mean[c];
        st.stddev[c] = std::sqrt(std::max(var, 1e-12));
    }
    return st;
}

void save_features(const std::string& path, const FeatureTensor& f, const SpectralConfig& cfg,
                   const ChannelStats* stats) {
    save_tensor_file(path, f.data);
    std::ofstream hdr(path + ".hdr");
    if (!hdr) throw std::runtime_error("cannot write feature header: " + path + ".hdr");
    hdr << "frame_rate=" << f.frame_rate << "\n"
        << "n_fft=" << cfg.n_fft << "\nhop=" << cfg.hop << "\nn_mels=" << cfg.n_mels
        << "\nf_min=" << cfg.f_min << "\nf_max=" << cfg.f_max
        << "\nsample_rate=" << cfg.sample_rate << "\n";
    if (stats) {
        hdr << "mean=";
        for (size_t c = 0; c < 7; ++c) hdr << (c ? "," : "") << stats->mean[c];
        hdr << "\nstddev=";
        for (size_t c = 0; c < 7; ++c) hdr << (c ? "," : "") << stats->stddev[c];
        hdr << "\n";
    }
}

FeatureTensor load_features(const std::string& path) {
    FeatureTensor f;
    f.data = load_tensor_file(path);
    std::ifstream hdr(path + ".hdr");
    if (hdr) {
        std::string line;
        while (std::getline(hdr, line))
            if (line.rfind("frame_rate=", 0) == 0) f.frame_rate = std::stod(line.substr(11));
    }
    return f;
}

}  // namespace swg
