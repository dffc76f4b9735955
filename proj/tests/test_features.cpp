#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "swg/features.hpp"
#include "swg/scene.hpp"
#include "swg/wav.hpp"

using namespace swg;

namespace {

constexpr double kPi = 3.14159265358979323846;

AudioClip sine_clip(double freq, size_t length, size_t sr = 24000, double amp = 0.5) {
    AudioClip c;
    c.sample_rate = sr;
    c.samples = Tensor::zeros({4, length});
    for (size_t i = 0; i < length; ++i)
        c.samples.at({0, i}) = amp * std::sin(2.0 * kPi * freq * double(i) / double(sr));
    return c;
}

// Direction decoded from the energy-sum of a frame's IV bands.
void decode_direction(const FeatureTensor& f, size_t t, double& az, double& el) {
    const auto& s = f.data.shape();
    double x = 0.0, y = 0.0, z = 0.0;
    for (size_t m = 0; m < s[1]; ++m) {
        x += f.data.at({t, m, 4});
        y += f.data.at({t, m, 5});
        z += f.data.at({t, m, 6});
    }
    az = std::atan2(y, x) * 180.0 / kPi;
    el = std::atan2(z, std::sqrt(x * x + y * y)) * 180.0 / kPi;
}

double ang_err(double az1, double el1, double az2, double el2) {
    double u1[3], u2[3];
    direction_vector(az1, el1, u1);
    direction_vector(az2, el2, u2);
    double dot = u1[0] * u2[0] + u1[1] * u2[1] + u1[2] * u2[2];
    return std::acos(std::min(1.0, std::max(-1.0, dot))) * 180.0 / kPi;
}

}  // namespace

TEST_CASE("fft of a delta is flat, constant is a DC spike, inverse round-trips") {
    std::vector<std::complex<double>> a(8, 0.0);
    a[0] = 1.0;
    fft(a);
    for (auto& v : a) CHECK(std::abs(v - 1.0) < 1e-12);

    std::vector<std::complex<double>> b(8, 1.0);
    fft(b);
    CHECK(std::abs(b[0] - 8.0) < 1e-12);
    for (size_t k = 1; k < 8; ++k) CHECK(std::abs(b[k]) < 1e-12);

    std::vector<std::complex<double>> c(16), orig(16);
    Rng rng(1);
    for (auto& v : c) v = {rng.normal(), rng.normal()};
    orig = c;
    fft(c);
    fft(c, true);
    for (size_t i = 0; i < 16; ++i) CHECK(std::abs(c[i] - orig[i]) < 1e-10);

    std::vector<std::complex<double>> bad(6);
    CHECK_THROWS(fft(bad));
}

TEST_CASE("bin-center sine concentrates >99% of frame energy in one bin") {
    SpectralConfig cfg;
    double freq = 50.0 * double(cfg.sample_rate) / double(cfg.n_fft);  // bin 50 exactly
    AudioClip clip = sine_clip(freq, cfg.n_fft + cfg.hop * 4);
    Spectrogram spec = stft(clip, cfg);
    for (size_t t = 0; t < spec.frames; ++t) {
        double total = 0.0, peak = 0.0;
        size_t peak_bin = 0;
        for (size_t b = 0; b < spec.bins; ++b) {
            double e = std::norm(spec.at(0, t, b));
            total += e;
            if (e > peak) {
                peak = e;
                peak_bin = b;
            }
        }
        CHECK(peak_bin == 50);
        // Hann windowing leaks exactly into the two adjacent bins
        double around = std::norm(spec.at(0, t, 49)) + peak + std::norm(spec.at(0, t, 51));
        CHECK(around > 0.99 * total);
    }
}

TEST_CASE("Parseval holds per frame with the Hann window applied") {
    SpectralConfig cfg;
    Rng rng(2);
    AudioClip clip;
    clip.samples = Tensor({4, cfg.n_fft + cfg.hop * 2});
    for (size_t i = 0; i < clip.samples.numel(); ++i) clip.samples[i] = rng.uniform(-1.0, 1.0);
    Spectrogram spec = stft(clip, cfg);
    std::vector<double> window(cfg.n_fft);
    for (size_t i = 0; i < cfg.n_fft; ++i)
        window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * double(i) / double(cfg.n_fft)));
    for (size_t ch = 0; ch < 4; ++ch)
        for (size_t t = 0; t < spec.frames; ++t) {
            double time_energy = 0.0;
            for (size_t i = 0; i < cfg.n_fft; ++i) {
                double v = clip.samples.at({ch, t * cfg.hop + i}) * window[i];
                time_energy += v * v;
            }
            // one-sided spectrum: double every bin but DC and Nyquist
            double freq_energy = std::norm(spec.at(ch, t, 0)) +
                                 std::norm(spec.at(ch, t, spec.bins - 1));
            for (size_t b = 1; b + 1 < spec.bins; ++b)
                freq_energy += 2.0 * std::norm(spec.at(ch, t, b));
            freq_energy /= double(cfg.n_fft);
            CHECK(std::fabs(freq_energy - time_energy) < 1e-6 * std::max(1.0, time_energy));
        }
}

TEST_CASE("stft rejects a clip shorter than one frame") {
    SpectralConfig cfg;
    AudioClip clip;
    clip.samples = Tensor::zeros({4, cfg.n_fft - 1});
    CHECK_THROWS(stft(clip, cfg));
}

TEST_CASE("silence gives a zero spectrogram, log(eps) mel floor and zero IV") {
    SpectralConfig cfg;
    AudioClip clip;
    clip.samples = Tensor::zeros({4, cfg.n_fft + cfg.hop});
    Spectrogram spec = stft(clip, cfg);
    for (auto& v : spec.data) CHECK(std::abs(v) == 0.0);
    Tensor lm = log_mel(spec, cfg);
    for (size_t i = 0; i < lm.numel(); ++i) CHECK(lm[i] == doctest::Approx(std::log(1e-10)));
    Tensor iv = intensity_vectors(spec, cfg);
    for (size_t i = 0; i < iv.numel(); ++i) CHECK(iv[i] == 0.0);
}

TEST_CASE("mel filterbank rows are triangles: peak at center, zero off support") {
    SpectralConfig cfg;
    Tensor fb = mel_filterbank(cfg);
    double bin_hz = double(cfg.sample_rate) / double(cfg.n_fft);
    for (size_t m = 0; m < cfg.n_mels; ++m) {
        double peak = 0.0;
        size_t peak_bin = 0, support = 0;
        for (size_t b = 0; b < cfg.bins(); ++b) {
            double w = fb.at({m, b});
            CHECK(w >= 0.0);
            CHECK(w <= 1.0 + 1e-12);
            if (w > 0.0) ++support;
            if (w > peak) {
                peak = w;
                peak_bin = b;
            }
        }
        CHECK(support > 0);
        // rises to the peak, falls after it (unimodal)
        for (size_t b = 1; b <= peak_bin; ++b)
            CHECK(fb.at({m, b}) >= fb.at({m, b - 1}) - 1e-12);
        for (size_t b = peak_bin + 1; b < cfg.bins(); ++b)
            CHECK(fb.at({m, b}) <= fb.at({m, b - 1}) + 1e-12);
        // support stays inside [f_min, f_max]
        for (size_t b = 0; b < cfg.bins(); ++b)
            if (fb.at({m, b}) > 0.0) {
                double f = double(b) * bin_hz;
                CHECK(f > cfg.f_min - bin_hz);
                CHECK(f < cfg.f_max + bin_hz);
            }
    }
}

TEST_CASE("Slaney mel scale is linear below 1 kHz and invertible") {
    CHECK(hz_to_mel(500.0) == doctest::Approx(500.0 * 3.0 / 200.0));
    CHECK(hz_to_mel(1000.0) == doctest::Approx(15.0));
    for (double f : {60.0, 440.0, 1000.0, 3000.0, 11999.0})
        CHECK(mel_to_hz(hz_to_mel(f)) == doctest::Approx(f).epsilon(1e-10));
}

TEST_CASE("tone at a filter center makes that mel band maximal") {
    SpectralConfig cfg;
    Tensor fb = mel_filterbank(cfg);
    double bin_hz = double(cfg.sample_rate) / double(cfg.n_fft);
    for (size_t m : {5ul, 20ul, 40ul, 60ul}) {
        // frequency of the filter's peak bin
        size_t peak_bin = 0;
        double peak = 0.0;
        for (size_t b = 0; b < cfg.bins(); ++b)
            if (fb.at({m, b}) > peak) {
                peak = fb.at({m, b});
                peak_bin = b;
            }
        AudioClip clip = sine_clip(double(peak_bin) * bin_hz, cfg.n_fft + cfg.hop);
        Tensor lm = log_mel(stft(clip, cfg), cfg);
        size_t best = 0;
        for (size_t mm = 1; mm < cfg.n_mels; ++mm)
            if (lm.at({0, 0, mm}) > lm.at({0, 0, best})) best = mm;
        CHECK(best == m);
    }
}

TEST_CASE("frame-count formula: 5 s at 24 kHz gives T=248, features are [T x 64 x 7]") {
    SpectralConfig cfg;
    CHECK(cfg.frames_for(120000) == 248);
    CHECK(cfg.samples_for_frames(250) == 120544);
    CHECK(cfg.frames_for(cfg.samples_for_frames(250)) == 250);
    Rng rng(3);
    AudioClip clip;
    clip.samples = Tensor({4, 120000});
    for (size_t i = 0; i < clip.samples.numel(); ++i) clip.samples[i] = 0.1 * rng.normal();
    FeatureTensor f = extract_features(clip, cfg);
    CHECK(f.data.shape() == std::vector<size_t>{248, 64, 7});
    CHECK(f.frame_rate == doctest::Approx(50.0));
    // IV channels bounded
    for (size_t t = 0; t < 248; ++t)
        for (size_t m = 0; m < 64; ++m)
            for (size_t c = 4; c < 7; ++c) CHECK(std::fabs(f.data.at({t, m, c})) <= 1.0);
}

TEST_CASE("IV of a synthetic point source recovers its direction within 1 degree") {
    SpectralConfig cfg;
    Rng rng(4);
    for (auto [az, el] : std::vector<std::pair<double, double>>{
             {0.0, 0.0}, {45.0, 30.0}, {-120.0, -45.0}, {170.0, 10.0}}) {
        SceneSpec spec;
        spec.n_classes = 4;
        spec.duration_s = 2.0;
        spec.events.push_back({1, 0.0, 2.0, az, el, {}});
        auto [clip, anns] = synth_foa_scene(spec, rng);
        FeatureTensor f = extract_features(clip, cfg);
        std::vector<double> errs;
        for (size_t t = 0; t < f.data.shape()[0]; ++t) {
            double daz, del;
            decode_direction(f, t, daz, del);
            errs.push_back(ang_err(daz, del, az, el));
        }
        std::sort(errs.begin(), errs.end());
        CHECK(errs[errs.size() / 2] < 1.0);
    }
}

TEST_CASE("source at azimuth 0, elevation 0 points along +x") {
    SpectralConfig cfg;
    Rng rng(5);
    SceneSpec spec;
    spec.n_classes = 2;
    spec.duration_s = 1.0;
    spec.events.push_back({0, 0.0, 1.0, 0.0, 0.0, {}});
    auto [clip, anns] = synth_foa_scene(spec, rng);
    Spectrogram s = stft(clip, cfg);
    Tensor iv = intensity_vectors(s, cfg);
    // in active bands x-IV dominates and is positive
    double x = 0.0, y = 0.0, z = 0.0;
    for (size_t t = 0; t < s.frames; ++t)
        for (size_t m = 0; m < cfg.n_mels; ++m) {
            x += iv.at({0, t, m});
            y += std::fabs(iv.at({1, t, m}));
            z += std::fabs(iv.at({2, t, m}));
        }
    CHECK(x > 0.0);
    CHECK(y < 0.05 * x);
    CHECK(z < 0.05 * x);
}

TEST_CASE("two orthogonal-band sources: each band's IV points at its own source") {
    SpectralConfig cfg;
    Rng rng(6);
    SceneSpec spec;
    spec.n_classes = 8;
    spec.duration_s = 2.0;
    // class 0 band 300-900 Hz, class 6 band 4500-5100 Hz
    spec.events.push_back({0, 0.0, 2.0, 60.0, 20.0, {}});
    spec.events.push_back({6, 0.0, 2.0, -90.0, -30.0, {}});
    auto [clip, anns] = synth_foa_scene(spec, rng);
    Spectrogram s = stft(clip, cfg);
    Tensor iv = intensity_vectors(s, cfg);
    Tensor fb = mel_filterbank(cfg);
    double bin_hz = double(cfg.sample_rate) / double(cfg.n_fft);
    auto band_center = [&](size_t m) {
        double num = 0.0, den = 0.0;
        for (size_t b = 0; b < cfg.bins(); ++b) {
            num += fb.at({m, b}) * double(b) * bin_hz;
            den += fb.at({m, b});
        }
        return num / den;
    };
    for (size_t t = 0; t < s.frames; ++t) {
        double x0 = 0, y0 = 0, z0 = 0, x1 = 0, y1 = 0, z1 = 0;
        for (size_t m = 0; m < cfg.n_mels; ++m) {
            double fc = band_center(m);
            if (fc > 350.0 && fc < 850.0) {
                x0 += iv.at({0, t, m});
                y0 += iv.at({1, t, m});
                z0 += iv.at({2, t, m});
            } else if (fc > 4550.0 && fc < 5050.0) {
                x1 += iv.at({0, t, m});
                y1 += iv.at({1, t, m});
                z1 += iv.at({2, t, m});
            }
        }
        double az0 = std::atan2(y0, x0) * 180.0 / kPi;
        double el0 = std::atan2(z0, std::sqrt(x0 * x0 + y0 * y0)) * 180.0 / kPi;
        double az1 = std::atan2(y1, x1) * 180.0 / kPi;
        double el1 = std::atan2(z1, std::sqrt(x1 * x1 + y1 * y1)) * 180.0 / kPi;
        CHECK(ang_err(az0, el0, 60.0, 20.0) < 5.0);
        CHECK(ang_err(az1, el1, -90.0, -30.0) < 5.0);
    }
}

TEST_CASE("scene validation: empty scene, overlap cap, duplicate rejection") {
    Rng rng(7);
    SceneSpec empty;
    empty.duration_s = 1.0;
    auto [clip, anns] = synth_foa_scene(empty, rng);
    CHECK(anns.empty());
    for (size_t i = 0; i < clip.samples.numel(); ++i) CHECK(clip.samples[i] == 0.0);

    SceneSpec dup;
    dup.n_classes = 2;
    dup.duration_s = 1.0;
    dup.events.push_back({0, 0.0, 0.8, 30.0, 10.0, {}});
    dup.events.push_back({0, 0.5, 1.0, 30.0, 10.0, {}});
    CHECK_THROWS(synth_foa_scene(dup, rng));

    SceneSpec crowded;
    crowded.n_classes = 8;
    crowded.duration_s = 1.0;
    crowded.max_overlap = 3;
    for (size_t c = 0; c < 4; ++c)
        crowded.events.push_back({c, 0.0, 1.0, double(c) * 30.0, 0.0, {}});
    CHECK_THROWS(synth_foa_scene(crowded, rng));

    SceneSpec bad_angle;
    bad_angle.n_classes = 2;
    bad_angle.duration_s = 1.0;
    bad_angle.events.push_back({0, 0.0, 1.0, 180.0, 0.0, {}});
    CHECK_THROWS(synth_foa_scene(bad_angle, rng));
}

TEST_CASE("synthesis is deterministic for a fixed seed") {
    SceneSpec spec;
    spec.n_classes = 4;
    spec.duration_s = 1.0;
    spec.noise_snr_db = 20.0;
    spec.events.push_back({2, 0.1, 0.9, -45.0, 15.0, {}});
    Rng r1(42), r2(42);
    auto [c1, a1] = synth_foa_scene(spec, r1);
    auto [c2, a2] = synth_foa_scene(spec, r2);
    REQUIRE(c1.samples.numel() == c2.samples.numel());
    for (size_t i = 0; i < c1.samples.numel(); ++i) CHECK(c1.samples[i] == c2.samples[i]);
    CHECK(a1.size() == a2.size());
}

TEST_CASE("moving source follows its path in the annotations") {
    Rng rng(8);
    SceneSpec spec;
    spec.n_classes = 2;
    spec.duration_s = 1.0;
    SceneEvent e{0, 0.0, 1.0, 0.0, 0.0, {}};
    for (size_t f = 0; f < 10; ++f) e.path.push_back({double(f) * 10.0 - 45.0, 5.0});
    spec.events.push_back(e);
    auto [clip, anns] = synth_foa_scene(spec, rng);
    REQUIRE(anns.size() == 10);
    for (size_t f = 0; f < 10; ++f) {
        CHECK(anns[f].frame_idx == f);
        CHECK(anns[f].azimuth_deg == doctest::Approx(double(f) * 10.0 - 45.0));
        CHECK(anns[f].elevation_deg == doctest::Approx(5.0));
    }
}

TEST_CASE("annotation CSV round-trips") {
    std::vector<EventAnnotation> anns = {
        {0, 1, 0, -45.5, 10.25}, {0, 3, 1, 170.0, -89.0}, {7, 1, 0, 0.0, 0.0}};
    std::string path = "anns_roundtrip.csv";
    write_annotations(path, anns);
    auto back = read_annotations(path);
    REQUIRE(back.size() == anns.size());
    for (size_t i = 0; i < anns.size(); ++i) {
        CHECK(back[i].frame_idx == anns[i].frame_idx);
        CHECK(back[i].class_idx == anns[i].class_idx);
        CHECK(back[i].source_idx == anns[i].source_idx);
        CHECK(back[i].azimuth_deg == doctest::Approx(anns[i].azimuth_deg));
        CHECK(back[i].elevation_deg == doctest::Approx(anns[i].elevation_deg));
    }
    std::remove(path.c_str());
}

TEST_CASE("feature files round-trip bit-exactly") {
    SpectralConfig cfg;
    Rng rng(9);
    SceneSpec spec;
    spec.n_classes = 4;
    spec.duration_s = 1.0;
    spec.events.push_back({1, 0.0, 1.0, 30.0, -20.0, {}});
    auto [clip, anns] = synth_foa_scene(spec, rng);
    FeatureTensor f = extract_features(clip, cfg);
    std::string path = "features_roundtrip.swgt";
    save_features(path, f, cfg);
    FeatureTensor f1 = load_features(path);
    CHECK(f1.data.shape() == f.data.shape());
    CHECK(f1.frame_rate == doctest::Approx(f.frame_rate));
    // storage is float32: a second round trip must be exact
    save_features(path, f1, cfg);
    FeatureTensor f2 = load_features(path);
    for (size_t i = 0; i < f1.data.numel(); ++i) CHECK(f2.data[i] == f1.data[i]);
    std::remove(path.c_str());
    std::remove((path + ".hdr").c_str());
}

TEST_CASE("standardization with corpus stats centers every channel") {
    SpectralConfig cfg;
    Rng rng(10);
    std::vector<FeatureTensor> corpus;
    std::vector<AudioClip> clips;
    for (size_t s = 0; s < 3; ++s) {
        SceneSpec spec;
        spec.n_classes = 4;
        spec.duration_s = 1.0;
        spec.events.push_back({s % 4, 0.0, 1.0, double(s) * 50.0 - 100.0, 10.0, {}});
        auto [clip, anns] = synth_foa_scene(spec, rng);
        corpus.push_back(extract_features(clip, cfg));
        clips.push_back(clip);
    }
    ChannelStats st = compute_channel_stats(corpus);
    std::vector<double> sum(7, 0.0), sumsq(7, 0.0);
    size_t count = 0;
    for (const auto& clip : clips) {
        FeatureTensor f = extract_features(clip, cfg, &st);
        const auto& sh = f.data.shape();
        for (size_t t = 0; t < sh[0]; ++t)
            for (size_t m = 0; m < sh[1]; ++m)
                for (size_t c = 0; c < 7; ++c) {
                    double v = f.data.at({t, m, c});
                    sum[c] += v;
                    sumsq[c] += v * v;
                }
        count += sh[0] * sh[1];
    }
    for (size_t c = 0; c < 7; ++c) {
        double mean = sum[c] / double(count);
        double var = sumsq[c] / double(count) - mean * mean;
        CHECK(std::fabs(mean) < 1e-8);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("wav write/read round-trips 4-channel float audio") {
    Rng rng(11);
    AudioClip clip;
    clip.sample_rate = 24000;
    clip.samples = Tensor({4, 500});
    for (size_t i = 0; i < clip.samples.numel(); ++i) clip.samples[i] = rng.uniform(-0.9, 0.9);
    std::string path = "roundtrip.wav";
    write_wav(path, clip);
    AudioClip back = read_wav(path);
    CHECK(back.sample_rate == 24000);
    REQUIRE(back.length() == 500);
    for (size_t i = 0; i < clip.samples.numel(); ++i)
        CHECK(back.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-6));
    // float32 storage: second round trip is exact
    write_wav(path, back);
    AudioClip back2 = read_wav(path);
    for (size_t i = 0; i < back.samples.numel(); ++i) CHECK(back2.samples[i] == back.samples[i]);
    std::remove(path.c_str());
}

TEST_CASE("wav reader handles PCM16 and rejects wrong channel counts") {
    // hand-built 2-frame 4-channel PCM16 file
    auto w16 = [](std::ofstream& f, uint16_t v) {
        char b[2] = {char(v & 0xff), char(v >> 8)};
        f.write(b, 2);
    };
    auto w32 = [](std::ofstream& f, uint32_t v) {
        char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                     char((v >> 24) & 0xff)};
        f.write(b, 4);
    };
    std::string path = "pcm16.wav";
    {
        std::ofstream f(path, std::ios::binary);
        f.write("RIFF", 4);
        w32(f, 36 + 16);
        f.write("WAVE", 4);
        f.write("fmt ", 4);
        w32(f, 16);
        w16(f, 1);      // PCM
        w16(f, 4);      // channels
        w32(f, 24000);  // rate
        w32(f, 24000 * 8);
        w16(f, 8);
        w16(f, 16);
        f.write("data", 4);
        w32(f, 16);
        int16_t vals[8] = {16384, -16384, 0, 32767, -32768, 8192, -8192, 100};
        for (int16_t v : vals) w16(f, uint16_t(v));
    }
    AudioClip clip = read_wav(path);
    REQUIRE(clip.length() == 2);
    CHECK(clip.samples.at({0, 0}) == doctest::Approx(0.5));
    CHECK(clip.samples.at({1, 0}) == doctest::Approx(-0.5));
    CHECK(clip.samples.at({3, 0}) == doctest::Approx(32767.0 / 32768.0));
    CHECK(clip.samples.at({0, 1}) == doctest::Approx(-1.0));
    std::remove(path.c_str());

    // mono file must be rejected
    std::string mono = "mono.wav";
    {
        std::ofstream f(mono, std::ios::binary);
        f.write("RIFF", 4);
        w32(f, 36 + 4);
        f.write("WAVE", 4);
        f.write("fmt ", 4);
        w32(f, 16);
        w16(f, 1);
        w16(f, 1);
        w32(f, 24000);
        w32(f, 48000);
        w16(f, 2);
        w16(f, 16);
        f.write("data", 4);
        w32(f, 4);
        w16(f, 0);
        w16(f, 0);
    }
    CHECK_THROWS(read_wav(mono));
    std::remove(mono.c_str());
}

TEST_CASE("class templates stay inside their assigned band") {
    SpectralConfig cfg;
    for (size_t c : {0ul, 3ul, 7ul}) {
        std::vector<double> sig = class_template(c, 4096, 24000);
        std::vector<std::complex<double>> buf(4096);
        for (size_t i = 0; i < 4096; ++i) buf[i] = sig[i];
        fft(buf);
        double lo = 300.0 + 700.0 * double(c), hi = lo + 600.0;
        double bin_hz = 24000.0 / 4096.0;
        double in_band = 0.0, total = 0.0;
        for (size_t b = 0; b < 2048; ++b) {
            double e = std::norm(buf[b]);
            total += e;
            double f = double(b) * bin_hz;
            if (f >= lo - 2.0 * bin_hz && f <= hi + 2.0 * bin_hz) in_band += e;
        }
        CHECK(in_band > 0.95 * total);
    }
}
