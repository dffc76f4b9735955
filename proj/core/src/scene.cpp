#include "swg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swg {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLabelHopS = 0.1;  // 100 ms label resolution
}  // namespace

void SceneEvent::validate(double duration_s) const {
    if (!(onset_s < offset_s))
        throw std::invalid_argument("scene event: onset must precede offset");
    if (onset_s < 0.0 || offset_s > duration_s + 1e-9)
        throw std::invalid_argument("scene event: active interval outside clip duration");
    if (azimuth_deg < -180.0 || azimuth_deg >= 180.0)
        throw std::invalid_argument("scene event: azimuth out of [-180, 180)");
    if (elevation_deg < -90.0 || elevation_deg > 90.0)
        throw std::invalid_argument("scene event: elevation out of [-90, 90]");
}

void SceneSpec::validate() const {
    if (duration_s <= 0.0) throw std::invalid_argument("scene: duration must be positive");
    if (n_classes == 0) throw std::invalid_argument("scene: need at least one class");
    for (const auto& e : events) {
        e.validate(duration_s);
        if (e.class_idx >= n_classes)
            throw std::invalid_argument("scene: class index " + std::to_string(e.class_idx) +
                                        " out of range");
    }
    // overlap cap and duplicate (class, direction) rejection
    for (size_t i = 0; i < events.size(); ++i)
        for (size_t j = i + 1; j < events.size(); ++j) {
            const auto& a = events[i];
            const auto& b = events[j];
            bool overlap = a.onset_s < b.offset_s && b.onset_s < a.offset_s;
            if (overlap && a.class_idx == b.class_idx &&
                std::fabs(a.azimuth_deg - b.azimuth_deg) < 1e-9 &&
                std::fabs(a.elevation_deg - b.elevation_deg) < 1e-9)
                throw std::invalid_argument(
                    "scene: overlapping duplicate (class, direction) events");
        }
    size_t label_frames = size_t(std::ceil(duration_s / kLabelHopS));
    for (size_t f = 0; f < label_frames; ++f) {
        double t = (double(f) + 0.5) * kLabelHopS;
        size_t active = 0;
        for (const auto& e : events)
            if (t >= e.onset_s && t < e.offset_s) ++active;
        if (active > max_overlap)
            throw std::invalid_argument("scene: more than " + std::to_string(max_overlap) +
                                        " simultaneous events");
    }
}

void direction_vector(double azimuth_deg, double elevation_deg, double u[3]) {
    double az = azimuth_deg * kPi / 180.0;
    double el = elevation_deg * kPi / 180.0;
    u[0] = std::cos(el) * std::cos(az);
    u[1] = std::cos(el) * std::sin(az);
    u[2] = std::sin(el);
}

std::vector<double> class_template(size_t class_idx, size_t length, size_t sample_rate) {
    double lo = 300.0 + 700.0 * double(class_idx);
    double width = 600.0;
    Rng rng(1000 + class_idx);
    constexpr size_t n_partials = 24;
    std::vector<double> freqs(n_partials), phases(n_partials);
    for (size_t p = 0; p < n_partials; ++p) {
        freqs[p] = lo + width * rng.uniform();
        phases[p] = 2.0 * kPi * rng.uniform();
    }
    std::vector<double> sig(length);
    double peak = 0.0;
    for (size_t i = 0; i < length; ++i) {
        double t = double(i) / double(sample_rate);
        double v = 0.0;
        for (size_t p = 0; p < n_partials; ++p)
            v += std::sin(2.0 * kPi * freqs[p] * t + phases[p]);
        sig[i] = v;
        peak = std::max(peak, std::fabs(v));
    }
    if (peak > 0.0)
        for (auto& v : sig) v /= peak;
    return sig;
}

std::pair<AudioClip, std::vector<EventAnnotation>> synth_foa_scene(const SceneSpec& spec,
                                                                  Rng& rng) {
    spec.validate();
    size_t L = spec.length_samples
                   ? *spec.length_samples
                   : size_t(std::llround(spec.duration_s * double(spec.sample_rate)));
    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    clip.samples = Tensor::zeros({4, L});

    size_t label_frames = size_t(std::ceil(spec.duration_s / kLabelHopS));
    std::vector<EventAnnotation> anns;

    for (size_t ei = 0; ei < spec.events.size(); ++ei) {
        const auto& e = spec.events[ei];
        size_t on = std::min(L, size_t(std::llround(e.onset_s * double(spec.sample_rate))));
        size_t off = std::min(L, size_t(std::llround(e.offset_s * double(spec.sample_rate))));
        if (on >= off) continue;
        std::vector<double> tmpl = class_template(e.class_idx, off - on, spec.sample_rate);

        size_t f_on = size_t(std::floor(e.onset_s / kLabelHopS + 1e-9));
        size_t f_off = std::min(label_frames,
                                size_t(std::ceil(e.offset_s / kLabelHopS - 1e-9)));
        auto angles_at = [&](size_t f) -> std::pair<double, double> {
            if (!e.path.empty()) {
                size_t idx = std::min(f - f_on, e.path.size() - 1);
                return e.path[idx];
            }
            return {e.azimuth_deg, e.elevation_deg};
        };

        // render per label frame so moving sources follow their path
        for (size_t f = f_on; f < f_off; ++f) {
            auto [az, el] = angles_at(f);
            double u[3];
            direction_vector(az, el, u);
            size_t seg_on = std::max(on, size_t(std::llround(double(f) * kLabelHopS *
                                                             double(spec.sample_rate))));
            size_t seg_off = std::min(off, size_t(std::llround(double(f + 1) * kLabelHopS *
                                                               double(spec.sample_rate))));
            for (size_t i = seg_on; i < seg_off; ++i) {
                double s = tmpl[i - on];
                clip.samples.at({0, i}) += s;
                clip.samples.at({1, i}) += u[0] * s;
                clip.samples.at({2, i}) += u[1] * s;
                clip.samples.at({3, i}) += u[2] * s;
            }
            EventAnnotation a;
            a.frame_idx = f;
            a.class_idx = e.class_idx;
            a.source_idx = ei;
            a.azimuth_deg = az;
            a.elevation_deg = el;
            anns.push_back(a);
        }
    }

    if (spec.noise_snr_db > 0.0 && !spec.events.empty()) {
        double sig_pow = 0.0;
        for (size_t i = 0; i < clip.samples.numel(); ++i)
            sig_pow += clip.samples[i] * clip.samples[i];
        sig_pow /= double(clip.samples.numel());
        double noise_pow = sig_pow / std::pow(10.0, spec.noise_snr_db / 10.0);
        double sigma = std::sqrt(noise_pow);
        for (size_t i = 0; i < clip.samples.numel(); ++i)
            clip.samples[i] += rng.normal(0.0, sigma);
    }

    double peak = 0.0;
    for (size_t i = 0; i < clip.samples.numel(); ++i)
        peak = std::max(peak, std::fabs(clip.samples[i]));
    if (peak > 1.0)
        for (size_t i = 0; i < clip.samples.numel(); ++i) clip.samples[i] /= peak;

    std::sort(anns.begin(), anns.end(), [](const EventAnnotation& a, const EventAnnotation& b) {
        if (a.frame_idx != b.frame_idx) return a.frame_idx < b.frame_idx;
        if (a.class_idx != b.class_idx) return a.class_idx < b.class_idx;
        return a.source_idx < b.source_idx;
    });
    return {std::move(clip), std::move(anns)};
}

void write_annotations(const std::string& path, const std::vector<EventAnnotation>& anns) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write annotations: " + path);
    f << "frame_idx,class_idx,source_idx,azimuth_deg,elevation_deg\n";
    for (const auto& a : anns)
        f << a.frame_idx << ',' << a.class_idx << ',' << a.source_idx << ',' << a.azimuth_deg
          << ',' << a.elevation_deg << '\n';
}

std::vector<EventAnnotation> read_annotations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read annotations: " + path);
    std::vector<EventAnnotation> out;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (first && line.rfind("frame_idx", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        std::istringstream ss(line);
        EventAnnotation a;
        char comma;
        if (!(ss >> a.frame_idx >> comma >> a.class_idx >> comma >> a.source_idx >> comma >>
              a.azimuth_deg >> comma >> a.elevation_deg))
            throw std::runtime_error("malformed annotation row in " + path + ": " + line);
        out.push_back(a);
    }
    return out;
}

}  // namespace swg
