#pragma once

#include <optional>
#include <string>
#include <vector>

#include "swg/features.hpp"
#include "swg/rng.hpp"

namespace swg {

// One spatial event: a class-specific source active over [onset_s, offset_s)
// at a fixed direction, or moving along a per-label-frame path.
struct SceneEvent {
    size_t class_idx = 0;
    double onset_s = 0.0, offset_s = 0.0;
    double azimuth_deg = 0.0;    // [-180, 180)
    double elevation_deg = 0.0;  // [-90, 90]
    // Optional motion: per-100ms-frame (az, el) pairs overriding the static
    // direction for the event's active frames.
    std::vector<std::pair<double, double>> path;

    void validate(double duration_s) const;
};

struct SceneSpec {
    std::vector<SceneEvent> events;
    double duration_s = 5.0;
    size_t sample_rate = 24000;
    size_t n_classes = 13;
    size_t max_overlap = 3;
    double noise_snr_db = 0.0;  // <= 0 disables diffuse noise
    // When set, the clip is padded/truncated to exactly this many samples.
    std::optional<size_t> length_samples;

    void validate() const;
};

// One row of ground truth at 100 ms label resolution.
struct EventAnnotation {
    size_t frame_idx = 0;  // 100 ms label frame
    size_t class_idx = 0;
    size_t source_idx = 0;  // index of the event in the scene
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
};

// Unit direction vector from angles: (cos el cos az, cos el sin az, sin el).
void direction_vector(double azimuth_deg, double elevation_deg, double u[3]);

// Fixed band-limited noise template for a class: sinusoid sum covering the
// band [300 + 700c, 300 + 700c + 600] Hz, deterministic per class.
std::vector<double> class_template(size_t class_idx, size_t length, size_t sample_rate);

std::pair<AudioClip, std::vector<EventAnnotation>> synth_foa_scene(const SceneSpec& spec, Rng& rng);

// Annotation CSV: frame_idx,class_idx,source_idx,azimuth_deg,elevation_deg.
void write_annotations(const std::string& path, const std::vector<EventAnnotation>& anns);
std::vector<EventAnnotation> read_annotations(const std::string& path);

}  // namespace swg
