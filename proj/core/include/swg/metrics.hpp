#pragma once

#include <array>
#include <string>
#include <vector>

#include "swg/scene.hpp"

namespace swg {

struct DoaEvent {
    size_t class_idx = 0;
    std::array<double, 3> u{1.0, 0.0, 0.0};  // unit direction
};

// Reference and predicted events for one label frame.
struct FrameEvents {
    std::vector<DoaEvent> ref, pred;
};

// Great-circle distance in degrees; inputs must be unit vectors (1e-6 tol).
double angular_distance(const std::array<double, 3>& u, const std::array<double, 3>& v);

// Minimum-cost assignment. Returns per-row column index, -1 for unassigned
// rows; exactly min(rows, cols) rows are assigned. Rectangular matrices are
// padded to square with a large sentinel internally.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

struct LocResult {
    double LE = 180.0;   // degrees, mean over (class, frame) cells with matches
    double LR_CD = 0.0;  // class-averaged localization recall
    bool le_flagged = false;  // no matched pairs anywhere: LE reported as 180
    std::vector<double> LE_c, LR_c;       // per class; LE_c = 180 + flag when unmatched
    std::vector<bool> class_has_refs;     // classes absent from refs excluded from averages
};

LocResult class_dependent_loc(const std::vector<FrameEvents>& frames, size_t n_classes);

struct SedResult {
    double ER = 1.0, F = 0.0, precision = 0.0, recall = 0.0;
    size_t S = 0, D = 0, I = 0, TP = 0, FP = 0, FN = 0;
    std::vector<double> F_c;  // per-class F score
};

// Segment-based location-dependent detection metrics. Within each segment,
// frame-wise per-class Hungarian matching; matched pairs within threshold_deg
// are TPs, beyond-threshold or unmatched predictions FPs, unmatched
// references FNs; per segment S = min(FN,FP), D = max(0,FN-FP),
// I = max(0,FP-FN). segment_frames = 1 reduces to frame-based scoring.
SedResult location_dependent_sed(const std::vector<FrameEvents>& frames, size_t n_classes,
                                 double threshold_deg = 20.0, size_t segment_frames = 10);

double seld_score(double ER, double F, double LE_deg, double LR_CD);

struct MetricsReport {
    double ER = 1.0, F20 = 0.0, LE_deg = 180.0, LR_CD = 0.0, SELD = 1.0;
    bool le_flagged = false;
    std::vector<double> F_c, LE_c, LR_c;
};

MetricsReport compute_metrics(const std::vector<FrameEvents>& frames, size_t n_classes,
                              double threshold_deg = 20.0, size_t segment_frames = 10);

// Pair two annotation streams into per-frame event lists. Frame count is
// max frame index + 1 across both streams (at least min_frames).
std::vector<FrameEvents> frames_from_annotations(const std::vector<EventAnnotation>& ref,
                                                 const std::vector<EventAnnotation>& pred,
                                                 size_t min_frames = 0);

std::string report_to_csv(const MetricsReport& r);
std::string report_to_text(const MetricsReport& r);

}  // namespace swg
