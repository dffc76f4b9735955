#include "swg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace swg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double angular_distance(const std::array<double, 3>& u, const std::array<double, 3>& v) {
    double nu = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    double nv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if (std::fabs(nu - 1.0) > 2e-6 || std::fabs(nv - 1.0) > 2e-6)
        throw std::invalid_argument("angular_distance: inputs must be unit vectors");
    double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    dot = std::min(1.0, std::max(-1.0, dot));
    return std::acos(dot) * 180.0 / kPi;
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    size_t rows = cost.size();
    if (rows == 0) return {};
    size_t cols = cost[0].size();
    for (const auto& r : cost)
        if (r.size() != cols) throw std::invalid_argument("hungarian: ragged cost matrix");
    if (cols == 0) return std::vector<int>(rows, -1);
    for (const auto& r : cost)
        for (double v : r)
            if (!std::isfinite(v)) throw std::invalid_argument("hungarian: non-finite cost");

    // pad to square with a sentinel exceeding any real assignment total
    size_t n = std::max(rows, cols);
    double sentinel = 1.0;
    for (const auto& r : cost)
        for (double v : r) sentinel += std::fabs(v);
    std::vector<std::vector<double>> a(n, std::vector<double>(n, sentinel));
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) a[i][j] = cost[i][j];

    // JV shortest augmenting path, O(n^3); 1-based potentials
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<size_t> p(n + 1, 0), way(n + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        p[0] = i;
        size_t j0 = 0;
        std::vector<double> minv(n + 1, INF);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            size_t i0 = p[j0], j1 = 0;
            double delta = INF;
            for (size_t j = 1; j <= n; ++j)
                if (!used[j]) {
                    double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (size_t j = 0; j <= n; ++j)
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> out(rows, -1);
    for (size_t j = 1; j <= n; ++j) {
        size_t i = p[j];
        if (i >= 1 && i <= rows && j <= cols) out[i - 1] = int(j - 1);
    }
    return out;
}

namespace {

// Per-class event pointers for one frame.
void split_by_class(const std::vector<DoaEvent>& events, size_t n_classes,
                    std::vector<std::vector<const DoaEvent*>>& out) {
    out.assign(n_classes, {});
    for (const auto& e : events) {
        if (e.class_idx >= n_classes)
            throw std::invalid_argument("metrics: class index out of range");
        out[e.class_idx].push_back(&e);
    }
}

}  // namespace

LocResult class_dependent_loc(const std::vector<FrameEvents>& frames, size_t n_classes) {
    LocResult res;
    res.LE_c.assign(n_classes, 180.0);
    res.LR_c.assign(n_classes, 0.0);
    res.class_has_refs.assign(n_classes, false);

    std::vector<double> le_sum(n_classes, 0.0);
    std::vector<size_t> le_cells(n_classes, 0);
    std::vector<size_t> matched(n_classes, 0), ref_count(n_classes, 0);
    std::vector<std::vector<const DoaEvent*>> ref_c, pred_c;

    for (const auto& fr : frames) {
        split_by_class(fr.ref, n_classes, ref_c);
        split_by_class(fr.pred, n_classes, pred_c);
        for (size_t c = 0; c < n_classes; ++c) {
            ref_count[c] += ref_c[c].size();
            if (ref_c[c].empty() || pred_c[c].empty()) continue;
            std::vector<std::vector<double>> D(ref_c[c].size(),
                                               std::vector<double>(pred_c[c].size()));
            for (size_t i = 0; i < ref_c[c].size(); ++i)
                for (size_t j = 0; j < pred_c[c].size(); ++j)
                    D[i][j] = angular_distance(ref_c[c][i]->u, pred_c[c][j]->u);
            auto assign = hungarian(D);
            double cell_sum = 0.0;
            size_t cell_n = 0;
            for (size_t i = 0; i < assign.size(); ++i)
                if (assign[i] >= 0) {
                    cell_sum += D[i][size_t(assign[i])];
                    ++cell_n;
                }
            if (cell_n > 0) {
                le_sum[c] += cell_sum / double(cell_n);
                ++le_cells[c];
                matched[c] += cell_n;
            }
        }
    }

    double le_total = 0.0;
    size_t le_total_cells = 0;
    double lr_total = 0.0;
    size_t classes_with_refs = 0;
    for (size_t c = 0; c < n_classes; ++c) {
        if (ref_count[c] == 0) continue;
        res.class_has_refs[c] = true;
        ++classes_with_refs;
        res.LR_c[c] = double(matched[c]) / double(ref_count[c]);
        lr_total += res.LR_c[c];
        if (le_cells[c] > 0) {
            res.LE_c[c] = le_sum[c] / double(le_cells[c]);
            le_total += le_sum[c];
            le_total_cells += le_cells[c];
        }
    }
    res.LR_CD = classes_with_refs ? lr_total / double(classes_with_refs) : 0.0;
    if (le_total_cells > 0) {
        res.LE = le_total / double(le_total_cells);
    } else {
        res.LE = 180.0;
        res.le_flagged = true;
    }
    return res;
}

SedResult location_dependent_sed(const std::vector<FrameEvents>& frames, size_t n_classes,
                                 double threshold_deg, size_t segment_frames) {
    if (segment_frames == 0)
        throw std::invalid_argument("location_dependent_sed: segment_frames must be >= 1");
    SedResult res;
    std::vector<size_t> tp_c(n_classes, 0), fp_c(n_classes, 0), fn_c(n_classes, 0);
    size_t n_ref = 0;
    size_t sum_S = 0, sum_D = 0, sum_I = 0;
    std::vector<std::vector<const DoaEvent*>> ref_c, pred_c;

    for (size_t seg = 0; seg * segment_frames < frames.size(); ++seg) {
        size_t seg_fn = 0, seg_fp = 0;
        size_t lo = seg * segment_frames;
        size_t hi = std::min(frames.size(), lo + segment_frames);
        for (size_t l = lo; l < hi; ++l) {
            split_by_class(frames[l].ref, n_classes, ref_c);
            split_by_class(frames[l].pred, n_classes, pred_c);
            n_ref += frames[l].ref.size();
            for (size_t c = 0; c < n_classes; ++c) {
                size_t nr = ref_c[c].size(), np = pred_c[c].size();
                size_t tp = 0;
                if (nr > 0 && np > 0) {
                    std::vector<std::vector<double>> D(nr, std::vector<double>(np));
                    for (size_t i = 0; i < nr; ++i)
                        for (size_t j = 0; j < np; ++j)
                            D[i][j] = angular_distance(ref_c[c][i]->u, pred_c[c][j]->u);
                    auto assign = hungarian(D);
                    for (size_t i = 0; i < assign.size(); ++i)
                        if (assign[i] >= 0 && D[i][size_t(assign[i])] <= threshold_deg) ++tp;
                }
                size_t fp = np - tp, fn = nr - tp;
                tp_c[c] += tp;
                fp_c[c] += fp;
                fn_c[c] += fn;
                seg_fp += fp;
                seg_fn += fn;
            }
        }
        sum_S += std::min(seg_fn, seg_fp);
        sum_D += seg_fn > seg_fp ? seg_fn - seg_fp : 0;
        sum_I += seg_fp > seg_fn ? seg_fp - seg_fn : 0;
    }

    res.S = sum_S;
    res.D = sum_D;
    res.I = sum_I;
    for (size_t c = 0; c < n_classes; ++c) {
        res.TP += tp_c[c];
        res.FP += fp_c[c];
        res.FN += fn_c[c];
    }
    res.ER = n_ref ? double(sum_S + sum_D + sum_I) / double(n_ref) : 0.0;
    res.precision = (res.TP + res.FP) ? double(res.TP) / double(res.TP + res.FP) : 0.0;
    res.recall = (res.TP + res.FN) ? double(res.TP) / double(res.TP + res.FN) : 0.0;
    res.F = (res.precision + res.recall > 0.0)
                ? 2.0 * res.precision * res.recall / (res.precision + res.recall)
                : 0.0;
    res.F_c.assign(n_classes, 0.0);
    for (size_t c = 0; c < n_classes; ++c) {
        double denom = double(2 * tp_c[c] + fp_c[c] + fn_c[c]);
        res.F_c[c] = denom > 0.0 ? 2.0 * double(tp_c[c]) / denom : 0.0;
    }
    return res;
}

double seld_score(double ER, double F, double LE_deg, double LR_CD) {
    return (ER + (1.0 - F) + LE_deg / 180.0 + (1.0 - LR_CD)) / 4.0;
}

MetricsReport compute_metrics(const std::vector<FrameEvents>& frames, size_t n_classes,
                              double threshold_deg, size_t segment_frames) {
    MetricsReport r;
    SedResult sed = location_dependent_sed(frames, n_classes, threshold_deg, segment_frames);
    LocResult loc = class_dependent_loc(frames, n_classes);
    r.ER = sed.ER;
    r.F20 = sed.F;
    r.LE_deg = loc.LE;
    r.LR_CD = loc.LR_CD;
    r.le_flagged = loc.le_flagged;
    r.SELD = seld_score(r.ER, r.F20, r.LE_deg, r.LR_CD);
    r.F_c = sed.F_c;
    r.LE_c = loc.LE_c;
    r.LR_c = loc.LR_c;
    return r;
}

std::vector<FrameEvents> frames_from_annotations(const std::vector<EventAnnotation>& ref,
                                                 const std::vector<EventAnnotation>& pred,
                                                 size_t min_frames) {
    size_t n_frames = min_frames;
    for (const auto& a : ref) n_frames = std::max(n_frames, a.frame_idx + 1);
    for (const auto& a : pred) n_frames = std::max(n_frames, a.frame_idx + 1);
    std::vector<FrameEvents> frames(n_frames);
    auto push = [](std::vector<DoaEvent>& dst, const EventAnnotation& a) {
        DoaEvent e;
        e.class_idx = a.class_idx;
        double u[3];
        direction_vector(a.azimuth_deg, a.elevation_deg, u);
        e.u = {u[0], u[1], u[2]};
        dst.push_back(e);
    };
    for (const auto& a : ref) push(frames[a.frame_idx].ref, a);
    for (const auto& a : pred) push(frames[a.frame_idx].pred, a);
    return frames;
}

std::string report_to_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << "metric,value\n"
       << "ER," << r.ER << "\nF20," << r.F20 << "\nLE_deg," << r.LE_deg << "\nLR_CD," << r.LR_CD
       << "\nSELD," << r.SELD << "\nLE_flagged," << (r.le_flagged ? 1 : 0) << "\n";
    for (size_t c = 0; c < r.F_c.size(); ++c)
        os << "F_c" << c << ',' << r.F_c[c] << "\nLE_c" << c << ',' << r.LE_c[c] << "\nLR_c" << c
           << ',' << r.LR_c[c] << "\n";
    return os.str();
}

std::string report_to_text(const MetricsReport& r) {
    std::ostringstream os;
    os << "ER:      " << r.ER << "\nF20:     " << r.F20 << "\nLE:      " << r.LE_deg << " deg"
       << (r.le_flagged ? " (no matched pairs)" : "") << "\nLR_CD:   " << r.LR_CD
       << "\nSELD:    " << r.SELD << "\n";
    if (!r.F_c.empty()) {
        os << "class    F        LE(deg)  LR\n";
        for (size_t c = 0; c < r.F_c.size(); ++c) {
            os << c << "        " << r.F_c[c] << "  " << r.LE_c[c] << "  " << r.LR_c[c] << "\n";
        }
    }
    return os.str();
}

}  // namespace swg
