#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "swg/metrics.hpp"

using namespace swg;

namespace {

std::array<double, 3> dir(double az, double el) {
    double u[3];
    direction_vector(az, el, u);
    return {u[0], u[1], u[2]};
}

// Exhaustive assignment minimum: pad to square with zero-cost dummy rows and
// scan all permutations.
double brute_force_min(const std::vector<std::vector<double>>& cost) {
    size_t rows = cost.size(), cols = cost[0].size();
    size_t n = std::max(rows, cols);
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double total = 0.0;
        for (size_t i = 0; i < rows; ++i)
            if (perm[i] < cols) total += cost[i][perm[i]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double assigned_cost(const std::vector<std::vector<double>>& cost, const std::vector<int>& a) {
    double total = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] >= 0) total += cost[i][size_t(a[i])];
    return total;
}

FrameEvents frame(std::vector<DoaEvent> ref, std::vector<DoaEvent> pred) {
    FrameEvents f;
    f.ref = std::move(ref);
    f.pred = std::move(pred);
    return f;
}

}  // namespace

TEST_CASE("angular_distance basics") {
    std::array<double, 3> x{1, 0, 0}, y{0, 1, 0}, nx{-1, 0, 0};
    CHECK(angular_distance(x, x) == doctest::Approx(0.0));
    CHECK(angular_distance(x, y) == doctest::Approx(90.0));
    CHECK(angular_distance(x, nx) == doctest::Approx(180.0));
    // azimuth difference of 20 degrees at zero elevation
    CHECK(angular_distance(dir(10.0, 0.0), dir(30.0, 0.0)) == doctest::Approx(20.0));
    std::array<double, 3> bad{1.0, 1.0, 0.0};
    CHECK_THROWS(angular_distance(x, bad));
}

TEST_CASE("hungarian hand examples") {
    auto a = hungarian({{1, 2}, {3, 0}});
    CHECK(a == std::vector<int>{0, 1});
    CHECK(assigned_cost({{1, 2}, {3, 0}}, a) == doctest::Approx(1.0));

    // diagonal-dominant: unique optimum is the diagonal
    std::vector<std::vector<double>> diag = {
        {0, 9, 9, 9}, {9, 0, 9, 9}, {9, 9, 0, 9}, {9, 9, 9, 0}};
    auto d = hungarian(diag);
    for (size_t i = 0; i < 4; ++i) CHECK(d[i] == int(i));
}

TEST_CASE("hungarian rectangular shapes assign min(m,n) rows") {
    auto wide = hungarian({{5.0, 1.0, 3.0}});
    CHECK(wide == std::vector<int>{1});

    auto tall = hungarian({{5.0}, {1.0}, {3.0}});
    size_t assigned = 0;
    for (int v : tall)
        if (v >= 0) ++assigned;
    CHECK(assigned == 1);
    CHECK(tall[1] == 0);

    CHECK_THROWS(hungarian({{1.0, std::numeric_limits<double>::infinity()}}));
}

TEST_CASE("hungarian equals factorial brute force on 1000 random matrices up to 6x6") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t rows = 1 + rng.index(6), cols = 1 + rng.index(6);
        std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
        for (auto& r : cost)
            for (auto& v : r) v = rng.uniform(-10.0, 10.0);
        auto a = hungarian(cost);
        size_t assigned = 0;
        for (int v : a)
            if (v >= 0) ++assigned;
        REQUIRE(assigned == std::min(rows, cols));
        // no duplicate columns
        std::vector<bool> seen(cols, false);
        for (int v : a)
            if (v >= 0) {
                REQUIRE(!seen[size_t(v)]);
                seen[size_t(v)] = true;
            }
        CHECK(assigned_cost(cost, a) == doctest::Approx(brute_force_min(cost)).epsilon(1e-9));
    }
}

TEST_CASE("class_dependent_loc: perfect predictions give LE=0, LR=1") {
    std::vector<FrameEvents> frames;
    for (int l = 0; l < 3; ++l)
        frames.push_back(frame({{0, dir(30, 10)}, {1, dir(-60, -20)}},
                               {{0, dir(30, 10)}, {1, dir(-60, -20)}}));
    auto res = class_dependent_loc(frames, 3);
    CHECK(res.LE == doctest::Approx(0.0));
    CHECK(res.LR_CD == doctest::Approx(1.0));
    CHECK(!res.le_flagged);
    CHECK(res.class_has_refs[0]);
    CHECK(!res.class_has_refs[2]);  // absent class excluded
}

TEST_CASE("class_dependent_loc: single pair 10 degrees away") {
    std::vector<FrameEvents> frames{frame({{0, dir(0, 0)}}, {{0, dir(10, 0)}})};
    auto res = class_dependent_loc(frames, 1);
    CHECK(res.LE == doctest::Approx(10.0));
    CHECK(res.LR_CD == doctest::Approx(1.0));
}

TEST_CASE("class_dependent_loc: 2 refs, 1 pred picks the 5-degree match") {
    std::vector<FrameEvents> frames{
        frame({{0, dir(0, 0)}, {0, dir(40, 0)}}, {{0, dir(5, 0)}})};
    auto res = class_dependent_loc(frames, 1);
    CHECK(res.LE == doctest::Approx(5.0));
    CHECK(res.LR_c[0] == doctest::Approx(0.5));  // 1 matched of 2 refs
}

TEST_CASE("location_dependent_sed: perfect predictions") {
    std::vector<FrameEvents> frames;
    for (int l = 0; l < 12; ++l)
        frames.push_back(frame({{0, dir(30, 10)}}, {{0, dir(30, 10)}}));
    auto res = location_dependent_sed(frames, 2);
    CHECK(res.ER == doctest::Approx(0.0));
    CHECK(res.F == doctest::Approx(1.0));
    CHECK(res.TP == 12);
    CHECK(res.FP == 0);
    CHECK(res.FN == 0);
}

TEST_CASE("location_dependent_sed: one TP plus one spurious wrong-class pred") {
    // 2 refs (classes 0, 1); preds: class 0 within 20 deg, class 2 spurious
    std::vector<FrameEvents> frames{frame({{0, dir(0, 0)}, {1, dir(90, 0)}},
                                          {{0, dir(10, 0)}, {2, dir(-90, 0)}})};
    auto res = location_dependent_sed(frames, 3);
    CHECK(res.S == 1);
    CHECK(res.D == 0);
    CHECK(res.I == 0);
    CHECK(res.ER == doctest::Approx(0.5));
    CHECK(res.precision == doctest::Approx(0.5));
    CHECK(res.recall == doctest::Approx(0.5));
    CHECK(res.F == doctest::Approx(0.5));
}

TEST_CASE("location_dependent_sed: 25-degree miss counts FP and FN") {
    std::vector<FrameEvents> frames{frame({{0, dir(0, 0)}}, {{0, dir(25, 0)}})};
    auto res = location_dependent_sed(frames, 1);
    CHECK(res.TP == 0);
    CHECK(res.FP == 1);
    CHECK(res.FN == 1);
    CHECK(res.S == 1);
    CHECK(res.ER == doctest::Approx(1.0));
    CHECK(res.F == doctest::Approx(0.0));
}

TEST_CASE("segment_frames=1 reduces to frame-based scoring") {
    // frame 0: deletion; frame 1: insertion. Per-frame: D=1, I=1, ER=2/1... n_ref=1.
    std::vector<FrameEvents> frames{frame({{0, dir(0, 0)}}, {}), frame({}, {{0, dir(0, 0)}})};
    auto per_frame = location_dependent_sed(frames, 1, 20.0, 1);
    CHECK(per_frame.D == 1);
    CHECK(per_frame.I == 1);
    CHECK(per_frame.S == 0);
    CHECK(per_frame.ER == doctest::Approx(2.0));
    // one 10-frame segment: the FP and FN pair up as a substitution
    auto per_seg = location_dependent_sed(frames, 1, 20.0, 10);
    CHECK(per_seg.S == 1);
    CHECK(per_seg.ER == doctest::Approx(1.0));
}

TEST_CASE("seld_score published component combinations") {
    CHECK(seld_score(0.0, 1.0, 0.0, 1.0) == doctest::Approx(0.0));
    CHECK(std::fabs(seld_score(0.64, 0.452, 24.5, 0.657) - 0.416) < 1.5e-3);
    CHECK(std::fabs(seld_score(0.65, 0.484, 21.5, 0.704) - 0.396) < 1.5e-3);
}

TEST_CASE("seld_score monotonicity") {
    double base = seld_score(0.5, 0.5, 45.0, 0.5);
    CHECK(seld_score(0.6, 0.5, 45.0, 0.5) > base);
    CHECK(seld_score(0.5, 0.6, 45.0, 0.5) < base);
    CHECK(seld_score(0.5, 0.5, 60.0, 0.5) > base);
    CHECK(seld_score(0.5, 0.5, 45.0, 0.6) < base);
}

TEST_CASE("swapping predictions and references keeps LE and F, swaps P and R") {
    Rng rng(5);
    std::vector<FrameEvents> fwd, rev;
    for (int l = 0; l < 20; ++l) {
        FrameEvents f;
        size_t nr = rng.index(3), np = rng.index(3);
        for (size_t i = 0; i < nr; ++i)
            f.ref.push_back({rng.index(3), dir(rng.uniform(-180, 180), rng.uniform(-90, 90))});
        for (size_t i = 0; i < np; ++i)
            f.pred.push_back({rng.index(3), dir(rng.uniform(-180, 180), rng.uniform(-90, 90))});
        fwd.push_back(f);
        std::swap(f.ref, f.pred);
        rev.push_back(f);
    }
    auto lf = class_dependent_loc(fwd, 3);
    auto lr = class_dependent_loc(rev, 3);
    CHECK(lf.LE == doctest::Approx(lr.LE).epsilon(1e-10));
    auto sf = location_dependent_sed(fwd, 3);
    auto sr = location_dependent_sed(rev, 3);
    CHECK(sf.TP == sr.TP);
    CHECK(sf.FP == sr.FN);
    CHECK(sf.FN == sr.FP);
    CHECK(sf.precision == doctest::Approx(sr.recall).epsilon(1e-10));
    CHECK(sf.recall == doctest::Approx(sr.precision).epsilon(1e-10));
    CHECK(sf.F == doctest::Approx(sr.F).epsilon(1e-10));
}

TEST_CASE("metrics are invariant to within-frame event ordering") {
    std::vector<FrameEvents> a{frame({{0, dir(0, 0)}, {1, dir(50, 10)}, {0, dir(-120, -30)}},
                                     {{1, dir(52, 12)}, {0, dir(3, 1)}})};
    std::vector<FrameEvents> b{frame({{0, dir(-120, -30)}, {0, dir(0, 0)}, {1, dir(50, 10)}},
                                     {{0, dir(3, 1)}, {1, dir(52, 12)}})};
    auto ra = compute_metrics(a, 2);
    auto rb = compute_metrics(b, 2);
    CHECK(ra.ER == doctest::Approx(rb.ER));
    CHECK(ra.F20 == doctest::Approx(rb.F20));
    CHECK(ra.LE_deg == doctest::Approx(rb.LE_deg));
    CHECK(ra.LR_CD == doctest::Approx(rb.LR_CD));
}

TEST_CASE("empty predictions: ER=1, F20=0, LR_CD=0, LE flagged at 180") {
    std::vector<FrameEvents> frames;
    for (int l = 0; l < 5; ++l) frames.push_back(frame({{0, dir(30, 0)}}, {}));
    auto r = compute_metrics(frames, 2);
    CHECK(r.ER == doctest::Approx(1.0));
    CHECK(r.F20 == doctest::Approx(0.0));
    CHECK(r.LR_CD == doctest::Approx(0.0));
    CHECK(r.LE_deg == doctest::Approx(180.0));
    CHECK(r.le_flagged);
}

TEST_CASE("annotation CSVs feed the metrics end to end") {
    std::vector<EventAnnotation> ref = {
        {0, 0, 0, 30.0, 10.0}, {1, 0, 0, 30.0, 10.0}, {1, 1, 1, -60.0, 0.0}};
    auto frames = frames_from_annotations(ref, ref);
    REQUIRE(frames.size() == 2);
    auto r = compute_metrics(frames, 2);
    CHECK(r.ER == doctest::Approx(0.0));
    CHECK(r.F20 == doctest::Approx(1.0));
    CHECK(r.LE_deg == doctest::Approx(0.0));
    CHECK(r.LR_CD == doctest::Approx(1.0));
    CHECK(r.SELD == doctest::Approx(0.0));

    auto text = report_to_text(r);
    CHECK(text.find("SELD") != std::string::npos);
    auto csv = report_to_csv(r);
    CHECK(csv.find("ER,0") != std::string::npos);
    CHECK(csv.find("LE_c0") != std::string::npos);
}
