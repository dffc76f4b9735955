// Command-line surface for the SELD pipeline: synthesize scenes, extract
// features, train, infer, evaluate, plot trajectories, and run gradient
// checks. Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "swg/config.hpp"
#include "swg/gradcheck.hpp"
#include "swg/model.hpp"
#include "swg/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace swg;

namespace {

constexpr const char* kVersion = "0.1.0";

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

size_t worker_count() {
    size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SWG_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = std::min<size_t>(n, size_t(v));
    }
    return n;
}

void apply_thread_cap() {
#ifdef _OPENMP
    omp_set_num_threads(int(worker_count()));
#endif
}

void parallel_for(size_t count, const std::function<void(size_t)>& fn) {
    size_t workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::string> errors(workers);
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    errors[w] = e.what();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);
}

void write_manifest(const fs::path& dir, const std::string& command, const json& extra) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    for (auto& [k, v] : extra.items()) m[k] = v;
    fs::create_directories(dir);
    std::ofstream f(dir / "manifest.json");
    f << m.dump(2) << "\n";
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

// ---------------------------------------------------------------- synth ----

int cmd_synth(size_t scenes, size_t classes, size_t max_overlap, size_t max_events,
              const std::string& out, uint64_t seed, double duration) {
    if (max_overlap == 0 || max_overlap > 3) throw DataError("max-overlap must be in 1..3");
    fs::create_directories(out);
    SpectralConfig scfg;
    size_t label_frames = size_t(std::llround(duration * 10.0));
    size_t feat_frames = label_frames * 5;  // 100 ms labels vs 20 ms hops

    parallel_for(scenes, [&](size_t i) {
        Rng rng(seed * 1000003 + i);
        SceneSpec spec;
        spec.duration_s = duration;
        spec.n_classes = classes;
        spec.max_overlap = max_overlap;
        spec.length_samples = scfg.samples_for_frames(feat_frames);
        // distinct classes per scene: single-ACCDOA targets hold at most one
        // instance of a class per frame
        size_t n_events = 1 + rng.index(std::min({max_events, max_overlap, classes}));
        std::vector<size_t> cls(classes);
        std::iota(cls.begin(), cls.end(), size_t(0));
        for (size_t e = 0; e < n_events; ++e) {
            size_t pick = e + rng.index(classes - e);
            std::swap(cls[e], cls[pick]);
            SceneEvent ev;
            ev.class_idx = cls[e];
            double span = rng.uniform(0.4, 1.0) * duration;
            ev.onset_s = rng.uniform(0.0, duration - span);
            ev.offset_s = ev.onset_s + span;
            ev.azimuth_deg = rng.uniform(-180.0, 179.999);
            ev.elevation_deg = rng.uniform(-90.0, 90.0);
            spec.events.push_back(ev);
        }
        // retry on rejected specs (duplicate class+direction, overlap cap)
        for (int attempt = 0; attempt < 32; ++attempt) {
            try {
                spec.validate();
                break;
            } catch (const std::exception&) {
                if (spec.events.size() > 1) spec.events.pop_back();
                else throw;
            }
        }
        auto [clip, anns] = synth_foa_scene(spec, rng);
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04zu", i);
        write_wav((fs::path(out) / (std::string(name) + ".wav")).string(), clip);
        write_annotations((fs::path(out) / (std::string(name) + ".csv")).string(), anns);
    });

    write_manifest(out, "synth",
                   {{"scenes", scenes},
                    {"classes", classes},
                    {"max_overlap", max_overlap},
                    {"max_events", max_events},
                    {"duration_s", duration},
                    {"seed", seed}});
    return 0;
}

// -------------------------------------------------------------- extract ----

int cmd_extract(const std::string& in, const std::string& out) {
    if (!fs::is_directory(in)) throw DataError("input directory not found: " + in);
    std::vector<fs::path> wavs;
    for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".wav") wavs.push_back(e.path());
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty()) throw DataError("no .wav files in " + in);
    fs::create_directories(out);
    SpectralConfig cfg;

    // two passes: raw features first, then corpus standardization so every
    // channel reaches the model at comparable scale
    std::vector<FeatureTensor> raw(wavs.size());
    parallel_for(wavs.size(), [&](size_t i) {
        raw[i] = extract_features(read_wav(wavs[i].string()), cfg);
    });
    ChannelStats stats = compute_channel_stats(raw);
    parallel_for(wavs.size(), [&](size_t i) {
        FeatureTensor& f = raw[i];
        const auto& sh = f.data.shape();
        for (size_t t = 0; t < sh[0]; ++t)
            for (size_t m = 0; m < sh[1]; ++m)
                for (size_t c = 0; c < sh[2]; ++c)
                    f.data.at({t, m, c}) = (f.data.at({t, m, c}) - stats.mean[c]) / stats.stddev[c];
        save_features((fs::path(out) / (stem_of(wavs[i]) + ".swgt")).string(), f, cfg, &stats);
        // carry the annotations along when present
        fs::path csv = wavs[i];
        csv.replace_extension(".csv");
        if (fs::exists(csv)) fs::copy_file(csv, fs::path(out) / csv.filename(),
                                           fs::copy_options::overwrite_existing);
    });
    write_manifest(out, "extract",
                   {{"input", in}, {"clips", wavs.size()}, {"n_fft", cfg.n_fft},
                    {"hop", cfg.hop}, {"n_mels", cfg.n_mels}});
    return 0;
}

// ---------------------------------------------------------------- train ----

std::vector<TrainSample> load_dataset(const std::string& dir, const ModelConfig& cfg) {
    if (!fs::is_directory(dir)) throw DataError("feature directory not found: " + dir);
    std::vector<fs::path> feats;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".swgt") feats.push_back(e.path());
    std::sort(feats.begin(), feats.end());
    if (feats.empty()) throw DataError("no .swgt feature files in " + dir);
    std::vector<TrainSample> out(feats.size());
    parallel_for(feats.size(), [&](size_t i) {
        FeatureTensor f = load_features(feats[i].string());
        const auto& s = f.data.shape();
        if (s[0] != cfg.input_frames || s[1] != cfg.n_mels || s[2] != cfg.in_channels)
            throw DataError("feature shape " + f.data.shape_str() + " in " +
                            feats[i].filename().string() + " does not match the model config");
        fs::path csv = feats[i];
        csv.replace_extension(".csv");
        if (!fs::exists(csv)) throw DataError("missing annotations: " + csv.string());
        auto anns = read_annotations(csv.string());
        out[i] = {std::move(f.data),
                  accdoa_encode(anns, cfg.n_classes, cfg.label_frames_per_clip)};
    });
    return out;
}

int cmd_train(const std::string& features, const std::string& out_ckpt,
              const std::string& log_path, const std::string& config_path, size_t steps,
              size_t batch, double lr, double val_frac, uint64_t seed) {
    ModelConfig cfg = config_path.empty()
                          ? ModelConfig::desk_scale()
                          : ModelConfig::from_map(parse_config_file(config_path));
    cfg.seed = seed;
    auto data = load_dataset(features, cfg);
    size_t n_val = std::min(data.size() - 1, std::max<size_t>(1, size_t(val_frac * data.size())));
    std::vector<TrainSample> val(data.end() - n_val, data.end());
    data.resize(data.size() - n_val);

    Rng rng(seed);
    ModelParams params;
    params.init(cfg, rng);
    TrainConfig tc;
    tc.steps = steps;
    tc.batch_size = batch;
    tc.lr = lr;
    tc.steps_per_epoch = std::max<size_t>(1, (data.size() + batch - 1) / batch);
    tc.log_path = log_path;
    TrainResult res = train_loop(cfg, params, data, val, tc, rng);
    if (res.aborted) {
        std::cerr << "training aborted: " << res.abort_reason << "\n";
        return 3;
    }
    save_checkpoint(out_ckpt, cfg, params);
    write_manifest(fs::path(out_ckpt).has_parent_path() ? fs::path(out_ckpt).parent_path()
                                                        : fs::path("."),
                   "train",
                   {{"features", features},
                    {"checkpoint", out_ckpt},
                    {"steps", steps},
                    {"batch", batch},
                    {"lr", lr},
                    {"train_clips", data.size()},
                    {"val_clips", val.size()},
                    {"final_loss", res.step_losses.empty() ? 0.0 : res.step_losses.back()},
                    {"val_SELD", res.final_val.SELD},
                    {"seed", seed}});
    std::cout << "final val: ER=" << res.final_val.ER << " F20=" << res.final_val.F20
              << " LE=" << res.final_val.LE_deg << " LR=" << res.final_val.LR_CD
              << " SELD=" << res.final_val.SELD << "\n";
    return 0;
}

// ---------------------------------------------------------------- infer ----

int cmd_infer(const std::string& ckpt, const std::string& features, const std::string& out,
              double threshold) {
    ModelParams params;
    ModelConfig cfg = load_checkpoint(ckpt, params);
    std::vector<fs::path> feats;
    if (fs::is_directory(features)) {
        for (const auto& e : fs::directory_iterator(features))
            if (e.path().extension() == ".swgt") feats.push_back(e.path());
        std::sort(feats.begin(), feats.end());
    } else {
        feats.push_back(features);
    }
    if (feats.empty()) throw DataError("no feature files at " + features);
    fs::create_directories(out);

    Rng rng(0);
    for (const auto& fp : feats) {
        FeatureTensor f = load_features(fp.string());
        Tensor accdoa = model_forward(Var(f.data), cfg, params, false, rng).value();
        std::string stem = stem_of(fp);
        save_tensor_file((fs::path(out) / (stem + ".accdoa.swgt")).string(), accdoa);
        write_annotations((fs::path(out) / (stem + ".pred.csv")).string(),
                          accdoa_decode(accdoa, threshold));
    }
    write_manifest(out, "infer",
                   {{"checkpoint", ckpt}, {"clips", feats.size()}, {"threshold", threshold}});
    return 0;
}

// ----------------------------------------------------------------- eval ----

int cmd_eval(const std::string& ref_path, const std::string& pred_path, size_t classes,
             size_t segment_frames, const std::string& out) {
    auto ref = read_annotations(ref_path);
    auto pred = read_annotations(pred_path);
    auto frames = frames_from_annotations(ref, pred);
    MetricsReport r = compute_metrics(frames, classes, 20.0, segment_frames);
    std::cout << report_to_text(r);
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw DataError("cannot write report: " + out);
        f << report_to_csv(r);
    }
    return 0;
}

// ----------------------------------------------------------------- plot ----

// Per-class x/y/z trajectory plot; red/green/blue = x/y/z, solid = reference,
// dashed = prediction.
void write_svg(const fs::path& path, size_t cls, const Tensor& ref, const Tensor* pred) {
    size_t L = ref.shape()[0];
    const double W = 640.0, H = 240.0, pad = 30.0;
    auto sx = [&](size_t f) { return pad + (W - 2 * pad) * double(f) / double(L - 1); };
    auto sy = [&](double v) { return H / 2.0 - v * (H / 2.0 - pad); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<line x1=\"" << pad << "\" y1=\"" << H / 2 << "\" x2=\"" << W - pad << "\" y2=\""
       << H / 2 << "\" stroke=\"#ccc\"/>\n<text x=\"" << pad << "\" y=\"18\">class " << cls
       << " accdoa x/y/z</text>\n";
    const char* colors[3] = {"red", "green", "blue"};
    auto poly = [&](const Tensor& t, size_t ax, bool dashed) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[ax] << "\"";
        if (dashed) os << " stroke-dasharray=\"4 3\"";
        os << " points=\"";
        for (size_t f = 0; f < L; ++f)
            os << sx(f) << ',' << sy(t.at({f, cls, ax})) << (f + 1 < L ? " " : "");
        os << "\"/>\n";
    };
    for (size_t ax = 0; ax < 3; ++ax) {
        poly(ref, ax, false);
        if (pred) poly(*pred, ax, true);
    }
    os << "</svg>\n";
    std::ofstream f(path);
    if (!f) throw DataError("cannot write plot: " + path.string());
    f << os.str();
}

int cmd_plot(const std::string& ref_path, const std::string& pred_path, size_t classes,
             size_t frames, const std::string& out) {
    Tensor ref = accdoa_encode(read_annotations(ref_path), classes, frames);
    Tensor pred;
    bool have_pred = !pred_path.empty();
    if (have_pred) {
        if (fs::path(pred_path).extension() == ".swgt") pred = load_tensor_file(pred_path);
        else pred = accdoa_encode(read_annotations(pred_path), classes, frames);
        if (pred.shape() != ref.shape())
            throw DataError("prediction tensor shape does not match reference");
    }
    fs::create_directories(out);
    for (size_t c = 0; c < classes; ++c)
        write_svg(fs::path(out) / ("class_" + std::to_string(c) + ".svg"), c, ref,
                  have_pred ? &pred : nullptr);
    write_manifest(out, "plot", {{"reference", ref_path}, {"classes", classes}});
    return 0;
}

// ------------------------------------------------------------ gradcheck ----

int cmd_gradcheck(bool include_model, bool verbose) {
    auto failures = run_gradient_suites(include_model, verbose);
    if (failures.empty()) {
        std::cout << "all gradient suites passed\n";
        return 0;
    }
    for (const auto& f : failures) std::cerr << "FAIL " << f << "\n";
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();
    CLI::App app{"SELD pipeline tool"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "synthesize FOA scenes with annotations");
    size_t scenes = 10, classes = 4, max_overlap = 3, max_events = 3;
    std::string out_dir;
    uint64_t seed = 1;
    double duration = 5.0;
    synth->add_option("--scenes", scenes, "number of scenes");
    synth->add_option("--classes", classes, "number of sound classes")->check(CLI::Range(1, 64));
    synth->add_option("--max-overlap", max_overlap, "max simultaneous events");
    synth->add_option("--max-events", max_events, "max events per scene");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--seed", seed, "master seed");
    synth->add_option("--duration", duration, "clip length in seconds");

    // extract
    auto* extract = app.add_subcommand("extract", "wav directory -> feature files");
    std::string ex_in, ex_out;
    extract->add_option("--in", ex_in, "wav directory")->required();
    extract->add_option("--out", ex_out, "feature directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train a model on extracted features");
    std::string tr_features, tr_ckpt = "model.swgk", tr_log = "train_log.csv", tr_config;
    size_t tr_steps = 400, tr_batch = 8;
    double tr_lr = 1e-3, tr_val_frac = 0.2;
    uint64_t tr_seed = 1;
    train->add_option("--features", tr_features, "feature directory")->required();
    train->add_option("--out", tr_ckpt, "checkpoint path");
    train->add_option("--log", tr_log, "training log CSV");
    train->add_option("--config", tr_config, "model config file (key=value)");
    train->add_option("--steps", tr_steps, "optimization steps");
    train->add_option("--batch", tr_batch, "batch size");
    train->add_option("--lr", tr_lr, "learning rate");
    train->add_option("--val-frac", tr_val_frac, "validation fraction");
    train->add_option("--seed", tr_seed, "seed");

    // infer
    auto* infer = app.add_subcommand("infer", "checkpoint + features -> predictions");
    std::string in_ckpt, in_features, in_out;
    double in_threshold = 0.5;
    infer->add_option("--checkpoint", in_ckpt, "checkpoint path")->required();
    infer->add_option("--features", in_features, "feature file or directory")->required();
    infer->add_option("--out", in_out, "output directory")->required();
    infer->add_option("--threshold", in_threshold, "decode threshold");

    // eval
    auto* eval = app.add_subcommand("eval", "score predictions against references");
    std::string ev_ref, ev_pred, ev_out;
    size_t ev_classes = 4, ev_segment = 10;
    eval->add_option("--ref", ev_ref, "reference annotation CSV")->required();
    eval->add_option("--pred", ev_pred, "prediction annotation CSV")->required();
    eval->add_option("--classes", ev_classes, "number of classes");
    eval->add_option("--segment-frames", ev_segment, "segment length in label frames");
    eval->add_option("--out", ev_out, "report CSV path");

    // plot
    auto* plot = app.add_subcommand("plot", "per-class x/y/z trajectory SVGs");
    std::string pl_ref, pl_pred, pl_out;
    size_t pl_classes = 4, pl_frames = 50;
    plot->add_option("--ref", pl_ref, "reference annotation CSV")->required();
    plot->add_option("--pred", pl_pred, "prediction CSV or .swgt accdoa dump");
    plot->add_option("--classes", pl_classes, "number of classes");
    plot->add_option("--frames", pl_frames, "label frames per clip");
    plot->add_option("--out", pl_out, "output directory")->required();

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference verification suites");
    bool gc_model = false, gc_verbose = false;
    gradcheck->add_flag("--model", gc_model, "include the reduced whole-model check");
    gradcheck->add_flag("--verbose", gc_verbose, "print every suite result");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed())
            return cmd_synth(scenes, classes, max_overlap, max_events, out_dir, seed, duration);
        if (extract->parsed()) return cmd_extract(ex_in, ex_out);
        if (train->parsed())
            return cmd_train(tr_features, tr_ckpt, tr_log, tr_config, tr_steps, tr_batch, tr_lr,
                             tr_val_frac, tr_seed);
        if (infer->parsed()) return cmd_infer(in_ckpt, in_features, in_out, in_threshold);
        if (eval->parsed()) return cmd_eval(ev_ref, ev_pred, ev_classes, ev_segment, ev_out);
        if (plot->parsed()) return cmd_plot(pl_ref, pl_pred, pl_classes, pl_frames, pl_out);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_model, gc_verbose);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
