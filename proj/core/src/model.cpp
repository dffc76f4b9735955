#include "swg/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "swg/config.hpp"

namespace swg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void ModelConfig::validate() const {
    if (msconv_channels.size() != n_msconv)
        throw std::invalid_argument("model config: msconv_channels lists " +
                                    std::to_string(msconv_channels.size()) + " stages, expected " +
                                    std::to_string(n_msconv));
    if (n_msconv > 0 && (n_mels % (size_t(1) << n_msconv)) != 0)
        throw std::invalid_argument("model config: n_mels must be divisible by 2^n_msconv");
    if (window_group.size() != n_blocks)
        throw std::invalid_argument("model config: window group length " +
                                    std::to_string(window_group.size()) +
                                    " does not match n_blocks " + std::to_string(n_blocks));
    for (size_t t : window_group)
        if (t == 0 || input_frames % t != 0)
            throw std::invalid_argument("model config: window size " + std::to_string(t) +
                                        " does not divide the " + std::to_string(input_frames) +
                                        "-frame input");
    if (d_model() % n_heads != 0)
        throw std::invalid_argument("model config: d_model " + std::to_string(d_model()) +
                                    " not divisible by n_heads " + std::to_string(n_heads));
    if (k >= d_model())
        throw std::invalid_argument("model config: k must be < d_model (vertex count)");
    if (label_frames_per_clip == 0 || input_frames % label_frames_per_clip != 0)
        throw std::invalid_argument("model config: label_frames_per_clip must divide input frames");
    if (n_classes == 0) throw std::invalid_argument("model config: need at least one class");
}

ModelConfig ModelConfig::full_scale() { return ModelConfig{}; }

ModelConfig ModelConfig::desk_scale() {
    ModelConfig c;
    c.n_msconv = 2;
    c.msconv_channels = {4, 4};  // d_model = 16 * 4 = 64
    c.n_blocks = 2;
    c.window_group = {5, 25};
    c.k = 8;
    c.n_heads = 4;
    c.ff_ratio = 2;
    c.graph_ffn_ratio = 2;
    c.n_classes = 4;
    return c;
}

namespace {
const std::vector<std::string> kModelKeys = {
    "preset",        "input_frames", "n_mels",          "in_channels",
    "n_msconv",      "msconv_channels", "n_blocks",     "window_group",
    "k",             "aggregator",   "n_heads",         "ff_ratio",
    "graph_ffn_ratio", "dropout_rate", "n_classes",     "label_frames_per_clip",
    "seed"};
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
    config_check_known(kv, kModelKeys);
    std::string preset = config_get_string(kv, "preset", "desk");
    ModelConfig c;
    if (preset == "desk") c = desk_scale();
    else if (preset == "full") c = full_scale();
    else throw std::invalid_argument("model config: unknown preset '" + preset + "'");
    c.input_frames = config_get_size(kv, "input_frames", c.input_frames);
    c.n_mels = config_get_size(kv, "n_mels", c.n_mels);
    c.in_channels = config_get_size(kv, "in_channels", c.in_channels);
    c.n_msconv = config_get_size(kv, "n_msconv", c.n_msconv);
    c.msconv_channels = config_get_size_list(kv, "msconv_channels", c.msconv_channels);
    c.n_blocks = config_get_size(kv, "n_blocks", c.n_blocks);
    c.window_group = config_get_size_list(kv, "window_group", c.window_group);
    c.k = config_get_size(kv, "k", c.k);
    c.aggregator = aggregator_from_string(
        config_get_string(kv, "aggregator", to_string(c.aggregator)));
    c.n_heads = config_get_size(kv, "n_heads", c.n_heads);
    c.ff_ratio = config_get_size(kv, "ff_ratio", c.ff_ratio);
    c.graph_ffn_ratio = config_get_size(kv, "graph_ffn_ratio", c.graph_ffn_ratio);
    c.dropout_rate = config_get_double(kv, "dropout_rate", c.dropout_rate);
    c.n_classes = config_get_size(kv, "n_classes", c.n_classes);
    c.label_frames_per_clip = config_get_size(kv, "label_frames_per_clip", c.label_frames_per_clip);
    c.seed = config_get_size(kv, "seed", size_t(c.seed));
    c.validate();
    return c;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    std::map<std::string, std::string> kv;
    auto join = [](const std::vector<size_t>& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    kv["input_frames"] = std::to_string(input_frames);
    kv["n_mels"] = std::to_string(n_mels);
    kv["in_channels"] = std::to_string(in_channels);
    kv["n_msconv"] = std::to_string(n_msconv);
    kv["msconv_channels"] = join(msconv_channels);
    kv["n_blocks"] = std::to_string(n_blocks);
    kv["window_group"] = join(window_group);
    kv["k"] = std::to_string(k);
    kv["aggregator"] = to_string(aggregator);
    kv["n_heads"] = std::to_string(n_heads);
    kv["ff_ratio"] = std::to_string(ff_ratio);
    kv["graph_ffn_ratio"] = std::to_string(graph_ffn_ratio);
    kv["dropout_rate"] = std::to_string(dropout_rate);
    kv["n_classes"] = std::to_string(n_classes);
    kv["label_frames_per_clip"] = std::to_string(label_frames_per_clip);
    kv["seed"] = std::to_string(seed);
    return kv;
}

void ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    msconv.clear();
    blocks.clear();
    block_cfgs.clear();
    size_t cin = cfg.in_channels;
    for (size_t i = 0; i < cfg.n_msconv; ++i) {
        MsConvParams p;
        p.init(cin, cfg.msconv_channels[i], rng);
        msconv.push_back(std::move(p));
        cin = cfg.msconv_channels[i];
    }
    for (size_t i = 0; i < cfg.n_blocks; ++i) {
        SwgBlockConfig bc;
        bc.t = cfg.window_group[i];
        bc.k = cfg.k;
        bc.aggregator = cfg.aggregator;
        bc.d_model = cfg.d_model();
        bc.n_heads = cfg.n_heads;
        bc.ff_ratio = cfg.ff_ratio;
        bc.graph_ffn_ratio = cfg.graph_ffn_ratio;
        bc.dropout_rate = cfg.dropout_rate;
        block_cfgs.push_back(bc);
        SwgBlockParams bp;
        bp.init(bc, rng);
        blocks.push_back(std::move(bp));
    }
    size_t d = cfg.d_model();
    size_t hidden = std::max<size_t>(1, d / 2);
    fc1.init(d, hidden, rng);
    fc2.init(hidden, 3 * cfg.n_classes, rng);
    pos = sinusoidal_positions(cfg.input_frames, d);
}

std::vector<Var> ModelParams::parameters() {
    std::vector<Var> out;
    for (auto& m : msconv) {
        auto v = m.parameters();
        out.insert(out.end(), v.begin(), v.end());
    }
    for (auto& b : blocks) {
        auto v = b.parameters();
        out.insert(out.end(), v.begin(), v.end());
    }
    out.insert(out.end(), {fc1.w, fc1.b, fc2.w, fc2.b});
    return out;
}

std::vector<std::pair<std::string, Var>> ModelParams::named_parameters() {
    std::vector<std::pair<std::string, Var>> out;
    for (size_t i = 0; i < msconv.size(); ++i) {
        auto v = msconv[i].parameters();
        for (size_t j = 0; j < v.size(); ++j)
            out.emplace_back("msconv" + std::to_string(i) + ".p" + std::to_string(j), v[j]);
    }
    for (size_t i = 0; i < blocks.size(); ++i) {
        auto v = blocks[i].parameters();
        for (size_t j = 0; j < v.size(); ++j)
            out.emplace_back("block" + std::to_string(i) + ".p" + std::to_string(j), v[j]);
    }
    out.emplace_back("fc1.w", fc1.w);
    out.emplace_back("fc1.b", fc1.b);
    out.emplace_back("fc2.w", fc2.w);
    out.emplace_back("fc2.b", fc2.b);
    return out;
}

namespace {

// BN running stats are buffers, not parameters; the checkpoint carries them
// under their own names.
std::vector<std::pair<std::string, BatchNormStats*>> named_bn_stats(ModelParams& p) {
    std::vector<std::pair<std::string, BatchNormStats*>> out;
    for (size_t i = 0; i < p.msconv.size(); ++i) {
        std::string pre = "msconv" + std::to_string(i) + ".";
        out.emplace_back(pre + "c3a.bn", &p.msconv[i].c3a.bn_stats);
        out.emplace_back(pre + "c3b.bn", &p.msconv[i].c3b.bn_stats);
        out.emplace_back(pre + "c5a.bn", &p.msconv[i].c5a.bn_stats);
        out.emplace_back(pre + "c5b.bn", &p.msconv[i].c5b.bn_stats);
    }
    for (size_t i = 0; i < p.blocks.size(); ++i)
        out.emplace_back("block" + std::to_string(i) + ".swg.update.bn",
                         &p.blocks[i].swg.update.bn_stats);
    return out;
}

}  // namespace

Var model_forward(const Var& features, const ModelConfig& cfg, ModelParams& params, bool training,
                  Rng& rng) {
    cfg.validate();
    const auto& fs = features.shape();
    if (fs.size() != 3 || fs[0] != cfg.input_frames || fs[1] != cfg.n_mels ||
        fs[2] != cfg.in_channels)
        throw std::invalid_argument("model_forward: features " + features.value().shape_str() +
                                    " do not match config [" + std::to_string(cfg.input_frames) +
                                    " x " + std::to_string(cfg.n_mels) + " x " +
                                    std::to_string(cfg.in_channels) + "]");
    size_t T = cfg.input_frames;
    // [T,F,C] -> [1,C,T,F] for the conv stack
    Var x = reshape(permute(features, {2, 0, 1}), {1, cfg.in_channels, T, cfg.n_mels});
    for (auto& m : params.msconv) x = ms_conv_forward(x, m, cfg.dropout_rate, training, rng);
    size_t Cm = cfg.msconv_channels.empty() ? cfg.in_channels : cfg.msconv_channels.back();
    size_t Fo = cfg.freq_out();
    size_t d = cfg.d_model();
    // [1,Cm,T,Fo] -> [T,Fo,Cm], flatten, add fixed positions
    Var seq3 = permute(reshape(x, {Cm, T, Fo}), {1, 2, 0});
    Var seq = add(reshape(seq3, {T, d}), Var(params.pos));
    Var h3 = reshape(seq, {T, Fo, Cm});
    for (size_t i = 0; i < params.blocks.size(); ++i)
        h3 = swg_former_block_forward(h3, params.block_cfgs[i], params.blocks[i], training, rng);
    // condense time to label frames
    size_t pool_t = T / cfg.label_frames_per_clip;
    Var pooled = reshape(max_pool2d(reshape(h3, {1, 1, T, d}), pool_t, 1),
                         {cfg.label_frames_per_clip, d});
    Var head = gelu(params.fc1.apply(pooled));
    Var out = tanh_op(params.fc2.apply(head));
    return reshape(out, {cfg.label_frames_per_clip, cfg.n_classes, 3});
}

Tensor accdoa_encode(const std::vector<EventAnnotation>& anns, size_t n_classes,
                     size_t label_frames) {
    Tensor out = Tensor::zeros({label_frames, n_classes, 3});
    std::vector<bool> seen(label_frames * n_classes, false);
    for (const auto& a : anns) {
        if (a.frame_idx >= label_frames)
            throw std::invalid_argument("accdoa_encode: frame " + std::to_string(a.frame_idx) +
                                        " beyond " + std::to_string(label_frames) + " frames");
        if (a.class_idx >= n_classes)
            throw std::invalid_argument("accdoa_encode: class " + std::to_string(a.class_idx) +
                                        " out of range");
        size_t cell = a.frame_idx * n_classes + a.class_idx;
        if (seen[cell])
            throw std::invalid_argument(
                "accdoa_encode: two instances of class " + std::to_string(a.class_idx) +
                " in frame " + std::to_string(a.frame_idx) + " (single-ACCDOA holds one)");
        seen[cell] = true;
        double u[3];
        direction_vector(a.azimuth_deg, a.elevation_deg, u);
        for (size_t ax = 0; ax < 3; ++ax) out.at({a.frame_idx, a.class_idx, ax}) = u[ax];
    }
    return out;
}

std::vector<EventAnnotation> accdoa_decode(const Tensor& accdoa, double threshold) {
    const auto& s = accdoa.shape();
    if (s.size() != 3 || s[2] != 3)
        throw std::invalid_argument("accdoa_decode: expected [frames x classes x 3]");
    if (threshold <= 0.0 || threshold >= std::sqrt(3.0))
        throw std::invalid_argument("accdoa_decode: threshold must be in (0, sqrt(3))");
    std::vector<EventAnnotation> out;
    for (size_t f = 0; f < s[0]; ++f)
        for (size_t c = 0; c < s[1]; ++c) {
            double x = accdoa.at({f, c, 0}), y = accdoa.at({f, c, 1}), z = accdoa.at({f, c, 2});
            double norm = std::sqrt(x * x + y * y + z * z);
            if (norm <= threshold) continue;
            EventAnnotation a;
            a.frame_idx = f;
            a.class_idx = c;
            a.source_idx = 0;
            a.azimuth_deg = std::atan2(y, x) * 180.0 / kPi;
            a.elevation_deg = std::asin(std::min(1.0, std::max(-1.0, z / norm))) * 180.0 / kPi;
            out.push_back(a);
        }
    return out;
}

Var accdoa_loss(const Var& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("accdoa_loss: shape mismatch " + pred.value().shape_str() +
                                    " vs " + target.shape_str());
    return mse(pred, Var(target));
}

MetricsReport evaluate_model(const ModelConfig& cfg, ModelParams& params,
                             const std::vector<TrainSample>& val, double threshold,
                             size_t segment_frames) {
    Rng eval_rng(0);  // unused in eval mode (dropout off)
    std::vector<FrameEvents> frames;
    for (const auto& s : val) {
        Tensor pred = model_forward(Var(s.features), cfg, params, false, eval_rng).value();
        auto pred_anns = accdoa_decode(pred, threshold);
        auto ref_anns = accdoa_decode(s.target, 0.5);
        auto clip_frames =
            frames_from_annotations(ref_anns, pred_anns, cfg.label_frames_per_clip);
        frames.insert(frames.end(), clip_frames.begin(), clip_frames.end());
    }
    return compute_metrics(frames, cfg.n_classes, 20.0, segment_frames);
}

TrainResult train_loop(const ModelConfig& cfg, ModelParams& params,
                       const std::vector<TrainSample>& train,
                       const std::vector<TrainSample>& val, const TrainConfig& tc, Rng& rng) {
    if (train.empty()) throw std::invalid_argument("train_loop: empty training set");
    TrainResult res;
    auto plist = params.parameters();
    Adam opt(tc.lr);

    std::ofstream log;
    if (!tc.log_path.empty()) {
        log.open(tc.log_path);
        if (!log) throw std::runtime_error("train_loop: cannot open log " + tc.log_path);
        log << "epoch,train_loss,ER,F20,LE,LR,SELD\n";
    }

    double epoch_sum = 0.0;
    size_t epoch_count = 0, epoch = 0;
    for (size_t step = 0; step < tc.steps; ++step) {
        Var total;
        for (size_t b = 0; b < tc.batch_size; ++b) {
            const TrainSample& s = train[rng.index(train.size())];
            Var pred = model_forward(Var(s.features), cfg, params, true, rng);
            Var l = accdoa_loss(pred, s.target);
            total = b == 0 ? l : add(total, l);
        }
        Var loss = mul_scalar(total, 1.0 / double(tc.batch_size));
        double lv = loss.value()[0];
        if (!std::isfinite(lv)) {
            std::ostringstream os;
            os << "non-finite loss at step " << step << " (lr=" << tc.lr << ", grad norms:";
            for (size_t i = 0; i < std::min<size_t>(5, plist.size()); ++i) {
                double g = 0.0;
                if (plist[i].grad().numel())
                    for (size_t j = 0; j < plist[i].grad().numel(); ++j)
                        g += plist[i].grad()[j] * plist[i].grad()[j];
                os << ' ' << std::sqrt(g);
            }
            os << " ...)";
            res.aborted = true;
            res.abort_reason = os.str();
            break;
        }
        res.step_losses.push_back(lv);
        epoch_sum += lv;
        ++epoch_count;
        backward(loss);
        opt.step(plist);
        opt.zero_grad(plist);

        if (epoch_count == tc.steps_per_epoch || step + 1 == tc.steps) {
            double mean_loss = epoch_sum / double(epoch_count);
            res.epoch_losses.push_back(mean_loss);
            if (log.is_open()) {
                MetricsReport r = val.empty()
                                      ? MetricsReport{}
                                      : evaluate_model(cfg, params, val, tc.decode_threshold,
                                                       tc.eval_segment_frames);
                log << epoch << ',' << mean_loss << ',' << r.ER << ',' << r.F20 << ','
                    << r.LE_deg << ',' << r.LR_CD << ',' << r.SELD << '\n';
                log.flush();
            }
            epoch_sum = 0.0;
            epoch_count = 0;
            ++epoch;
        }
    }
    if (!res.aborted && !val.empty())
        res.final_val =
            evaluate_model(cfg, params, val, tc.decode_threshold, tc.eval_segment_frames);
    return res;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, ModelParams& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write("SWGK", 4);
    std::string cfg_text = config_to_text(cfg.to_map());
    uint32_t len = uint32_t(cfg_text.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(cfg_text.data(), len);

    auto named = params.named_parameters();
    auto stats = named_bn_stats(params);
    uint32_t count = uint32_t(named.size() + 2 * stats.size());
    f.write(reinterpret_cast<const char*>(&count), 4);
    auto write_entry = [&f](const std::string& name, const Tensor& t) {
        uint32_t nl = uint32_t(name.size());
        f.write(reinterpret_cast<const char*>(&nl), 4);
        f.write(name.data(), nl);
        save_tensor(f, t);
    };
    for (auto& [name, v] : named) write_entry(name, v.value());
    for (auto& [name, s] : stats) {
        // unset stats serialize as identity (zero mean, unit var)
        Tensor m = s->running_mean.numel() ? s->running_mean : Tensor::zeros({1});
        Tensor vr = s->running_var.numel() ? s->running_var : Tensor::ones({1});
        write_entry(name + ".mean", m);
        write_entry(name + ".var", vr);
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelConfig load_checkpoint(const std::string& path, ModelParams& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "SWGK", 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string cfg_text(len, '\0');
    f.read(cfg_text.data(), len);
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    ModelConfig cfg = ModelConfig::from_map(parse_config_text(cfg_text));

    Rng rng(cfg.seed);
    params.init(cfg, rng);
    std::map<std::string, Var> by_name;
    for (auto& [name, v] : params.named_parameters()) by_name.emplace(name, v);
    auto stats = named_bn_stats(params);

    uint32_t count = 0;
    f.read(reinterpret_cast<char*>(&count), 4);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nl = 0;
        f.read(reinterpret_cast<char*>(&nl), 4);
        std::string name(nl, '\0');
        f.read(name.data(), nl);
        if (!f) throw std::runtime_error("truncated checkpoint entry in " + path);
        Tensor t = load_tensor(f);
        auto it = by_name.find(name);
        if (it != by_name.end()) {
            if (it->second.shape() != t.shape())
                throw std::runtime_error("checkpoint shape mismatch for " + name);
            it->second.value_mut() = std::move(t);
            continue;
        }
        bool matched = false;
        for (auto& [sname, s] : stats) {
            if (name == sname + ".mean") {
                s->running_mean = std::move(t);
                matched = true;
            } else if (name == sname + ".var") {
                s->running_var = std::move(t);
                matched = true;
            }
            if (matched) break;
        }
        if (!matched) throw std::runtime_error("checkpoint has unknown entry '" + name + "'");
    }
    return cfg;
}

}  // namespace swg
