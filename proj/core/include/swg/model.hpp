#pragma once

#include <map>
#include <string>
#include <vector>

#include "swg/adam.hpp"
#include "swg/blocks.hpp"
#include "swg/metrics.hpp"
#include "swg/scene.hpp"

namespace swg {

struct ModelConfig {
    size_t input_frames = 250;
    size_t n_mels = 64;
    size_t in_channels = 7;
    size_t n_msconv = 4;
    std::vector<size_t> msconv_channels{64, 128, 128, 128};
    size_t n_blocks = 5;
    std::vector<size_t> window_group{5, 5, 25, 25, 25};  // t per block
    size_t k = 24;
    AggregatorKind aggregator = AggregatorKind::conv2d_agg;
    size_t n_heads = 8;
    size_t ff_ratio = 4;
    size_t graph_ffn_ratio = 4;
    double dropout_rate = 0.05;
    size_t n_classes = 13;
    size_t label_frames_per_clip = 50;
    uint64_t seed = 1;

    // frequency extent after the MS-Conv stack (one (1,2) pool per stage)
    size_t freq_out() const { return n_mels >> n_msconv; }
    size_t d_model() const {
        return freq_out() * (msconv_channels.empty() ? in_channels : msconv_channels.back());
    }
    void validate() const;

    static ModelConfig full_scale();
    // Small configuration that trains in minutes on one CPU.
    static ModelConfig desk_scale();

    static ModelConfig from_map(const std::map<std::string, std::string>& kv);
    std::map<std::string, std::string> to_map() const;
};

struct ModelParams {
    std::vector<MsConvParams> msconv;
    std::vector<SwgBlockConfig> block_cfgs;
    std::vector<SwgBlockParams> blocks;
    LinearLayer fc1, fc2;  // d_model -> d_model/2 -> 3*n_classes
    Tensor pos;            // fixed sinusoidal positions [T x d_model]

    void init(const ModelConfig& cfg, Rng& rng);
    std::vector<Var> parameters();
    std::vector<std::pair<std::string, Var>> named_parameters();
    void set_training_stats_eval();  // no-op marker; BN stats live in params
};

// features [T x F x C] -> ACCDOA [label_frames x n_classes x 3], tanh-bounded.
Var model_forward(const Var& features, const ModelConfig& cfg, ModelParams& params, bool training,
                  Rng& rng);

// Targets: active (frame, class) -> unit direction; inactive -> zeros.
// Rejects two same-class instances in one frame.
Tensor accdoa_encode(const std::vector<EventAnnotation>& anns, size_t n_classes,
                     size_t label_frames);

// Class active iff ||v|| > threshold; direction v/||v||.
std::vector<EventAnnotation> accdoa_decode(const Tensor& accdoa, double threshold = 0.5);

Var accdoa_loss(const Var& pred, const Tensor& target);

struct TrainSample {
    Tensor features;  // [T x F x C]
    Tensor target;    // [label_frames x n_classes x 3]
};

struct TrainConfig {
    size_t steps = 400;
    size_t batch_size = 8;
    size_t steps_per_epoch = 50;
    double lr = 1e-3;
    double decode_threshold = 0.5;
    size_t eval_segment_frames = 10;
    std::string log_path;  // empty disables the CSV log
};

struct TrainResult {
    std::vector<double> step_losses;
    std::vector<double> epoch_losses;
    MetricsReport final_val;
    bool aborted = false;
    std::string abort_reason;
};

// Adam over all parameters; per-epoch row "epoch,train_loss,ER,F20,LE,LR,SELD"
// appended to cfg.log_path. Aborts on non-finite loss with diagnostics.
TrainResult train_loop(const ModelConfig& cfg, ModelParams& params,
                       const std::vector<TrainSample>& train,
                       const std::vector<TrainSample>& val, const TrainConfig& tc, Rng& rng);

// Validation metrics of the current parameters (eval mode).
MetricsReport evaluate_model(const ModelConfig& cfg, ModelParams& params,
                             const std::vector<TrainSample>& val, double threshold,
                             size_t segment_frames);

// Checkpoint: config echo plus named parameter tensors (and BN running
// stats), one file.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, ModelParams& params);
ModelConfig load_checkpoint(const std::string& path, ModelParams& params);

}  // namespace swg
