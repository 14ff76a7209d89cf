#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "iscat/common.hpp"
#include "iscat/loss.hpp"

namespace iscat {

class GreensOperators;

// NCHW tensor of doubles.
struct Tensor {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    static Tensor zeros(int b, int c, int h, int w) {
        Tensor t{b, c, h, w, {}};
        t.v.assign(static_cast<std::size_t>(b) * c * h * w, 0.0);
        return t;
    }
    std::size_t size() const { return v.size(); }
    double& at(int bi, int ci, int y, int x) {
        return v[((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x];
    }
    double at(int bi, int ci, int y, int x) const {
        return v[((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x];
    }
};

struct NetConfig {
    int depth = 2;           // encoder levels
    int base_channels = 8;   // channels at the outermost level
    bool use_batchnorm = true;
    int input_channels = 2;  // Re/Im
    int output_channels = 2;
    std::uint64_t rng_seed = 0;
};

struct ConvParam {
    int in_c = 0, out_c = 0, k = 3;
    std::vector<double> w;  // [out_c][in_c][k][k]
    std::vector<double> b;  // [out_c]
};

struct BnParam {
    int c = 0;
    std::vector<double> gamma, beta;
    std::vector<double> run_mean, run_var;
    double eps = 1e-5;
    double momentum = 0.1;
};

// Parameters for the contraction/expansion schedule derived from NetConfig:
//   enc level l: two 3x3 conv(+BN+ReLU) at base*2^l channels, then 2x2 maxpool
//   bottleneck:  two 3x3 conv(+BN+ReLU) at base*2^depth
//   dec level l: nn-upsample, 3x3 conv(+BN+ReLU) down to base*2^l,
//                concat skip, two 3x3 conv(+BN+ReLU)
//   head:        1x1 conv to output_channels, identity activation
struct NetParams {
    NetConfig cfg;
    std::vector<ConvParam> convs;
    std::vector<BnParam> bns;  // parallel to convs; unused entries have c == 0
};

struct NetGrads {
    std::vector<std::vector<double>> conv_w, conv_b, bn_gamma, bn_beta;
};

enum class NetMode { train, eval };

struct NetCache;  // opaque; produced by forward, consumed by backward

NetParams net_init(const NetConfig& cfg);

// Output spatial size equals input size; H and W must be divisible by 2^depth.
// In train mode batch statistics are used and running stats updated in-place.
Tensor net_forward(NetParams& params, const Tensor& input, NetMode mode,
                   std::unique_ptr<NetCache>* cache = nullptr);

NetGrads net_backward(const NetParams& params, const NetCache& cache, const Tensor& dloss_dout,
                      Tensor* dloss_dinput = nullptr);

struct TrainConfig {
    double lr0 = 1e-3;        // paper preset uses 5e-6
    double momentum = 0.99;
    int epochs_max = 150;
    int lr_halving_period = 20;
    int batch_size = 8;
    LossKind loss_kind = LossKind::contrast;
    double snr_train = 5.0;
    std::uint64_t rng_seed = 0;
    double val_fraction = 0.1;
};

struct OptState {
    std::vector<std::vector<double>> vel_conv_w, vel_conv_b, vel_bn_gamma, vel_bn_beta;
    int epoch = 0;
    double lr = 0.0;
};

OptState opt_state_init(const NetParams& params, const TrainConfig& cfg);

double lr_at_epoch(double lr0, int epoch, int halving_period = 20);

// v <- m v - lr g;  p <- p + v. Throws NumericError on non-finite gradients.
void sgd_momentum_step(NetParams& params, const NetGrads& grads, OptState& state,
                       double momentum);

struct EpochLogRow {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_mse = std::numeric_limits<double>::quiet_NaN();
    double val_ssim = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    NetParams params;
    OptState opt;
    std::vector<EpochLogRow> log;
    bool aborted = false;  // divergence: params are the last finite epoch
    int epochs_run = 0;
};

using EpochCallback = std::function<void(const TrainResult& snapshot)>;

// Deterministic epoch loop: per-epoch Fisher-Yates shuffle seeded by
// derive_seed(rng_seed, epoch), batch-mean loss, batch-aggregate beta for the
// current/field losses. Held-out tail (val_fraction) is excluded from batches
// and scored with MSE/SSIM each epoch. ops may be null unless loss_kind is
// field. Pass a start snapshot to resume from a checkpoint.
TrainResult train(const std::vector<TrainingSample>& dataset, const NetConfig& net_cfg,
                  const TrainConfig& train_cfg, const GreensOperators* ops,
                  const NetParams* start_params = nullptr, const OptState* start_opt = nullptr,
                  const EpochCallback& per_epoch = nullptr);

// Convenience: run one sample (or batch) through the net in eval mode and
// assemble the complex contrast prediction.
Eigen::VectorXcd predict(NetParams& params, const ContrastMap& chi_bp);

Tensor input_from_samples(const std::vector<const TrainingSample*>& batch);
Eigen::VectorXcd chi_from_output(const Tensor& out, int batch_index);

}  // namespace iscat
