#pragma once

#include <string>
#include <vector>

#include "basepose/group.hpp"
#include "basepose/kinematics.hpp"
#include "basepose/nn.hpp"
#include "basepose/scene.hpp"

namespace basepose {

// Stage-1 policy: key/query equivariant encoders plus per-orientation
// cross-correlation producing K density maps over base poses.
//
// The key encoder Phi is a 4-level equivariant U-Net. The query encoder Psi
// is a 4-layer stride-1 equivariant stack: 2x pooling cannot be made exactly
// C4-equivariant on odd-sized crops, and the crop must stay odd so its center
// pixel is the robot center.
//
// Density channel k pairs orientation slice k of the query features with
// orientation slice k of the key features. Slice k of both encoders sees the
// canonical kernels rotated by 2*pi*k/n, so one encoder pass scores all K
// discrete orientations and a rotation of the scene permutes the channels.
struct TransporterConfig {
    int n = 8;  // cyclic order; equals the density channel count K
    std::vector<int> phi_widths = {8, 16, 32, 64};
    std::vector<int> psi_widths;  // empty -> {w0, w1, w1, w0}
    int crop_px = 13;
    int state_channels = kSemChannels + 1;  // semantic one-hots + depth

    int m_out() const { return phi_widths[0]; }
    std::vector<int> psi() const {
        if (!psi_widths.empty()) return psi_widths;
        return {phi_widths[0], phi_widths[1], phi_widths[1], phi_widths[0]};
    }
};

ParamStore make_transporter_params(const TransporterConfig& cfg, uint64_t seed);

// [state_channels, H, W]: one-hot semantics stacked with the depth heightmap.
TensorF state_tensor(const OrthoProjection& proj);

template <typename T>
typename Tape<T>::Id transporter_forward(Tape<T>& tape, ParamBinding<T>& bind,
                                         const TransporterConfig& cfg,
                                         typename Tape<T>::Id state,
                                         typename Tape<T>::Id crop);

// Inference-only forward: density map [K, H, W] with values in (0, 1).
TensorF irm_forward(ParamStore& params, const TransporterConfig& cfg,
                    const OrthoProjection& proj, int robot_u, int robot_v);

// ---- parameter-matched plain U-Net (ablation twin) ----
struct PlainUNetConfig {
    std::vector<int> widths = {24, 48, 96, 192};
    int k_out = 8;
    int state_channels = kSemChannels + 1;
};
ParamStore make_plain_unet_params(const PlainUNetConfig& cfg, uint64_t seed);
template <typename T>
typename Tape<T>::Id plain_unet_forward(Tape<T>& tape, ParamBinding<T>& bind,
                                        const PlainUNetConfig& cfg, typename Tape<T>::Id state);
TensorF plain_unet_infer(ParamStore& params, const PlainUNetConfig& cfg,
                         const OrthoProjection& proj);

// ---- segmentation metrics ----
struct SegMetrics {
    double iou = 0.0;
    double dice = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};
// Binarize pred at tau and score against the label over all K*H*W cells.
// Empty denominators yield 0.
SegMetrics seg_metrics(const TensorF& pred, const IRMLabel& label, float tau);

struct SegCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    void absorb(const TensorF& pred, const IRMLabel& label, float tau);
    SegMetrics metrics() const;
};

// ---- candidate extraction ----
struct Candidate {
    GridPose pose;
    float score = 0.0f;
};
// All cells with score >= tau, best first; ties by (k, v, u); empty result
// means the policy abstains.
std::vector<Candidate> extract_candidates(const TensorF& density, float tau, int max_n);

// ---- supervised training ----
struct TrainIrmConfig {
    int epochs = 10;
    int batch = 8;
    double lr = 1e-3;
    uint64_t seed = 1;
    double heldout_frac = 0.1;
    float tau = 0.5f;
    bool plain = false;  // train the plain U-Net twin instead
    PlainUNetConfig plain_cfg;
    std::string csv_path;  // per-epoch log, empty = no file
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    SegMetrics held;
};

struct TrainIrmResult {
    ParamStore params;
    std::vector<EpochMetrics> log;
    double final_train_mse = 0.0;
};

TrainIrmResult train_irm(const std::vector<IrmSample>& dataset, const TransporterConfig& cfg,
                         const TrainIrmConfig& tcfg);

TensorF label_tensor(const IRMLabel& label);

extern template Tape<float>::Id transporter_forward<float>(Tape<float>&, ParamBinding<float>&,
                                                           const TransporterConfig&,
                                                           Tape<float>::Id, Tape<float>::Id);
extern template Tape<double>::Id transporter_forward<double>(Tape<double>&,
                                                             ParamBinding<double>&,
                                                             const TransporterConfig&,
                                                             Tape<double>::Id, Tape<double>::Id);
extern template Tape<float>::Id plain_unet_forward<float>(Tape<float>&, ParamBinding<float>&,
                                                          const PlainUNetConfig&,
                                                          Tape<float>::Id);
extern template Tape<double>::Id plain_unet_forward<double>(Tape<double>&, ParamBinding<double>&,
                                                            const PlainUNetConfig&,
                                                            Tape<double>::Id);

}  // namespace basepose
