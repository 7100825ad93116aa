#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "milpath/embedding.hpp"
#include "milpath/gating.hpp"

namespace milpath {

/// One slide's bag of fused patch embeddings.
struct Bag {
    std::string slide_id;
    std::string patient_id;
    Eigen::MatrixXd features;  // K x M
    int label = -1;            // 0, 1, or -1 when unknown

    Eigen::Index size() const noexcept { return features.rows(); }
};

/// Instance scoring parameters: score_i = w'(tanh(V h_i) .* sigm(U h_i)).
struct GatedAttentionParams {
    Eigen::MatrixXd V;  // L x M
    Eigen::MatrixXd U;  // L x M
    Eigen::VectorXd w;  // L
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// ReLU between layers; the last layer has a single output (the logit).
struct MLPHeadParams {
    std::vector<DenseLayer> layers;
};

enum class FusionMode { concat, attention };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& text);

struct ModelConfig {
    std::vector<std::string> extractor_names;
    std::vector<int> extractor_dims;
    FusionMode fusion = FusionMode::concat;
    int fusion_dim = 256;            // D, attention fusion only
    int fusion_attention_dim = 128;  // gate width inside attention fusion
    int attention_dim = 128;         // L
    std::vector<int> head_widths{256};

    /// Width of the bag features the model consumes (sum of extractor dims).
    int input_dim() const;
    /// Width of the instances seen by the MIL pooling (M).
    int instance_dim() const;
    void validate() const;
};

/// Full trainable state. All tensors are visited in a fixed order by
/// tensors(), which is what the optimizer, checkpoints and gradient checks
/// iterate over.
struct MilModel {
    ModelConfig config;
    std::optional<PatchFusionParams> fusion;
    GatedAttentionParams attention;
    MLPHeadParams head;

    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::vector<std::string> tensor_names() const;
    std::size_t parameter_count() const;
    /// Same shapes, all zeros.
    MilModel zeros_like() const;
};

/// Gradients mirror the model layout.
using GradientSet = MilModel;

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero, drawn
/// from SplitMix64(seed) in tensors() order.
MilModel init_model(const ModelConfig& config, std::uint64_t seed);

struct HeadOutput {
    double logit = 0.0;
    double probability = 0.5;
};

struct ForwardTrace {
    std::optional<FusionTrace> fusion;
    GateCache gate;                       // tanh/sigm branches and attention logits
    Eigen::VectorXd alpha;                // K
    Eigen::VectorXd pooled;               // M
    std::vector<Eigen::VectorXd> hidden;  // post-ReLU activations per hidden layer
    double logit = 0.0;
    double probability = 0.5;

    const Eigen::VectorXd& attention_logits() const noexcept { return gate.scores; }
};

/// Softmax over instances of the gated scores, max-shifted.
/// ShapeError on dimension mismatch or K = 0, DataError on non-finite input.
Eigen::VectorXd attention_weights(const GatedAttentionParams& params, const Eigen::MatrixXd& features);

/// z = sum_i alpha_i h_i.
Eigen::VectorXd pool(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& features);

HeadOutput mlp_forward(const MLPHeadParams& head, const Eigen::VectorXd& z);

ForwardTrace forward(const MilModel& model, const Eigen::MatrixXd& features);
inline ForwardTrace forward(const MilModel& model, const Bag& bag) { return forward(model, bag.features); }

}  // namespace milpath
