#include "milpath/model.hpp"

#include <cmath>
#include <type_traits>

#include "milpath/error.hpp"
#include "milpath/rng.hpp"

namespace milpath {
namespace {

std::span<double> span_of(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

template <class Model, class Visit>
void visit_tensors(Model& model, Visit&& visit) {
    if (model.fusion) {
        for (std::size_t j = 0; j < model.fusion->projections.size(); ++j) {
            visit("fusion.projection." + std::to_string(j), model.fusion->projections[j], false);
        }
        visit("fusion.V", model.fusion->V, false);
        visit("fusion.U", model.fusion->U, false);
        visit("fusion.w", model.fusion->w, false);
    }
    visit("attention.V", model.attention.V, false);
    visit("attention.U", model.attention.U, false);
    visit("attention.w", model.attention.w, false);
    for (std::size_t l = 0; l < model.head.layers.size(); ++l) {
        visit("head." + std::to_string(l) + ".weight", model.head.layers[l].weight, false);
        visit("head." + std::to_string(l) + ".bias", model.head.layers[l].bias, true);
    }
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw DataError(std::string(what) + " contains non-finite values");
    }
}

}  // namespace

std::string to_string(FusionMode mode) { return mode == FusionMode::concat ? "concat" : "attention"; }

FusionMode parse_fusion_mode(const std::string& text) {
    if (text == "concat") {
        return FusionMode::concat;
    }
    if (text == "attention") {
        return FusionMode::attention;
    }
    throw ConfigError("unknown fusion mode '" + text + "' (expected concat or attention)");
}

int ModelConfig::input_dim() const {
    int total = 0;
    for (int d : extractor_dims) {
        total += d;
    }
    return total;
}

int ModelConfig::instance_dim() const { return fusion == FusionMode::attention ? fusion_dim : input_dim(); }

void ModelConfig::validate() const {
    if (extractor_dims.empty()) {
        throw ConfigError("model needs at least one extractor");
    }
    if (extractor_names.size() != extractor_dims.size()) {
        throw ConfigError("extractor names and dims differ in length");
    }
    for (int d : extractor_dims) {
        if (d < 1) {
            throw ConfigError("extractor dims must be >= 1");
        }
    }
    if (attention_dim < 1 || fusion_dim < 1 || fusion_attention_dim < 1) {
        throw ConfigError("attention and fusion widths must be >= 1");
    }
    for (int w : head_widths) {
        if (w < 1) {
            throw ConfigError("head widths must be >= 1");
        }
    }
}

std::vector<std::span<double>> MilModel::tensors() {
    std::vector<std::span<double>> out;
    visit_tensors(*this, [&](const std::string&, auto& t, bool) { out.push_back(span_of(t)); });
    return out;
}

std::vector<std::span<const double>> MilModel::tensors() const {
    std::vector<std::span<const double>> out;
    for (auto s : const_cast<MilModel*>(this)->tensors()) {
        out.emplace_back(s.data(), s.size());
    }
    return out;
}

std::vector<std::string> MilModel::tensor_names() const {
    std::vector<std::string> out;
    visit_tensors(*const_cast<MilModel*>(this), [&](const std::string& name, auto&, bool) { out.push_back(name); });
    return out;
}

std::size_t MilModel::parameter_count() const {
    std::size_t n = 0;
    for (auto t : tensors()) {
        n += t.size();
    }
    return n;
}

MilModel MilModel::zeros_like() const {
    MilModel out = *this;
    for (auto t : out.tensors()) {
        std::fill(t.begin(), t.end(), 0.0);
    }
    return out;
}

MilModel init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    MilModel model;
    model.config = config;
    const auto L = config.attention_dim;
    const auto M = config.instance_dim();
    if (config.fusion == FusionMode::attention) {
        PatchFusionParams f;
        for (int d : config.extractor_dims) {
            f.projections.emplace_back(config.fusion_dim, d);
        }
        f.V.resize(config.fusion_attention_dim, config.fusion_dim);
        f.U.resize(config.fusion_attention_dim, config.fusion_dim);
        f.w.resize(config.fusion_attention_dim);
        model.fusion = std::move(f);
    }
    model.attention.V.resize(L, M);
    model.attention.U.resize(L, M);
    model.attention.w.resize(L);
    int fan_in = M;
    for (int width : config.head_widths) {
        model.head.layers.push_back({Eigen::MatrixXd(width, fan_in), Eigen::VectorXd(width)});
        fan_in = width;
    }
    model.head.layers.push_back({Eigen::MatrixXd(1, fan_in), Eigen::VectorXd(1)});

    SplitMix64 rng(seed);
    visit_tensors(model, [&](const std::string&, auto& t, bool is_bias) {
        if (is_bias) {
            t.setZero();
            return;
        }
        // Matrices are out x in; a gate vector w has fan-in L.
        Eigen::Index fan = t.cols();
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::VectorXd>) {
            fan = t.size();
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
        for (auto& v : span_of(t)) {
            v = rng.uniform(-bound, bound);
        }
    });
    return model;
}

Eigen::VectorXd attention_weights(const GatedAttentionParams& params, const Eigen::MatrixXd& features) {
    if (features.rows() == 0) {
        throw ShapeError("attention over an empty bag");
    }
    if (features.cols() != params.V.cols() || features.cols() != params.U.cols() ||
        params.V.rows() != params.U.rows() || params.w.size() != params.V.rows()) {
        throw ShapeError("attention parameters (L=" + std::to_string(params.V.rows()) +
                         ", M=" + std::to_string(params.V.cols()) + ") do not match features with M=" +
                         std::to_string(features.cols()));
    }
    require_finite(features, "bag features");
    return stable_softmax(gate_forward(params.V, params.U, params.w, features).scores);
}

Eigen::VectorXd pool(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& features) {
    if (alpha.size() != features.rows()) {
        throw ShapeError("pooling " + std::to_string(alpha.size()) + " weights over " +
                         std::to_string(features.rows()) + " instances");
    }
    return features.transpose() * alpha;
}

HeadOutput mlp_forward(const MLPHeadParams& head, const Eigen::VectorXd& z) {
    if (head.layers.empty() || head.layers.back().weight.rows() != 1) {
        throw ShapeError("MLP head must end in a single-logit layer");
    }
    Eigen::VectorXd a = z;
    for (std::size_t l = 0; l < head.layers.size(); ++l) {
        const auto& layer = head.layers[l];
        if (layer.weight.cols() != a.size() || layer.bias.size() != layer.weight.rows()) {
            throw ShapeError("MLP layer " + std::to_string(l) + " expects input " +
                             std::to_string(layer.weight.cols()) + ", got " + std::to_string(a.size()));
        }
        Eigen::VectorXd next = layer.weight * a + layer.bias;
        if (l + 1 < head.layers.size()) {
            next = next.cwiseMax(0.0);
        }
        a = std::move(next);
    }
    return {a[0], sigmoid(a[0])};
}

ForwardTrace forward(const MilModel& model, const Eigen::MatrixXd& features) {
    if (features.rows() == 0) {
        throw ShapeError("forward on an empty bag");
    }
    require_finite(features, "bag features");
    ForwardTrace trace;
    const Eigen::MatrixXd* instances = &features;
    if (model.fusion) {
        trace.fusion = fusion_forward(*model.fusion, features);
        instances = &trace.fusion->fused;
    }
    const auto& att = model.attention;
    if (instances->cols() != att.V.cols()) {
        throw ShapeError("model expects instances of width " + std::to_string(att.V.cols()) + ", got " +
                         std::to_string(instances->cols()));
    }
    trace.gate = gate_forward(att.V, att.U, att.w, *instances);
    trace.alpha = stable_softmax(trace.gate.scores);
    trace.pooled = pool(trace.alpha, *instances);

    Eigen::VectorXd a = trace.pooled;
    const auto& layers = model.head.layers;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        a = (layers[l].weight * a + layers[l].bias).cwiseMax(0.0);
        trace.hidden.push_back(a);
    }
    trace.logit = (layers.back().weight * a + layers.back().bias)[0];
    trace.probability = sigmoid(trace.logit);
    return trace;
}

}  // namespace milpath
