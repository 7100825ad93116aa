#include <numeric>

#include "milpath/embedding.hpp"
#include "milpath/error.hpp"

namespace milpath {

FusedBagFeatures concat_fuse(const SlideEmbeddingSet& set, const std::vector<std::string>& order) {
    if (order.empty()) {
        throw ConfigError("fusion needs at least one extractor");
    }
    FusedBagFeatures out;
    std::vector<const ExtractorMatrix*> parts;
    Eigen::Index total = 0;
    for (const auto& name : order) {
        const auto& m = set.extractor(name);
        if (static_cast<std::size_t>(m.values.rows()) != set.patch_count()) {
            throw ShapeError("extractor '" + name + "' has " + std::to_string(m.values.rows()) + " rows, slide '" +
                             set.slide_id + "' has " + std::to_string(set.patch_count()) + " patches");
        }
        parts.push_back(&m);
        out.names.push_back(name);
        out.dims.push_back(static_cast<int>(m.values.cols()));
        total += m.values.cols();
    }
    out.values.resize(static_cast<Eigen::Index>(set.patch_count()), total);
    Eigen::Index offset = 0;
    for (const auto* m : parts) {
        out.values.middleCols(offset, m->values.cols()) = m->values;
        offset += m->values.cols();
    }
    return out;
}

int PatchFusionParams::input_dim() const {
    int total = 0;
    for (const auto& p : projections) {
        total += static_cast<int>(p.cols());
    }
    return total;
}

std::vector<int> PatchFusionParams::block_dims() const {
    std::vector<int> dims;
    for (const auto& p : projections) {
        dims.push_back(static_cast<int>(p.cols()));
    }
    return dims;
}

FusionTrace fusion_forward(const PatchFusionParams& params, const Eigen::MatrixXd& concatenated) {
    if (params.projections.empty()) {
        throw ShapeError("patch fusion has no extractor projections");
    }
    if (concatenated.cols() != params.input_dim()) {
        throw ShapeError("patch fusion expects " + std::to_string(params.input_dim()) + " input columns, got " +
                         std::to_string(concatenated.cols()));
    }
    const auto n = static_cast<Eigen::Index>(params.projections.size());
    const Eigen::Index rows = concatenated.rows();

    FusionTrace trace;
    Eigen::MatrixXd scores(rows, n);
    Eigen::Index offset = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& proj = params.projections[static_cast<std::size_t>(j)];
        Eigen::MatrixXd projected = concatenated.middleCols(offset, proj.cols()) * proj.transpose();
        offset += proj.cols();
        trace.gates.push_back(gate_forward(params.V, params.U, params.w, projected));
        scores.col(j) = trace.gates.back().scores;
        trace.projected.push_back(std::move(projected));
    }

    trace.weights.resize(rows, n);
    for (Eigen::Index i = 0; i < rows; ++i) {
        trace.weights.row(i) = stable_softmax(scores.row(i).transpose()).transpose();
    }
    trace.fused = Eigen::MatrixXd::Zero(rows, params.output_dim());
    for (Eigen::Index j = 0; j < n; ++j) {
        trace.fused.noalias() += trace.weights.col(j).asDiagonal() * trace.projected[static_cast<std::size_t>(j)];
    }
    return trace;
}

void fusion_backward(const PatchFusionParams& params, const Eigen::MatrixXd& concatenated, const FusionTrace& trace,
                     const Eigen::MatrixXd& d_fused, PatchFusionParams& grads) {
    const auto n = static_cast<Eigen::Index>(params.projections.size());
    const Eigen::Index rows = concatenated.rows();

    Eigen::MatrixXd d_weights(rows, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        d_weights.col(j) = d_fused.cwiseProduct(trace.projected[static_cast<std::size_t>(j)]).rowwise().sum();
    }
    // Row-wise softmax backward.
    const Eigen::VectorXd inner = trace.weights.cwiseProduct(d_weights).rowwise().sum();
    const Eigen::MatrixXd d_scores =
        trace.weights.cwiseProduct(d_weights - inner.replicate(1, n));

    Eigen::Index offset = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        Eigen::MatrixXd d_projected = trace.weights.col(j).asDiagonal() * d_fused;
        gate_backward(params.V, params.U, params.w, trace.projected[sj], trace.gates[sj], d_scores.col(j), grads.V,
                      grads.U, grads.w, &d_projected);
        const auto cols = params.projections[sj].cols();
        grads.projections[sj].noalias() += d_projected.transpose() * concatenated.middleCols(offset, cols);
        offset += cols;
    }
}

FusedBagFeatures attention_fuse(const SlideEmbeddingSet& set, const std::vector<std::string>& order,
                                const PatchFusionParams& params) {
    auto concatenated = concat_fuse(set, order);
    if (concatenated.dims != params.block_dims()) {
        throw ShapeError("extractor dims do not match the fusion projections");
    }
    FusedBagFeatures out;
    out.values = fusion_forward(params, concatenated.values).fused;
    out.names = std::move(concatenated.names);
    out.dims = {params.output_dim()};
    return out;
}

}  // namespace milpath
