#pragma once

#include <Eigen/Dense>

namespace milpath {

/// Intermediates of the gated scoring function
///   score(x) = w' (tanh(V x) .* sigm(U x))
/// evaluated for every row x of an input matrix.
struct GateCache {
    Eigen::MatrixXd tanh_branch;  // rows x L
    Eigen::MatrixXd sigm_branch;  // rows x L
    Eigen::VectorXd scores;       // rows
};

GateCache gate_forward(const Eigen::MatrixXd& V, const Eigen::MatrixXd& U, const Eigen::VectorXd& w,
                       const Eigen::MatrixXd& inputs);

/// Accumulates d(loss)/d{V,U,w} into dV, dU, dw given d(loss)/d(scores).
/// When d_inputs is non-null the input gradient is accumulated into it too.
void gate_backward(const Eigen::MatrixXd& V, const Eigen::MatrixXd& U, const Eigen::VectorXd& w,
                   const Eigen::MatrixXd& inputs, const GateCache& cache, const Eigen::VectorXd& d_scores,
                   Eigen::MatrixXd& dV, Eigen::MatrixXd& dU, Eigen::VectorXd& dw,
                   Eigen::MatrixXd* d_inputs = nullptr);

/// Max-shifted softmax.
Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits);

/// Backward of softmax: given y = softmax(x) and dL/dy, returns dL/dx.
Eigen::VectorXd softmax_backward(const Eigen::VectorXd& y, const Eigen::VectorXd& dy);

inline double sigmoid(double x) noexcept {
    // Branches keep exp() from overflowing for large |x|.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace milpath
