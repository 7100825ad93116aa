#include "milpath/gating.hpp"

namespace milpath {

GateCache gate_forward(const Eigen::MatrixXd& V, const Eigen::MatrixXd& U, const Eigen::VectorXd& w,
                       const Eigen::MatrixXd& inputs) {
    GateCache cache;
    cache.tanh_branch.noalias() = inputs * V.transpose();
    cache.tanh_branch = cache.tanh_branch.array().tanh();
    cache.sigm_branch.noalias() = inputs * U.transpose();
    cache.sigm_branch = cache.sigm_branch.unaryExpr([](double x) { return sigmoid(x); });
    cache.scores.noalias() = cache.tanh_branch.cwiseProduct(cache.sigm_branch) * w;
    return cache;
}

void gate_backward(const Eigen::MatrixXd& V, const Eigen::MatrixXd& U, const Eigen::VectorXd& w,
                   const Eigen::MatrixXd& inputs, const GateCache& cache, const Eigen::VectorXd& d_scores,
                   Eigen::MatrixXd& dV, Eigen::MatrixXd& dU, Eigen::VectorXd& dw, Eigen::MatrixXd* d_inputs) {
    const auto& T = cache.tanh_branch;
    const auto& S = cache.sigm_branch;
    dw.noalias() += T.cwiseProduct(S).transpose() * d_scores;

    // d(score)/d(gate) = w, broadcast over rows.
    const Eigen::MatrixXd d_gate = d_scores * w.transpose();
    const Eigen::MatrixXd d_tanh_pre =
        (d_gate.array() * S.array() * (1.0 - T.array().square())).matrix();
    const Eigen::MatrixXd d_sigm_pre =
        (d_gate.array() * T.array() * S.array() * (1.0 - S.array())).matrix();

    dV.noalias() += d_tanh_pre.transpose() * inputs;
    dU.noalias() += d_sigm_pre.transpose() * inputs;
    if (d_inputs != nullptr) {
        d_inputs->noalias() += d_tanh_pre * V;
        d_inputs->noalias() += d_sigm_pre * U;
    }
}

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits) {
    const double shift = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - shift).exp();
    return e / e.sum();
}

Eigen::VectorXd softmax_backward(const Eigen::VectorXd& y, const Eigen::VectorXd& dy) {
    return y.cwiseProduct(dy.array().matrix() - Eigen::VectorXd::Constant(y.size(), y.dot(dy)));
}

}  // namespace milpath
