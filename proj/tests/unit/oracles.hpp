#pragma once

// Independent reference computations used only by tests. Each one is the
// slow, obvious version of something the library does faster.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Exhaustive Otsu: recomputes both class statistics from scratch for every
/// candidate level, keeps the first maximum.
inline int otsu(const std::array<std::uint64_t, 256>& hist) {
    int best = 0;
    double best_var = -1.0;
    for (int t = 0; t < 256; ++t) {
        double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (int l = 0; l < 256; ++l) {
            const double c = static_cast<double>(hist[l]);
            if (l <= t) {
                n0 += c;
                s0 += c * l;
            } else {
                n1 += c;
                s1 += c * l;
            }
        }
        double var = 0.0;
        if (n0 > 0 && n1 > 0) {
            const double n = n0 + n1;
            const double mu0 = s0 / n0, mu1 = s1 / n1;
            var = (n0 / n) * (n1 / n) * (mu0 - mu1) * (mu0 - mu1);
        }
        if (var > best_var) {
            best_var = var;
            best = t;
        }
    }
    return best;
}

/// AUC by counting every positive/negative pair, ties worth one half.
inline double pair_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

/// Literal evaluation of exp(a_i) / sum_j exp(a_j) with
/// a_i = w'(tanh(V h_i) .* sigm(U h_i)), one instance at a time, no shifting.
inline Eigen::VectorXd naive_attention(const Eigen::MatrixXd& V, const Eigen::MatrixXd& U, const Eigen::VectorXd& w,
                                       const Eigen::MatrixXd& H) {
    Eigen::VectorXd e(H.rows());
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        double a = 0.0;
        for (Eigen::Index l = 0; l < V.rows(); ++l) {
            double v = 0.0, u = 0.0;
            for (Eigen::Index m = 0; m < H.cols(); ++m) {
                v += V(l, m) * H(i, m);
                u += U(l, m) * H(i, m);
            }
            a += w[l] * std::tanh(v) * (1.0 / (1.0 + std::exp(-u)));
        }
        e[i] = std::exp(a);
    }
    return e / e.sum();
}

}  // namespace oracle
