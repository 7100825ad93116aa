#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "milpath/metrics.hpp"
#include "milpath/model.hpp"

namespace milpath {

/// How slides are grouped into bags. `patient` concatenates all of a
/// patient's slides into one bag before training and scoring.
enum class BagLevel { slide, patient };

std::string to_string(BagLevel level);
BagLevel parse_bag_level(const std::string& text);

struct TrainConfig {
    double learning_rate = 2e-5;
    int epochs = 20;
    std::string optimizer = "adam";
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    std::size_t patches_per_bag = 2000;
    int k = 4;
    bool class_weighting = true;
    FusionMode fusion = FusionMode::concat;
    int attention_dim = 128;
    std::vector<int> head_widths{256};
    int fusion_dim = 256;
    int fusion_attention_dim = 128;
    double threshold = 0.5;
    BagLevel bag_level = BagLevel::slide;

    /// Throws ConfigError (k < 2, learning rate <= 0, epochs < 1, ...).
    void validate() const;
    /// Canonical, ordered key/value listing; also the provenance block.
    std::vector<std::pair<std::string, std::string>> to_key_values() const;
    /// Hex FNV-1a of the canonical listing.
    std::string hash() const;
};

/// Applies `key = value` pairs onto a config. Unknown keys are ConfigError.
void apply_key_values(TrainConfig& config, const std::map<std::string, std::string>& values);

/// Column layout of bag features: extractor names and widths, in order.
struct FeatureLayout {
    std::vector<std::string> names;
    std::vector<int> dims;
    int total() const;
};

ModelConfig model_config_for(const FeatureLayout& layout, const TrainConfig& config);

// ---- loss -------------------------------------------------------------------

struct ClassWeights {
    double positive = 1.0;
    double negative = 1.0;
    double operator()(int label) const noexcept { return label == 1 ? positive : negative; }
};

/// Balanced weighting w_c = N / (2 N_c).
/// Throws DataError("cannot weight a single class") if a class is missing.
ClassWeights class_weights(std::span<const int> labels);

inline constexpr double kProbabilityClamp = 1e-12;

/// -w_y [y ln p + (1-y) ln(1-p)], p clamped to [eps, 1-eps].
double weighted_bce(double probability, int label, const ClassWeights& weights);

struct BackwardResult {
    double loss = 0.0;
    double probability = 0.5;
    GradientSet gradients;
};

/// Exact reverse-mode gradients of weighted_bce(forward(model, features)).
/// Inside the clamp region the gradient is taken as zero.
BackwardResult backward(const MilModel& model, const Eigen::MatrixXd& features, int label,
                        const ClassWeights& weights);

// ---- optimizer --------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    GradientSet first_moment;
    GradientSet second_moment;
    std::uint64_t step = 0;

    explicit AdamState(const MilModel& model)
        : first_moment(model.zeros_like()), second_moment(model.zeros_like()) {}
};

/// One bias-corrected Adam update of every tensor.
void optimizer_step(AdamState& state, MilModel& params, const GradientSet& grads, const AdamConfig& config);

// ---- data handling ------------------------------------------------------------

/// Unchanged when K <= cap; otherwise `cap` rows drawn uniformly without
/// replacement (seeded), kept in their original relative order.
Bag subsample_patches(const Bag& bag, std::size_t cap, std::uint64_t seed);

struct PatientLabel {
    std::string patient_id;
    int label = 0;
};

/// Patients in order of first appearance. DataError when one patient's bags
/// carry different labels or a label is not 0/1.
std::vector<PatientLabel> patients_of(std::span<const Bag> bags);

/// One bag per patient with the slides' rows stacked in input order.
std::vector<Bag> merge_by_patient(std::span<const Bag> bags);

struct FoldSplit {
    int k = 0;
    std::vector<std::vector<std::string>> test_patients;  // per fold
    std::map<std::string, int> fold_of;
};

/// Stratified, patient-grouped folds. Each class is shuffled (seeded) and
/// dealt round-robin, the negatives continuing where the positives stopped,
/// so fold sizes and class counts differ by at most one.
/// ConfigError unless every class has at least k patients.
FoldSplit make_folds(std::span<const PatientLabel> patients, int k, std::uint64_t seed);

// ---- training loops -------------------------------------------------------------

struct TrainResult {
    MilModel model;
    std::vector<double> epoch_loss;  // mean weighted loss per epoch
    ClassWeights weights;
};

/// Adam, one bag per step, bag order reshuffled every epoch, patches
/// resampled per epoch when a bag exceeds patches_per_bag.
TrainResult train_fold(std::span<const Bag> train, const FeatureLayout& layout, const TrainConfig& config,
                       std::uint64_t seed);

double predict(const MilModel& model, const Bag& bag);

struct Prediction {
    int fold = 0;
    std::string patient_id;
    std::string slide_id;
    int label = 0;
    double probability = 0.0;
};

struct CrossValidationResult {
    MetricsReport report;
    FoldSplit split;
    std::vector<Prediction> predictions;  // per test bag
    std::vector<std::vector<double>> epoch_loss;
    std::vector<MilModel> models;
};

/// k-fold training and evaluation. Each held-out patient is scored once, by
/// the mean probability over that patient's test bags.
CrossValidationResult cross_validate(std::span<const Bag> bags, const FeatureLayout& layout,
                                     const TrainConfig& config);

std::string predictions_csv(const std::vector<Prediction>& predictions);

}  // namespace milpath
