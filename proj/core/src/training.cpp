#include "milpath/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <set>
#include <sstream>

#include "milpath/error.hpp"
#include "milpath/rng.hpp"

namespace milpath {
namespace {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + std::to_string(values[i]);
    }
    return out;
}

}  // namespace

std::string to_string(BagLevel level) { return level == BagLevel::slide ? "slide" : "patient"; }

BagLevel parse_bag_level(const std::string& text) {
    if (text == "slide") {
        return BagLevel::slide;
    }
    if (text == "patient") {
        return BagLevel::patient;
    }
    throw ConfigError("unknown bag level '" + text + "' (expected slide or patient)");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be finite and >= 0");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be >= 1");
    }
    if (optimizer != "adam") {
        throw ConfigError("unsupported optimizer '" + optimizer + "' (only adam)");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw ConfigError("adam hyperparameters out of range");
    }
    if (patches_per_bag < 1) {
        throw ConfigError("patches_per_bag must be >= 1");
    }
    if (k < 2) {
        throw ConfigError("k must be >= 2");
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

std::vector<std::pair<std::string, std::string>> TrainConfig::to_key_values() const {
    return {
        {"learning_rate", format_double(learning_rate)},
        {"epochs", std::to_string(epochs)},
        {"optimizer", optimizer},
        {"beta1", format_double(beta1)},
        {"beta2", format_double(beta2)},
        {"epsilon", format_double(epsilon)},
        {"seed", std::to_string(seed)},
        {"patches_per_bag", std::to_string(patches_per_bag)},
        {"k", std::to_string(k)},
        {"class_weighting", class_weighting ? "true" : "false"},
        {"fusion", to_string(fusion)},
        {"attention_dim", std::to_string(attention_dim)},
        {"head_widths", join_ints(head_widths)},
        {"fusion_dim", std::to_string(fusion_dim)},
        {"fusion_attention_dim", std::to_string(fusion_attention_dim)},
        {"threshold", format_double(threshold)},
        {"bag_level", to_string(bag_level)},
    };
}

std::string TrainConfig::hash() const {
    std::string canonical;
    for (const auto& [k, v] : to_key_values()) {
        canonical += k + "=" + v + "\n";
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
    return buf;
}

int FeatureLayout::total() const { return std::accumulate(dims.begin(), dims.end(), 0); }

ModelConfig model_config_for(const FeatureLayout& layout, const TrainConfig& config) {
    ModelConfig mc;
    mc.extractor_names = layout.names;
    mc.extractor_dims = layout.dims;
    mc.fusion = config.fusion;
    mc.fusion_dim = config.fusion_dim;
    mc.fusion_attention_dim = config.fusion_attention_dim;
    mc.attention_dim = config.attention_dim;
    mc.head_widths = config.head_widths;
    mc.validate();
    return mc;
}

ClassWeights class_weights(std::span<const int> labels) {
    std::size_t pos = 0, neg = 0;
    for (int y : labels) {
        if (y == 1) {
            ++pos;
        } else if (y == 0) {
            ++neg;
        } else {
            throw DataError("label " + std::to_string(y) + " is not 0 or 1");
        }
    }
    if (pos == 0 || neg == 0) {
        throw DataError("cannot weight a single class");
    }
    const double n = static_cast<double>(pos + neg);
    return {n / (2.0 * static_cast<double>(pos)), n / (2.0 * static_cast<double>(neg))};
}

double weighted_bce(double probability, int label, const ClassWeights& weights) {
    const double p = std::clamp(probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double nll = label == 1 ? -std::log(p) : -std::log(1.0 - p);
    return weights(label) * nll;
}

BackwardResult backward(const MilModel& model, const Eigen::MatrixXd& features, int label,
                        const ClassWeights& weights) {
    if (label != 0 && label != 1) {
        throw DataError("training label must be 0 or 1");
    }
    const auto trace = forward(model, features);
    BackwardResult out{weighted_bce(trace.probability, label, weights), trace.probability, model.zeros_like()};
    auto& g = out.gradients;

    const double p = trace.probability;
    const bool clamped = p < kProbabilityClamp || p > 1.0 - kProbabilityClamp;
    // d/dlogit of -w [y ln s + (1-y) ln(1-s)] with s = sigm(logit).
    const double d_logit = clamped ? 0.0 : weights(label) * (p - static_cast<double>(label));

    // MLP head.
    const auto& layers = model.head.layers;
    Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, d_logit);
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Eigen::VectorXd& input = l == 0 ? trace.pooled : trace.hidden[l - 1];
        g.head.layers[l].weight.noalias() += delta * input.transpose();
        g.head.layers[l].bias += delta;
        Eigen::VectorXd d_input = layers[l].weight.transpose() * delta;
        if (l > 0) {
            d_input = d_input.cwiseProduct((trace.hidden[l - 1].array() > 0.0).cast<double>().matrix());
        }
        delta = std::move(d_input);
    }
    const Eigen::VectorXd& d_pooled = delta;

    // Pooling and instance attention.
    const Eigen::MatrixXd& instances = trace.fusion ? trace.fusion->fused : features;
    const Eigen::VectorXd d_alpha = instances * d_pooled;
    const Eigen::VectorXd d_scores = softmax_backward(trace.alpha, d_alpha);
    const auto& att = model.attention;
    if (trace.fusion) {
        Eigen::MatrixXd d_instances = trace.alpha * d_pooled.transpose();
        gate_backward(att.V, att.U, att.w, instances, trace.gate, d_scores, g.attention.V, g.attention.U,
                      g.attention.w, &d_instances);
        fusion_backward(*model.fusion, features, *trace.fusion, d_instances, *g.fusion);
    } else {
        gate_backward(att.V, att.U, att.w, instances, trace.gate, d_scores, g.attention.V, g.attention.U,
                      g.attention.w);
    }
    return out;
}

void optimizer_step(AdamState& state, MilModel& params, const GradientSet& grads, const AdamConfig& config) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    auto p = params.tensors();
    const auto g = grads.tensors();
    auto m = state.first_moment.tensors();
    auto v = state.second_moment.tensors();
    if (p.size() != g.size() || p.size() != m.size()) {
        throw ShapeError("optimizer state does not match the model");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i].size() != g[i].size() || p[i].size() != m[i].size()) {
            throw ShapeError("gradient tensor " + std::to_string(i) + " does not match its parameter");
        }
        for (std::size_t j = 0; j < p[i].size(); ++j) {
            m[i][j] = config.beta1 * m[i][j] + (1.0 - config.beta1) * g[i][j];
            v[i][j] = config.beta2 * v[i][j] + (1.0 - config.beta2) * g[i][j] * g[i][j];
            const double m_hat = m[i][j] / c1;
            const double v_hat = v[i][j] / c2;
            p[i][j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

Bag subsample_patches(const Bag& bag, std::size_t cap, std::uint64_t seed) {
    if (cap < 1) {
        throw ConfigError("subsample cap must be >= 1");
    }
    const auto k = static_cast<std::size_t>(bag.size());
    if (k <= cap) {
        return bag;
    }
    SplitMix64 rng(seed);
    const auto rows = sample_without_replacement(k, cap, rng);
    Bag out{bag.slide_id, bag.patient_id, Eigen::MatrixXd(static_cast<Eigen::Index>(cap), bag.features.cols()),
            bag.label};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = bag.features.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

std::vector<PatientLabel> patients_of(std::span<const Bag> bags) {
    std::vector<PatientLabel> out;
    std::map<std::string, std::size_t> index;
    for (const auto& bag : bags) {
        if (bag.label != 0 && bag.label != 1) {
            throw DataError("slide '" + bag.slide_id + "' has no usable label");
        }
        const auto [it, inserted] = index.emplace(bag.patient_id, out.size());
        if (inserted) {
            out.push_back({bag.patient_id, bag.label});
        } else if (out[it->second].label != bag.label) {
            throw DataError("patient '" + bag.patient_id + "' has slides with conflicting labels");
        }
    }
    return out;
}

std::vector<Bag> merge_by_patient(std::span<const Bag> bags) {
    const auto patients = patients_of(bags);
    std::vector<Bag> out;
    for (const auto& p : patients) {
        Eigen::Index rows = 0, cols = -1;
        for (const auto& b : bags) {
            if (b.patient_id == p.patient_id) {
                rows += b.size();
                if (cols >= 0 && cols != b.features.cols()) {
                    throw ShapeError("patient '" + p.patient_id + "' has slides with different feature widths");
                }
                cols = b.features.cols();
            }
        }
        Bag merged{p.patient_id, p.patient_id, Eigen::MatrixXd(rows, cols), p.label};
        Eigen::Index at = 0;
        for (const auto& b : bags) {
            if (b.patient_id == p.patient_id) {
                merged.features.middleRows(at, b.size()) = b.features;
                at += b.size();
            }
        }
        out.push_back(std::move(merged));
    }
    return out;
}

FoldSplit make_folds(std::span<const PatientLabel> patients, int k, std::uint64_t seed) {
    if (k < 2) {
        throw ConfigError("k must be >= 2");
    }
    std::vector<std::string> positives, negatives;
    std::set<std::string> seen;
    for (const auto& p : patients) {
        if (!seen.insert(p.patient_id).second) {
            throw DataError("duplicate patient id '" + p.patient_id + "'");
        }
        (p.label == 1 ? positives : negatives).push_back(p.patient_id);
    }
    const auto need = static_cast<std::size_t>(k);
    if (positives.size() < need || negatives.size() < need) {
        throw ConfigError("k=" + std::to_string(k) + " folds need at least " + std::to_string(k) +
                          " patients per class, have " + std::to_string(positives.size()) + " positive and " +
                          std::to_string(negatives.size()) + " negative");
    }
    SplitMix64 rng(seed);
    shuffle(positives, rng);
    shuffle(negatives, rng);

    FoldSplit split;
    split.k = k;
    split.test_patients.resize(need);
    std::size_t slot = 0;
    for (const auto* group : {&positives, &negatives}) {
        for (const auto& id : *group) {
            const auto fold = static_cast<int>(slot++ % need);
            split.test_patients[static_cast<std::size_t>(fold)].push_back(id);
            split.fold_of[id] = fold;
        }
    }
    return split;
}

namespace {

TrainResult train_on(const std::vector<const Bag*>& train, const FeatureLayout& layout, const TrainConfig& config,
                     std::uint64_t seed) {
    config.validate();
    if (train.empty()) {
        throw ConfigError("training set is empty");
    }
    std::vector<int> labels;
    for (const Bag* b : train) {
        if (b->features.cols() != layout.total()) {
            throw ShapeError("bag '" + b->slide_id + "' has " + std::to_string(b->features.cols()) +
                             " feature columns, layout expects " + std::to_string(layout.total()));
        }
        labels.push_back(b->label);
    }
    const auto balanced = class_weights(labels);

    TrainResult result{init_model(model_config_for(layout, config), derive_seed(seed, "init")), {},
                       config.class_weighting ? balanced : ClassWeights{}};
    AdamState state(result.model);
    const AdamConfig adam{config.learning_rate, config.beta1, config.beta2, config.epsilon};

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 order_rng(derive_seed(seed, "order"));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle(order, order_rng);
        const auto epoch_seed = derive_seed(seed, "subsample", static_cast<std::uint64_t>(epoch));
        double total = 0.0;
        for (auto idx : order) {
            const Bag& bag = *train[idx];
            BackwardResult step;
            if (static_cast<std::size_t>(bag.size()) > config.patches_per_bag) {
                const auto sampled = subsample_patches(bag, config.patches_per_bag, derive_seed(epoch_seed, "bag", idx));
                step = backward(result.model, sampled.features, bag.label, result.weights);
            } else {
                step = backward(result.model, bag.features, bag.label, result.weights);
            }
            total += step.loss;
            optimizer_step(state, result.model, step.gradients, adam);
        }
        result.epoch_loss.push_back(total / static_cast<double>(train.size()));
    }
    return result;
}

struct FoldOutcome {
    FoldRow row;
    std::vector<Prediction> predictions;
    TrainResult trained;
};

}  // namespace

TrainResult train_fold(std::span<const Bag> train, const FeatureLayout& layout, const TrainConfig& config,
                       std::uint64_t seed) {
    std::vector<const Bag*> view;
    view.reserve(train.size());
    for (const auto& b : train) {
        view.push_back(&b);
    }
    return train_on(view, layout, config, seed);
}

double predict(const MilModel& model, const Bag& bag) { return forward(model, bag.features).probability; }

CrossValidationResult cross_validate(std::span<const Bag> input, const FeatureLayout& layout,
                                     const TrainConfig& config) {
    config.validate();
    std::vector<Bag> merged;
    std::span<const Bag> bags = input;
    if (config.bag_level == BagLevel::patient) {
        merged = merge_by_patient(input);
        bags = merged;
    }
    const auto patients = patients_of(bags);

    CrossValidationResult result;
    result.split = make_folds(patients, config.k, derive_seed(config.seed, "folds"));

    std::map<std::string, int> label_of;
    for (const auto& p : patients) {
        label_of[p.patient_id] = p.label;
    }

    // Folds are independent and individually seeded, so they run
    // concurrently; results are collected in fold order.
    const auto run_fold = [&](int fold) {
        std::vector<const Bag*> train;
        std::vector<const Bag*> test;
        for (const auto& bag : bags) {
            (result.split.fold_of.at(bag.patient_id) == fold ? test : train).push_back(&bag);
        }
        FoldOutcome out{{}, {}, train_on(train, layout, config, derive_seed(config.seed, "fold", static_cast<std::uint64_t>(fold)))};

        // Patient score = mean probability over that patient's test bags.
        std::map<std::string, std::pair<double, int>> per_patient;
        for (const Bag* bag : test) {
            const double p = predict(out.trained.model, *bag);
            out.predictions.push_back({fold, bag->patient_id, bag->slide_id, bag->label, p});
            auto& acc = per_patient[bag->patient_id];
            acc.first += p;
            acc.second += 1;
        }
        std::vector<ScoredCase> cases;
        for (const auto& id : result.split.test_patients[static_cast<std::size_t>(fold)]) {
            const auto& [sum, n] = per_patient.at(id);
            cases.push_back({id, sum / n, label_of.at(id)});
        }
        out.row = score_fold(fold, cases, config.threshold);
        return out;
    };

    std::vector<std::future<FoldOutcome>> pending;
    for (int fold = 0; fold < config.k; ++fold) {
        pending.push_back(std::async(std::launch::async, run_fold, fold));
    }
    std::vector<FoldRow> rows;
    for (auto& f : pending) {
        auto out = f.get();
        rows.push_back(std::move(out.row));
        result.predictions.insert(result.predictions.end(), out.predictions.begin(), out.predictions.end());
        result.epoch_loss.push_back(std::move(out.trained.epoch_loss));
        result.models.push_back(std::move(out.trained.model));
    }

    auto provenance = config.to_key_values();
    provenance.emplace_back("config_hash", config.hash());
    std::string names;
    for (std::size_t i = 0; i < layout.names.size(); ++i) {
        names += (i ? "," : "") + layout.names[i];
    }
    provenance.emplace_back("extractors", names);
    provenance.emplace_back("extractor_dims", join_ints(layout.dims));
    provenance.emplace_back("rng", "splitmix64");
    provenance.emplace_back("std", "population");
    provenance.emplace_back("bags", std::to_string(bags.size()));
    provenance.emplace_back("patients", std::to_string(patients.size()));
    result.report = make_report(std::move(rows), std::move(provenance));
    return result;
}

std::string predictions_csv(const std::vector<Prediction>& predictions) {
    std::ostringstream os;
    os.precision(17);
    os << "fold,patient_id,slide_id,label,probability\n";
    for (const auto& p : predictions) {
        os << p.fold << ',' << p.patient_id << ',' << p.slide_id << ',' << p.label << ',' << p.probability << '\n';
    }
    return os.str();
}

}  // namespace milpath
