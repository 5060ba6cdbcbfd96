#ifndef UWOC_TRAINER_HPP
#define UWOC_TRAINER_HPP

#include "uwoc/cnn.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace uwoc::cnn {

/// One network input with its three class labels.
struct LabeledSample {
    std::vector<double> input;
    Labels labels;
    std::uint64_t seed = 0;
};

struct CurvePoint {
    int epoch = 0;
    double mfr_accuracy = 0.0;
    double osnr_accuracy = 0.0;
    double phase_accuracy = 0.0;
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;
};

struct TrainConfig {
    int epochs = 250;
    int batch = 32;
    int eval_every = 10;
    std::uint64_t seed = 1;
    AdamConfig adam;
    int workers = 1;
    std::function<void(const EpochLog&, const CurvePoint*)> on_epoch;
};

struct TrainResult {
    Network network;
    std::vector<CurvePoint> curve;
    std::vector<EpochLog> epochs;
};

/// Mean loss and mean gradient over the given samples.
///
/// Samples are processed in fixed shards of gradient_shard_size and the shard
/// sums are reduced in order, so the result does not depend on `workers`.
inline constexpr std::size_t gradient_shard_size = 8;
double batch_gradient(const Network& net, std::span<const LabeledSample* const> batch, Parameters& grad,
                      int workers = 1);

TrainResult train(std::span<const LabeledSample> train_set, std::span<const LabeledSample> test_set,
                  const Architecture& arch, const TrainConfig& config);

/// counts[true][predicted]
struct ConfusionMatrix {
    int classes = 0;
    std::vector<long> counts;

    explicit ConfusionMatrix(int n = 0) : classes(n), counts(static_cast<std::size_t>(n) * n, 0) {}
    long& at(int truth, int predicted) { return counts[static_cast<std::size_t>(truth * classes + predicted)]; }
    long at(int truth, int predicted) const { return counts[static_cast<std::size_t>(truth * classes + predicted)]; }
    long row_sum(int truth) const;
    long total() const;
    double accuracy() const;
};

struct Evaluation {
    double mfr_accuracy = 0.0;
    double osnr_accuracy = 0.0;
    double phase_accuracy = 0.0;
    ConfusionMatrix format;
    ConfusionMatrix osnr;
    ConfusionMatrix phase;
    std::vector<Labels> predictions;
};

Evaluation evaluate(const Network& net, std::span<const LabeledSample> samples);

/// Builds an Evaluation from predictions (used by evaluate and by tests with injected predictors).
Evaluation score_predictions(const Architecture& arch, std::span<const LabeledSample> samples,
                             std::vector<Labels> predictions);

} // namespace uwoc::cnn

#endif
