#include "uwoc/trainer.hpp"

#include "uwoc/rng.hpp"

#include <chrono>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace uwoc::cnn {

namespace {

struct ShardResult {
    Parameters grad;
    double loss = 0.0;
};

void run_shard(const Network& net, std::span<const LabeledSample* const> samples, ShardResult& out) {
    out.grad.zero();
    out.loss = 0.0;
    ForwardCache cache;
    for (const auto* s : samples) {
        const auto logits = net.forward(s->input, cache);
        out.loss += loss(logits, s->labels);
        net.backward(cache, s->labels, out.grad);
    }
}

} // namespace

double batch_gradient(const Network& net, std::span<const LabeledSample* const> batch, Parameters& grad,
                      int workers) {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    if (!grad.same_shape(net.parameters())) grad = Parameters(net.architecture());
    const std::size_t n_shards = (batch.size() + gradient_shard_size - 1) / gradient_shard_size;
    std::vector<ShardResult> shards(n_shards);
    for (auto& s : shards) s.grad = Parameters(net.architecture());

    auto shard_span = [&](std::size_t i) {
        const std::size_t lo = i * gradient_shard_size;
        const std::size_t hi = std::min(batch.size(), lo + gradient_shard_size);
        return batch.subspan(lo, hi - lo);
    };
    const auto n_workers = static_cast<std::size_t>(std::max(1, workers));
    if (n_workers == 1 || n_shards == 1) {
        for (std::size_t i = 0; i < n_shards; ++i) run_shard(net, shard_span(i), shards[i]);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(n_workers, n_shards); ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n_shards; i += n_workers) run_shard(net, shard_span(i), shards[i]);
            });
        }
    }

    grad.zero();
    double total = 0.0;
    for (const auto& s : shards) {
        grad.add_scaled(s.grad, 1.0);
        total += s.loss;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& t : grad.tensors)
        for (auto& v : t.data) v *= inv;
    return total * inv;
}

TrainResult train(std::span<const LabeledSample> train_set, std::span<const LabeledSample> test_set,
                  const Architecture& arch, const TrainConfig& config) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (config.epochs <= 0 || config.batch <= 0 || config.eval_every <= 0)
        throw std::invalid_argument("train: epochs, batch and eval_every must be positive");
    const auto side = static_cast<std::size_t>(arch.input) * static_cast<std::size_t>(arch.input);
    for (const auto& s : train_set)
        if (s.input.size() != side) throw std::invalid_argument("train: sample size does not match architecture");

    TrainResult result{Network::initialized(arch, hash_seed({config.seed, 0x1417})), {}, {}};
    Network& net = result.network;
    Adam adam(net.parameters(), config.adam);
    Parameters grad(arch);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const LabeledSample*> batch;
    batch.reserve(static_cast<std::size_t>(config.batch));

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(hash_seed({config.seed, 0x5eed, static_cast<std::uint64_t>(epoch)}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(config.batch)) {
            const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch));
            batch.clear();
            for (std::size_t i = lo; i < hi; ++i) batch.push_back(&train_set[order[i]]);
            loss_sum += batch_gradient(net, batch, grad, config.workers) * static_cast<double>(batch.size());
            adam.step(net.parameters(), grad);
        }

        EpochLog log{epoch, loss_sum / static_cast<double>(order.size()),
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
        result.epochs.push_back(log);
        const CurvePoint* point = nullptr;
        if (epoch % config.eval_every == 0 && !test_set.empty()) {
            const auto ev = evaluate(net, test_set);
            result.curve.push_back({epoch, ev.mfr_accuracy, ev.osnr_accuracy, ev.phase_accuracy});
            point = &result.curve.back();
        }
        if (config.on_epoch) config.on_epoch(log, point);
    }
    return result;
}

long ConfusionMatrix::row_sum(int truth) const {
    long s = 0;
    for (int p = 0; p < classes; ++p) s += at(truth, p);
    return s;
}

long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

double ConfusionMatrix::accuracy() const {
    const long n = total();
    if (n == 0) return 0.0;
    long diag = 0;
    for (int c = 0; c < classes; ++c) diag += at(c, c);
    return static_cast<double>(diag) / static_cast<double>(n);
}

Evaluation score_predictions(const Architecture& arch, std::span<const LabeledSample> samples,
                             std::vector<Labels> predictions) {
    if (predictions.size() != samples.size()) throw std::invalid_argument("score_predictions: size mismatch");
    Evaluation ev;
    ev.format = ConfusionMatrix(arch.format_classes);
    ev.osnr = ConfusionMatrix(arch.osnr_classes);
    ev.phase = ConfusionMatrix(arch.phase_classes);
    auto in_range = [&](const Labels& l) {
        return l.osnr >= 0 && l.osnr < arch.osnr_classes && l.format >= 0 && l.format < arch.format_classes &&
               l.phase >= 0 && l.phase < arch.phase_classes;
    };
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& t = samples[i].labels;
        const auto& p = predictions[i];
        if (!in_range(t) || !in_range(p)) throw std::invalid_argument("score_predictions: class index out of range");
        ev.format.at(t.format, p.format) += 1;
        ev.osnr.at(t.osnr, p.osnr) += 1;
        ev.phase.at(t.phase, p.phase) += 1;
    }
    ev.mfr_accuracy = ev.format.accuracy();
    ev.osnr_accuracy = ev.osnr.accuracy();
    ev.phase_accuracy = ev.phase.accuracy();
    ev.predictions = std::move(predictions);
    return ev;
}

Evaluation evaluate(const Network& net, std::span<const LabeledSample> samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    std::vector<Labels> predictions;
    predictions.reserve(samples.size());
    ForwardCache cache;
    for (const auto& s : samples) predictions.push_back(net.forward(s.input, cache).argmax());
    return score_predictions(net.architecture(), samples, std::move(predictions));
}

} // namespace uwoc::cnn
