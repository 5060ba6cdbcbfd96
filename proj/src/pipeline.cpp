#include "uwoc/pipeline.hpp"

#include "uwoc/errors.hpp"
#include "uwoc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace uwoc {

namespace fs = std::filesystem;

namespace {

std::string phase_model_name(PhaseModel m) {
    return m == PhaseModel::Tikhonov ? "tikhonov" : "wrapped-gaussian";
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

cnn::Labels labels_of(const ManifestRecord& r) {
    return {LabelGrid::osnr_index(r.osnr_db), r.format, LabelGrid::phase_index(r.phase_std_deg)};
}

std::string image_name(ModulationFormat f, int osnr, int phase, int replicate) {
    std::ostringstream s;
    s << "img/" << f.name() << "/osnr" << osnr << "_phase" << std::setw(2) << std::setfill('0') << phase << "_r"
      << std::setw(2) << replicate << ".pgm";
    return s.str();
}

} // namespace

std::string to_string(ChannelMode mode) {
    return mode == ChannelMode::LabeledNoise ? "labeled-noise" : "physical";
}

ChannelMode channel_mode_from_string(const std::string& s) {
    if (s == "labeled-noise") return ChannelMode::LabeledNoise;
    if (s == "physical") return ChannelMode::Physical;
    throw std::invalid_argument("unknown channel mode: " + s);
}

int replicates_for_scale(double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("scale factor must be in (0, 1]");
    return std::max(1, static_cast<int>(std::lround(full_replicates * scale)));
}

std::uint64_t child_seed(std::uint64_t master, int format, int osnr_db, int phase_deg, int replicate) {
    return hash_seed({master, static_cast<std::uint64_t>(format), static_cast<std::uint64_t>(osnr_db),
                      static_cast<std::uint64_t>(phase_deg), static_cast<std::uint64_t>(replicate)});
}

IQFrame synthesize_frame(ModulationFormat format, double osnr_db, double phase_deg, std::uint64_t seed,
                         const GenerationConfig& config) {
    if (config.symbols <= 0) throw std::invalid_argument("symbol count must be positive");
    const auto bits = generate_prbs(seed, static_cast<std::size_t>(config.symbols) *
                                              static_cast<std::size_t>(format.bits_per_symbol()));
    const IQFrame ideal = map_symbols(bits, format);
    Rng rng(hash_seed({seed, 0xC4A77E1ULL}));
    NoiseSpec noise{osnr_db, phase_deg, config.phase_model};
    if (config.mode == ChannelMode::LabeledNoise) return apply_channel(ideal, std::nullopt, noise, rng);

    // Physical: place the receiver where the link budget yields the labeled
    // OSNR, then add gamma-gamma fading for that path length.
    LinkBudget budget = config.budget;
    budget.distance = distance_for_osnr(budget, osnr_db);
    const auto turbulence = TurbulenceParams::from_path(config.cn2, 450e-9, budget.distance);
    noise.osnr_db = link_budget_osnr(budget);
    return apply_channel(ideal, turbulence, noise, rng);
}

DatasetManifest gen_dataset(const GenerationConfig& config) {
    if (!is_training_resolution(config.resolution))
        throw std::invalid_argument("resolution must be one of 16, 28, 32, 64");
    const int replicates = replicates_for_scale(config.scale);
    ensure_directory(config.output_dir);

    DatasetManifest m;
    m.directory = config.output_dir;
    m.config = {{"resolution", std::to_string(config.resolution)},
                {"seed", std::to_string(config.seed)},
                {"scale", [&] { std::ostringstream s; s << config.scale; return s.str(); }()},
                {"replicates", std::to_string(replicates)},
                {"mode", to_string(config.mode)},
                {"symbols", std::to_string(config.symbols)},
                {"extent", [&] { std::ostringstream s; s << config.style.extent; return s.str(); }()},
                {"marker_radius", std::to_string(config.style.marker_radius)},
                {"marker_intensity", std::to_string(config.style.marker_intensity)},
                {"phase_model", phase_model_name(config.phase_model)}};

    for (auto kind : all_modulations) {
        const ModulationFormat f{kind};
        ensure_directory(config.output_dir / "img" / f.name());
        for (int oi = 0; oi < LabelGrid::osnr_classes; ++oi) {
            for (int pi = 0; pi < static_cast<int>(LabelGrid::phase_values_deg.size()); ++pi) {
                for (int rep = 0; rep < replicates; ++rep) {
                    const int osnr = LabelGrid::osnr_db(oi);
                    const int phase = LabelGrid::phase_deg(pi);
                    m.records.push_back({image_name(f, osnr, phase, rep), f.index(), static_cast<double>(osnr),
                                         static_cast<double>(phase), child_seed(config.seed, f.index(), osnr, phase, rep)});
                }
            }
        }
    }

    const std::size_t total = m.records.size();
    std::mutex progress_mutex;
    std::size_t done = 0;
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < total; i += stride) {
            const auto& r = m.records[i];
            const auto frame = synthesize_frame(ModulationFormat::from_index(r.format), r.osnr_db, r.phase_std_deg,
                                                r.seed, config);
            write_pgm(m.image_path(r), rasterize(frame, config.resolution, config.style));
            if (config.progress) {
                std::lock_guard lock(progress_mutex);
                config.progress(++done, total);
            }
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, config.workers));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    }
    write_manifest(config.output_dir / "manifest.csv", m);
    return m;
}

cnn::LabeledSample sample_from_record(const DatasetManifest& manifest, const ManifestRecord& record) {
    const auto img = read_pgm(manifest.image_path(record));
    if (img.resolution != manifest.resolution())
        throw ParseError("image " + record.path + " does not match the manifest resolution");
    return {normalize_pixels(img), labels_of(record), record.seed};
}

std::vector<cnn::LabeledSample> load_samples(const DatasetManifest& manifest) {
    std::vector<cnn::LabeledSample> samples;
    samples.reserve(manifest.records.size());
    for (const auto& r : manifest.records) samples.push_back(sample_from_record(manifest, r));
    return samples;
}

Split stratified_split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must be in (0, 1)");
    std::map<std::array<int, 3>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        cells[{r.format, static_cast<int>(std::lround(r.osnr_db)), static_cast<int>(std::lround(r.phase_std_deg))}]
            .push_back(i);
    }
    Split split;
    for (auto& [key, members] : cells) {
        Rng rng(hash_seed({seed, 0x5B117ULL, static_cast<std::uint64_t>(key[0]), static_cast<std::uint64_t>(key[1]),
                           static_cast<std::uint64_t>(key[2])}));
        for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
        const auto n_train = static_cast<std::size_t>(std::lround(static_cast<double>(members.size()) * train_fraction));
        split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void write_curves(const fs::path& path, const std::vector<cnn::CurvePoint>& curve) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "epoch,mfr_acc,osnr_acc,phase_acc\n" << std::fixed << std::setprecision(6);
    for (const auto& p : curve)
        out << p.epoch << ',' << p.mfr_accuracy << ',' << p.osnr_accuracy << ',' << p.phase_accuracy << '\n';
}

std::vector<cnn::CurvePoint> read_curves(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open curve file: " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<cnn::CurvePoint> curve;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        cnn::CurvePoint p;
        if (!(ls >> p.epoch >> p.mfr_accuracy >> p.osnr_accuracy >> p.phase_accuracy))
            throw ParseError("malformed curve row in " + path.string());
        curve.push_back(p);
    }
    return curve;
}

TrainCommandResult train_cmd(const TrainCommandConfig& config) {
    const auto manifest = read_manifest(config.manifest);
    const int res = manifest.resolution();
    if (!is_training_resolution(res)) throw std::invalid_argument("manifest resolution is not a network input size");
    if (manifest.records.empty()) throw std::invalid_argument("manifest has no records");
    ensure_directory(config.output_dir);

    const auto split = stratified_split(manifest, config.train_fraction, config.seed);
    const auto all = load_samples(manifest);
    std::vector<cnn::LabeledSample> train_set, test_set;
    for (auto i : split.train) train_set.push_back(all[i]);
    for (auto i : split.test) test_set.push_back(all[i]);

    cnn::TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch = config.batch;
    tc.eval_every = config.eval_every;
    tc.seed = config.seed;
    tc.adam.learning_rate = config.learning_rate;
    tc.workers = config.workers;
    if (config.log != nullptr) {
        tc.on_epoch = [&](const cnn::EpochLog& e, const cnn::CurvePoint* p) {
            auto& log = *config.log;
            log << "epoch " << e.epoch << " loss " << std::fixed << std::setprecision(4) << e.mean_loss << " time "
                << std::setprecision(2) << e.seconds << "s";
            if (p != nullptr)
                log << std::setprecision(4) << " mfr " << p->mfr_accuracy << " osnr " << p->osnr_accuracy << " phase "
                    << p->phase_accuracy;
            log << std::defaultfloat << std::endl;
        };
    }
    const auto arch = cnn::Architecture::for_resolution(res);
    auto result = cnn::train(train_set, test_set, arch, tc);

    TrainCommandResult out;
    out.weights = config.output_dir / "weights.bin";
    out.curves = config.output_dir / "curves.csv";
    out.heldout_manifest = config.output_dir / "heldout.csv";
    cnn::save_weights(out.weights, result.network);
    write_curves(out.curves, result.curve);
    write_manifest(out.heldout_manifest, subset_manifest(manifest, split.test, config.output_dir));
    write_manifest(config.output_dir / "train.csv", subset_manifest(manifest, split.train, config.output_dir));
    {
        std::ofstream log(config.output_dir / "epochs.csv");
        log << "epoch,mean_loss,seconds\n";
        for (const auto& e : result.epochs) log << e.epoch << ',' << e.mean_loss << ',' << e.seconds << '\n';
    }
    out.curve = std::move(result.curve);
    out.epochs = std::move(result.epochs);
    return out;
}

ErrorBreakdown error_breakdown(std::span<const cnn::LabeledSample> samples, const cnn::Evaluation& ev) {
    ErrorBreakdown b;
    double signed_sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& t = samples[i].labels;
        const auto& p = ev.predictions.at(i);
        const auto pi = static_cast<std::size_t>(t.phase);
        const auto oi = static_cast<std::size_t>(t.osnr);
        ++b.samples_by_phase.at(pi);
        ++b.samples_by_osnr.at(oi);
        if (p.osnr != t.osnr) ++b.osnr_errors_by_phase[pi];
        if (p.phase != t.phase) ++b.phase_errors_by_osnr[oi];
        if (LabelGrid::osnr_db(t.osnr) >= 26 && LabelGrid::phase_deg(t.phase) == 45 && p.osnr != t.osnr) {
            ++b.high_osnr_large_phase_errors;
            if (p.osnr < t.osnr) ++b.high_osnr_large_phase_underestimates;
            signed_sum += p.osnr - t.osnr;
        }
    }
    if (b.high_osnr_large_phase_errors > 0)
        b.high_osnr_large_phase_mean_signed_error = signed_sum / static_cast<double>(b.high_osnr_large_phase_errors);
    return b;
}

void write_eval_report(std::ostream& out, const cnn::Evaluation& ev, const ErrorBreakdown& b) {
    out << "# uwoc evaluation report\n";
    out << "samples " << ev.format.total() << '\n';
    out << std::fixed << std::setprecision(6);
    out << "accuracy mfr " << ev.mfr_accuracy << " osnr " << ev.osnr_accuracy << " phase " << ev.phase_accuracy << '\n';
    auto matrix = [&](const char* name, const cnn::ConfusionMatrix& cm, auto label) {
        out << "confusion " << name << " rows=true cols=predicted\n";
        out << std::setw(8) << "";
        for (int c = 0; c < cm.classes; ++c) out << std::setw(6) << label(c);
        out << '\n';
        for (int t = 0; t < cm.classes; ++t) {
            out << std::setw(8) << label(t);
            for (int c = 0; c < cm.classes; ++c) out << std::setw(6) << cm.at(t, c);
            out << '\n';
        }
    };
    matrix("format", ev.format, [](int c) { return ModulationFormat::from_index(c).name(); });
    matrix("osnr_db", ev.osnr, [](int c) { return std::to_string(LabelGrid::osnr_db(c)); });
    matrix("phase_deg", ev.phase, [](int c) { return std::to_string(LabelGrid::phase_deg(c)); });
    out << "osnr_errors_by_true_phase phase_deg errors samples\n";
    for (std::size_t i = 0; i < b.osnr_errors_by_phase.size(); ++i)
        out << "  " << LabelGrid::phase_values_deg[i] << ' ' << b.osnr_errors_by_phase[i] << ' '
            << b.samples_by_phase[i] << '\n';
    out << "phase_errors_by_true_osnr osnr_db errors samples\n";
    for (std::size_t i = 0; i < b.phase_errors_by_osnr.size(); ++i)
        out << "  " << LabelGrid::osnr_db(static_cast<int>(i)) << ' ' << b.phase_errors_by_osnr[i] << ' '
            << b.samples_by_osnr[i] << '\n';
    out << "osnr_signed_error high_osnr_ge26_phase45 misestimated " << b.high_osnr_large_phase_errors
        << " underestimated " << b.high_osnr_large_phase_underestimates << " mean_signed_error_db "
        << b.high_osnr_large_phase_mean_signed_error << '\n';
    out << std::defaultfloat;
}

EvalCommandResult eval_cmd(const fs::path& weights, const fs::path& manifest_path, std::ostream& report) {
    const auto net = cnn::load_weights(weights);
    const auto manifest = read_manifest(manifest_path);
    if (manifest.resolution() != net.architecture().input)
        throw std::invalid_argument("weight file resolution does not match the manifest");
    const auto samples = load_samples(manifest);
    EvalCommandResult r{cnn::evaluate(net, samples), {}};
    r.breakdown = error_breakdown(samples, r.evaluation);
    write_eval_report(report, r.evaluation, r.breakdown);
    return r;
}

std::vector<AblationRow> ablate_cmd(const AblationConfig& config) {
    if (config.resolutions.empty()) throw std::invalid_argument("ablation needs at least one resolution");
    ensure_directory(config.output_dir);
    std::vector<AblationRow> rows;
    for (int res : config.resolutions) {
        const fs::path base = config.output_dir / ("res" + std::to_string(res));
        GenerationConfig gen = config.generation;
        gen.resolution = res;
        gen.output_dir = base / "data";
        if (!fs::exists(gen.output_dir / "manifest.csv")) gen_dataset(gen);

        TrainCommandConfig tc = config.training;
        tc.manifest = gen.output_dir / "manifest.csv";
        tc.output_dir = base / "run";
        if (tc.log != nullptr) *tc.log << "== resolution " << res << " ==" << std::endl;
        const auto result = train_cmd(tc);
        if (result.curve.empty()) throw std::invalid_argument("ablation run produced no evaluation points");
        rows.push_back({res, result.curve.back()});
    }
    std::ofstream summary(config.output_dir / "summary.csv");
    if (!summary) throw IoError("cannot write ablation summary");
    summary << "resolution,mfr_acc,osnr_acc,phase_acc\n" << std::fixed << std::setprecision(6);
    for (const auto& r : rows)
        summary << r.resolution << ',' << r.final_point.mfr_accuracy << ',' << r.final_point.osnr_accuracy << ','
                << r.final_point.phase_accuracy << '\n';
    return rows;
}

ClusterCommandResult cluster_cmd(const ClusterCommandConfig& config) {
    const auto manifest = read_manifest(config.manifest);
    ClusterCommandResult r;
    r.points.reserve(manifest.records.size());
    if (config.ground_truth) {
        for (const auto& rec : manifest.records) r.points.push_back({rec.osnr_db, rec.phase_std_deg});
    } else {
        const auto net = cnn::load_weights(config.weights);
        if (manifest.resolution() != net.architecture().input)
            throw std::invalid_argument("weight file resolution does not match the manifest");
        cnn::ForwardCache cache;
        for (const auto& rec : manifest.records) {
            const auto sample = sample_from_record(manifest, rec);
            const auto pred = net.forward(sample.input, cache).argmax();
            r.points.push_back({static_cast<double>(LabelGrid::osnr_db(pred.osnr)),
                                static_cast<double>(LabelGrid::phase_deg(pred.phase))});
        }
    }
    r.model = mnsm::kmeans_fit(r.points, config.kmeans);
    std::vector<std::string> labels;
    labels.reserve(manifest.records.size());
    for (const auto& rec : manifest.records) labels.push_back(rec.path);
    std::ofstream out(config.report);
    if (!out) throw IoError("cannot open for writing: " + config.report.string());
    mnsm::write_report(out, r.model, labels,
                       std::string("source ") + (config.ground_truth ? "ground-truth" : "predicted") + " seed " +
                           std::to_string(config.kmeans.seed));
    return r;
}

std::vector<mnsm::NoisePoint> label_grid_points(std::uint64_t seed, int per_cell, double jitter_db, double jitter_deg) {
    if (per_cell <= 0) throw std::invalid_argument("per_cell must be positive");
    Rng rng(hash_seed({seed, 0x9121DULL}));
    std::vector<mnsm::NoisePoint> points;
    for (int oi = 0; oi < LabelGrid::osnr_classes; ++oi)
        for (int phase : LabelGrid::phase_values_deg)
            for (int j = 0; j < per_cell; ++j)
                points.push_back({LabelGrid::osnr_db(oi) + jitter_db * rng.normal(), phase + jitter_deg * rng.normal()});
    return points;
}

mnsm::ClusterModel cluster_label_grid(const mnsm::KMeansOptions& options, int per_cell, double jitter_db,
                                      double jitter_deg) {
    return mnsm::kmeans_fit(label_grid_points(options.seed, per_cell, jitter_db, jitter_deg), options);
}

std::vector<double> osnr_transitions(const mnsm::ClusterModel& model, double phase_deg) {
    std::vector<double> out;
    std::size_t prev = mnsm::classify_quality(LabelGrid::osnr_db(0), phase_deg, model).level;
    for (int oi = 1; oi < LabelGrid::osnr_classes; ++oi) {
        const auto level = mnsm::classify_quality(LabelGrid::osnr_db(oi), phase_deg, model).level;
        if (level != prev) out.push_back(LabelGrid::osnr_db(oi) - 0.5);
        prev = level;
    }
    return out;
}

Inference infer(const cnn::Network& net, const mnsm::ClusterModel& model, const ConstellationImage& image) {
    if (image.resolution != net.architecture().input)
        throw std::invalid_argument("image resolution " + std::to_string(image.resolution) +
                                    " does not match the network input " + std::to_string(net.architecture().input));
    const auto pred = net.forward(normalize_pixels(image)).argmax();
    Inference r;
    r.format = ModulationFormat::from_index(pred.format);
    r.osnr_db = LabelGrid::osnr_db(pred.osnr);
    r.phase_deg = LabelGrid::phase_deg(pred.phase);
    const auto q = mnsm::classify_quality(r.osnr_db, r.phase_deg, model);
    r.level = q.level;
    r.distance = q.distance;
    return r;
}

Inference infer_cmd(const fs::path& weights, const fs::path& cluster_report, const fs::path& image) {
    const auto net = cnn::load_weights(weights);
    std::ifstream in(cluster_report);
    if (!in) throw IoError("cannot open cluster report: " + cluster_report.string());
    const auto model = mnsm::read_report(in);
    return infer(net, model, read_pgm(image));
}

} // namespace uwoc
