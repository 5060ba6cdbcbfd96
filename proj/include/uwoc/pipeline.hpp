#ifndef UWOC_PIPELINE_HPP
#define UWOC_PIPELINE_HPP

#include "uwoc/channel.hpp"
#include "uwoc/manifest.hpp"
#include "uwoc/mnsm.hpp"
#include "uwoc/raster.hpp"
#include "uwoc/trainer.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace uwoc {

enum class ChannelMode { LabeledNoise, Physical };

std::string to_string(ChannelMode mode);
ChannelMode channel_mode_from_string(const std::string& s);

struct GenerationConfig {
    std::filesystem::path output_dir;
    int resolution = 64;
    std::uint64_t seed = 0;
    double scale = 1.0;                 // fraction of the 30 replicates per (format, OSNR, phase)
    ChannelMode mode = ChannelMode::LabeledNoise;
    int symbols = 1000;
    RenderStyle style;
    PhaseModel phase_model = PhaseModel::Tikhonov;
    LinkBudget budget;                  // physical mode only
    double cn2 = 5e-14;                 // physical mode only
    int workers = 1;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

inline constexpr int full_replicates = 30;

/// Replicates per (format, OSNR, phase) cell for a scale factor in (0, 1].
int replicates_for_scale(double scale);

/// Stable per-image seed derived from the master seed and the label tuple.
std::uint64_t child_seed(std::uint64_t master, int format, int osnr_db, int phase_deg, int replicate);

/// PRBS -> symbols -> channel for one labeled image.
IQFrame synthesize_frame(ModulationFormat format, double osnr_db, double phase_deg, std::uint64_t seed,
                         const GenerationConfig& config);

/// Writes images and manifest.csv under config.output_dir.
DatasetManifest gen_dataset(const GenerationConfig& config);

/// Loads every image of the manifest as a network input.
std::vector<cnn::LabeledSample> load_samples(const DatasetManifest& manifest);
cnn::LabeledSample sample_from_record(const DatasetManifest& manifest, const ManifestRecord& record);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified by the full (format, OSNR, phase) triple; each cell keeps
/// round(n * train_fraction) records for training.
Split stratified_split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

struct TrainCommandConfig {
    std::filesystem::path manifest;
    std::filesystem::path output_dir;
    int epochs = 250;
    int batch = 32;
    int eval_every = 10;
    double learning_rate = 1e-3;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    int workers = 1;
    std::ostream* log = nullptr;
};

struct TrainCommandResult {
    std::filesystem::path weights;
    std::filesystem::path curves;
    std::filesystem::path heldout_manifest;
    std::vector<cnn::CurvePoint> curve;
    std::vector<cnn::EpochLog> epochs;
};

TrainCommandResult train_cmd(const TrainCommandConfig& config);

void write_curves(const std::filesystem::path& path, const std::vector<cnn::CurvePoint>& curve);
std::vector<cnn::CurvePoint> read_curves(const std::filesystem::path& path);

/// Cross-factor error analysis of an evaluation.
struct ErrorBreakdown {
    std::array<long, 5> osnr_errors_by_phase{};      // indexed by true phase class
    std::array<long, 5> samples_by_phase{};
    std::array<long, 16> phase_errors_by_osnr{};     // indexed by true OSNR class
    std::array<long, 16> samples_by_osnr{};
    // OSNR >= 26 dB and phase 45 deg samples whose OSNR was misestimated
    long high_osnr_large_phase_errors = 0;
    long high_osnr_large_phase_underestimates = 0;
    double high_osnr_large_phase_mean_signed_error = 0.0;
};

ErrorBreakdown error_breakdown(std::span<const cnn::LabeledSample> samples, const cnn::Evaluation& ev);

struct EvalCommandResult {
    cnn::Evaluation evaluation;
    ErrorBreakdown breakdown;
};

EvalCommandResult eval_cmd(const std::filesystem::path& weights, const std::filesystem::path& manifest,
                           std::ostream& report);
void write_eval_report(std::ostream& out, const cnn::Evaluation& ev, const ErrorBreakdown& breakdown);

struct AblationConfig {
    std::filesystem::path output_dir;
    std::vector<int> resolutions{16, 28, 32, 64};
    GenerationConfig generation;        // output_dir and resolution are set per run
    TrainCommandConfig training;        // manifest and output_dir are set per run
};

struct AblationRow {
    int resolution = 0;
    cnn::CurvePoint final_point;
};

std::vector<AblationRow> ablate_cmd(const AblationConfig& config);

struct ClusterCommandConfig {
    std::filesystem::path weights;      // unused when ground_truth is set
    std::filesystem::path manifest;
    std::filesystem::path report;
    mnsm::KMeansOptions kmeans;
    bool ground_truth = false;
};

struct ClusterCommandResult {
    mnsm::ClusterModel model;
    std::vector<mnsm::NoisePoint> points;
};

ClusterCommandResult cluster_cmd(const ClusterCommandConfig& config);

/// Jittered copies of every (OSNR, phase) grid cell.
std::vector<mnsm::NoisePoint> label_grid_points(std::uint64_t seed, int per_cell = 10, double jitter_db = 0.1,
                                                double jitter_deg = 0.5);

/// Fits the MNSM model on the label grid itself: each (OSNR, phase) cell
/// contributes `per_cell` points jittered by `jitter` (raw units).
mnsm::ClusterModel cluster_label_grid(const mnsm::KMeansOptions& options, int per_cell = 10, double jitter_db = 0.1,
                                      double jitter_deg = 0.5);

/// OSNR positions (dB, midway between grid values) where the level changes
/// along the OSNR axis at the given phase deviation.
std::vector<double> osnr_transitions(const mnsm::ClusterModel& model, double phase_deg);

struct Inference {
    ModulationFormat format;
    int osnr_db = 0;
    int phase_deg = 0;
    std::size_t level = 0;
    double distance = 0.0;
};

Inference infer_cmd(const std::filesystem::path& weights, const std::filesystem::path& cluster_report,
                    const std::filesystem::path& image);
Inference infer(const cnn::Network& net, const mnsm::ClusterModel& model, const ConstellationImage& image);

} // namespace uwoc

#endif
