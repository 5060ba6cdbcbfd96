// Command-line front end: gen-dataset, train, eval, ablate, cluster, infer.

#include "uwoc/errors.hpp"
#include "uwoc/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum ExitCode { ok = 0, usage_error = 1, io_error = 2, validation_error = 3 };

std::vector<int> parse_resolutions(const std::string& list) {
    std::vector<int> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    using namespace uwoc;
    CLI::App app{"Constellation-diagram analysis for underwater optical links"};
    app.require_subcommand(1);

    // gen-dataset
    GenerationConfig gen;
    std::string gen_mode = "labeled-noise";
    std::string gen_phase_model = "tikhonov";
    auto* gen_cmd = app.add_subcommand("gen-dataset", "Synthesize labeled constellation images");
    gen_cmd->add_option("--out", gen.output_dir, "Output directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "Master seed")->required();
    gen_cmd->add_option("--resolution", gen.resolution, "Image size (16, 28, 32, 64)")->capture_default_str();
    gen_cmd->add_option("--scale", gen.scale, "Fraction of the full 9600-image dataset, in (0, 1]")->capture_default_str();
    gen_cmd->add_option("--mode", gen_mode, "labeled-noise | physical")->capture_default_str();
    gen_cmd->add_option("--phase-model", gen_phase_model, "tikhonov | wrapped-gaussian")->capture_default_str();
    gen_cmd->add_option("--symbols", gen.symbols, "Symbols per frame")->capture_default_str();
    gen_cmd->add_option("--extent", gen.style.extent, "Plot half-width")->capture_default_str();
    gen_cmd->add_option("--marker-intensity", gen.style.marker_intensity, "Gray level added per symbol")
        ->capture_default_str();
    gen_cmd->add_option("--workers", gen.workers, "Generation threads")->capture_default_str();

    // train
    TrainCommandConfig train;
    auto* train_sub = app.add_subcommand("train", "Train the network on a dataset manifest");
    train_sub->add_option("--manifest", train.manifest, "Dataset manifest.csv")->required();
    train_sub->add_option("--out", train.output_dir, "Run directory")->required();
    train_sub->add_option("--seed", train.seed, "Split/init/shuffle seed")->required();
    train_sub->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();
    train_sub->add_option("--batch", train.batch, "Mini-batch size")->capture_default_str();
    train_sub->add_option("--eval-every", train.eval_every, "Held-out evaluation interval in epochs")->capture_default_str();
    train_sub->add_option("--lr", train.learning_rate, "Adam learning rate")->capture_default_str();
    train_sub->add_option("--split", train.train_fraction, "Training fraction per label cell")->capture_default_str();
    train_sub->add_option("--workers", train.workers, "Gradient threads (results do not depend on it)")->capture_default_str();

    // eval
    std::filesystem::path eval_weights, eval_manifest, eval_report;
    auto* eval_sub = app.add_subcommand("eval", "Accuracy, confusion matrices and error breakdowns");
    eval_sub->add_option("--weights", eval_weights, "Weight file from `train`")->required();
    eval_sub->add_option("--manifest", eval_manifest, "Usually the run's heldout.csv")->required();
    eval_sub->add_option("--report", eval_report, "Write the report here instead of stdout");

    // ablate
    AblationConfig ablate;
    std::string ablate_res = "16,28,32,64";
    auto* ablate_sub = app.add_subcommand("ablate", "Train at several input resolutions on the same frames");
    ablate_sub->add_option("--out", ablate.output_dir, "Output directory, one res<N> subdirectory per resolution")->required();
    ablate_sub->add_option("--seed", ablate.generation.seed, "Seed for generation and training")->required();
    ablate_sub->add_option("--resolutions", ablate_res, "Comma-separated input sizes")->capture_default_str();
    ablate_sub->add_option("--scale", ablate.generation.scale, "Dataset fraction, as for gen-dataset")->capture_default_str();
    ablate_sub->add_option("--epochs", ablate.training.epochs, "Training epochs per resolution")->capture_default_str();
    ablate_sub->add_option("--batch", ablate.training.batch, "Mini-batch size")->capture_default_str();
    ablate_sub->add_option("--eval-every", ablate.training.eval_every, "Held-out evaluation interval in epochs")->capture_default_str();
    ablate_sub->add_option("--lr", ablate.training.learning_rate, "Adam learning rate")->capture_default_str();
    ablate_sub->add_option("--workers", ablate.training.workers, "Gradient threads")->capture_default_str();

    // cluster
    ClusterCommandConfig cluster;
    int cluster_k = 8;
    auto* cluster_sub = app.add_subcommand("cluster", "Fit MNSM quality levels by k-means");
    cluster_sub->add_option("--weights", cluster.weights, "Weight file; predictions become the clustered points");
    cluster_sub->add_option("--manifest", cluster.manifest, "Images to classify, or labels with --ground-truth")->required();
    cluster_sub->add_option("--report", cluster.report, "Output cluster report")->required();
    cluster_sub->add_option("--k", cluster_k, "Number of quality levels")->capture_default_str();
    cluster_sub->add_option("--seed", cluster.kmeans.seed, "Initialization seed")->capture_default_str();
    cluster_sub->add_option("--restarts", cluster.kmeans.restarts, "Lloyd restarts; lowest SSE wins")->capture_default_str();
    cluster_sub->add_flag("--ground-truth", cluster.ground_truth, "Cluster the manifest labels instead of predictions");

    // infer
    std::filesystem::path infer_weights, infer_model, infer_image;
    auto* infer_sub = app.add_subcommand("infer", "Classify one constellation image");
    infer_sub->add_option("--weights", infer_weights, "Weight file from `train`")->required();
    infer_sub->add_option("--mnsm", infer_model, "Cluster report from `cluster`")->required();
    infer_sub->add_option("--image", infer_image, "PGM image at the network resolution")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage_error;
    }

    try {
        if (*gen_cmd) {
            gen.mode = channel_mode_from_string(gen_mode);
            gen.phase_model = gen_phase_model == "tikhonov" ? PhaseModel::Tikhonov
                            : gen_phase_model == "wrapped-gaussian"
                                ? PhaseModel::WrappedGaussian
                                : throw std::invalid_argument("unknown phase model: " + gen_phase_model);
            gen.progress = [](std::size_t done, std::size_t total) {
                if (done % 500 == 0 || done == total) std::cerr << "generated " << done << "/" << total << "\n";
            };
            const auto m = gen_dataset(gen);
            std::cout << "wrote " << m.records.size() << " images and " << (gen.output_dir / "manifest.csv").string()
                      << "\n";
        } else if (*train_sub) {
            train.log = &std::cerr;
            const auto r = train_cmd(train);
            std::cout << "weights " << r.weights.string() << "\ncurves " << r.curves.string() << "\nheldout "
                      << r.heldout_manifest.string() << "\n";
        } else if (*eval_sub) {
            if (eval_report.empty()) {
                eval_cmd(eval_weights, eval_manifest, std::cout);
            } else {
                std::ofstream out(eval_report);
                if (!out) throw IoError("cannot open for writing: " + eval_report.string());
                eval_cmd(eval_weights, eval_manifest, out);
            }
        } else if (*ablate_sub) {
            ablate.resolutions = parse_resolutions(ablate_res);
            ablate.training.seed = ablate.generation.seed;
            ablate.training.log = &std::cerr;
            const auto rows = ablate_cmd(ablate);
            std::cout << "resolution,mfr_acc,osnr_acc,phase_acc\n";
            for (const auto& r : rows)
                std::cout << r.resolution << ',' << r.final_point.mfr_accuracy << ',' << r.final_point.osnr_accuracy
                          << ',' << r.final_point.phase_accuracy << '\n';
        } else if (*cluster_sub) {
            if (!cluster.ground_truth && cluster.weights.empty())
                throw std::invalid_argument("--weights is required unless --ground-truth is given");
            cluster.kmeans.k = static_cast<std::size_t>(cluster_k);
            const auto r = cluster_cmd(cluster);
            std::cout << "k " << r.model.k << " sse " << r.model.sse << " report " << cluster.report.string() << "\n";
        } else if (*infer_sub) {
            const auto r = infer_cmd(infer_weights, infer_model, infer_image);
            std::cout << "format " << r.format.name() << "\nosnr_db " << r.osnr_db << "\nphase_std_deg " << r.phase_deg
                      << "\nmnsm_level " << r.level << "\nmnsm_distance " << r.distance << "\n";
        }
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return io_error;
    } catch (const ParseError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return validation_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return validation_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return validation_error;
    }
    return ok;
}
