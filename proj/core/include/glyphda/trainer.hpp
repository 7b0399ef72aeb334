#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "glyphda/archive.hpp"
#include "glyphda/config.hpp"
#include "glyphda/data.hpp"
#include "glyphda/losses.hpp"
#include "glyphda/networks.hpp"

namespace glyphda {

// eta0 * (1 - T / T_max)^exponent. Throws std::out_of_range outside [0, T_max].
double lr_at(const ScheduleSpec& spec, std::int64_t iteration);

// Optimizer group that owns each network.
OptimizerGroup group_of(NetworkId id);

enum class Phase { discriminators = 1, generator = 2, encoders = 3, classifier = 4 };

/// Owns the networks, one optimizer per network and the iteration counter,
/// and runs the four-phase update.
class Trainer {
public:
    Trainer(ExperimentConfig config, Networks networks);

    // One iteration: discriminators, generator, encoders, classifier, in that
    // order. Throws NumericError naming the first non-finite term.
    LossReport step(const ImageBatch& source, const ImageBatch& target);

    std::int64_t iteration() const { return iteration_; }
    const ExperimentConfig& config() const { return config_; }
    Networks& networks() { return nets_; }
    double learning_rate(OptimizerGroup group) const;

    // Called after each phase; tests use it to watch which parameters moved.
    void set_phase_observer(std::function<void(Phase)> observer) { observer_ = std::move(observer); }

    // Parameters, buffers, optimizer moments, iteration and the global torch
    // random state, as archive arrays and metadata.
    void save(Archive& archive) const;
    // Throws CheckpointError naming the first missing or mis-shaped array.
    void load(const Archive& archive);

private:
    torch::optim::Optimizer& optimizer(NetworkId id) { return *optimizers_.at(id); }
    void apply_rates();
    void finish_phase(Phase phase);

    ExperimentConfig config_;
    Networks nets_;
    std::map<NetworkId, std::unique_ptr<torch::optim::Optimizer>> optimizers_;
    std::int64_t iteration_ = 0;
    std::function<void(Phase)> observer_;
};

struct CheckpointInfo {
    std::int64_t iteration = 0;
    std::string config_digest;
    std::string stream_state;
    double best_target_accuracy = -1;
    std::optional<std::string> warning;  // set on config digest mismatch
};

void checkpoint_save(const std::filesystem::path& path, const Trainer& trainer, const std::string& stream_state = {},
                     double best_target_accuracy = -1);
CheckpointInfo checkpoint_load(const std::filesystem::path& path, Trainer& trainer);

// Loads only the network parameters and buffers (for eval/transform).
Archive read_checkpoint(const std::filesystem::path& path);
void load_network_state(const Archive& archive, Networks& nets);

/// Column order of the metrics CSV.
const std::vector<std::string>& metrics_columns();

struct FitOptions {
    std::filesystem::path resume_from;  // empty: fresh start
    bool quiet = true;                  // progress lines to stderr when false
};

struct FitResult {
    std::int64_t iterations = 0;
    double final_target_accuracy = -1;  // -1 when no target test set
    double final_source_accuracy = -1;
    double best_target_accuracy = -1;
    std::filesystem::path output_dir;
    std::filesystem::path last_checkpoint;
    std::filesystem::path metrics_csv;
    std::vector<std::filesystem::path> artifacts;
};

/// Runs T_max iterations writing metrics.csv, periodic checkpoints
/// (checkpoint_<T>.gdar, last.gdar, best.gdar) and transform grids
/// (grid_<T>.png) under the resolved output directory.
FitResult fit(const ExperimentConfig& config, const FitOptions& options = {});

// Rows of [input | reconstruction | cross-domain transform], source rows
// first, as an 8-bit RGB image [H, W, 3].
torch::Tensor transform_grid(Networks& nets, const torch::Tensor& x_s, const torch::Tensor& x_t);

} // namespace glyphda
