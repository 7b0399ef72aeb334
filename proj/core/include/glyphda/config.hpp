#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glyphda/degradation_spec.hpp"

namespace glyphda {

/// Trade-off coefficients of the weighted total objective.
struct LossWeights {
    double alpha1 = 1.0;   // feature-level adversarial (encoder side)
    double alpha2 = 0.01;  // image-level adversarial (generator side)
    double alpha3 = 0.05;  // perceptual
    double alpha4 = 0.5;   // reconstruction

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

struct TapWeight {
    std::string name;
    double weight = 1.0;
    bool operator==(const TapWeight&) const = default;
};

/// Perceptual tap layers and their per-layer weights. Texture taps compare
/// per-channel spatial means, structure and reconstruction taps compare raw
/// activations.
struct PerceptualSpec {
    std::vector<TapWeight> texture_taps;
    std::vector<TapWeight> structure_taps;
    std::vector<TapWeight> reconstruction_taps;
    std::string weights_file;        // empty: fixed-random fallback
    double width_multiplier = 1.0;   // channel scale of the extractor
    std::uint64_t seed = 1234;       // seed of the fixed-random fallback

    static PerceptualSpec defaults();
    void validate() const;
    bool operator==(const PerceptualSpec&) const = default;
};

// Names of the five taps the perceptual extractor exposes, shallow to deep.
const std::vector<std::string>& perceptual_tap_names();

/// Polynomial learning-rate decay eta0 * (1 - T / T_max)^exponent.
struct ScheduleSpec {
    double base_rate = 1e-3;
    std::int64_t total_iterations = 1;
    double exponent = 0.9;

    void validate() const;
    bool operator==(const ScheduleSpec&) const = default;
};

enum class OptimizerGroup { backbone, discriminators, generator };
enum class OptimizerKind { momentum_sgd, adam };

std::string_view to_string(OptimizerGroup group);
std::string_view to_string(OptimizerKind kind);

// momentum is the SGD momentum or the Adam first-moment decay.
struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::adam;
    double rate = 1e-3;
    double momentum = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    double exponent = 0.9;

    void validate(std::string_view where) const;
    bool operator==(const OptimizerSpec&) const = default;
};

struct AblationFlags {
    bool use_advF = true;
    bool use_advI = true;
    bool use_rec = true;
    bool use_per = true;
    bool use_cls_st = true;

    // True when the generator or texture encoders receive any gradient.
    bool any_generator_term() const { return use_advI || use_rec || use_per || use_cls_st; }
    bool operator==(const AblationFlags&) const = default;
};

const std::vector<std::string>& ablation_preset_names();

/// Flags of a named ablation preset: source-only, model-A .. model-E, full.
/// Source classification is always on. Throws ConfigError on unknown names.
AblationFlags preset_ablation(std::string_view name);

enum class BackboneKind { residual18, small_conv };
std::string_view to_string(BackboneKind kind);

struct ModelSpec {
    BackboneKind backbone = BackboneKind::residual18;
    int image_side = 224;
    int num_classes = 241;
    int structure_width = 512;        // pooled width; fixed at 512 for residual18
    double width_multiplier = 1.0;    // scales G, D_I, D_F and texture encoders
    std::string pretrained_backbone;  // optional weights container for E_g

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

enum class DatasetKind { none, idx, folder, synth };
enum class SynthRole { clean, degraded };

/// One corpus: IDX file pair, class-per-directory tree, or an in-memory
/// synthetic glyph corpus (clean or degraded half).
struct DatasetSpec {
    DatasetKind kind = DatasetKind::none;
    std::filesystem::path images;  // idx
    std::filesystem::path labels;  // idx
    std::filesystem::path root;    // folder
    int classes = 10;              // synth
    int per_class = 100;           // synth
    std::uint64_t seed = 0;        // synth
    SynthRole role = SynthRole::clean;
    DegradationSpec degradation;   // synth
    int limit = 0;                 // keep only the first n samples (0 = all)

    bool present() const { return kind != DatasetKind::none; }
    bool operator==(const DatasetSpec&) const = default;
};

struct DataSpec {
    DatasetSpec source;       // labeled training corpus
    DatasetSpec target;       // training corpus whose labels are withheld
    DatasetSpec source_test;  // optional labeled evaluation corpora
    DatasetSpec target_test;
    int batch_size = 16;      // per domain
    bool augment_crop = true;
    int crop_padding = 4;
    std::optional<bool> augment_flip;  // unset: on for IDX digits, off otherwise

    bool flip_enabled() const { return augment_flip.value_or(source.kind == DatasetKind::idx); }
    bool operator==(const DataSpec&) const = default;
};

struct TrainerSpec {
    std::int64_t t_max = 150000;
    std::uint64_t seed = 0;
    std::int64_t log_every = 10;
    std::int64_t eval_every = 500;
    std::int64_t checkpoint_every = 5000;
    int grid_rows = 8;

    bool operator==(const TrainerSpec&) const = default;
};

/// Complete experiment description. Immutable once loaded.
struct ExperimentConfig {
    LossWeights loss_weights;
    PerceptualSpec perceptual = PerceptualSpec::defaults();
    ModelSpec model;
    DataSpec data;
    TrainerSpec trainer;
    OptimizerSpec backbone_optimizer{OptimizerKind::momentum_sgd, 2.5e-4, 0.9, 0.999, 5e-4, 0.9};
    OptimizerSpec discriminator_optimizer{OptimizerKind::adam, 1e-4, 0.99, 0.999, 0.0, 0.9};
    OptimizerSpec generator_optimizer{OptimizerKind::adam, 1e-3, 0.99, 0.999, 0.0, 0.9};
    AblationFlags ablation;
    std::filesystem::path output_dir = "runs/default";

    const OptimizerSpec& optimizer(OptimizerGroup group) const;
    ScheduleSpec schedule(OptimizerGroup group) const;
    std::map<OptimizerGroup, ScheduleSpec> schedules() const;

    // Throws ConfigError naming the first violated field. Dataset paths are
    // only checked for existence when check_paths is set.
    void validate(bool check_paths) const;
    bool operator==(const ExperimentConfig&) const = default;
};

struct LoadOptions {
    std::vector<std::string> overrides;  // "dotted.key=value"
    bool check_paths = true;
};

/// Parse a JSON configuration file, apply overrides, fill defaults, validate.
/// Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path, const LoadOptions& options = {});

/// Same as load_config but from in-memory JSON text.
ExperimentConfig parse_config(std::string_view json_text, const LoadOptions& options = {});

/// Canonical JSON text of a config; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Hex SHA-256 of the canonical serialization.
std::string config_digest(const ExperimentConfig& config);

/// Degradation spec from a JSON object with the keys of DegradationSpec;
/// absent keys keep the identity values. Validated.
DegradationSpec parse_degradation(std::string_view json_text);
std::string serialize_degradation(const DegradationSpec& spec);

// Relative output directories resolve under $GLYPHDA_OUTPUT_ROOT when set.
inline constexpr const char* kOutputRootEnv = "GLYPHDA_OUTPUT_ROOT";
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

} // namespace glyphda
