#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "glyphda/config.hpp"
#include "glyphda/degradation_spec.hpp"

namespace glyphda {

enum class DomainTag { source, target };

std::string_view to_string(DomainTag domain);

// One-hot 2-vector: source = (1, 0), target = (0, 1).
torch::Tensor domain_one_hot(DomainTag domain, torch::TensorOptions options = {});

// Background level of every corpus: dark ground, bright strokes.
inline constexpr float kBackground = -1.0f;

/// Unlabeled images kept as bytes [N, H, W, C] (C = 1 or 3) and converted to
/// float [B, 3, H, W] in [-1, 1] on demand; gray is replicated to 3 channels.
class ImageSet {
public:
    ImageSet() = default;
    explicit ImageSet(torch::Tensor bytes);

    std::int64_t size() const { return bytes_.defined() ? bytes_.size(0) : 0; }
    int side() const { return bytes_.defined() ? static_cast<int>(bytes_.size(1)) : 0; }
    const torch::Tensor& bytes() const { return bytes_; }

    torch::Tensor pixels(const std::vector<std::int64_t>& indices) const;
    torch::Tensor pixels(std::int64_t begin, std::int64_t end) const;
    torch::Tensor all_pixels() const { return pixels(0, size()); }

    // Bilinear resample to side x side (no-op when already that size).
    ImageSet resized(int side) const;
    ImageSet head(std::int64_t n) const;

private:
    torch::Tensor bytes_;
};

// Byte image [H, W, C] -> float [3, H, W] in [-1, 1], and back.
torch::Tensor bytes_to_pixels(const torch::Tensor& bytes);
torch::Tensor pixels_to_bytes(const torch::Tensor& pixels);

/// Images with class labels in [0, num_classes).
struct LabeledSet {
    ImageSet images;
    std::vector<std::int64_t> labels;
    int num_classes = 0;
    std::vector<std::string> class_names;

    std::int64_t size() const { return images.size(); }
    LabeledSet head(std::int64_t n) const;
    LabeledSet resized(int side) const;
};

/// A directory corpus: labeled when the root holds class subdirectories.
struct FolderCorpus {
    ImageSet images;
    std::optional<std::vector<std::int64_t>> labels;
    std::vector<std::string> class_names;

    bool labeled() const { return labels.has_value(); }
    LabeledSet as_labeled() const;  // throws DataError when unlabeled
};

/// Training/evaluation batch. Only source batches carry labels.
struct ImageBatch {
    torch::Tensor pixels;  // [B, 3, H, W] float in [-1, 1]
    DomainTag domain = DomainTag::source;
    std::optional<torch::Tensor> labels;  // [B] int64

    std::int64_t size() const { return pixels.size(0); }
};

// IDX image/label pair, plain or gzip-compressed.
LabeledSet load_idx_corpus(const std::filesystem::path& images, const std::filesystem::path& labels);

// Class-per-directory PNG tree, or a flat directory of PNGs (unlabeled).
// Ordering is lexicographic by path; labels follow sorted directory names.
FolderCorpus load_folder_corpus(const std::filesystem::path& root);

/// Applies occlusion, salt-and-pepper, stroke morphology and ink variation,
/// in that order, to an image [H, W] or [C, H, W] in [-1, 1]. Deterministic
/// given spec.seed; channels share every random draw.
torch::Tensor apply_degradation(const torch::Tensor& image, const DegradationSpec& spec);

struct SynthCorpus {
    LabeledSet clean;     // source-style glyphs
    LabeledSet degraded;  // scan-style glyphs; labels are evaluation-only
};

/// K procedurally drawn glyph classes, n samples each, with writing-style
/// jitter. Class shapes depend only on the class index, so corpora drawn with
/// different seeds share an alphabet. Sample i of the degraded half is sample
/// i of the clean half passed through apply_degradation, with degradation
/// randomness drawn from a stream disjoint from the style jitter.
SynthCorpus synth_glyph_corpus(int classes, int per_class, std::uint64_t seed,
                               const DegradationSpec& degradation, int side = 32);

// Desk-scale degradation used by the bundled configs and the CLI default.
DegradationSpec default_degradation(std::uint64_t seed);

/// Writes root/<class>/<index>.png for every image.
void write_folder_corpus(const std::filesystem::path& root, const LabeledSet& set);

/// Loads the corpus named by a dataset spec and conforms it to `side`.
LabeledSet load_labeled(const DatasetSpec& spec, int side);
ImageSet load_unlabeled(const DatasetSpec& spec, int side);

struct AugmentOptions {
    bool crop = false;
    int padding = 4;
    bool flip = false;
};

/// Seeded, epoch-reshuffled stream of (source, target) batch pairs. Each
/// domain is shuffled independently; partial tail batches are dropped.
class BatchStream {
public:
    BatchStream(LabeledSet source, ImageSet target, int batch_size, std::uint64_t seed,
                AugmentOptions augment = {});

    std::pair<ImageBatch, ImageBatch> next();

    const std::vector<std::int64_t>& last_source_indices() const { return last_source_; }
    const std::vector<std::int64_t>& last_target_indices() const { return last_target_; }

    // Opaque text snapshot of every random stream and cursor.
    std::string save_state() const;
    void load_state(const std::string& state);

private:
    struct Cursor {
        std::vector<std::int64_t> order;
        std::size_t position = 0;
        std::mt19937_64 rng;
    };

    std::vector<std::int64_t> take(Cursor& cursor, std::int64_t set_size);
    torch::Tensor augment(torch::Tensor pixels);

    LabeledSet source_;
    ImageSet target_;
    int batch_size_;
    AugmentOptions augment_;
    Cursor source_cursor_;
    Cursor target_cursor_;
    std::mt19937_64 augment_rng_;
    std::vector<std::int64_t> last_source_;
    std::vector<std::int64_t> last_target_;
};

} // namespace glyphda
