#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "glyphda/data.hpp"
#include "glyphda/networks.hpp"

namespace glyphda {

struct EvalResult {
    DomainTag domain = DomainTag::target;
    double accuracy = 0;
    std::int64_t count = 0;
    std::vector<double> per_class;             // accuracy per class; 0 for absent classes
    std::vector<std::int64_t> per_class_count;
    std::uint64_t seed = 0;
};

// Row-wise argmax; exact ties go to the lowest class index.
std::vector<std::int64_t> predict(const torch::Tensor& logits);

/// Accuracy of C(pool(E_g(x))) on a labeled set. Runs both networks in
/// evaluation mode and restores their previous mode. Throws DataError on an
/// empty set.
EvalResult evaluate(StructureEncoder& encoder, Classifier& classifier, const LabeledSet& set, DomainTag domain,
                    std::uint64_t seed = 0, std::int64_t batch_size = 256);

struct Aggregate {
    double mean = 0;
    double std = 0;  // population standard deviation (divisor n)
    std::size_t runs = 0;
    std::string formatted() const;  // "mean ± std" in percent, one decimal
};

// Needs at least two results of the same domain and sample count.
Aggregate aggregate_runs(const std::vector<EvalResult>& results);

// Results table: one row per result plus mean/std rows when given.
void write_results_csv(const std::filesystem::path& path, const std::vector<EvalResult>& results,
                       const std::vector<std::pair<DomainTag, Aggregate>>& aggregates = {});

/// Pooled structure codes with their labels (-1 when unlabeled) and domains.
struct FeatureDump {
    static constexpr int kVersion = 1;
    torch::Tensor matrix;  // [n, C_g] float32
    std::vector<std::int64_t> labels;
    std::vector<DomainTag> domains;
};

struct FeatureSource {
    torch::Tensor pixels;                // [n, 3, H, W]
    std::vector<std::int64_t> labels;    // empty when unlabeled
    DomainTag domain = DomainTag::source;
};

FeatureDump extract_features(StructureEncoder& encoder, const std::vector<FeatureSource>& sources,
                             std::int64_t batch_size = 256);

// Archive with arrays "features", "labels", "domains" and metadata n, width, version.
void write_feature_dump(const std::filesystem::path& path, const FeatureDump& dump);
FeatureDump read_feature_dump(const std::filesystem::path& path);

// Projection onto the first two principal components, [n, 2]; component
// signs are fixed so the largest-magnitude loading is positive.
torch::Tensor pca_2d(const torch::Tensor& matrix);

// CSV of x, y, label, domain rows from pca_2d.
void write_pca_csv(const std::filesystem::path& path, const FeatureDump& dump);

} // namespace glyphda
