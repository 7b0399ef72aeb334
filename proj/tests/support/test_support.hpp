#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "glyphda/config.hpp"

namespace glyphda::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "glyphda") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Central finite differences of a scalar function against autograd, over a
/// random slice of `leaf` (at most `max_entries` elements). Returns the
/// norm-wise relative error ||g_autograd - g_fd|| / max(||.||, ||.||).
inline double gradient_check(const std::function<torch::Tensor()>& f, torch::Tensor leaf, std::uint64_t seed,
                             int max_entries = 40, double eps = 1e-6) {
    leaf.mutable_grad() = torch::Tensor();
    auto value = f();
    auto analytic = torch::autograd::grad({value}, {leaf}, {}, false, false, true)[0];
    if (!analytic.defined()) analytic = torch::zeros_like(leaf);
    analytic = analytic.reshape(-1);

    std::mt19937_64 rng(seed);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(leaf.numel()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int64_t>(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    if (static_cast<int>(idx.size()) > max_entries) idx.resize(static_cast<std::size_t>(max_entries));

    torch::NoGradGuard no_grad;
    auto flat = leaf.view(-1);
    std::vector<double> a, n;
    for (auto i : idx) {
        const double orig = flat[i].item<double>();
        flat[i].fill_(orig + eps);
        const double plus = f().item<double>();
        flat[i].fill_(orig - eps);
        const double minus = f().item<double>();
        flat[i].fill_(orig);
        n.push_back((plus - minus) / (2 * eps));
        a.push_back(analytic[i].item<double>());
    }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - n[i]) * (a[i] - n[i]);
        na += a[i] * a[i];
        nn += n[i] * n[i];
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    return std::sqrt(diff) / scale;
}

inline std::filesystem::path source_dir() { return GLYPHDA_SOURCE_DIR; }

// The bundled desk-scale config with output under `out`.
inline ExperimentConfig desk_config(const std::filesystem::path& out, std::vector<std::string> overrides = {}) {
    overrides.push_back("output_dir=" + out.string());
    return load_config(source_dir() / "configs" / "desk_glyphs.json", {overrides, true});
}

// Small fully-featured config for fast trainer tests: 8 classes, tiny widths.
inline ExperimentConfig tiny_config(const std::filesystem::path& out, std::vector<std::string> overrides = {}) {
    std::vector<std::string> base{
        "model.width_multiplier=0.125", "model.structure_width=32", "perceptual.width_multiplier=0.125",
        "data.source.per_class=4",      "data.target.per_class=4",  "data.source_test.per_class=2",
        "data.target_test.per_class=2", "data.batch_size=4",        "trainer.log_every=1",
        "trainer.eval_every=5",         "trainer.checkpoint_every=5"};
    base.insert(base.end(), overrides.begin(), overrides.end());
    return desk_config(out, base);
}

} // namespace glyphda::test
