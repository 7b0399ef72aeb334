#include "glyphda/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "glyphda/archive.hpp"
#include "glyphda/errors.hpp"

namespace glyphda {

namespace {

// Switches modules to evaluation mode for the lifetime of the guard.
class EvalModeGuard {
public:
    explicit EvalModeGuard(std::vector<torch::nn::Module*> modules) : modules_(std::move(modules)) {
        for (auto* m : modules_) {
            was_training_.push_back(m->is_training());
            m->eval();
        }
    }
    ~EvalModeGuard() {
        for (std::size_t i = 0; i < modules_.size(); ++i) modules_[i]->train(was_training_[i]);
    }
    EvalModeGuard(const EvalModeGuard&) = delete;
    EvalModeGuard& operator=(const EvalModeGuard&) = delete;

private:
    std::vector<torch::nn::Module*> modules_;
    std::vector<bool> was_training_;
};

} // namespace

std::vector<std::int64_t> predict(const torch::Tensor& logits) {
    if (logits.dim() != 2) throw ShapeError("predict expects logits [B, K]");
    auto l = logits.detach().to(torch::kDouble).contiguous();
    auto a = l.accessor<double, 2>();
    std::vector<std::int64_t> out(static_cast<std::size_t>(l.size(0)));
    for (std::int64_t i = 0; i < l.size(0); ++i) {
        std::int64_t best = 0;
        for (std::int64_t k = 1; k < l.size(1); ++k)
            if (a[i][k] > a[i][best]) best = k;
        out[i] = best;
    }
    return out;
}

EvalResult evaluate(StructureEncoder& encoder, Classifier& classifier, const LabeledSet& set, DomainTag domain,
                    std::uint64_t seed, std::int64_t batch_size) {
    if (set.size() == 0) throw DataError("evaluate: empty set");
    EvalModeGuard guard({encoder.get(), classifier.get()});
    torch::NoGradGuard no_grad;

    EvalResult r;
    r.domain = domain;
    r.seed = seed;
    r.count = set.size();
    std::int64_t classes = set.num_classes;
    for (auto y : set.labels) classes = std::max(classes, y + 1);
    std::vector<std::int64_t> correct(static_cast<std::size_t>(classes), 0);
    r.per_class_count.assign(static_cast<std::size_t>(classes), 0);

    std::int64_t hits = 0;
    for (std::int64_t begin = 0; begin < set.size(); begin += batch_size) {
        const auto end = std::min(set.size(), begin + batch_size);
        const auto predictions = predict(classifier->forward(encoder->forward(set.images.pixels(begin, end)).pooled));
        for (std::int64_t i = begin; i < end; ++i) {
            const auto y = set.labels[i];
            ++r.per_class_count[y];
            if (predictions[i - begin] == y) {
                ++correct[y];
                ++hits;
            }
        }
    }
    r.accuracy = static_cast<double>(hits) / static_cast<double>(r.count);
    r.per_class.resize(correct.size());
    for (std::size_t k = 0; k < correct.size(); ++k)
        r.per_class[k] = r.per_class_count[k] ? static_cast<double>(correct[k]) / r.per_class_count[k] : 0.0;
    return r;
}

std::string Aggregate::formatted() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f ± %.1f", 100.0 * mean, 100.0 * std);
    return buf;
}

Aggregate aggregate_runs(const std::vector<EvalResult>& results) {
    if (results.size() < 2) throw DataError("aggregate_runs needs at least two results");
    for (const auto& r : results)
        if (r.domain != results.front().domain || r.count != results.front().count)
            throw DataError("aggregate_runs: results differ in domain or sample count");
    Aggregate a;
    a.runs = results.size();
    for (const auto& r : results) a.mean += r.accuracy;
    a.mean /= static_cast<double>(a.runs);
    double var = 0;
    for (const auto& r : results) var += (r.accuracy - a.mean) * (r.accuracy - a.mean);
    a.std = std::sqrt(var / static_cast<double>(a.runs));
    return a;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<EvalResult>& results,
                       const std::vector<std::pair<DomainTag, Aggregate>>& aggregates) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "row,domain,seed,count,accuracy,std\n";
    char buf[128];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "run,%s,%llu,%lld,%.6f,\n", std::string(to_string(r.domain)).c_str(),
                      static_cast<unsigned long long>(r.seed), static_cast<long long>(r.count), r.accuracy);
        out << buf;
    }
    for (const auto& [domain, a] : aggregates) {
        std::snprintf(buf, sizeof buf, "mean,%s,,%zu,%.6f,%.6f\n", std::string(to_string(domain)).c_str(), a.runs,
                      a.mean, a.std);
        out << buf;
    }
    if (!out) throw IoError("write failed for " + path.string());
}

// ------------------------------------------------------------ features

FeatureDump extract_features(StructureEncoder& encoder, const std::vector<FeatureSource>& sources,
                             std::int64_t batch_size) {
    EvalModeGuard guard({encoder.get()});
    torch::NoGradGuard no_grad;
    FeatureDump dump;
    std::vector<torch::Tensor> blocks;
    for (const auto& src : sources) {
        const auto n = src.pixels.size(0);
        if (!src.labels.empty() && static_cast<std::int64_t>(src.labels.size()) != n)
            throw DataError("extract_features: label count does not match image count");
        for (std::int64_t begin = 0; begin < n; begin += batch_size) {
            const auto end = std::min(n, begin + batch_size);
            blocks.push_back(encoder->forward(src.pixels.slice(0, begin, end)).pooled.to(torch::kFloat));
        }
        for (std::int64_t i = 0; i < n; ++i) {
            dump.labels.push_back(src.labels.empty() ? -1 : src.labels[i]);
            dump.domains.push_back(src.domain);
        }
    }
    if (blocks.empty()) throw DataError("extract_features: no samples");
    dump.matrix = torch::cat(blocks, 0);
    return dump;
}

void write_feature_dump(const std::filesystem::path& path, const FeatureDump& dump) {
    Archive a;
    a.metadata["format"] = "glyphda-features";
    a.metadata["version"] = std::to_string(FeatureDump::kVersion);
    a.metadata["n"] = std::to_string(dump.matrix.size(0));
    a.metadata["width"] = std::to_string(dump.matrix.size(1));
    a.add("features", dump.matrix.to(torch::kFloat));
    a.add("labels", torch::tensor(dump.labels, torch::kLong));
    std::vector<std::int64_t> domains;
    for (auto d : dump.domains) domains.push_back(d == DomainTag::source ? 0 : 1);
    a.add("domains", torch::tensor(domains, torch::kLong));
    write_archive(path, a);
}

FeatureDump read_feature_dump(const std::filesystem::path& path) {
    const auto a = read_archive(path);
    if (a.meta("format") != "glyphda-features") throw CheckpointError(path.string() + " is not a feature dump");
    FeatureDump dump;
    dump.matrix = a.at("features");
    const auto labels = a.at("labels");
    const auto domains = a.at("domains");
    for (std::int64_t i = 0; i < labels.numel(); ++i) {
        dump.labels.push_back(labels[i].item<std::int64_t>());
        dump.domains.push_back(domains[i].item<std::int64_t>() == 0 ? DomainTag::source : DomainTag::target);
    }
    return dump;
}

torch::Tensor pca_2d(const torch::Tensor& matrix) {
    if (matrix.dim() != 2 || matrix.size(0) < 2) throw ShapeError("pca_2d expects at least two rows");
    auto x = matrix.to(torch::kDouble);
    x = x - x.mean(0, true);
    auto cov = x.t().mm(x) / static_cast<double>(x.size(0) - 1);
    auto [values, vectors] = torch::linalg_eigh(cov);  // ascending eigenvalues
    const auto d = vectors.size(1);
    auto top = torch::stack({vectors.select(1, d - 1), d > 1 ? vectors.select(1, d - 2) : torch::zeros_like(vectors.select(1, 0))}, 1);
    for (int c = 0; c < 2; ++c) {
        auto col = top.select(1, c);
        if (col[col.abs().argmax()].item<double>() < 0) col.neg_();
    }
    return x.mm(top).to(torch::kFloat);
}

void write_pca_csv(const std::filesystem::path& path, const FeatureDump& dump) {
    const auto xy = pca_2d(dump.matrix).contiguous();
    const auto a = xy.accessor<float, 2>();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "x,y,label,domain\n";
    char buf[128];
    for (std::int64_t i = 0; i < xy.size(0); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%lld,%s\n", a[i][0], a[i][1],
                      static_cast<long long>(dump.labels[i]), std::string(to_string(dump.domains[i])).c_str());
        out << buf;
    }
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace glyphda
