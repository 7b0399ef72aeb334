#include "glyphda/cli.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "glyphda/archive.hpp"
#include "glyphda/config.hpp"
#include "glyphda/data.hpp"
#include "glyphda/errors.hpp"
#include "glyphda/eval.hpp"
#include "glyphda/image_io.hpp"
#include "glyphda/latent.hpp"
#include "glyphda/networks.hpp"
#include "glyphda/trainer.hpp"

#ifndef GLYPHDA_CODE_VERSION
#define GLYPHDA_CODE_VERSION "unknown"
#endif

namespace glyphda::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad flag combinations detected after parsing.
class UsageError : public Error {
public:
    using Error::Error;
};

fs::path under_output_root(const fs::path& p) {
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / p;
    return p;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Exclusive claim on an output directory for the life of the object. A lock
/// left by a process that no longer exists is taken over.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / ".glyphda.lock") {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        for (int attempt = 0; attempt < 2; ++attempt) {
            const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
            if (fd >= 0) {
                const auto pid = std::to_string(::getpid()) + "\n";
                const bool ok = ::write(fd, pid.data(), pid.size()) == static_cast<ssize_t>(pid.size());
                ::close(fd);
                if (!ok) throw IoError("cannot write " + path_.string());
                return;
            }
            if (errno != EEXIST) throw IoError("cannot create lock " + path_.string());
            long holder = 0;
            std::ifstream(path_) >> holder;
            if (holder > 0 && (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM))
                throw IoError(dir.string() + " is in use by process " + std::to_string(holder) + " (" +
                              path_.string() + ")");
            fs::remove(path_, ec);
        }
        throw IoError("cannot acquire " + path_.string());
    }
    ~OutputLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string started = timestamp();
    std::vector<fs::path> artifacts;

    // Atomic write; lists only artifacts that exist.
    void write(const fs::path& dir) const {
        json j;
        j["command"] = command;
        j["config_digest"] = config_digest;
        j["code_version"] = GLYPHDA_CODE_VERSION;
        j["seed"] = seed;
        j["started"] = started;
        j["finished"] = timestamp();
        json paths = json::array();
        for (const auto& a : artifacts)
            if (fs::exists(a)) paths.push_back(a.lexically_relative(dir).generic_string());
        j["artifacts"] = paths;
        const auto target = dir / "manifest.json";
        auto tmp = target;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << j.dump(2) << '\n';
            if (!out) throw IoError("cannot write " + tmp.string());
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    }
};

void write_rgb_png(const fs::path& path, const torch::Tensor& bytes) {
    RasterImage raster;
    raster.height = static_cast<int>(bytes.size(0));
    raster.width = static_cast<int>(bytes.size(1));
    raster.channels = 3;
    auto c = bytes.contiguous();
    raster.bytes.assign(c.data_ptr<std::uint8_t>(), c.data_ptr<std::uint8_t>() + c.numel());
    write_png(path, raster);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct LoadedModel {
    ExperimentConfig config;
    Networks nets;
};

// Rebuilds the networks from the configuration stored in a checkpoint and
// loads its weights; `overrides` edit the stored configuration.
LoadedModel load_model(const fs::path& checkpoint, const std::vector<std::string>& overrides) {
    const auto archive = read_checkpoint(checkpoint);
    LoadedModel m{parse_config(archive.meta("config"), {overrides, /*check_paths=*/true}), {}};
    m.nets = build_networks(m.config.model, m.config.perceptual, {m.config.trainer.seed, /*load_weights=*/false});
    load_network_state(archive, m.nets);
    m.nets.train(false);
    return m;
}

const DatasetSpec& eval_set(const DataSpec& data, DomainTag domain) {
    if (domain == DomainTag::source) return data.source_test.present() ? data.source_test : data.source;
    return data.target_test.present() ? data.target_test : data.target;
}

// ------------------------------------------------------------ subcommands

struct SynthArgs {
    int classes = 10;
    int per_class = 100;
    std::uint64_t seed = 0;
    int side = 32;
    std::string degradation;
    bool clean_only = false;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    const auto out = under_output_root(a.out);
    OutputLock lock(out);
    RunManifest manifest{"synth", "", a.seed};
    DegradationSpec deg = a.degradation.empty() ? default_degradation(a.seed)
                                                : parse_degradation(read_text(a.degradation));
    if (a.clean_only) deg = DegradationSpec{};
    const auto corpus = synth_glyph_corpus(a.classes, a.per_class, a.seed, deg, a.side);
    for (const char* half : {"clean", "degraded"}) {
        std::error_code ec;
        fs::remove_all(out / half, ec);
    }
    write_folder_corpus(out / "clean", corpus.clean);
    write_folder_corpus(out / "degraded", corpus.degraded);
    {
        std::ofstream spec(out / "degradation.json", std::ios::trunc);
        spec << serialize_degradation(deg) << '\n';
    }
    manifest.artifacts = {out / "clean", out / "degraded", out / "degradation.json"};
    manifest.write(out);
    std::cout << "clean_images=" << corpus.clean.size() << '\n'
              << "degraded_images=" << corpus.degraded.size() << '\n'
              << "out=" << out.string() << '\n';
    return kOk;
}

struct TrainArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string resume;
    bool verbose = false;
};

int cmd_train(const TrainArgs& a) {
    const auto config = load_config(a.config, {a.overrides, /*check_paths=*/true});
    const auto out = resolve_output_dir(config);
    OutputLock lock(out);
    RunManifest manifest{"train", config_digest(config), config.trainer.seed};
    {
        std::ofstream cfg(out / "config.json", std::ios::trunc);
        cfg << serialize_config(config) << '\n';
    }
    const auto result = fit(config, {a.resume, !a.verbose});
    manifest.artifacts = result.artifacts;
    manifest.artifacts.push_back(out / "config.json");
    manifest.write(out);
    std::cout << "iterations=" << result.iterations << '\n'
              << "source_accuracy=" << result.final_source_accuracy << '\n'
              << "target_accuracy=" << result.final_target_accuracy << '\n'
              << "best_target_accuracy=" << result.best_target_accuracy << '\n'
              << "checkpoint=" << result.last_checkpoint.string() << '\n'
              << "metrics=" << result.metrics_csv.string() << '\n';
    return kOk;
}

struct EvalArgs {
    std::vector<std::string> checkpoints;
    std::vector<std::string> overrides;
    std::string domain = "both";
    int seeds = 0;
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    if (a.seeds != 0 && a.seeds != static_cast<int>(a.checkpoints.size()))
        throw UsageError("--seeds " + std::to_string(a.seeds) + " needs exactly that many -k checkpoints (got " +
                         std::to_string(a.checkpoints.size()) + ")");
    if (a.seeds == 1) throw UsageError("--seeds aggregates at least two runs");
    std::vector<DomainTag> domains;
    if (a.domain == "source" || a.domain == "both") domains.push_back(DomainTag::source);
    if (a.domain == "target" || a.domain == "both") domains.push_back(DomainTag::target);

    std::vector<EvalResult> results;
    for (const auto& path : a.checkpoints) {
        auto m = load_model(path, a.overrides);
        for (auto domain : domains) {
            const auto set = load_labeled(eval_set(m.config.data, domain), m.config.model.image_side);
            results.push_back(evaluate(m.nets.structure, m.nets.classifier, set, domain, m.config.trainer.seed));
        }
    }

    std::vector<std::pair<DomainTag, Aggregate>> aggregates;
    if (a.seeds >= 2) {
        for (auto domain : domains) {
            std::vector<EvalResult> subset;
            for (const auto& r : results)
                if (r.domain == domain) subset.push_back(r);
            aggregates.emplace_back(domain, aggregate_runs(subset));
        }
    }

    const fs::path out = a.out.empty() ? fs::path(a.checkpoints.front()).parent_path() / "eval.csv"
                                       : under_output_root(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_results_csv(out, results, aggregates);

    std::fprintf(stderr, "%-10s %-8s %8s %9s\n", "domain", "seed", "count", "accuracy");
    for (const auto& r : results) {
        std::fprintf(stderr, "%-10s %-8llu %8lld %8.1f%%\n", std::string(to_string(r.domain)).c_str(),
                     static_cast<unsigned long long>(r.seed), static_cast<long long>(r.count), 100.0 * r.accuracy);
        std::cout << to_string(r.domain) << "_accuracy=" << r.accuracy << '\n';
    }
    for (const auto& [domain, agg] : aggregates) {
        std::fprintf(stderr, "%-10s %-8s %8zu %s\n", std::string(to_string(domain)).c_str(), "mean", agg.runs,
                     agg.formatted().c_str());
        std::cout << to_string(domain) << "_mean=" << agg.mean << '\n'
                  << to_string(domain) << "_std=" << agg.std << '\n';
    }
    std::cout << "results=" << out.string() << '\n';
    return kOk;
}

struct TransformArgs {
    std::string checkpoint;
    std::string source;
    std::string target;
    std::string out;
    int limit = 0;
};

ImageSet load_images(const fs::path& root, int side, int limit) {
    return load_folder_corpus(root).images.head(limit).resized(side);
}

int cmd_transform(const TransformArgs& a) {
    auto m = load_model(a.checkpoint, {});
    const int side = m.config.model.image_side;
    const auto source = load_images(a.source, side, a.limit);
    const auto target = load_images(a.target, side, a.limit);
    if (source.size() != target.size())
        throw UsageError("transform needs equal image counts (source " + std::to_string(source.size()) +
                         ", target " + std::to_string(target.size()) + ")");
    if (source.size() == 0) throw UsageError("transform: no input images");

    const auto out = under_output_root(a.out);
    OutputLock lock(out);
    RunManifest manifest{"transform", config_digest(m.config), m.config.trainer.seed};

    torch::NoGradGuard no_grad;
    const auto x_s = source.all_pixels();
    const auto x_t = target.all_pixels();
    const auto q = transform_quadruple(x_s, x_t, m.nets);
    // One row per pair: [input | texture-swapped output].
    auto rows = [](const torch::Tensor& left, const torch::Tensor& right) {
        return pixels_to_bytes(torch::cat(torch::cat({left, right}, 3).unbind(0), 1));
    };
    const auto source_grid = out / "source_to_target.png";
    const auto target_grid = out / "target_to_source.png";
    write_rgb_png(source_grid, rows(x_s, q.x_st));
    write_rgb_png(target_grid, rows(x_t, q.x_ts));
    manifest.artifacts = {source_grid, target_grid};
    manifest.write(out);
    std::cout << "rows=" << source.size() << '\n'
              << "source_grid=" << source_grid.string() << '\n'
              << "target_grid=" << target_grid.string() << '\n';
    return kOk;
}

struct FeaturesArgs {
    std::string checkpoint;
    std::vector<std::string> overrides;
    std::string out;
    std::string pca;
    int limit = 0;
};

int cmd_features(const FeaturesArgs& a) {
    auto m = load_model(a.checkpoint, a.overrides);
    const int side = m.config.model.image_side;
    std::vector<FeatureSource> sources;
    for (auto domain : {DomainTag::source, DomainTag::target}) {
        auto spec = eval_set(m.config.data, domain);
        if (a.limit > 0) spec.limit = a.limit;
        FeatureSource src;
        src.domain = domain;
        try {
            const auto set = load_labeled(spec, side);
            src.pixels = set.images.all_pixels();
            src.labels = set.labels;
        } catch (const DataError&) {
            if (spec.kind != DatasetKind::folder) throw;
            src.pixels = load_unlabeled(spec, side).all_pixels();  // flat directory: no labels
        }
        sources.push_back(std::move(src));
    }
    const auto dump = extract_features(m.nets.structure, sources);
    const auto out = under_output_root(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_feature_dump(out, dump);
    std::cout << "rows=" << dump.matrix.size(0) << '\n'
              << "width=" << dump.matrix.size(1) << '\n'
              << "features=" << out.string() << '\n';
    if (!a.pca.empty()) {
        const auto pca = under_output_root(a.pca);
        write_pca_csv(pca, dump);
        std::cout << "pca=" << pca.string() << '\n';
    }
    return kOk;
}

int report(int code, const std::string& kind, const std::string& message) {
    std::cerr << "error: " << message << '\n';
    std::cout << "status=" << kind << '\n' << "exit_code=" << code << '\n';
    return code;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Structure/texture disentangled domain adaptation for glyph recognition", "glyphda"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    app.footer("Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric abort, 5 checkpoint mismatch.\n"
               "Relative output paths resolve under $" + std::string(kOutputRootEnv) + " when set.");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Write a clean/degraded synthetic glyph corpus");
    s->add_option("--classes", synth.classes, "Number of glyph classes")->check(CLI::Range(2, 100000));
    s->add_option("--per-class", synth.per_class, "Images per class and half")->check(CLI::Range(1, 1000000));
    s->add_option("--seed", synth.seed, "Style and degradation seed");
    s->add_option("--side", synth.side, "Image side in pixels")->check(CLI::Range(8, 1024));
    s->add_option("--degradation", synth.degradation, "JSON degradation spec (default: desk preset)")
        ->check(CLI::ExistingFile);
    s->add_flag("--clean-only", synth.clean_only, "Use the identity degradation");
    s->add_option("--out", synth.out, "Output directory")->required();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train from a JSON config");
    t->add_option("-c,--config", train.config, "Config file")->required()->check(CLI::ExistingFile);
    t->add_option("--set", train.overrides, "Override dotted.key=value (repeatable)");
    t->add_option("--resume", train.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
    t->add_flag("-v,--verbose", train.verbose, "Progress lines on stderr");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate checkpoints on their test sets");
    e->add_option("-k,--checkpoint", ev.checkpoints, "Checkpoint file (repeatable)")->required();
    e->add_option("--set", ev.overrides, "Override the stored config (e.g. data.target_test.root=...)");
    e->add_option("--domain", ev.domain, "source, target or both")
        ->check(CLI::IsMember({"source", "target", "both"}));
    e->add_option("--seeds", ev.seeds, "Aggregate this many checkpoints as seeds (mean ± std)")
        ->check(CLI::Range(1, 1000));
    e->add_option("--out", ev.out, "Results CSV (default: eval.csv next to the first checkpoint)");

    TransformArgs tr;
    auto* x = app.add_subcommand("transform", "Write texture-swap grids for paired images");
    x->add_option("-k,--checkpoint", tr.checkpoint, "Checkpoint file")->required();
    x->add_option("--source", tr.source, "Source image directory")->required()->check(CLI::ExistingDirectory);
    x->add_option("--target", tr.target, "Target image directory")->required()->check(CLI::ExistingDirectory);
    x->add_option("--out", tr.out, "Output directory")->required();
    x->add_option("--limit", tr.limit, "Use only the first n images of each side")->check(CLI::Range(0, 1 << 30));

    FeaturesArgs fe;
    auto* f = app.add_subcommand("features", "Export pooled structure codes");
    f->add_option("-k,--checkpoint", fe.checkpoint, "Checkpoint file")->required();
    f->add_option("--set", fe.overrides, "Override the stored config");
    f->add_option("--out", fe.out, "Feature dump file")->required();
    f->add_option("--pca", fe.pca, "Also write a 2-D principal-component CSV");
    f->add_option("--limit", fe.limit, "Samples per domain (0 = all)")->check(CLI::Range(0, 1 << 30));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return kUsage;
    }

    try {
        if (s->parsed()) return cmd_synth(synth);
        if (t->parsed()) return cmd_train(train);
        if (e->parsed()) return cmd_eval(ev);
        if (x->parsed()) return cmd_transform(tr);
        if (f->parsed()) return cmd_features(fe);
    } catch (const UsageError& err) {
        return report(kUsage, "usage", err.what());
    } catch (const ConfigError& err) {
        return report(kUsage, "config", err.what());
    } catch (const NumericError& err) {
        std::cout << "term=" << err.term() << '\n';
        return report(kNumeric, "numeric", err.what());
    } catch (const CheckpointError& err) {
        return report(kCheckpoint, "checkpoint", err.what());
    } catch (const ShapeError& err) {
        // Architecture mismatches surface here when a checkpoint is applied.
        return report(kCheckpoint, "shape", err.what());
    } catch (const DataError& err) {
        return report(kIo, "data", err.what());
    } catch (const IoError& err) {
        return report(kIo, "io", err.what());
    } catch (const fs::filesystem_error& err) {
        return report(kIo, "io", err.what());
    } catch (const std::exception& err) {
        return report(kFailure, "failure", err.what());
    }
    return kUsage;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"glyphda"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace glyphda::cli
