// Acceptance gate: prints one line per criterion and exits 0 only when every
// selected criterion passes (77 when all of them were skipped).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glyphda/cli.hpp"
#include "glyphda/errors.hpp"
#include "glyphda/eval.hpp"
#include "glyphda/image_io.hpp"
#include "glyphda/latent.hpp"
#include "glyphda/losses.hpp"
#include "glyphda/trainer.hpp"
#include "scoping.hpp"
#include "test_support.hpp"

using namespace glyphda;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string details;
};

Outcome pass(std::string d) { return {Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::skip, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Status::pass : Status::fail, std::move(d)}; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Collects named sub-checks; the criterion passes when all of them do.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        ++count_;
        if (!ok) failures_.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        if (failures_.empty()) return pass(summary + ", " + std::to_string(count_) + " checks");
        std::string d = std::to_string(failures_.size()) + "/" + std::to_string(count_) + " failed:";
        for (const auto& f : failures_) d += " [" + f + "]";
        return fail(d);
    }

private:
    int count_ = 0;
    std::vector<std::string> failures_;
};

fs::path work_dir() {
    if (const char* env = std::getenv("GLYPHDA_ACCEPTANCE_DIR")) return env;
    return fs::current_path() / "acceptance_runs";
}

const auto kDouble = torch::TensorOptions().dtype(torch::kDouble);

// Taps available on 8x8 inputs; relu5_1 needs at least 16x16.
PerceptualSpec tiny_taps() {
    PerceptualSpec p;
    p.texture_taps = {{"relu1_1", 1.0}, {"relu2_1", 1.0}};
    p.structure_taps = {{"relu3_1", 1.0 / 8}, {"relu4_1", 1.0 / 4}};
    p.reconstruction_taps = {{"relu1_1", 1.0 / 32}, {"relu2_1", 1.0 / 16}, {"relu3_1", 1.0 / 8}, {"relu4_1", 1.0 / 4}};
    return p;
}

PerceptualExtractor double_extractor(std::uint64_t seed) {
    auto phi = build_perceptual_extractor(0.125, seed);
    phi->to(torch::kDouble);
    return phi;
}

torch::Tensor images(std::int64_t b, std::int64_t side, std::uint64_t seed) {
    torch::manual_seed(seed);
    return torch::rand({b, 3, side, side}, kDouble) * 2 - 1;
}

// ------------------------------------------------------------ criterion 1

Outcome gradients() {
    const auto start = std::chrono::steady_clock::now();
    const double tol = 1e-4;
    std::vector<std::pair<std::string, double>> errors;
    auto record = [&](std::string name, double e) { errors.emplace_back(std::move(name), e); };

    torch::manual_seed(3);
    {
        auto logits = torch::randn({4, 10}, kDouble).requires_grad_();
        auto labels = torch::tensor({1, 4, 9, 0});
        record("cross_entropy", test::gradient_check([&] { return cross_entropy(logits, labels); }, logits, 1));
    }
    {
        auto d = build_feature_discriminator(6, 0.01, 3);
        d->to(torch::kDouble);
        d->eval();
        auto f_s = torch::randn({4, 6}, kDouble).requires_grad_();
        auto f_t = torch::randn({4, 6}, kDouble).requires_grad_();
        auto disc = [&] { return advF_discriminator(d->forward(f_s), d->forward(f_t)); };
        auto enc = [&] { return advF_encoder(d->forward(f_s), d->forward(f_t)); };
        record("advF discriminator wrt f_s", test::gradient_check(disc, f_s, 2));
        record("advF discriminator wrt D_F", test::gradient_check(disc, d->parameters().front(), 3));
        record("advF encoder wrt f_s", test::gradient_check(enc, f_s, 4));
        record("advF encoder wrt f_t", test::gradient_check(enc, f_t, 5));
    }
    {
        auto real = torch::randn({4, 1}, kDouble).requires_grad_();
        auto fake = torch::randn({4, 1}, kDouble).requires_grad_();
        record("advI discriminator wrt real", test::gradient_check([&] { return advI_discriminator(real, fake); }, real, 6));
        record("advI discriminator wrt fake", test::gradient_check([&] { return advI_discriminator(real, fake); }, fake, 7));
        record("advI generator", test::gradient_check([&] { return advI_generator(fake); }, fake, 8));
    }
    auto phi = double_extractor(11);
    const auto spec = tiny_taps();
    auto x_s = images(2, 8, 20), x_t = images(2, 8, 21);
    {
        auto x_st = images(2, 8, 22).requires_grad_();
        auto x_ts = images(2, 8, 23).requires_grad_();
        auto per = [&] { return perceptual_loss(phi, spec, x_s, x_t, x_st, x_ts).total(); };
        record("perceptual wrt x_st", test::gradient_check(per, x_st, 9));
        record("perceptual wrt x_ts", test::gradient_check(per, x_ts, 10));
        auto rec = [&] { return reconstruction_loss(phi, spec, x_s, x_t, x_st, x_ts); };
        record("reconstruction wrt x_ss", test::gradient_check(rec, x_st, 11));
        record("reconstruction wrt x_tt", test::gradient_check(rec, x_ts, 12));
    }
    {
        // Every term of the weighted total depends on one shared leaf.
        auto theta = (torch::randn({2, 3, 8, 8}, kDouble) * 0.5).requires_grad_();
        auto head = torch::randn({3, 5}, kDouble);
        auto labels = torch::tensor({0, 3});
        auto total = [&] {
            auto x_st = torch::tanh(theta), x_ts = torch::tanh(theta.flip(3));
            auto pooled = x_st.mean({2, 3});
            LossTerms t;
            t.cls_s = cross_entropy(torch::tanh(theta.flip(2)).mean({2, 3}).mm(head), labels);
            t.cls_st = cross_entropy(pooled.mm(head), labels);
            t.advF_e = advF_encoder(torch::sigmoid(pooled.sum(1)), torch::sigmoid(x_ts.mean({1, 2, 3})));
            t.advI_g = advI_generator(x_st.mean({1, 2, 3}));
            t.per = perceptual_loss(phi, spec, x_s, x_t, x_st, x_ts).total();
            t.rec = reconstruction_loss(phi, spec, x_s, x_t, x_ts, x_st);
            return total_loss(t, LossWeights{}, AblationFlags{});
        };
        record("total_loss", test::gradient_check(total, theta, 13));
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Checks checks;
    double worst = 0;
    for (const auto& [name, e] : errors) {
        checks.expect(e <= tol, name + " rel err " + fmt("%.2e", e));
        worst = std::max(worst, e);
    }
    checks.expect(seconds < 120, "runtime " + fmt("%.1f", seconds) + " s");
    return checks.outcome(std::to_string(errors.size()) + " gradients, worst rel err " + fmt("%.2e", worst) + ", " +
                          fmt("%.1f", seconds) + " s");
}

// ------------------------------------------------------------ criterion 2

Outcome closed_forms() {
    Checks c;
    const double ce = cross_entropy(torch::zeros({5, 10}, kDouble), torch::tensor({0, 2, 4, 6, 9})).item<double>();
    c.expect(std::abs(ce - 2.302585) <= 1e-6, "uniform CE " + fmt("%.9f", ce));
    auto half = torch::full({6, 1}, 0.5, kDouble);
    const double lsgan = advI_discriminator(half, half).item<double>();
    c.expect(std::abs(lsgan - 0.25) <= 1e-6, "LSGAN D " + fmt("%.9f", lsgan));
    const double advf = advF_discriminator(half, half).item<double>();
    c.expect(std::abs(advf + 1.386294) <= 1e-6, "advF D " + fmt("%.9f", advf));

    auto phi = double_extractor(4);
    auto p = PerceptualSpec::defaults();
    p.width_multiplier = 0.125;
    auto x_s = images(2, 32, 1), x_t = images(2, 32, 2);
    const double rec = reconstruction_loss(phi, p, x_s, x_t, x_s, x_t).item<double>();
    const double structure = perceptual_loss(phi, p, x_s, x_t, x_s, x_t).structure.item<double>();
    const double texture = perceptual_loss(phi, p, x_s, x_t, x_t, x_s).texture.item<double>();
    c.expect(std::abs(rec) <= 1e-6, "identity reconstruction " + fmt("%.3e", rec));
    c.expect(std::abs(structure) <= 1e-6, "identity structure " + fmt("%.3e", structure));
    c.expect(std::abs(texture) <= 1e-6, "swapped texture " + fmt("%.3e", texture));
    return c.outcome("ln10 " + fmt("%.6f", ce) + ", LSGAN " + fmt("%.6f", lsgan) + ", advF " + fmt("%.6f", advf));
}

// ------------------------------------------------------------ criterion 3

Outcome update_scoping() {
    auto dir = work_dir() / "scoping";
    fs::create_directories(dir);
    const auto config = test::desk_config(dir);
    Trainer trainer(config, build_networks(config.model, config.perceptual, {config.trainer.seed, true}));
    torch::manual_seed(5);
    const auto b = config.data.batch_size;
    ImageBatch source{torch::rand({b, 3, 32, 32}) * 2 - 1, DomainTag::source, torch::randint(0, 10, {b})};
    ImageBatch target{torch::rand({b, 3, 32, 32}) * 2 - 1, DomainTag::target, std::nullopt};
    const auto changed = test::observe_scoping(trainer, source, target);

    Checks c;
    for (const auto& [phase, expected] : test::expected_scoping()) {
        const auto it = changed.find(phase);
        const auto got = it == changed.end() ? test::NetworkSet{} : it->second;
        std::string names;
        for (auto id : got) names += std::string(names.empty() ? "" : " ") + std::string(to_string(id));
        c.expect(got == expected, "phase " + std::to_string(static_cast<int>(phase)) + " changed {" + names + "}");
    }
    return c.outcome("4 phases, 8 networks compared bit-exactly");
}

// ------------------------------------------------------------ criterion 4

Outcome schedule() {
    Checks c;
    for (double eta0 : {2.5e-4, 1e-4, 1e-3}) {
        const ScheduleSpec s{eta0, 150000, 0.9};
        c.expect(std::abs(lr_at(s, 0) - eta0) <= 1e-9, "T=0");
        c.expect(std::abs(lr_at(s, 75000) - eta0 * 0.535887) <= 1e-9, "T=Tmax/2");
        c.expect(std::abs(lr_at(s, 75000) - eta0 * std::pow(0.5, 0.9)) <= 1e-15, "T=Tmax/2 exact");
        c.expect(std::abs(lr_at(s, 150000)) <= 1e-9, "T=Tmax");
    }
    return c.outcome("eta0, 0.535887 eta0, 0");
}

// ------------------------------------------------------------ criterion 5

Outcome permutation_invariance() {
    auto phi = double_extractor(9);
    auto spec = PerceptualSpec::defaults();
    spec.width_multiplier = 0.125;
    const auto taps = required_taps(spec);
    auto tap = [&](std::uint64_t seed) { return phi->forward(images(2, 32, seed), taps); };
    const auto t_s = tap(1), t_t = tap(2), t_st = tap(3), t_ts = tap(4);

    Checks c;
    double worst_texture = 0, least_structure = 1e300;
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        torch::manual_seed(100 + trial);
        auto permute = [](const FeatureTaps& in) {
            FeatureTaps out;
            for (const auto& [name, f] : in) {
                const auto hw = f.size(2) * f.size(3);
                auto perm = torch::randperm(hw);
                out[name] = f.reshape({f.size(0), f.size(1), hw}).index_select(2, perm).reshape(f.sizes());
            }
            return out;
        };
        const auto base = perceptual_from_taps(spec, t_s, t_t, t_st, t_ts);
        const auto moved = perceptual_from_taps(spec, t_s, t_t, permute(t_st), permute(t_ts));
        const double dt = std::abs(base.texture.item<double>() - moved.texture.item<double>());
        const double ds = std::abs(base.structure.item<double>() - moved.structure.item<double>());
        worst_texture = std::max(worst_texture, dt);
        least_structure = std::min(least_structure, ds);
        c.expect(dt <= 1e-6, "texture moved by " + fmt("%.3e", dt));
        c.expect(ds > 1e-6, "structure moved by only " + fmt("%.3e", ds));
    }
    return c.outcome("max texture change " + fmt("%.2e", worst_texture) + ", min structure change " +
                     fmt("%.3g", least_structure));
}

// ------------------------------------------------------------ criteria 6, 7

struct RunResult {
    double target = 0;
    double source = 0;
    bool reused = false;
};

// Trains (or reuses a finished checkpoint of the identical config) and
// evaluates the final model on the target test set.
RunResult desk_run(const std::string& preset, int seed) {
    const auto dir = work_dir() / "desk" / (preset + "_seed" + std::to_string(seed));
    const auto config = test::desk_config(
        dir, {"ablation.preset=" + preset, "trainer.seed=" + std::to_string(seed), "trainer.eval_every=100000"});
    const auto final_ckpt = dir / ("checkpoint_" + std::to_string(config.trainer.t_max) + ".gdar");

    RunResult r;
    if (fs::exists(final_ckpt)) {
        try {
            r.reused = read_checkpoint(final_ckpt).meta("config_digest") == config_digest(config);
        } catch (const Error&) {
            r.reused = false;
        }
    }
    if (!r.reused) {
        std::error_code ec;
        fs::remove_all(dir, ec);
        std::cerr << "training " << preset << " seed " << seed << " (" << config.trainer.t_max << " iterations)\n";
        fit(config);
    }
    auto nets = build_networks(config.model, config.perceptual, {config.trainer.seed, false});
    load_network_state(read_checkpoint(final_ckpt), nets);
    const auto target = load_labeled(config.data.target_test, config.model.image_side);
    const auto source = load_labeled(config.data.source_test, config.model.image_side);
    r.target = evaluate(nets.structure, nets.classifier, target, DomainTag::target, seed).accuracy;
    r.source = evaluate(nets.structure, nets.classifier, source, DomainTag::source, seed).accuracy;
    return r;
}

struct DeskSummary {
    std::map<std::string, std::vector<RunResult>> runs;
    double mean(const std::string& preset) const {
        double s = 0;
        for (const auto& r : runs.at(preset)) s += r.target;
        return s / static_cast<double>(runs.at(preset).size());
    }
    std::string describe(const std::string& preset) const {
        std::string d = preset + " " + fmt("%.1f", 100 * mean(preset)) + " (";
        for (std::size_t i = 0; i < runs.at(preset).size(); ++i)
            d += (i ? "/" : "") + fmt("%.1f", 100 * runs.at(preset)[i].target);
        return d + ")";
    }
};

const DeskSummary& desk_summary() {
    static std::optional<DeskSummary> summary;
    if (summary) return *summary;
    summary.emplace();
    for (const char* preset : {"source-only", "model-E", "full"})
        for (int seed = 0; seed < 3; ++seed) {
            fs::create_directories(work_dir() / "desk");
            auto r = desk_run(preset, seed);
            summary->runs[preset].push_back(r);
            std::cerr << preset << " seed " << seed << ": target " << r.target << " source " << r.source
                      << (r.reused ? " (reused checkpoint)" : "") << '\n';
        }
    std::ofstream out(work_dir() / "desk" / "summary.csv", std::ios::trunc);
    out << "preset,seed,target_accuracy,source_accuracy\n";
    for (const auto& [preset, runs] : summary->runs)
        for (std::size_t i = 0; i < runs.size(); ++i)
            out << preset << ',' << i << ',' << runs[i].target << ',' << runs[i].source << '\n';
    return *summary;
}

Outcome desk_margin() {
    const auto& s = desk_summary();
    const double margin = 100 * (s.mean("full") - s.mean("source-only"));
    return verdict(margin >= 10.0, s.describe("full") + " vs " + s.describe("source-only") + ", margin " +
                                       fmt("%+.1f", margin) + " points (need >= 10)");
}

Outcome desk_ordering() {
    const auto& s = desk_summary();
    const double full = s.mean("full"), e = s.mean("model-E"), so = s.mean("source-only");
    Checks c;
    c.expect(full >= e, "full < model-E");
    c.expect(full >= so, "full < source-only");
    c.expect(100 * (full - so) >= 10.0, "full - source-only = " + fmt("%.1f", 100 * (full - so)));
    auto o = c.outcome(s.describe("full") + " >= " + s.describe("model-E") + ", >= " + s.describe("source-only"));
    if (o.status == Status::fail)
        o.details += "; means full " + fmt("%.1f", 100 * full) + " model-E " + fmt("%.1f", 100 * e) +
                     " source-only " + fmt("%.1f", 100 * so);
    return o;
}

// ------------------------------------------------------------ criterion 8

Outcome digits() {
    const char* env = std::getenv("GLYPHDA_DIGITS_DIR");
    if (!env)
        return skip("set GLYPHDA_DIGITS_DIR to a directory holding usps/ and mnist/ IDX files "
                    "(train-images-idx3-ubyte.gz, train-labels-idx1-ubyte.gz, t10k-*); none ship with the repo");
    const fs::path root = env;
    auto idx = [&](const std::string& set, const std::string& split, const std::string& kind) {
        return (root / set / (split + "-" + kind + (kind == "images" ? "-idx3-ubyte.gz" : "-idx1-ubyte.gz"))).string();
    };
    for (const auto& p : {idx("usps", "train", "images"), idx("mnist", "train", "images"), idx("mnist", "t10k", "images")})
        if (!fs::exists(p)) return skip("missing " + p);

    std::map<std::string, double> means;
    for (const char* preset : {"source-only", "full"}) {
        double sum = 0;
        for (int seed = 0; seed < 2; ++seed) {
            const auto dir = work_dir() / "digits" / (std::string(preset) + "_seed" + std::to_string(seed));
            LoadOptions o;
            o.overrides = {"data.source.images=" + idx("usps", "train", "images"),
                           "data.source.labels=" + idx("usps", "train", "labels"),
                           "data.target.images=" + idx("mnist", "train", "images"),
                           "data.target.labels=" + idx("mnist", "train", "labels"),
                           "data.target_test.images=" + idx("mnist", "t10k", "images"),
                           "data.target_test.labels=" + idx("mnist", "t10k", "labels"),
                           "ablation.preset=" + std::string(preset), "trainer.seed=" + std::to_string(seed),
                           "output_dir=" + dir.string()};
            const auto config = load_config(test::source_dir() / "configs" / "digits_u2m.json", o);
            sum += fit(config).final_target_accuracy;
        }
        means[preset] = sum / 2;
    }
    const double margin = 100 * (means["full"] - means["source-only"]);
    return verdict(margin >= 10.0, "full " + fmt("%.1f", 100 * means["full"]) + " vs source-only " +
                                       fmt("%.1f", 100 * means["source-only"]) + ", margin " + fmt("%+.1f", margin));
}

// ------------------------------------------------------------ criterion 9

std::vector<std::string> csv_without_wall_clock(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(in, line)) rows.push_back(line.substr(0, line.rfind(',')));
    return rows;
}

std::string parameter_mismatch(const Archive& a, const Archive& b) {
    std::size_t compared = 0;
    for (const auto& [name, t] : a.arrays) {
        if (name.rfind("param/", 0) != 0) continue;
        const auto* other = b.find(name);
        if (!other || !torch::equal(t, *other)) return name;
        ++compared;
    }
    return compared ? "" : "<no parameters>";
}

fs::path short_run_checkpoint;  // trained desk-scale model reused by criterion 10

Outcome determinism_and_resume() {
    const auto root = work_dir() / "determinism";
    std::error_code ec;
    fs::remove_all(root, ec);
    const std::vector<std::string> common{"trainer.t_max=50", "trainer.checkpoint_every=25", "trainer.eval_every=50",
                                          "trainer.log_every=1"};
    const auto a = fit(test::desk_config(root / "a", common));
    const auto b = fit(test::desk_config(root / "b", common));

    Checks c;
    const auto rows_a = csv_without_wall_clock(a.metrics_csv), rows_b = csv_without_wall_clock(b.metrics_csv);
    c.expect(rows_a.size() == 51, "run a has " + std::to_string(rows_a.size()) + " csv lines");
    c.expect(rows_a == rows_b, "metrics CSVs differ");

    // Resume from iteration 25 in a fresh directory.
    const auto resume_dir = root / "resumed";
    fs::create_directories(resume_dir);
    fs::copy_file(root / "a" / "checkpoint_25.gdar", resume_dir / "checkpoint_25.gdar");
    FitOptions opts;
    opts.resume_from = resume_dir / "checkpoint_25.gdar";
    const auto r = fit(test::desk_config(resume_dir, common), opts);
    c.expect(r.iterations == 50, "resumed run ended at " + std::to_string(r.iterations));
    const auto mismatch = parameter_mismatch(read_checkpoint(root / "a" / "checkpoint_50.gdar"),
                                             read_checkpoint(resume_dir / "checkpoint_50.gdar"));
    c.expect(mismatch.empty(), "parameter " + mismatch + " differs after resume");
    const auto resumed_rows = csv_without_wall_clock(r.metrics_csv);
    c.expect(resumed_rows.size() >= 26 &&
                 std::equal(resumed_rows.end() - 25, resumed_rows.end(), rows_a.end() - 25),
             "post-resume metrics differ from the uninterrupted run");
    short_run_checkpoint = root / "a" / "checkpoint_50.gdar";
    return c.outcome("two 50-iteration runs identical (wall_clock excluded); resume at 25 bit-exact");
}

// ------------------------------------------------------------ criterion 10

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int quiet_cli(const std::vector<std::string>& args) {
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = cli::run(args);
    std::cout.rdbuf(old);
    return code;
}

Outcome transform_plumbing() {
    const auto root = work_dir() / "transform";
    std::error_code ec;
    fs::remove_all(root, ec);
    // Always the 50-iteration desk-config run, so the result does not depend
    // on which other criteria ran first.
    if (short_run_checkpoint.empty() || !fs::exists(short_run_checkpoint)) determinism_and_resume();
    const fs::path checkpoint = short_run_checkpoint;

    Checks c;
    c.expect(quiet_cli({"synth", "--classes", "4", "--per-class", "2", "--seed", "21", "--out",
                        (root / "pairs").string()}) == cli::kOk,
             "synth failed");
    const auto src = (root / "pairs" / "clean").string(), tgt = (root / "pairs" / "degraded").string();
    for (const char* out : {"first", "second"})
        c.expect(quiet_cli({"transform", "-k", checkpoint.string(), "--source", src, "--target", tgt, "--out",
                            (root / out).string()}) == cli::kOk,
                 std::string("transform run ") + out + " failed");

    double min_diff = 1e9;
    for (const char* grid : {"source_to_target.png", "target_to_source.png"}) {
        c.expect(slurp(root / "first" / grid) == slurp(root / "second" / grid), std::string(grid) + " not reproducible");
        const auto img = read_png(root / "first" / grid);
        const int half = img.width / 2;
        c.expect(img.height == 8 * half, std::string(grid) + " has " + std::to_string(img.height / std::max(half, 1)) + " rows");
        double diff = 0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < half; ++x)
                for (int ch = 0; ch < img.channels; ++ch) {
                    const auto at = [&](int xx) { return img.bytes[(static_cast<std::size_t>(y) * img.width + xx) * img.channels + ch]; };
                    diff += std::abs(static_cast<double>(at(x)) - at(x + half));
                }
        diff /= static_cast<double>(img.height) * half * img.channels;
        min_diff = std::min(min_diff, diff / 127.5);
        c.expect(diff > 0, std::string(grid) + " generated half equals its input");
    }

    // Range of the generated halves before quantization.
    const auto archive = read_checkpoint(checkpoint);
    const auto config = parse_config(archive.meta("config"), {{}, false});
    auto nets = build_networks(config.model, config.perceptual, {config.trainer.seed, false});
    load_network_state(archive, nets);
    nets.train(false);
    torch::NoGradGuard no_grad;
    const auto x_s = load_folder_corpus(src).images.all_pixels();
    const auto x_t = load_folder_corpus(tgt).images.all_pixels();
    const auto q = transform_quadruple(x_s, x_t, nets);
    const double lo = std::min(q.x_st.min().item<double>(), q.x_ts.min().item<double>());
    const double hi = std::max(q.x_st.max().item<double>(), q.x_ts.max().item<double>());
    c.expect(lo >= -1.0 && hi <= 1.0, "generated range [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]");
    return c.outcome("50-iteration desk checkpoint, 8 pairs, range [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) +
                     "], min mean |x - G| " + fmt("%.3f", min_diff));
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected;
    app.add_option("--criteria", selected, "Comma-separated criterion numbers (default: all)")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "gradient correctness", gradients},
        {2, "closed-form loss values", closed_forms},
        {3, "update scoping", update_scoping},
        {4, "learning-rate schedule", schedule},
        {5, "texture/structure permutation property", permutation_invariance},
        {6, "desk-scale adaptation margin", desk_margin},
        {7, "desk-scale ablation ordering", desk_ordering},
        {8, "scaled USPS->MNIST sanity run", digits},
        {9, "determinism and resume", determinism_and_resume},
        {10, "transformation plumbing", transform_plumbing},
    };
    std::set<int> want(selected.begin(), selected.end());
    fs::create_directories(work_dir());

    int failed = 0, skipped = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!want.empty() && !want.count(c.id)) continue;
        ++ran;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const char* status = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
        std::cout << "criterion " << c.id << " [PRIMARY] " << c.name << ": " << status << " (" << o.details << ")"
                  << std::endl;
        failed += o.status == Status::fail;
        skipped += o.status == Status::skip;
    }
    if (failed) return 1;
    if (ran > 0 && skipped == ran) return 77;
    return 0;
}
