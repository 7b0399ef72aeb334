#include "glyphda/trainer.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "glyphda/errors.hpp"
#include "glyphda/eval.hpp"
#include "glyphda/image_io.hpp"
#include "glyphda/latent.hpp"

namespace glyphda {

namespace fs = std::filesystem;

double lr_at(const ScheduleSpec& spec, std::int64_t iteration) {
    if (iteration < 0 || iteration > spec.total_iterations)
        throw std::out_of_range("lr_at: iteration " + std::to_string(iteration) + " outside [0, " +
                                std::to_string(spec.total_iterations) + "]");
    const double progress = static_cast<double>(iteration) / static_cast<double>(spec.total_iterations);
    return spec.base_rate * std::pow(1.0 - progress, spec.exponent);
}

OptimizerGroup group_of(NetworkId id) {
    switch (id) {
    case NetworkId::structure_encoder:
    case NetworkId::classifier: return OptimizerGroup::backbone;
    case NetworkId::image_disc_source:
    case NetworkId::image_disc_target:
    case NetworkId::feature_disc: return OptimizerGroup::discriminators;
    case NetworkId::texture_encoder_source:
    case NetworkId::texture_encoder_target:
    case NetworkId::generator: return OptimizerGroup::generator;
    }
    throw std::logic_error("unknown network id");
}

namespace {

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const OptimizerSpec& spec, std::vector<torch::Tensor> params) {
    if (spec.kind == OptimizerKind::momentum_sgd)
        return std::make_unique<torch::optim::SGD>(
            std::move(params),
            torch::optim::SGDOptions(spec.rate).momentum(spec.momentum).weight_decay(spec.weight_decay));
    return std::make_unique<torch::optim::Adam>(
        std::move(params),
        torch::optim::AdamOptions(spec.rate).betas({spec.momentum, spec.beta2}).weight_decay(spec.weight_decay));
}

void clear_grads(const std::vector<torch::Tensor>& params) {
    for (const auto& p : params) {
        auto t = p;
        t.mutable_grad() = torch::Tensor();
    }
}

// Stores d loss / d params into .grad, leaving every other tensor's .grad alone.
void set_grads(const torch::Tensor& loss, const std::vector<torch::Tensor>& params, bool retain_graph) {
    clear_grads(params);
    if (!loss.requires_grad() || params.empty()) return;
    auto grads = torch::autograd::grad({loss}, params, {}, retain_graph, false, /*allow_unused=*/true);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto t = params[i];
        if (grads[i].defined()) t.mutable_grad() = grads[i];
    }
}

double finite(const char* term, const torch::Tensor& value) {
    const double v = value.item<double>();
    if (!std::isfinite(v))
        throw NumericError(term, std::string("non-finite loss term '") + term + "' (" + std::to_string(v) + ")");
    return v;
}

torch::Tensor zero_like_scalar(const torch::Tensor& like) { return torch::zeros({}, like.options()); }

std::string key_optim(NetworkId id, std::size_t index, const char* field) {
    return "optim/" + std::string(to_string(id)) + "/" + std::to_string(index) + "/" + field;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

// ------------------------------------------------------------ Trainer

Trainer::Trainer(ExperimentConfig config, Networks networks) : config_(std::move(config)), nets_(std::move(networks)) {
    // Dropout draws from the global generator.
    torch::manual_seed(config_.trainer.seed);
    nets_.train(true);
    for (auto id : all_network_ids())
        optimizers_[id] = make_optimizer(config_.optimizer(group_of(id)), nets_.parameters(id));
}

double Trainer::learning_rate(OptimizerGroup group) const {
    return lr_at(config_.schedule(group), std::min(iteration_, config_.trainer.t_max));
}

void Trainer::apply_rates() {
    for (auto& [id, opt] : optimizers_) {
        const double lr = learning_rate(group_of(id));
        for (auto& group : opt->param_groups()) group.options().set_lr(lr);
    }
}

void Trainer::finish_phase(Phase phase) {
    if (observer_) observer_(phase);
}

LossReport Trainer::step(const ImageBatch& source, const ImageBatch& target) {
    if (iteration_ >= config_.trainer.t_max) throw std::out_of_range("trainer already at T_max");
    if (source.domain != DomainTag::source || target.domain != DomainTag::target)
        throw DataError("train_step expects a source batch and a target batch");
    if (!source.labels) throw DataError("source batch carries no labels");
    if (source.size() != target.size()) throw DataError("per-domain batch sizes differ");

    const auto& w = config_.loss_weights;
    // A zero-weighted term is off: its discriminator is not trained either.
    AblationFlags flags = config_.ablation;
    flags.use_advF = flags.use_advF && w.alpha1 > 0;
    flags.use_advI = flags.use_advI && w.alpha2 > 0;
    flags.use_per = flags.use_per && w.alpha3 > 0;
    flags.use_rec = flags.use_rec && w.alpha4 > 0;
    const auto& x_s = source.pixels;
    const auto& x_t = target.pixels;
    const auto& y_s = *source.labels;
    const bool generator_terms = flags.use_advI || flags.use_per || flags.use_rec;
    const bool need_transforms = generator_terms || flags.use_cls_st;
    const auto tap_names = required_taps(config_.perceptual);
    const bool need_taps = flags.use_per || flags.use_rec;

    apply_rates();
    LossReport report;

    // ---- phase 1: discriminators on detached codes and images
    Codes cs, ct;
    {
        torch::NoGradGuard no_grad;
        cs = encode(x_s, DomainTag::source, nets_);
        ct = encode(x_t, DomainTag::target, nets_);
    }
    if (flags.use_advF) {
        auto objective = advF_discriminator(nets_.disc_feature->forward(cs.structure.pooled),
                                            nets_.disc_feature->forward(ct.structure.pooled));
        report.advF_d = finite("advF_d", objective);
        const auto params = nets_.parameters(NetworkId::feature_disc);
        set_grads(-objective, params, false);
        optimizer(NetworkId::feature_disc).step();
    }
    // Generator outputs from the pre-update generator; reused by phase 2,
    // whose parameters do not change before its own update.
    QuadrupleOutputs quad;
    if (generator_terms) quad = transform_quadruple(cs, ct, nets_.generator);
    if (flags.use_advI) {
        auto loss_t = advI_discriminator(nets_.disc_image_target->forward(x_t),
                                         nets_.disc_image_target->forward(quad.x_st.detach()));
        auto loss_s = advI_discriminator(nets_.disc_image_source->forward(x_s),
                                         nets_.disc_image_source->forward(quad.x_ts.detach()));
        report.advI_d = finite("advI_d", loss_t + loss_s);
        set_grads(loss_t, nets_.parameters(NetworkId::image_disc_target), false);
        set_grads(loss_s, nets_.parameters(NetworkId::image_disc_source), false);
        optimizer(NetworkId::image_disc_target).step();
        optimizer(NetworkId::image_disc_source).step();
    }
    finish_phase(Phase::discriminators);

    FeatureTaps taps_s, taps_t;
    if (need_taps) {
        torch::NoGradGuard no_grad;
        for (const auto& [name, value] : nets_.perceptual->forward(torch::cat({x_s, x_t}), tap_names)) {
            auto parts = value.chunk(2);
            taps_s[name] = parts[0];
            taps_t[name] = parts[1];
        }
    }
    // Weighted generator-side objective a2 advI_g + a3 per + a4 rec of a quadruple.
    auto generator_objective = [&](const QuadrupleOutputs& q, LossReport* out) {
        auto total = zero_like_scalar(x_s);
        if (flags.use_advI) {
            auto adv = advI_generator(nets_.disc_image_target->forward(q.x_st)) +
                       advI_generator(nets_.disc_image_source->forward(q.x_ts));
            if (out) out->advI_g = finite("advI_g", adv);
            total = total + w.alpha2 * adv;
        }
        if (need_taps) {
            // One extractor pass over all four generated batches.
            const auto taps = nets_.perceptual->forward(torch::cat({q.x_st, q.x_ts, q.x_ss, q.x_tt}), tap_names);
            FeatureTaps taps_st, taps_ts, taps_ss, taps_tt;
            for (const auto& [name, value] : taps) {
                auto parts = value.chunk(4);
                taps_st[name] = parts[0];
                taps_ts[name] = parts[1];
                taps_ss[name] = parts[2];
                taps_tt[name] = parts[3];
            }
            if (flags.use_per) {
                auto per = perceptual_from_taps(config_.perceptual, taps_s, taps_t, taps_st, taps_ts).total();
                if (out) out->per = finite("per", per);
                total = total + w.alpha3 * per;
            }
            if (flags.use_rec) {
                auto rec = reconstruction_from_taps(config_.perceptual, taps_s, taps_t, taps_ss, taps_tt);
                if (out) out->rec = finite("rec", rec);
                total = total + w.alpha4 * rec;
            }
        }
        return total;
    };

    // ---- phase 2: generator
    if (generator_terms) {
        auto loss = generator_objective(quad, nullptr);
        finite("generator", loss);
        set_grads(loss, nets_.parameters(NetworkId::generator), false);
        optimizer(NetworkId::generator).step();
    }
    quad = {};
    finish_phase(Phase::generator);

    // ---- phase 3: texture encoders and the shared structure encoder
    cs = encode(x_s, DomainTag::source, nets_);
    ct = encode(x_t, DomainTag::target, nets_);
    auto texture_loss = zero_like_scalar(x_s);
    torch::Tensor x_st;
    if (need_transforms) {
        quad = transform_quadruple(cs, ct, nets_.generator);
        x_st = quad.x_st;
        if (generator_terms) texture_loss = generator_objective(quad, &report);
    }
    auto cls_s = cross_entropy(nets_.classifier->forward(cs.structure.pooled), y_s);
    report.cls_s = finite("cls_s", cls_s);
    // E_g minimizes texture_loss + rest; E_n only texture_loss. The shared
    // texture part is differentiated once for both parameter sets.
    auto rest = cls_s;
    if (flags.use_cls_st) {
        auto cls_st = cross_entropy(nets_.classifier->forward(nets_.structure->forward(x_st).pooled), y_s);
        report.cls_st = finite("cls_st", cls_st);
        rest = rest + cls_st;
    }
    if (flags.use_advF) {
        auto adv = advF_encoder(nets_.disc_feature->forward(cs.structure.pooled),
                                nets_.disc_feature->forward(ct.structure.pooled));
        report.advF_e = finite("advF_e", adv);
        rest = rest + w.alpha1 * adv;
    }
    const auto structure_params = nets_.parameters(NetworkId::structure_encoder);
    std::vector<torch::Tensor> shared_grads(structure_params.size());
    if (generator_terms) {
        auto params = nets_.parameters(NetworkId::texture_encoder_source);
        const auto target_params = nets_.parameters(NetworkId::texture_encoder_target);
        params.insert(params.end(), target_params.begin(), target_params.end());
        const auto n_texture = params.size();
        params.insert(params.end(), structure_params.begin(), structure_params.end());
        set_grads(texture_loss, params, /*retain_graph=*/true);
        for (std::size_t i = 0; i < structure_params.size(); ++i)
            shared_grads[i] = params[n_texture + i].grad();
    }
    set_grads(rest, structure_params, false);
    for (std::size_t i = 0; i < structure_params.size(); ++i) {
        if (!shared_grads[i].defined()) continue;
        auto p = structure_params[i];
        p.mutable_grad() = p.grad().defined() ? p.grad() + shared_grads[i] : shared_grads[i];
    }
    if (generator_terms) {
        optimizer(NetworkId::texture_encoder_source).step();
        optimizer(NetworkId::texture_encoder_target).step();
    }
    optimizer(NetworkId::structure_encoder).step();
    finish_phase(Phase::encoders);

    // ---- phase 4: classifier on features from the updated encoder
    {
        torch::Tensor f_s, f_st;
        {
            torch::NoGradGuard no_grad;
            f_s = nets_.structure->forward(x_s).pooled;
            if (flags.use_cls_st) f_st = nets_.structure->forward(x_st.detach()).pooled;
        }
        auto loss = cross_entropy(nets_.classifier->forward(f_s), y_s);
        if (flags.use_cls_st) loss = loss + cross_entropy(nets_.classifier->forward(f_st), y_s);
        finite("classifier", loss);
        set_grads(loss, nets_.parameters(NetworkId::classifier), false);
        optimizer(NetworkId::classifier).step();
    }
    finish_phase(Phase::classifier);

    ++iteration_;
    return total_loss(report, w, flags);
}

void Trainer::save(Archive& archive) const {
    archive.metadata["format"] = "glyphda-checkpoint";
    archive.metadata["iteration"] = std::to_string(iteration_);
    archive.metadata["config"] = serialize_config(config_);
    archive.metadata["config_digest"] = config_digest(config_);
    for (const auto& [name, t] : nets_.named_parameters()) archive.add("param/" + name, t);
    for (const auto& [name, t] : nets_.named_buffers()) archive.add("buffer/" + name, t);

    for (const auto& [id, opt] : optimizers_) {
        const auto params = nets_.parameters(id);
        const auto& state = opt->state();
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto it = state.find(params[i].unsafeGetTensorImpl());
            if (it == state.end()) continue;
            if (const auto* adam = dynamic_cast<const torch::optim::AdamParamState*>(it->second.get())) {
                archive.add(key_optim(id, i, "step"), torch::tensor(adam->step(), torch::kLong));
                archive.add(key_optim(id, i, "exp_avg"), adam->exp_avg());
                archive.add(key_optim(id, i, "exp_avg_sq"), adam->exp_avg_sq());
            } else if (const auto* sgd = dynamic_cast<const torch::optim::SGDParamState*>(it->second.get())) {
                archive.add(key_optim(id, i, "momentum_buffer"), sgd->momentum_buffer());
            }
        }
    }

    auto gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    archive.add("rng/torch", gen.get_state());
}

void Trainer::load(const Archive& archive) {
    if (archive.metadata.count("format") && archive.meta("format") != "glyphda-checkpoint")
        throw CheckpointError("not a checkpoint: format '" + archive.meta("format") + "'");
    std::vector<std::pair<std::string, torch::Tensor>> targets;
    for (const auto& [name, t] : nets_.named_parameters()) targets.emplace_back("param/" + name, t);
    for (const auto& [name, t] : nets_.named_buffers()) targets.emplace_back("buffer/" + name, t);
    assign_arrays(archive, targets);

    for (auto& [id, opt] : optimizers_) {
        const auto params = nets_.parameters(id);
        auto& state = opt->state();
        state.clear();
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto impl = params[i].unsafeGetTensorImpl();
            auto checked = [&](const char* field) {
                const auto& t = archive.at(key_optim(id, i, field));
                if (t.sizes() != params[i].sizes())
                    throw CheckpointError("shape mismatch for '" + key_optim(id, i, field) + "'");
                return t.to(params[i].scalar_type()).clone();
            };
            if (dynamic_cast<torch::optim::Adam*>(opt.get())) {
                const auto* step = archive.find(key_optim(id, i, "step"));
                if (!step) continue;
                auto s = std::make_unique<torch::optim::AdamParamState>();
                s->step(step->item<std::int64_t>());
                s->exp_avg(checked("exp_avg"));
                s->exp_avg_sq(checked("exp_avg_sq"));
                state[impl] = std::move(s);
            } else {
                if (!archive.find(key_optim(id, i, "momentum_buffer"))) continue;
                auto s = std::make_unique<torch::optim::SGDParamState>();
                s->momentum_buffer(checked("momentum_buffer"));
                state[impl] = std::move(s);
            }
        }
    }

    iteration_ = std::stoll(archive.meta("iteration"));
    auto gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(archive.at("rng/torch"));
}

// ------------------------------------------------------------ checkpoints

void checkpoint_save(const fs::path& path, const Trainer& trainer, const std::string& stream_state,
                     double best_target_accuracy) {
    Archive archive;
    trainer.save(archive);
    archive.metadata["stream_state"] = stream_state;
    archive.metadata["best_target_accuracy"] = format_double(best_target_accuracy);
    write_archive(path, archive);
}

CheckpointInfo checkpoint_load(const fs::path& path, Trainer& trainer) {
    auto archive = read_checkpoint(path);
    trainer.load(archive);
    CheckpointInfo info;
    info.iteration = trainer.iteration();
    info.config_digest = archive.meta("config_digest");
    if (auto it = archive.metadata.find("stream_state"); it != archive.metadata.end()) info.stream_state = it->second;
    if (auto it = archive.metadata.find("best_target_accuracy"); it != archive.metadata.end())
        info.best_target_accuracy = std::stod(it->second);
    if (info.config_digest != config_digest(trainer.config()))
        info.warning = "checkpoint config digest " + info.config_digest + " differs from the running config";
    return info;
}

Archive read_checkpoint(const fs::path& path) {
    auto archive = read_archive(path);
    if (!archive.metadata.count("format") || archive.meta("format") != "glyphda-checkpoint")
        throw CheckpointError(path.string() + " is not a checkpoint");
    return archive;
}

void load_network_state(const Archive& archive, Networks& nets) {
    std::vector<std::pair<std::string, torch::Tensor>> targets;
    for (const auto& [name, t] : nets.named_parameters()) targets.emplace_back("param/" + name, t);
    for (const auto& [name, t] : nets.named_buffers()) targets.emplace_back("buffer/" + name, t);
    assign_arrays(archive, targets);
}

// ------------------------------------------------------------ grids

torch::Tensor transform_grid(Networks& nets, const torch::Tensor& x_s, const torch::Tensor& x_t) {
    torch::NoGradGuard no_grad;
    const auto q = transform_quadruple(x_s, x_t, nets);
    auto source_rows = torch::cat({x_s, q.x_ss, q.x_st}, 3);  // [n, 3, H, 3W]
    auto target_rows = torch::cat({x_t, q.x_tt, q.x_ts}, 3);
    auto rows = torch::cat({source_rows, target_rows}, 0);
    auto image = torch::cat(rows.unbind(0), 1);  // [3, 2nH, 3W]
    return pixels_to_bytes(image);
}

namespace {

void write_grid_png(const fs::path& path, const torch::Tensor& bytes) {
    RasterImage raster;
    raster.height = static_cast<int>(bytes.size(0));
    raster.width = static_cast<int>(bytes.size(1));
    raster.channels = 3;
    auto c = bytes.contiguous();
    raster.bytes.assign(c.data_ptr<std::uint8_t>(), c.data_ptr<std::uint8_t>() + c.numel());
    write_png(path, raster);
}

// ------------------------------------------------------------ metrics

class MetricsCsv {
public:
    // Opens for append; on resume keeps only rows at or before `iteration`.
    MetricsCsv(const fs::path& path, std::int64_t resume_iteration) : path_(path) {
        std::vector<std::string> kept;
        if (resume_iteration > 0 && fs::exists(path)) {
            std::ifstream in(path);
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                if (std::stoll(line.substr(0, line.find(','))) <= resume_iteration) kept.push_back(line);
            }
        }
        out_.open(path, std::ios::trunc);
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        const auto& cols = metrics_columns();
        for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
        out_ << '\n';
        for (const auto& line : kept) out_ << line << '\n';
        out_.flush();
    }

    void row(std::int64_t iteration, const LossReport& r, const Trainer& trainer, double wall_clock) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f",
                      static_cast<long long>(iteration), r.cls_s, r.cls_st, r.advF_d, r.advF_e, r.advI_d, r.advI_g,
                      r.per, r.rec, r.total, trainer.learning_rate(OptimizerGroup::backbone),
                      trainer.learning_rate(OptimizerGroup::discriminators),
                      trainer.learning_rate(OptimizerGroup::generator), wall_clock);
        out_ << buf << '\n';
        out_.flush();
        if (!out_) throw IoError("write failed for " + path_.string());
    }

private:
    fs::path path_;
    std::ofstream out_;
};

} // namespace

const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> cols{"iteration", "cls_s",  "cls_st", "advF_d",     "advF_e",
                                               "advI_d",    "advI_g", "per",    "rec",        "total",
                                               "lr_backbone", "lr_disc", "lr_gen", "wall_clock"};
    return cols;
}

// ------------------------------------------------------------ fit

FitResult fit(const ExperimentConfig& config, const FitOptions& options) {
    const auto& model = config.model;
    const auto side = model.image_side;
    auto source = load_labeled(config.data.source, side);
    auto target = load_unlabeled(config.data.target, side);
    std::optional<LabeledSet> source_test, target_test;
    if (config.data.source_test.present()) source_test = load_labeled(config.data.source_test, side);
    if (config.data.target_test.present()) target_test = load_labeled(config.data.target_test, side);
    if (source.num_classes > model.num_classes)
        throw ConfigError("model.num_classes " + std::to_string(model.num_classes) + " is below the " +
                          std::to_string(source.num_classes) + " classes of the source corpus");

    FitResult result;
    result.output_dir = resolve_output_dir(config);
    fs::create_directories(result.output_dir);

    Trainer trainer(config, build_networks(model, config.perceptual, {config.trainer.seed, true}));
    AugmentOptions augment{config.data.augment_crop, config.data.crop_padding, config.data.flip_enabled()};
    BatchStream stream(source, target, config.data.batch_size, config.trainer.seed, augment);

    double best = -1;
    if (!options.resume_from.empty()) {
        auto info = checkpoint_load(options.resume_from, trainer);
        if (info.warning) std::cerr << "warning: " << *info.warning << '\n';
        if (!info.stream_state.empty()) stream.load_state(info.stream_state);
        best = info.best_target_accuracy;
    }

    result.metrics_csv = result.output_dir / "metrics.csv";
    MetricsCsv csv(result.metrics_csv, trainer.iteration());

    const auto rows = std::min<std::int64_t>({config.trainer.grid_rows, source.size(), target.size()});
    const auto grid_s = source.images.pixels(0, rows);
    const auto grid_t = target.pixels(0, rows);

    auto& nets = trainer.networks();
    auto evaluate_sets = [&] {
        std::pair<double, double> acc{-1, -1};
        if (source_test) acc.first = evaluate(nets.structure, nets.classifier, *source_test, DomainTag::source).accuracy;
        if (target_test) acc.second = evaluate(nets.structure, nets.classifier, *target_test, DomainTag::target).accuracy;
        return acc;
    };
    auto save = [&](const fs::path& path) {
        checkpoint_save(path, trainer, stream.save_state(), best);
        result.artifacts.push_back(path);
    };

    const auto& spec = config.trainer;
    const auto start = std::chrono::steady_clock::now();
    while (trainer.iteration() < spec.t_max) {
        auto [s, t] = stream.next();
        const auto report = trainer.step(s, t);
        const auto T = trainer.iteration();
        const bool last = T == spec.t_max;
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (T % spec.log_every == 0 || last) {
            csv.row(T, report, trainer, elapsed);
            if (!options.quiet)
                std::fprintf(stderr, "iter %lld  cls_s %.4f  cls_st %.4f  advF_e %.4f  advI_g %.4f  per %.4f  rec %.4f  %.1fs\n",
                             static_cast<long long>(T), report.cls_s, report.cls_st, report.advF_e, report.advI_g,
                             report.per, report.rec, elapsed);
        }
        if ((spec.eval_every > 0 && T % spec.eval_every == 0) || last) {
            const auto [src_acc, tgt_acc] = evaluate_sets();
            if (!options.quiet)
                std::fprintf(stderr, "iter %lld  source_acc %.4f  target_acc %.4f\n", static_cast<long long>(T),
                             src_acc, tgt_acc);
            if (tgt_acc > best) {
                best = tgt_acc;
                save(result.output_dir / "best.gdar");
            }
            if (last) {
                result.final_source_accuracy = src_acc;
                result.final_target_accuracy = tgt_acc;
            }
        }
        if ((spec.checkpoint_every > 0 && T % spec.checkpoint_every == 0) || last) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_%lld.gdar", static_cast<long long>(T));
            save(result.output_dir / name);
            result.last_checkpoint = result.output_dir / name;
            std::snprintf(name, sizeof name, "grid_%lld.png", static_cast<long long>(T));
            nets.train(false);
            write_grid_png(result.output_dir / name, transform_grid(nets, grid_s, grid_t));
            nets.train(true);
            result.artifacts.push_back(result.output_dir / name);
        }
    }
    result.iterations = trainer.iteration();
    result.best_target_accuracy = best;
    result.artifacts.push_back(result.metrics_csv);
    return result;
}

} // namespace glyphda
