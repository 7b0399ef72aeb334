#include "glyphda/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "glyphda/archive.hpp"
#include "glyphda/errors.hpp"

namespace glyphda {

namespace nn = torch::nn;

namespace {

int scaled(int channels, double multiplier) {
    return std::max(1, static_cast<int>(std::lround(channels * multiplier)));
}

nn::Conv2d conv(int in, int out, int kernel, int stride, int padding, bool bias = true) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(bias));
}

// Sequential whose forward is concrete, so it can nest inside another Sequential.
class StackImpl : public nn::SequentialImpl {
public:
    using nn::SequentialImpl::SequentialImpl;
    torch::Tensor forward(torch::Tensor x) { return nn::SequentialImpl::forward(x); }
};
TORCH_MODULE(Stack);

// ---- residual-18 pieces

class BasicBlockImpl : public nn::Module {
public:
    BasicBlockImpl(int in, int out, int stride) {
        conv1_ = register_module("conv1", conv(in, out, 3, stride, 1, false));
        bn1_ = register_module("bn1", nn::BatchNorm2d(out));
        conv2_ = register_module("conv2", conv(out, out, 3, 1, 1, false));
        bn2_ = register_module("bn2", nn::BatchNorm2d(out));
        if (stride != 1 || in != out) {
            downsample_ = register_module("downsample", Stack(conv(in, out, 1, stride, 0, false),
                                                                       nn::BatchNorm2d(out)));
        }
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto y = torch::relu(bn1_(conv1_(x)));
        y = bn2_(conv2_(y));
        return torch::relu(y + (downsample_ ? downsample_->forward(x) : x));
    }

private:
    nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
    Stack downsample_{nullptr};
};
TORCH_MODULE(BasicBlock);

Stack residual_stage(int in, int out, int stride) {
    return Stack(BasicBlock(in, out, stride), BasicBlock(out, out, 1));
}

at::Generator make_generator(std::uint64_t seed) { return at::detail::createCPUGenerator(seed); }

// Conv, deconv and linear weights ~ N(0, 0.02); biases zero.
void init_normal(nn::Module& root, std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    auto gen = make_generator(seed);
    for (const auto& m : root.modules(/*include_self=*/true)) {
        torch::Tensor weight, bias;
        if (auto* c = m->as<nn::Conv2d>()) {
            weight = c->weight;
            bias = c->bias;
        } else if (auto* d = m->as<nn::ConvTranspose2d>()) {
            weight = d->weight;
            bias = d->bias;
        } else if (auto* l = m->as<nn::Linear>()) {
            weight = l->weight;
            bias = l->bias;
        } else {
            continue;
        }
        weight.normal_(0.0, 0.02, gen);
        if (bias.defined()) bias.zero_();
    }
}

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
void init_fan_in_uniform(nn::Module& root, std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    auto gen = make_generator(seed);
    for (const auto& m : root.modules(/*include_self=*/true)) {
        torch::Tensor weight, bias;
        if (auto* c = m->as<nn::Conv2d>()) {
            weight = c->weight;
            bias = c->bias;
        } else if (auto* l = m->as<nn::Linear>()) {
            weight = l->weight;
            bias = l->bias;
        } else {
            continue;
        }
        const double fan_in = static_cast<double>(weight[0].numel());
        const double bound = 1.0 / std::sqrt(fan_in);
        weight.uniform_(-bound, bound, gen);
        if (bias.defined()) bias.uniform_(-bound, bound, gen);
    }
}

std::vector<std::pair<std::string, torch::Tensor>> state_arrays(const nn::Module& m) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& p : m.named_parameters(/*recurse=*/true)) out.emplace_back(p.key(), p.value());
    for (const auto& b : m.named_buffers(/*recurse=*/true)) out.emplace_back(b.key(), b.value());
    return out;
}

struct VggLayer {
    const char* name;
    int in_base;   // unscaled input width (0 = image)
    int out_base;
    bool pool_before;
};

// conv1_1 .. conv5_1 of the 16-layer topology.
constexpr VggLayer kVggLayers[] = {
    {"conv1_1", 0, 64, false},    {"conv1_2", 64, 64, false},   {"conv2_1", 64, 128, true},
    {"conv2_2", 128, 128, false}, {"conv3_1", 128, 256, true},  {"conv3_2", 256, 256, false},
    {"conv3_3", 256, 256, false}, {"conv4_1", 256, 512, true},  {"conv4_2", 512, 512, false},
    {"conv4_3", 512, 512, false}, {"conv5_1", 512, 512, true},
};

std::string tap_of(const char* conv_name) {
    std::string s(conv_name);
    return s.substr(s.size() - 2) == "_1" ? "relu" + s.substr(4) : std::string();
}

} // namespace

// ------------------------------------------------------------ structure encoder

StructureEncoderImpl::StructureEncoderImpl(BackboneKind kind, int image_side, int structure_width)
    : kind_(kind), width_(structure_width) {
    if (kind == BackboneKind::residual18) {
        if (image_side % 32 != 0) throw ShapeError("residual-18 needs an image side divisible by 32");
        width_ = 512;
        latent_side_ = image_side / 32;
        first_block_ = nn::Sequential(conv(3, 64, 7, 2, 3, false), nn::BatchNorm2d(64), nn::ReLU());
        rest_ = nn::Sequential(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)),
                               residual_stage(64, 64, 1), residual_stage(64, 128, 2),
                               residual_stage(128, 256, 2), residual_stage(256, 512, 2));
    } else {
        if (image_side % 4 != 0) throw ShapeError("small-conv needs an image side divisible by 4");
        latent_side_ = image_side / 4;
        first_block_ = nn::Sequential(conv(3, 32, 5, 1, 2), nn::ReLU(), nn::MaxPool2d(2));
        // The 1x1 convolution is the dense layer applied at every position,
        // so the pooled code is the spatial mean of the map.
        rest_ = nn::Sequential(conv(32, 64, 5, 1, 2), nn::ReLU(), nn::MaxPool2d(2),
                               conv(64, structure_width, 1, 1, 0), nn::ReLU());
    }
    register_module("first_block", first_block_);
    register_module("rest", rest_);
}

torch::Tensor StructureEncoderImpl::forward_spatial(const torch::Tensor& x) {
    return rest_->forward(first_block_->forward(x));
}

StructureCode StructureEncoderImpl::forward(const torch::Tensor& x) {
    auto spatial = forward_spatial(x);
    return {spatial, spatial.mean({2, 3})};
}

// ------------------------------------------------------------ texture encoder

TextureEncoderImpl::TextureEncoderImpl(const StructureEncoder& structure, double m)
    : shared_(structure->first_block()) {
    auto block = [](int in, int out, int k, int s, int p) {
        return Stack(conv(in, out, k, s, p), nn::BatchNorm2d(out), nn::ReLU());
    };
    if (structure->kind() == BackboneKind::residual18) {
        body_ = nn::Sequential(block(64, scaled(64, m), 7, 2, 3), block(scaled(64, m), scaled(128, m), 3, 2, 1),
                               block(scaled(128, m), scaled(256, m), 3, 2, 1),
                               block(scaled(256, m), scaled(256, m), 3, 2, 1),
                               block(scaled(256, m), scaled(256, m), 3, 2, 1),
                               nn::AdaptiveAvgPool2d(1), conv(scaled(256, m), kTextureWidth, 1, 1, 0));
    } else {
        body_ = nn::Sequential(block(32, scaled(64, m), 5, 1, 2), nn::MaxPool2d(2), nn::AdaptiveAvgPool2d(1),
                               conv(scaled(64, m), kTextureWidth, 1, 1, 0));
    }
    register_module("body", body_);
}

torch::Tensor TextureEncoderImpl::forward(const torch::Tensor& x) {
    return body_->forward(shared_->forward(x)).flatten(1);
}

// ------------------------------------------------------------ generator

GeneratorImpl::GeneratorImpl(int latent_channels, int latent_side, int image_side, double m)
    : latent_side_(latent_side), image_side_(image_side), stages_(0) {
    if (latent_side < 1 || image_side % latent_side != 0)
        throw ShapeError("generator: image side " + std::to_string(image_side) +
                         " is not a power-of-two multiple of latent side " + std::to_string(latent_side));
    int ratio = image_side / latent_side;
    while (ratio > 1 && ratio % 2 == 0) {
        ratio /= 2;
        ++stages_;
    }
    if (ratio != 1 || stages_ < 1 || stages_ > 5)
        throw ShapeError("generator: image side / latent side must be 2^k with 1 <= k <= 5");

    constexpr int kDeconv[] = {256, 128, 64, 32, 32};
    constexpr int kBlock[] = {128, 64, 32, 32, 32};
    body_ = nn::Sequential();
    int in = latent_channels;
    for (int i = 0; i < stages_; ++i) {
        const int up = scaled(kDeconv[i], m), out = scaled(kBlock[i], m);
        body_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, up, 4).stride(2).padding(1)));
        body_->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(up).affine(true)));
        body_->push_back(nn::ReLU());
        body_->push_back(conv(up, out, 3, 1, 1));
        body_->push_back(nn::GroupNorm(nn::GroupNormOptions(1, out)));  // layer norm over (C, H, W)
        body_->push_back(nn::ReLU());
        in = out;
    }
    body_->push_back(conv(in, 3, 1, 1, 0));
    body_->push_back(nn::Tanh());
    register_module("body", body_);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& latent) {
    if (latent.dim() != 4 || latent.size(2) != latent_side_ || latent.size(3) != latent_side_)
        throw ShapeError("generator: latent spatial size must be " + std::to_string(latent_side_) + "x" +
                         std::to_string(latent_side_) + " to reach " + std::to_string(image_side_) + " after " +
                         std::to_string(stages_) + " doubling stages");
    return body_->forward(latent);
}

// ------------------------------------------------------------ discriminators

ImageDiscriminatorImpl::ImageDiscriminatorImpl(int image_side, double m) {
    if (image_side < 32 || image_side % 16 != 0)
        throw ShapeError("image discriminator needs a side >= 32 divisible by 16");
    auto block = [](int in, int out, int k, int p) {
        return Stack(conv(in, out, k, 2, p), nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)),
                              nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    };
    const int c1 = scaled(64, m), c2 = scaled(128, m), c3 = scaled(256, m), c4 = scaled(512, m);
    features_ = register_module("features", nn::Sequential(block(3, c1, 6, 2), block(c1, c2, 4, 1),
                                                           block(c2, c3, 4, 1), block(c3, c4, 4, 1)));
    const int final_side = image_side / 16;
    score_ = register_module("score", nn::Linear(c4 * final_side * final_side, 1));
}

torch::Tensor ImageDiscriminatorImpl::forward(const torch::Tensor& x) {
    return score_(features_->forward(x).flatten(1));
}

FeatureDiscriminatorImpl::FeatureDiscriminatorImpl(int input_width, double m) {
    const int hidden = scaled(1024, m);
    body_ = register_module("body", nn::Sequential(nn::Linear(input_width, hidden), nn::ReLU(), nn::Dropout(0.5),
                                                   nn::Linear(hidden, hidden), nn::ReLU(), nn::Dropout(0.5),
                                                   nn::Linear(hidden, 1), nn::Sigmoid()));
}

torch::Tensor FeatureDiscriminatorImpl::forward(const torch::Tensor& features) { return body_->forward(features); }

ClassifierImpl::ClassifierImpl(int input_width, int num_classes) {
    if (num_classes < 2) throw ShapeError("classifier needs at least 2 classes");
    linear_ = register_module("linear", nn::Linear(input_width, num_classes));
}

torch::Tensor ClassifierImpl::forward(const torch::Tensor& features) { return linear_(features); }

// ------------------------------------------------------------ perceptual

PerceptualExtractorImpl::PerceptualExtractorImpl(double m) {
    for (const auto& layer : kVggLayers) {
        const int in = layer.in_base == 0 ? 3 : scaled(layer.in_base, m);
        const int out = scaled(layer.out_base, m);
        Conv c{torch::zeros({out, in, 3, 3}), torch::zeros({out})};
        // Buffers, not parameters: frozen, but still moved by to(dtype).
        c.weight = register_buffer(std::string(layer.name) + "_weight", c.weight);
        c.bias = register_buffer(std::string(layer.name) + "_bias", c.bias);
        convs_.push_back(c);
    }
}

FeatureTaps PerceptualExtractorImpl::forward(const torch::Tensor& x, const std::vector<std::string>& taps) {
    std::size_t deepest = 0;
    for (const auto& tap : taps) {
        bool found = false;
        for (std::size_t i = 0; i < std::size(kVggLayers); ++i)
            if (tap_of(kVggLayers[i].name) == tap) {
                deepest = std::max(deepest, i);
                found = true;
            }
        if (!found) throw ShapeError("perceptual extractor has no tap '" + tap + "'");
    }
    // Refresh views in case the buffers were replaced by to(dtype).
    std::size_t idx = 0;
    for (const auto& layer : kVggLayers) {
        convs_[idx].weight = named_buffers()[std::string(layer.name) + "_weight"];
        convs_[idx].bias = named_buffers()[std::string(layer.name) + "_bias"];
        ++idx;
    }

    const auto opts = torch::TensorOptions().dtype(x.scalar_type());
    const auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
    const auto stdev = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
    auto h = ((x + 1.0) * 0.5 - mean) / stdev;

    FeatureTaps out;
    for (std::size_t i = 0; i <= deepest; ++i) {
        if (kVggLayers[i].pool_before) h = torch::max_pool2d(h, 2, 2);
        h = torch::relu(torch::conv2d(h, convs_[i].weight, convs_[i].bias, 1, 1));
        const auto tap = tap_of(kVggLayers[i].name);
        if (!tap.empty() && std::find(taps.begin(), taps.end(), tap) != taps.end()) out[tap] = h;
    }
    return out;
}

std::vector<torch::Tensor> PerceptualExtractorImpl::frozen_parameters() const { return buffers(); }

std::vector<std::pair<std::string, torch::Tensor>> PerceptualExtractorImpl::named_frozen_parameters() const {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& b : named_buffers()) out.emplace_back(b.key(), b.value());
    return out;
}

void init_perceptual_random(PerceptualExtractor& extractor, std::uint64_t seed) {
    torch::NoGradGuard no_grad;
    auto gen = make_generator(seed);
    for (auto& [name, t] : extractor->named_frozen_parameters()) {
        if (name.ends_with("_bias")) {
            t.zero_();
        } else {
            const double fan_in = static_cast<double>(t[0].numel());
            t.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
        }
    }
}

// ------------------------------------------------------------ builders

StructureEncoder build_structure_encoder(BackboneKind kind, int image_side, int structure_width, std::uint64_t seed,
                                         const std::filesystem::path& weights) {
    StructureEncoder e(kind, image_side, structure_width);
    init_fan_in_uniform(*e, seed);
    if (!weights.empty()) {
        auto archive = read_archive(weights);
        if (auto it = archive.metadata.find("backbone"); it != archive.metadata.end() && it->second != to_string(kind))
            throw CheckpointError("weights file is for backbone '" + it->second + "', model uses '" +
                                  std::string(to_string(kind)) + "'");
        assign_arrays(archive, state_arrays(*e));
    }
    return e;
}

TextureEncoder build_texture_encoder(const StructureEncoder& structure, double m, std::uint64_t seed) {
    TextureEncoder e(structure, m);
    init_normal(*e, seed);
    return e;
}

Generator build_generator(int latent_channels, int latent_side, int image_side, double m, std::uint64_t seed) {
    Generator g(latent_channels, latent_side, image_side, m);
    init_normal(*g, seed);
    return g;
}

ImageDiscriminator build_image_discriminator(int image_side, double m, std::uint64_t seed) {
    ImageDiscriminator d(image_side, m);
    init_normal(*d, seed);
    return d;
}

FeatureDiscriminator build_feature_discriminator(int input_width, double m, std::uint64_t seed) {
    FeatureDiscriminator d(input_width, m);
    init_normal(*d, seed);
    return d;
}

Classifier build_classifier(int input_width, int num_classes, std::uint64_t seed) {
    Classifier c(input_width, num_classes);
    init_normal(*c, seed);
    return c;
}

PerceptualExtractor build_perceptual_extractor(double m, std::uint64_t seed, const std::filesystem::path& weights) {
    PerceptualExtractor p(m);
    if (weights.empty()) {
        init_perceptual_random(p, seed);
    } else {
        assign_arrays(read_archive(weights), p->named_frozen_parameters());
    }
    p->eval();
    return p;
}

// ------------------------------------------------------------ bundle

const std::vector<NetworkId>& all_network_ids() {
    static const std::vector<NetworkId> ids{
        NetworkId::structure_encoder, NetworkId::texture_encoder_source, NetworkId::texture_encoder_target,
        NetworkId::generator,         NetworkId::image_disc_source,      NetworkId::image_disc_target,
        NetworkId::feature_disc,      NetworkId::classifier,
    };
    return ids;
}

std::string_view to_string(NetworkId id) {
    switch (id) {
    case NetworkId::structure_encoder: return "structure_encoder";
    case NetworkId::texture_encoder_source: return "texture_encoder_source";
    case NetworkId::texture_encoder_target: return "texture_encoder_target";
    case NetworkId::generator: return "generator";
    case NetworkId::image_disc_source: return "image_disc_source";
    case NetworkId::image_disc_target: return "image_disc_target";
    case NetworkId::feature_disc: return "feature_disc";
    case NetworkId::classifier: return "classifier";
    }
    return "?";
}

torch::nn::Module& Networks::module(NetworkId id) {
    return const_cast<torch::nn::Module&>(std::as_const(*this).module(id));
}

const torch::nn::Module& Networks::module(NetworkId id) const {
    switch (id) {
    case NetworkId::structure_encoder: return *structure;
    case NetworkId::texture_encoder_source: return *texture_source;
    case NetworkId::texture_encoder_target: return *texture_target;
    case NetworkId::generator: return *generator;
    case NetworkId::image_disc_source: return *disc_image_source;
    case NetworkId::image_disc_target: return *disc_image_target;
    case NetworkId::feature_disc: return *disc_feature;
    case NetworkId::classifier: return *classifier;
    }
    throw std::logic_error("unknown network id");
}

std::vector<torch::Tensor> Networks::parameters(NetworkId id) const { return module(id).parameters(); }

std::vector<std::pair<std::string, torch::Tensor>> Networks::named_parameters() const {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (auto id : all_network_ids())
        for (const auto& p : module(id).named_parameters())
            out.emplace_back(std::string(to_string(id)) + "." + p.key(), p.value());
    return out;
}

std::vector<std::pair<std::string, torch::Tensor>> Networks::named_buffers() const {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (auto id : all_network_ids())
        for (const auto& b : module(id).named_buffers())
            out.emplace_back(std::string(to_string(id)) + "." + b.key(), b.value());
    return out;
}

void Networks::train(bool on) {
    for (auto id : all_network_ids()) module(id).train(on);
    perceptual->eval();
}

void Networks::to(torch::Dtype dtype) {
    for (auto id : all_network_ids()) module(id).to(dtype);
    perceptual->to(dtype);
}

Networks build_networks(const ModelSpec& model, const PerceptualSpec& perceptual, const BuildOptions& options) {
    // Each network draws from its own seed so adding one never perturbs another.
    auto seed_for = [&](std::uint64_t salt) { return options.seed * 0x100000001b3ULL + salt; };
    Networks n;
    const std::filesystem::path backbone_weights = options.load_weights ? model.pretrained_backbone : std::string();
    n.structure = build_structure_encoder(model.backbone, model.image_side, model.structure_width, seed_for(1),
                                          backbone_weights);
    const int width = n.structure->width();
    const int latent_side = n.structure->latent_side();
    n.texture_source = build_texture_encoder(n.structure, model.width_multiplier, seed_for(2));
    n.texture_target = build_texture_encoder(n.structure, model.width_multiplier, seed_for(3));
    n.generator = build_generator(width + kTextureWidth + 2, latent_side, model.image_side, model.width_multiplier,
                                  seed_for(4));
    n.disc_image_source = build_image_discriminator(model.image_side, model.width_multiplier, seed_for(5));
    n.disc_image_target = build_image_discriminator(model.image_side, model.width_multiplier, seed_for(6));
    n.disc_feature = build_feature_discriminator(width, model.width_multiplier, seed_for(7));
    n.classifier = build_classifier(width, model.num_classes, seed_for(8));
    const std::filesystem::path perceptual_weights = options.load_weights ? perceptual.weights_file : std::string();
    n.perceptual = build_perceptual_extractor(perceptual.width_multiplier, perceptual.seed, perceptual_weights);
    return n;
}

} // namespace glyphda
