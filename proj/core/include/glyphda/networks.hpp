#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "glyphda/config.hpp"

namespace glyphda {

/// Output of the shared structure encoder.
struct StructureCode {
    torch::Tensor spatial;  // [B, C_g, h', w'] final pre-pooling features
    torch::Tensor pooled;   // [B, C_g] spatial mean of `spatial`
};

inline constexpr int kTextureWidth = 8;

// Map from tap name to activation [B, C_l, H_l, W_l].
using FeatureTaps = std::map<std::string, torch::Tensor>;

// ------------------------------------------------------------ encoders

/// Shared structure encoder E_g. The first block is exposed so the texture
/// encoders can alias its parameters.
class StructureEncoderImpl : public torch::nn::Module {
public:
    StructureEncoderImpl(BackboneKind kind, int image_side, int structure_width);

    StructureCode forward(const torch::Tensor& x);
    torch::Tensor forward_spatial(const torch::Tensor& x);

    BackboneKind kind() const { return kind_; }
    int width() const { return width_; }
    int latent_side() const { return latent_side_; }
    torch::nn::Sequential first_block() const { return first_block_; }

private:
    BackboneKind kind_;
    int width_;
    int latent_side_;
    torch::nn::Sequential first_block_{nullptr};
    torch::nn::Sequential rest_{nullptr};
};
TORCH_MODULE(StructureEncoder);

/// Domain-private texture encoder E_n. Runs the structure encoder's first
/// block (shared, not owned: excluded from parameters()) and then its own
/// stack down to an 8-wide code.
class TextureEncoderImpl : public torch::nn::Module {
public:
    TextureEncoderImpl(const StructureEncoder& structure, double width_multiplier);

    torch::Tensor forward(const torch::Tensor& x);  // [B, 8]

private:
    torch::nn::Sequential shared_{nullptr};
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(TextureEncoder);

// ------------------------------------------------------------ generator

/// Decoder G: `stages` groups of {Deconv(k4 s2), IN, ReLU, Conv-LN-ReLU}
/// followed by Conv(k1 n3) and Tanh. Each group doubles the spatial size.
class GeneratorImpl : public torch::nn::Module {
public:
    GeneratorImpl(int latent_channels, int latent_side, int image_side, double width_multiplier);

    torch::Tensor forward(const torch::Tensor& latent);

    int stages() const { return stages_; }

private:
    int latent_side_;
    int image_side_;
    int stages_;
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(Generator);

// ------------------------------------------------------------ discriminators

/// Image discriminator D_I: four Conv-IN-LReLU(0.2) blocks and a linear unit
/// producing one raw score per image.
class ImageDiscriminatorImpl : public torch::nn::Module {
public:
    ImageDiscriminatorImpl(int image_side, double width_multiplier);
    torch::Tensor forward(const torch::Tensor& x);  // [B, 1]

private:
    torch::nn::Sequential features_{nullptr};
    torch::nn::Linear score_{nullptr};
};
TORCH_MODULE(ImageDiscriminator);

/// Feature discriminator D_F over pooled structure codes; outputs P(target).
class FeatureDiscriminatorImpl : public torch::nn::Module {
public:
    FeatureDiscriminatorImpl(int input_width, double width_multiplier);
    torch::Tensor forward(const torch::Tensor& features);  // [B, 1] in (0, 1)

private:
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(FeatureDiscriminator);

/// Linear classifier C over pooled structure codes.
class ClassifierImpl : public torch::nn::Module {
public:
    ClassifierImpl(int input_width, int num_classes);
    torch::Tensor forward(const torch::Tensor& features);  // [B, K] logits

private:
    torch::nn::Linear linear_{nullptr};
};
TORCH_MODULE(Classifier);

// ------------------------------------------------------------ perceptual

/// Frozen 16-layer VGG-style extractor up to relu5_1. Channel widths are
/// (64, 128, 256, 512, 512) scaled by width_multiplier. Inputs in [-1, 1] are
/// mapped to ImageNet-normalized range first.
class PerceptualExtractorImpl : public torch::nn::Module {
public:
    explicit PerceptualExtractorImpl(double width_multiplier);

    // Only computes as deep as the deepest requested tap. Throws ShapeError
    // when a requested tap does not exist.
    FeatureTaps forward(const torch::Tensor& x, const std::vector<std::string>& taps);

    // Parameters live in frozen_ rather than parameters(); gradients are
    // never requested for them.
    std::vector<torch::Tensor> frozen_parameters() const;
    std::vector<std::pair<std::string, torch::Tensor>> named_frozen_parameters() const;

private:
    struct Conv {
        torch::Tensor weight;
        torch::Tensor bias;
    };
    std::vector<Conv> convs_;
};
TORCH_MODULE(PerceptualExtractor);

// Seeded normal initialization with He scaling (the fixed-random fallback).
void init_perceptual_random(PerceptualExtractor& extractor, std::uint64_t seed);

// ------------------------------------------------------------ bundle

enum class NetworkId {
    structure_encoder,
    texture_encoder_source,
    texture_encoder_target,
    generator,
    image_disc_source,
    image_disc_target,
    feature_disc,
    classifier,
};

const std::vector<NetworkId>& all_network_ids();
std::string_view to_string(NetworkId id);

/// Every trainable network plus the frozen perceptual extractor.
struct Networks {
    StructureEncoder structure{nullptr};
    TextureEncoder texture_source{nullptr};
    TextureEncoder texture_target{nullptr};
    Generator generator{nullptr};
    ImageDiscriminator disc_image_source{nullptr};
    ImageDiscriminator disc_image_target{nullptr};
    FeatureDiscriminator disc_feature{nullptr};
    Classifier classifier{nullptr};
    PerceptualExtractor perceptual{nullptr};

    torch::nn::Module& module(NetworkId id);
    const torch::nn::Module& module(NetworkId id) const;

    std::vector<torch::Tensor> parameters(NetworkId id) const;

    // Named parameters and buffers of every trainable network, prefixed by
    // network name. The perceptual extractor is excluded.
    std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;
    std::vector<std::pair<std::string, torch::Tensor>> named_buffers() const;

    void train(bool on = true);
    void to(torch::Dtype dtype);
};

struct BuildOptions {
    std::uint64_t seed = 0;
    bool load_weights = true;  // read pretrained/perceptual weight files when configured
};

/// Builds and initializes all networks from the model/perceptual config.
/// Conv, deconv and linear weights ~ N(0, 0.02) with zero biases, except the
/// structure backbone which uses Kaiming-uniform unless pretrained weights
/// are loaded.
Networks build_networks(const ModelSpec& model, const PerceptualSpec& perceptual, const BuildOptions& options);

// Individual builders, each deterministic given `seed`.
StructureEncoder build_structure_encoder(BackboneKind kind, int image_side, int structure_width,
                                         std::uint64_t seed, const std::filesystem::path& weights = {});
TextureEncoder build_texture_encoder(const StructureEncoder& structure, double width_multiplier, std::uint64_t seed);
Generator build_generator(int latent_channels, int latent_side, int image_side, double width_multiplier,
                          std::uint64_t seed);
ImageDiscriminator build_image_discriminator(int image_side, double width_multiplier, std::uint64_t seed);
FeatureDiscriminator build_feature_discriminator(int input_width, double width_multiplier, std::uint64_t seed);
Classifier build_classifier(int input_width, int num_classes, std::uint64_t seed);
PerceptualExtractor build_perceptual_extractor(double width_multiplier, std::uint64_t seed,
                                               const std::filesystem::path& weights = {});

} // namespace glyphda
