#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "glyphda/config.hpp"
#include "glyphda/networks.hpp"

namespace glyphda {

/// Per-term scalars of one iteration. Disabled terms are exactly zero.
struct LossReport {
    double cls_s = 0;
    double cls_st = 0;
    double advF_d = 0;  // discriminator objective, a log-likelihood (<= 0)
    double advF_e = 0;  // encoder-side loss (>= 0)
    double advI_d = 0;  // sum over both image discriminators
    double advI_g = 0;  // sum over both transforms
    double per = 0;
    double rec = 0;
    double total = 0;
};

// Mean of -log softmax(logits)[label]. Throws DataError on labels outside [0, K).
torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels);

torch::Tensor cls_source(Classifier& classifier, StructureEncoder& encoder, const torch::Tensor& x_s,
                         const torch::Tensor& y_s);
// Classifies transformed images x_st = G(z_st) against the source labels.
torch::Tensor cls_transformed(Classifier& classifier, StructureEncoder& encoder, Generator& generator,
                              const torch::Tensor& z_st, const torch::Tensor& y_s);

// Feature-level adversarial terms over D_F probabilities of P(target).
// The discriminator objective E[log D(f_t)] + E[log(1 - D(f_s))] is maximized
// by D_F; the encoder loss -(E[log D(f_s)] + E[log(1 - D(f_t))]) swaps the
// domain labels. Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
torch::Tensor advF_discriminator(const torch::Tensor& p_source, const torch::Tensor& p_target);
torch::Tensor advF_encoder(const torch::Tensor& p_source, const torch::Tensor& p_target);
inline constexpr double kLogClamp = 1e-7;

// Least-squares image adversarial terms over raw D_I scores.
torch::Tensor advI_discriminator(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);
torch::Tensor advI_generator(const torch::Tensor& fake_scores);

// [B, C, H, W] -> [B, C] spatial mean.
torch::Tensor channel_mean(const torch::Tensor& feature_map);

/// Perceptual loss split into its raw-activation (structure) and
/// channel-mean (texture) parts.
struct PerceptualTerms {
    torch::Tensor structure;
    torch::Tensor texture;
    torch::Tensor total() const { return structure + texture; }
};

// Every tap any of the spec's three lists names.
std::vector<std::string> required_taps(const PerceptualSpec& spec);

// Tap-level forms, used directly by the trainer (which caches the taps of
// real images) and by property tests that perturb tap features.
PerceptualTerms perceptual_from_taps(const PerceptualSpec& spec, const FeatureTaps& x_s, const FeatureTaps& x_t,
                                     const FeatureTaps& x_st, const FeatureTaps& x_ts);
torch::Tensor reconstruction_from_taps(const PerceptualSpec& spec, const FeatureTaps& x_s, const FeatureTaps& x_t,
                                       const FeatureTaps& x_ss, const FeatureTaps& x_tt);

PerceptualTerms perceptual_loss(PerceptualExtractor& extractor, const PerceptualSpec& spec, const torch::Tensor& x_s,
                                const torch::Tensor& x_t, const torch::Tensor& x_st, const torch::Tensor& x_ts);
torch::Tensor reconstruction_loss(PerceptualExtractor& extractor, const PerceptualSpec& spec,
                                  const torch::Tensor& x_s, const torch::Tensor& x_t, const torch::Tensor& x_ss,
                                  const torch::Tensor& x_tt);

/// Weighted total over enabled terms:
/// cls_s + cls_st + a1 advF_e + a2 advI_g + a3 per + a4 rec.
/// Disabled terms are zeroed in the returned report.
LossReport total_loss(const LossReport& terms, const LossWeights& weights, const AblationFlags& flags);

// Tensor form of the same weighted sum, for differentiating the total.
struct LossTerms {
    torch::Tensor cls_s, cls_st, advF_e, advI_g, per, rec;
};
torch::Tensor total_loss(const LossTerms& terms, const LossWeights& weights, const AblationFlags& flags);

} // namespace glyphda
