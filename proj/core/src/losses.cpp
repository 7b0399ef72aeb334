#include "glyphda/losses.hpp"

#include <algorithm>

#include "glyphda/errors.hpp"

namespace glyphda {

namespace {

torch::Tensor safe_log(const torch::Tensor& p) { return torch::log(p.clamp(kLogClamp, 1.0 - kLogClamp)); }

void check_probabilities(const torch::Tensor& p) {
    if (p.numel() == 0) return;
    if (p.min().item<double>() < 0.0 || p.max().item<double>() > 1.0)
        throw NumericError("advF", "feature discriminator output outside [0, 1]");
}

const torch::Tensor& tap(const FeatureTaps& taps, const std::string& name) {
    auto it = taps.find(name);
    if (it == taps.end()) throw ShapeError("perceptual tap '" + name + "' missing");
    return it->second;
}

torch::Tensor l1(const torch::Tensor& a, const torch::Tensor& b) { return (a - b).abs().mean(); }

} // namespace

torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels) {
    if (logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != logits.size(0))
        throw ShapeError("cross_entropy expects logits [B, K] and labels [B]");
    const auto k = logits.size(1);
    if (labels.numel() > 0 && (labels.min().item<std::int64_t>() < 0 || labels.max().item<std::int64_t>() >= k))
        throw DataError("cross_entropy: label outside [0, " + std::to_string(k - 1) + "]");
    auto picked = torch::log_softmax(logits, 1).gather(1, labels.to(torch::kLong).unsqueeze(1));
    return -picked.mean();
}

torch::Tensor cls_source(Classifier& classifier, StructureEncoder& encoder, const torch::Tensor& x_s,
                         const torch::Tensor& y_s) {
    return cross_entropy(classifier->forward(encoder->forward(x_s).pooled), y_s);
}

torch::Tensor cls_transformed(Classifier& classifier, StructureEncoder& encoder, Generator& generator,
                              const torch::Tensor& z_st, const torch::Tensor& y_s) {
    return cls_source(classifier, encoder, generator->forward(z_st), y_s);
}

torch::Tensor advF_discriminator(const torch::Tensor& p_source, const torch::Tensor& p_target) {
    check_probabilities(p_source);
    check_probabilities(p_target);
    return safe_log(p_target).mean() + safe_log(1.0 - p_source).mean();
}

torch::Tensor advF_encoder(const torch::Tensor& p_source, const torch::Tensor& p_target) {
    check_probabilities(p_source);
    check_probabilities(p_target);
    return -(safe_log(p_source).mean() + safe_log(1.0 - p_target).mean());
}

torch::Tensor advI_discriminator(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
    return 0.5 * (real_scores - 1.0).pow(2).mean() + 0.5 * fake_scores.pow(2).mean();
}

torch::Tensor advI_generator(const torch::Tensor& fake_scores) { return 0.5 * (fake_scores - 1.0).pow(2).mean(); }

torch::Tensor channel_mean(const torch::Tensor& feature_map) {
    if (feature_map.dim() != 4 || feature_map.size(2) < 1 || feature_map.size(3) < 1)
        throw ShapeError("channel_mean expects a non-empty [B, C, H, W] map");
    return feature_map.mean({2, 3});
}

std::vector<std::string> required_taps(const PerceptualSpec& spec) {
    std::vector<std::string> out;
    for (const auto* list : {&spec.texture_taps, &spec.structure_taps, &spec.reconstruction_taps})
        for (const auto& t : *list)
            if (std::find(out.begin(), out.end(), t.name) == out.end()) out.push_back(t.name);
    return out;
}

PerceptualTerms perceptual_from_taps(const PerceptualSpec& spec, const FeatureTaps& x_s, const FeatureTaps& x_t,
                                     const FeatureTaps& x_st, const FeatureTaps& x_ts) {
    const auto options = x_s.empty() ? torch::TensorOptions() : x_s.begin()->second.options();
    PerceptualTerms out{torch::zeros({}, options), torch::zeros({}, options)};
    for (const auto& [name, w] : spec.structure_taps)
        out.structure = out.structure + w * (l1(tap(x_s, name), tap(x_st, name)) + l1(tap(x_t, name), tap(x_ts, name)));
    for (const auto& [name, w] : spec.texture_taps)
        out.texture = out.texture + w * (l1(channel_mean(tap(x_t, name)), channel_mean(tap(x_st, name))) +
                                         l1(channel_mean(tap(x_s, name)), channel_mean(tap(x_ts, name))));
    return out;
}

torch::Tensor reconstruction_from_taps(const PerceptualSpec& spec, const FeatureTaps& x_s, const FeatureTaps& x_t,
                                       const FeatureTaps& x_ss, const FeatureTaps& x_tt) {
    const auto options = x_s.empty() ? torch::TensorOptions() : x_s.begin()->second.options();
    auto out = torch::zeros({}, options);
    for (const auto& [name, w] : spec.reconstruction_taps)
        out = out + w * (l1(tap(x_t, name), tap(x_tt, name)) + l1(tap(x_s, name), tap(x_ss, name)));
    return out;
}

PerceptualTerms perceptual_loss(PerceptualExtractor& extractor, const PerceptualSpec& spec, const torch::Tensor& x_s,
                                const torch::Tensor& x_t, const torch::Tensor& x_st, const torch::Tensor& x_ts) {
    const auto taps = required_taps(spec);
    return perceptual_from_taps(spec, extractor->forward(x_s, taps), extractor->forward(x_t, taps),
                                extractor->forward(x_st, taps), extractor->forward(x_ts, taps));
}

torch::Tensor reconstruction_loss(PerceptualExtractor& extractor, const PerceptualSpec& spec,
                                  const torch::Tensor& x_s, const torch::Tensor& x_t, const torch::Tensor& x_ss,
                                  const torch::Tensor& x_tt) {
    const auto taps = required_taps(spec);
    return reconstruction_from_taps(spec, extractor->forward(x_s, taps), extractor->forward(x_t, taps),
                                    extractor->forward(x_ss, taps), extractor->forward(x_tt, taps));
}

LossReport total_loss(const LossReport& terms, const LossWeights& weights, const AblationFlags& flags) {
    LossReport r = terms;
    if (!flags.use_cls_st) r.cls_st = 0;
    if (!flags.use_advF) r.advF_d = r.advF_e = 0;
    if (!flags.use_advI) r.advI_d = r.advI_g = 0;
    if (!flags.use_per) r.per = 0;
    if (!flags.use_rec) r.rec = 0;
    r.total = r.cls_s + r.cls_st + weights.alpha1 * r.advF_e + weights.alpha2 * r.advI_g + weights.alpha3 * r.per +
              weights.alpha4 * r.rec;
    return r;
}

torch::Tensor total_loss(const LossTerms& terms, const LossWeights& weights, const AblationFlags& flags) {
    auto total = terms.cls_s;
    if (flags.use_cls_st) total = total + terms.cls_st;
    if (flags.use_advF) total = total + weights.alpha1 * terms.advF_e;
    if (flags.use_advI) total = total + weights.alpha2 * terms.advI_g;
    if (flags.use_per) total = total + weights.alpha3 * terms.per;
    if (flags.use_rec) total = total + weights.alpha4 * terms.rec;
    return total;
}

} // namespace glyphda
