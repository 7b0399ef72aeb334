#include "glyphda/latent.hpp"

#include "glyphda/errors.hpp"

namespace glyphda {

Codes encode(const torch::Tensor& pixels, DomainTag domain, Networks& nets) {
    auto& texture = domain == DomainTag::source ? nets.texture_source : nets.texture_target;
    return {nets.structure->forward(pixels), texture->forward(pixels), domain};
}

LatentAssembly assemble(const torch::Tensor& structure, const torch::Tensor& texture, DomainTag domain) {
    if (structure.dim() != 4 || texture.dim() != 2)
        throw ShapeError("assemble expects structure [B, C, h, w] and texture [B, 8]");
    const auto b = structure.size(0), h = structure.size(2), w = structure.size(3);
    if (texture.size(0) != b)
        throw ShapeError("assemble: batch mismatch (structure " + std::to_string(b) + ", texture " +
                         std::to_string(texture.size(0)) + ")");
    auto tag = domain_one_hot(domain, structure.options()).unsqueeze(0).expand({b, 2});
    auto broadcast = [&](const torch::Tensor& v) { return v.view({b, v.size(1), 1, 1}).expand({b, v.size(1), h, w}); };
    return {structure, texture, tag, torch::cat({structure, broadcast(texture), broadcast(tag)}, 1)};
}

LatentAssembly decompose(const torch::Tensor& assembled, std::int64_t c) {
    if (assembled.dim() != 4 || assembled.size(1) != c + kTextureWidth + 2)
        throw ShapeError("decompose: expected " + std::to_string(c + kTextureWidth + 2) + " channels");
    using torch::indexing::Slice;
    auto corner = assembled.index({Slice(), Slice(), 0, 0});
    return {assembled.index({Slice(), Slice(0, c)}), corner.index({Slice(), Slice(c, c + kTextureWidth)}),
            corner.index({Slice(), Slice(c + kTextureWidth, c + kTextureWidth + 2)}), assembled};
}

QuadrupleOutputs transform_quadruple(const Codes& s, const Codes& t, Generator& generator) {
    if (s.texture.size(0) != t.texture.size(0))
        throw ShapeError("transform_quadruple: per-domain batch sizes differ");
    const auto& gs = s.structure.spatial;
    const auto& gt = t.structure.spatial;
    // G treats samples independently (instance and layer norms only), so the
    // four decodes run as one batch.
    const auto z = torch::cat({assemble(gs, s.texture, DomainTag::source).assembled,
                               assemble(gt, t.texture, DomainTag::target).assembled,
                               assemble(gs, t.texture, DomainTag::target).assembled,
                               assemble(gt, s.texture, DomainTag::source).assembled});
    auto parts = generator->forward(z).chunk(4);
    return {parts[0], parts[1], parts[2], parts[3]};
}

QuadrupleOutputs transform_quadruple(const torch::Tensor& x_s, const torch::Tensor& x_t, Networks& nets) {
    return transform_quadruple(encode(x_s, DomainTag::source, nets), encode(x_t, DomainTag::target, nets),
                               nets.generator);
}

} // namespace glyphda
