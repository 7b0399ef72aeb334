#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "glyphda/data.hpp"
#include "glyphda/networks.hpp"

namespace glyphda {

/// Structure and texture codes of one batch.
struct Codes {
    StructureCode structure;
    torch::Tensor texture;  // [B, 8]
    DomainTag domain = DomainTag::source;
};

// Structure from the shared encoder, texture from the encoder of `domain`.
Codes encode(const torch::Tensor& pixels, DomainTag domain, Networks& nets);
inline Codes encode(const ImageBatch& batch, Networks& nets) { return encode(batch.pixels, batch.domain, nets); }

/// Generator input: [structure | texture | one-hot domain] along channels,
/// with texture and domain broadcast over every spatial position.
struct LatentAssembly {
    torch::Tensor structure;  // [B, C_g, h, w]
    torch::Tensor texture;    // [B, 8]
    torch::Tensor domain;     // [B, 2]
    torch::Tensor assembled;  // [B, C_g + 10, h, w]
};

LatentAssembly assemble(const torch::Tensor& structure, const torch::Tensor& texture, DomainTag domain);

// Splits an assembled code back into its parts; texture and domain are read
// from spatial position (0, 0).
LatentAssembly decompose(const torch::Tensor& assembled, std::int64_t structure_channels);

/// Reconstructions and texture-swapped transforms of an index-paired batch.
struct QuadrupleOutputs {
    torch::Tensor x_ss;  // G(f_g^s, f_n^s, s)
    torch::Tensor x_tt;  // G(f_g^t, f_n^t, t)
    torch::Tensor x_st;  // G(f_g^s, f_n^t, t)
    torch::Tensor x_ts;  // G(f_g^t, f_n^s, s)
};

QuadrupleOutputs transform_quadruple(const Codes& source, const Codes& target, Generator& generator);
QuadrupleOutputs transform_quadruple(const torch::Tensor& x_s, const torch::Tensor& x_t, Networks& nets);

} // namespace glyphda
