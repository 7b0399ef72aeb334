#include <doctest.h>

#include <set>

#include "glyphda/config.hpp"
#include "glyphda/errors.hpp"
#include "glyphda/networks.hpp"
#include "test_support.hpp"

using namespace glyphda;

namespace {

ModelSpec small_model() {
    ModelSpec m;
    m.backbone = BackboneKind::small_conv;
    m.image_side = 32;
    m.num_classes = 10;
    m.structure_width = 32;
    m.width_multiplier = 0.125;
    return m;
}

PerceptualSpec small_perceptual() {
    auto p = PerceptualSpec::defaults();
    p.width_multiplier = 0.125;
    return p;
}

std::set<const void*> storage(const std::vector<torch::Tensor>& ts) {
    std::set<const void*> out;
    for (const auto& t : ts) out.insert(t.data_ptr());
    return out;
}

} // namespace

TEST_CASE("small-conv shapes") {
    auto nets = build_networks(small_model(), small_perceptual(), {});
    auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
    auto code = nets.structure->forward(x);
    CHECK(code.spatial.sizes() == torch::IntArrayRef{2, 32, 8, 8});
    CHECK(code.pooled.sizes() == torch::IntArrayRef{2, 32});
    CHECK(torch::allclose(code.pooled, code.spatial.mean({2, 3})));
    CHECK(nets.structure->latent_side() == 8);

    CHECK(nets.texture_source->forward(x).sizes() == torch::IntArrayRef{2, kTextureWidth});
    CHECK(nets.generator->stages() == 2);
    auto img = nets.generator->forward(torch::randn({2, 32 + 10, 8, 8}));
    CHECK(img.sizes() == torch::IntArrayRef{2, 3, 32, 32});
    CHECK(img.abs().max().item<float>() <= 1.0f);

    CHECK(nets.disc_image_source->forward(x).sizes() == torch::IntArrayRef{2, 1});
    auto p = nets.disc_feature->forward(code.pooled);
    CHECK(p.sizes() == torch::IntArrayRef{2, 1});
    CHECK(((p > 0) & (p < 1)).all().item<bool>());
    CHECK(nets.classifier->forward(code.pooled).sizes() == torch::IntArrayRef{2, 10});
}

TEST_CASE("residual-18 shapes at full resolution") {
    auto e = build_structure_encoder(BackboneKind::residual18, 224, 512, 1);
    auto code = e->forward(torch::zeros({1, 3, 224, 224}));
    CHECK(code.spatial.sizes() == torch::IntArrayRef{1, 512, 7, 7});
    auto g = build_generator(522, 7, 224, 0.125, 2);
    CHECK(g->stages() == 5);
    CHECK(g->forward(torch::zeros({1, 522, 7, 7})).sizes() == torch::IntArrayRef{1, 3, 224, 224});
}

TEST_CASE("shape contracts") {
    CHECK_THROWS_AS(build_image_discriminator(24, 0.125, 0), ShapeError);
    CHECK_THROWS_AS(build_image_discriminator(16, 0.125, 0), ShapeError);
    CHECK_THROWS_AS(build_generator(42, 8, 36, 0.125, 0), ShapeError);
    auto g = build_generator(42, 8, 32, 0.125, 0);
    CHECK_THROWS_AS(g->forward(torch::zeros({1, 42, 7, 7})), ShapeError);
    auto phi = build_perceptual_extractor(0.125, 0);
    CHECK_THROWS_AS(phi->forward(torch::zeros({1, 3, 16, 16}), {"relu6_1"}), ShapeError);
}

TEST_CASE("texture encoders alias the first structure block") {
    auto nets = build_networks(small_model(), small_perceptual(), {});
    const auto first = storage(nets.structure->first_block()->parameters());
    REQUIRE_FALSE(first.empty());
    for (const auto& t : nets.texture_source->parameters()) CHECK(first.count(t.data_ptr()) == 0);
    for (const auto& t : nets.texture_target->parameters()) CHECK(first.count(t.data_ptr()) == 0);
    CHECK(storage(nets.texture_source->parameters()) != storage(nets.texture_target->parameters()));

    // An optimizer step on E_g's copy is visible through E_n bit-exactly.
    auto x = torch::rand({2, 3, 32, 32});
    auto before = nets.texture_source->forward(x).detach();
    torch::optim::SGD sgd(nets.structure->parameters(), torch::optim::SGDOptions(0.1));
    nets.structure->forward(x).pooled.sum().backward();
    sgd.step();
    auto after = nets.texture_source->forward(x).detach();
    CHECK_FALSE(torch::equal(before, after));

    auto copy = nets.structure->first_block()->forward(x);
    CHECK(torch::equal(copy, nets.structure->first_block()->forward(x)));
}

TEST_CASE("perceptual extractor is frozen and seeded") {
    auto a = build_perceptual_extractor(0.125, 5);
    auto b = build_perceptual_extractor(0.125, 5);
    auto c = build_perceptual_extractor(0.125, 6);
    CHECK(a->parameters().empty());
    for (const auto& t : a->frozen_parameters()) CHECK_FALSE(t.requires_grad());
    CHECK(a->named_frozen_parameters().size() == 2 * 11);  // conv1_1 .. conv5_1

    auto x = torch::rand({1, 3, 16, 16}) * 2 - 1;
    const auto& names = perceptual_tap_names();
    auto ta = a->forward(x, names), tb = b->forward(x, names), tc = c->forward(x, names);
    CHECK(ta.size() == 5);
    for (const auto& n : names) {
        CHECK(torch::equal(ta[n], tb[n]));
        CHECK_FALSE(torch::equal(ta[n], tc[n]));
    }
    CHECK(ta["relu1_1"].size(1) == 8);
    CHECK(ta["relu5_1"].size(2) == 1);

    auto shallow = a->forward(x, {"relu2_1"});
    CHECK(shallow.size() == 1);
    CHECK(torch::equal(shallow["relu2_1"], ta["relu2_1"]));

    // The trainable bundle never lists the extractor.
    auto nets = build_networks(small_model(), small_perceptual(), {});
    for (const auto& [name, t] : nets.named_parameters()) CHECK(name.find("perceptual") == std::string::npos);
}

TEST_CASE("initialization is seeded and follows the normal(0, 0.02) rule") {
    auto a = build_networks(small_model(), small_perceptual(), {.seed = 3});
    auto b = build_networks(small_model(), small_perceptual(), {.seed = 3});
    auto c = build_networks(small_model(), small_perceptual(), {.seed = 4});
    auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(torch::equal(pa[i].second, pb[i].second));
        any_diff = any_diff || !torch::equal(pa[i].second, pc[i].second);
    }
    CHECK(any_diff);

    auto w = torch::cat({a.generator->parameters().front().flatten(), a.classifier->parameters().front().flatten()});
    CHECK(w.std().item<double>() == doctest::Approx(0.02).epsilon(0.15));
    CHECK(std::abs(w.mean().item<double>()) < 0.005);

    std::set<NetworkId> seen;
    for (auto id : all_network_ids()) {
        seen.insert(id);
        CHECK_FALSE(a.parameters(id).empty());
    }
    CHECK(seen.size() == 8);
}
