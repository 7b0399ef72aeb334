#pragma once

#include <map>
#include <ostream>
#include <set>
#include <vector>

#include "glyphda/trainer.hpp"

namespace glyphda {
inline std::ostream& operator<<(std::ostream& os, NetworkId id) { return os << to_string(id); }
} // namespace glyphda

namespace glyphda::test {

using NetworkSet = std::set<NetworkId>;

// Networks each phase must update, per the four-phase schedule.
inline std::map<Phase, NetworkSet> expected_scoping() {
    using N = NetworkId;
    return {{Phase::discriminators, {N::feature_disc, N::image_disc_source, N::image_disc_target}},
            {Phase::generator, {N::generator}},
            {Phase::encoders, {N::structure_encoder, N::texture_encoder_source, N::texture_encoder_target}},
            {Phase::classifier, {N::classifier}}};
}

// Runs one step and records which networks' parameters changed in each phase
// (bit-level comparison against a snapshot taken before the phase).
inline std::map<Phase, NetworkSet> observe_scoping(Trainer& trainer, const ImageBatch& source,
                                                   const ImageBatch& target) {
    auto& nets = trainer.networks();
    std::map<NetworkId, std::vector<torch::Tensor>> snapshot;
    auto take = [&] {
        for (auto id : all_network_ids()) {
            snapshot[id].clear();
            for (const auto& p : nets.parameters(id)) snapshot[id].push_back(p.detach().clone());
        }
    };
    std::map<Phase, NetworkSet> changed;
    take();
    trainer.set_phase_observer([&](Phase phase) {
        auto& set = changed[phase];
        for (auto id : all_network_ids()) {
            const auto now = nets.parameters(id);
            for (std::size_t i = 0; i < now.size(); ++i)
                if (!torch::equal(now[i], snapshot[id][i])) {
                    set.insert(id);
                    break;
                }
        }
        take();
    });
    trainer.step(source, target);
    trainer.set_phase_observer(nullptr);
    return changed;
}

} // namespace glyphda::test
