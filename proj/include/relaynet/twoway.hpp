#pragma once

#include "relaynet/oneway.hpp"

// Two-way entry points. Each checks the configuration is in two-way mode and
// runs the shared link-model routine: receiver k estimates its partner's
// streams through H_k^T F and cancels its own contribution.
namespace relaynet {

struct TwoWayIndexMap {
  int K = 0;
  int partner(int k) const;
};
TwoWayIndexMap twoway_index_map(const SystemConfig& cfg);

std::vector<CMatrix> twoway_mmse_receivers(const SystemConfig& cfg, const ChannelRealization& ch,
                                           const std::vector<CMatrix>& b, const CMatrix& f);
RelayStep twoway_relay_sdp(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                           const std::vector<CMatrix>& w, const SubproblemOptions& opt = {});
SourceStep twoway_source_sdp(const SystemConfig& cfg, const ChannelRealization& ch, const CMatrix& f,
                             const std::vector<CMatrix>& w, const SubproblemOptions& opt = {});
IterateResult twoway_iterate(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& init,
                             const IterateOptions& opt = {});
SimplifiedDesignOutput twoway_simplified(const SystemConfig& cfg, const ChannelRealization& ch,
                                         const SimplifiedOptions& opt = {});

}  // namespace relaynet
