#include "relaynet/twoway.hpp"

namespace relaynet {

namespace {

void require_twoway(const SystemConfig& cfg) {
  if (cfg.mode != Mode::TwoWay) throw Error(ErrorCode::InvalidArgument, "two-way routine called with a one-way configuration");
}

}  // namespace

int TwoWayIndexMap::partner(int k) const {
  if (k < 0 || k >= 2 * K) throw Error(ErrorCode::InvalidArgument, "user index out of range");
  return k < K ? k + K : k - K;
}

TwoWayIndexMap twoway_index_map(const SystemConfig& cfg) {
  require_twoway(cfg);
  return {cfg.K};
}

std::vector<CMatrix> twoway_mmse_receivers(const SystemConfig& cfg, const ChannelRealization& ch,
                                           const std::vector<CMatrix>& b, const CMatrix& f) {
  require_twoway(cfg);
  return mmse_receivers(cfg, ch, b, f);
}

RelayStep twoway_relay_sdp(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                           const std::vector<CMatrix>& w, const SubproblemOptions& opt) {
  require_twoway(cfg);
  return relay_subproblem(cfg, ch, b, w, opt);
}

SourceStep twoway_source_sdp(const SystemConfig& cfg, const ChannelRealization& ch, const CMatrix& f,
                             const std::vector<CMatrix>& w, const SubproblemOptions& opt) {
  require_twoway(cfg);
  return source_subproblem(cfg, ch, f, w, opt);
}

IterateResult twoway_iterate(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& init,
                             const IterateOptions& opt) {
  require_twoway(cfg);
  return iterate_minmax(cfg, ch, init, opt);
}

SimplifiedDesignOutput twoway_simplified(const SystemConfig& cfg, const ChannelRealization& ch,
                                         const SimplifiedOptions& opt) {
  require_twoway(cfg);
  return simplified_design(cfg, ch, opt);
}

}  // namespace relaynet
