#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "relaynet/linalg.hpp"

namespace relaynet {

enum class Mode { OneWay, TwoWay };
const char* to_string(Mode m);
Mode parse_mode(const std::string& s);

/// Node, antenna and power parameters. Indices are 0-based.
///
/// One-way: K sources transmit (n_s[k] antennas) to K destinations
/// (n_d[k] antennas); n_b, p_s have K entries.
/// Two-way: 2K transmitters. Transmitter k < K has n_s[k] antennas,
/// transmitter K+k has n_d[k] antennas; n_b, p_s have 2K entries.
struct SystemConfig {
  int K = 1;
  std::vector<int> n_s;
  int n_r = 1;
  std::vector<int> n_d;
  std::vector<int> n_b;
  std::vector<double> p_s;
  double p_r = 1.0;
  double sigma2_r = 1.0;
  double sigma2_d = 1.0;
  Mode mode = Mode::OneWay;

  int transmitters() const { return mode == Mode::TwoWay ? 2 * K : K; }
  int receivers() const { return transmitters(); }
  int tx_antennas(int j) const;
  int rx_antennas(int k) const;
  int streams(int j) const { return n_b.at(j); }
  /// Streams decoded by receiver k (those of its desired transmitter).
  int rx_streams(int k) const;
  int total_streams() const;

  /// Throws Error(Config) on any violated invariant.
  void validate() const;

  /// Uniform configuration; scalar parameters broadcast to every node.
  static SystemConfig uniform(Mode mode, int K, int n_s, int n_r, int n_d, int n_b, double p_s_db, double p_r_db,
                              double sigma2_r = 1.0, double sigma2_d = 1.0);
};

double db_to_linear(double db);

/// Key-value text: `key = value` per line, `#` comments, list values
/// separated by commas or spaces. Keys: K, n_s, n_r, n_d, n_b, p_s_db, p_r_db,
/// sigma2_r, sigma2_d, mode. A single list value is broadcast to all nodes.
SystemConfig load_config(std::istream& in);
SystemConfig load_config_file(const std::string& path);

struct ChannelRealization {
  std::vector<CMatrix> h;  // N_r x n_s[k]
  std::vector<CMatrix> g;  // n_d[k] x N_r
  std::uint64_t seed = 0;
};

/// Rayleigh draw: H_k entries CN(0, 1/n_s[k]), G_k entries CN(0, 1/N_r).
/// Order H_1..H_K then G_1..G_K, column-major, real then imaginary part.
ChannelRealization generate_channels(const SystemConfig& cfg, std::uint64_t seed);

struct TransceiverDesign {
  std::vector<CMatrix> b;  // per transmitter, tx_antennas x streams
  CMatrix f;               // N_r x N_r
  std::vector<CMatrix> w;  // per receiver, rx_antennas x rx_streams
};

/// Two-way partner: k < K maps to K+k and back. One-way: identity.
int partner(const SystemConfig& cfg, int k);

/// Channel from transmitter j to the relay (H_j; H_{K+k} = G_k^T two-way).
CMatrix tx_channel(const SystemConfig& cfg, const ChannelRealization& ch, int j);
/// Channel from the relay to receiver k (G_k one-way, H_k^T two-way).
CMatrix rx_channel(const SystemConfig& cfg, const ChannelRealization& ch, int k);
/// Transmitter whose streams receiver k estimates.
int desired_transmitter(const SystemConfig& cfg, int k);
/// Transmitter whose contribution receiver k cancels, or -1.
int self_transmitter(const SystemConfig& cfg, int k);

/// Psi = sum_j H_j B_j B_j^H H_j^H + sigma_r^2 I over all transmitters.
CMatrix received_covariance(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b);
/// Psi minus transmitter k's contribution.
CMatrix excluded_covariance(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b, int k);
/// Relay-side covariance seen by receiver k after self-interference
/// cancellation: Psi one-way, Psi minus the receiver's own term two-way.
CMatrix effective_covariance(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                             int k);

/// tr(F Psi F^H)
double relay_power(const CMatrix& f, const CMatrix& psi);

/// Equivalent link of receiver k: y_k = Hbar s_desired + nbar, cov(nbar) = Cbar.
struct EquivalentChannel {
  CMatrix h_bar;
  CMatrix c_bar;
};
EquivalentChannel equivalent_channel(const SystemConfig& cfg, const ChannelRealization& ch,
                                     const TransceiverDesign& d, int k);

struct MseResult {
  double value;
  CMatrix matrix;
};
/// MSE matrix of receiver k for the configured mode.
MseResult link_mse(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, int k);
MseResult mse_oneway(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, int k);
double mse_twoway(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, int k);
std::vector<double> all_mse(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d);
double worst_mse(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d);

/// Linear MMSE receivers for every receiver given precoders and relay matrix.
std::vector<CMatrix> link_mmse_receivers(const SystemConfig& cfg, const ChannelRealization& ch,
                                         const std::vector<CMatrix>& b, const CMatrix& f);

struct NafOptions {
  /// Allow n_b < tx antennas by sending each stream on its own antenna
  /// (first n_b columns of the identity) with equal power.
  bool stream_selection = false;
};
/// B_j = sqrt(P_s/N_b) I, F = sqrt(P_r / tr Psi) I, MMSE receivers.
TransceiverDesign naf_design(const SystemConfig& cfg, const ChannelRealization& ch, const NafOptions& opt = {});

/// Throws Error(Infeasible) if a source or the relay exceeds its budget by more than tol.
void check_feasible(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d,
                    double tol = 1e-6);

}  // namespace relaynet
