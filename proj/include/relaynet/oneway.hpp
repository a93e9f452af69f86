#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relaynet/conic.hpp"
#include "relaynet/system.hpp"

// Transceiver optimizers. The routines below work on the link model of
// system.hpp and therefore serve both modes; twoway.hpp adds mode-checked
// entry points under the two-way names.
namespace relaynet {

/// Receives every conic program before it is solved (tag names the subproblem).
using ProgramSink = std::function<void(const std::string& tag, const conic::ConicProgram& program)>;

/// Cone: Schur complements written as (rotated) second-order cones.
/// Lmi: the same constraints as Hermitian LMIs with Xi/Phi slack matrices.
/// Both describe the same feasible set and optimum.
enum class Formulation { Cone, Lmi };

struct SubproblemStats {
  std::string name;
  conic::SolveStatus status = conic::SolveStatus::NumericalFailure;
  int iterations = 0;
  double objective = 0.0;
  double duality_gap = 0.0;
  double kkt_residual = 0.0;
};

struct SubproblemOptions {
  Formulation formulation = Formulation::Cone;
  conic::SolverSettings solver;
  ProgramSink dump;
};

/// W_k = (R F Psi_k F^H R^H + sigma_d^2 I)^-1 R F H_d B_d per receiver.
std::vector<CMatrix> mmse_receivers(const SystemConfig& cfg, const ChannelRealization& ch,
                                    const std::vector<CMatrix>& b, const CMatrix& f);

struct RelayStep {
  CMatrix f;
  double tau = 0.0;  // optimal worst-user MSE bound
  SubproblemStats stats;
};
/// Min-max MSE over F for fixed precoders and receivers, subject to the relay
/// power budget. Throws Error(SolverFailure or Infeasible) if the solve is not
/// optimal.
RelayStep relay_subproblem(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                           const std::vector<CMatrix>& w, const SubproblemOptions& opt = {});

struct SourceStep {
  std::vector<CMatrix> b;
  double tau = 0.0;
  SubproblemStats stats;
};
/// Min-max MSE over all precoders for fixed F and receivers, subject to the
/// source budgets and the relay budget tr(F Psi F^H) <= P_r. Throws
/// Error(Infeasible) when P_r - sigma_r^2 tr(F F^H) <= 0.
SourceStep source_subproblem(const SystemConfig& cfg, const ChannelRealization& ch, const CMatrix& f,
                             const std::vector<CMatrix>& w, const SubproblemOptions& opt = {});

struct PassStats {
  SubproblemStats relay;
  SubproblemStats source;
  bool relay_accepted = true;
  bool source_accepted = true;
};

struct IterationTrace {
  double initial_objective = 0.0;
  std::vector<double> objective_per_iter;  // worst-user MSE after each pass
  std::vector<PassStats> subproblem_stats;
  bool converged = false;
  int iters = 0;
  std::string failure;  // non-empty if a subproblem failed; the design is the last incumbent
};

struct IterateOptions {
  double tol = 1e-3;
  int max_iters = 30;
  SubproblemOptions sub;
};

/// B_k = sqrt(P_s/N_b) [I 0]^T, F = sqrt(P_r / tr Psi) I, MMSE receivers.
/// With a jitter seed, B and F get a small random perturbation before the
/// powers are renormalised.
TransceiverDesign initial_design(const SystemConfig& cfg, const ChannelRealization& ch,
                                 std::optional<std::uint64_t> jitter_seed = std::nullopt);

struct IterateResult {
  TransceiverDesign design;
  IterationTrace trace;
};
/// Alternates W (MMSE) -> F -> B until the worst-user MSE changes by less than
/// tol. A step whose result is worse than the incumbent is rejected.
IterateResult iterate_minmax(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& init,
                             const IterateOptions& opt = {});

/// D_j = Psi^-1 H_j B_j for every transmitter.
std::vector<CMatrix> first_hop_filters(const SystemConfig& cfg, const ChannelRealization& ch,
                                       const std::vector<CMatrix>& b);

/// tr(D_j^H Psi D_j - D_j^H H_j B_j - B_j^H H_j^H D_j + I) for transmitter j.
double first_hop_mse(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                     const std::vector<CMatrix>& d, int j);

/// Min-max first-hop MSE over precoders for fixed filters D (SOCP).
SourceStep source_socp(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& d,
                       const SubproblemOptions& opt = {});

struct QSdpResult {
  CMatrix q;
  std::vector<CMatrix> y;
  double objective = 0.0;
  SubproblemStats stats;
};
/// min t s.t. tr(Y_k) + n_b,k - n_rx,k <= t, [[Y_k, I], [I, I + R_k Q R_k^H / sigma_d^2]] >= 0,
/// tr(Q) <= P_r, Q >= 0, t >= 0.
QSdpResult relay_q_sdp(const SystemConfig& cfg, const ChannelRealization& ch, const SubproblemOptions& opt = {});

/// Leading square root of Q with one column per stream (top eigenpairs).
CMatrix relay_shaping_factor(const SystemConfig& cfg, const CMatrix& q);

/// F = T D^H with D = [D_1 ... D_n], scaled down to the relay budget if needed.
CMatrix assemble_relay_matrix(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                              const std::vector<CMatrix>& d, const CMatrix& q);
/// Same with an explicit T (n_r x total streams).
CMatrix assemble_from_factor(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                             const std::vector<CMatrix>& d, const CMatrix& t);

/// Receiver-steered factor T_k = (sum_i R_i^H V_i V_i^H R_i + lambda I)^-1 R_k^H V_k,
/// column blocks ordered by transmitter (block j serves the receiver that
/// decodes transmitter j). V_k are the given receive filters.
CMatrix steered_factor(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& v,
                       double lambda);

/// How the relay matrix F = T D^H is recovered from the relaxed Q.
/// EigenFactor: T is the leading square root of Q.
/// AlignedFactor: T = (leading square root) V with V the unitary bringing it
///   closest to the receiver-steered structure below, so T T^H still equals Q.
/// Structured: T_k = (sum_i R_i^H W_i W_i^H R_i + lambda I)^-1 R_k^H W_k with
///   equal weights, refined against the MMSE receivers; tr(Q) sets the power.
/// Best: the candidate with the smallest worst-user MSE.
enum class RelayRecovery { EigenFactor, AlignedFactor, Structured, Best };
const char* to_string(RelayRecovery r);

struct SimplifiedOptions {
  double inner_tol = 1e-4;
  int inner_max = 30;
  RelayRecovery recovery = RelayRecovery::Best;
  int refine_rounds = 10;
  SubproblemOptions sub;
};

struct SimplifiedDesignOutput {
  TransceiverDesign design;
  std::vector<CMatrix> d_filters;
  CMatrix t_tilde;
  CMatrix q;
  std::vector<double> first_hop_mse;   // per transmitter
  std::vector<double> second_hop_mse;  // per receiver, relaxed Q-SDP value
  int inner_iterations = 0;
  RelayRecovery recovery_used = RelayRecovery::EigenFactor;
  double first_hop_snr_db = 0.0;
  std::vector<SubproblemStats> stats;
};
SimplifiedDesignOutput simplified_design(const SystemConfig& cfg, const ChannelRealization& ch,
                                         const SimplifiedOptions& opt = {});

// Closed forms used to check the structure of the optimum.

/// B_d^H H_d^H Psi_k^-1 H_d B_d for receiver k; pseudo-solve when `pseudo`.
CMatrix first_hop_gram(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b, int k,
                       bool pseudo = false);
/// F = T B_d^H H_d^H Psi_k^-1 for receiver k.
CMatrix structured_relay(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                         const CMatrix& t_tilde, int k);
/// tr(I + Hbar^H Cbar^-1 Hbar)^-1: MSE of receiver k under its MMSE filter.
double mmse_form_mse(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                     const CMatrix& f, int k);
/// tr(I + B^H H^H Psibar^-1 H B)^-1 + tr((B^H H^H Psi^-1 H B)^-1 + T^H R^H R T / sigma_d^2)^-1.
double decomposed_mse(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                      const CMatrix& t_tilde, int k);

}  // namespace relaynet
