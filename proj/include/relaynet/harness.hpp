#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relaynet/oneway.hpp"

// Monte-Carlo experiment driver: NMSE, BER and convergence sweeps over the
// source power with paired channel draws across algorithms.
namespace relaynet::sim {

enum class Algorithm { IterativeOneWay, SimplifiedOneWay, IterativeTwoWay, SimplifiedTwoWay, NAF };
const char* to_string(Algorithm a);
/// Accepts the full names (case-insensitive) or iterative/simplified/naf,
/// which resolve against the mode.
Algorithm parse_algorithm(const std::string& s, Mode mode);
std::vector<Algorithm> parse_algorithms(const std::string& list, Mode mode);
bool algorithm_matches(Algorithm a, Mode mode);

enum class Experiment { Mse, Ber, Convergence };
const char* to_string(Experiment e);
Experiment parse_experiment(const std::string& s);

/// "start:step:stop" with stop included; a single number gives one point.
std::vector<double> parse_range(const std::string& s);

struct TrialRecord {
  std::uint64_t seed = 0;
  int trial = 0;
  Algorithm algorithm = Algorithm::NAF;
  double p_s_db = 0.0;
  double p_r_db = 0.0;
  std::vector<double> per_user_mse;
  double worst_nmse = 0.0;
  double avg_nmse = 0.0;
  int iterations = 0;
  bool converged = true;
  bool monotone = true;
  long bit_errors = 0;
  long bits_sent = 0;
  std::vector<long> per_user_bit_errors;
  std::vector<long> per_user_bits;
  bool failed = false;
  std::string error;
};

struct Metric {
  std::string name;
  double value = 0.0;
};

/// Aggregate over the successful trials of one (axis point, algorithm) pair.
struct CurvePoint {
  double p_s_db = 0.0;
  Algorithm algorithm = Algorithm::NAF;
  int trials = 0;
  int failures = 0;
  std::vector<Metric> metrics;  // sorted by name

  double metric(const std::string& name) const;
};

struct SweepResult {
  Experiment experiment = Experiment::Mse;
  SystemConfig config;
  std::vector<double> axis;
  std::vector<Algorithm> algorithms;  // sorted by name
  int trial_count = 0;
  std::uint64_t base_seed = 0;
  std::vector<CurvePoint> points;     // axis-major, then algorithm
  std::vector<TrialRecord> records;   // same order, then trial

  const CurvePoint& point(double p_s_db, Algorithm a) const;
  int total_failures() const;
  /// More than 5% of the designs failed.
  bool warning() const;
};

struct HarnessOptions {
  int workers = 1;
  IterateOptions iterate;
  SimplifiedOptions simplified;
  /// Bits per transmitter and trial; 0 picks 1000 x (max transmit antennas),
  /// rounded up to whole transmissions.
  long bits_per_trial = 0;
  /// Directory receiving a text listing of every conic program solved.
  std::optional<std::string> dump_dir;
};

/// Gray-mapped unit-energy QPSK: (b0, b1) -> ((1 - 2 b0) + i (1 - 2 b1)) / sqrt(2).
CVector qpsk_modulate(const std::vector<int>& bits);

/// Exhaustive whitened ML detector over QPSK vectors.
class MlDetector {
 public:
  /// Throws Error(InvalidArgument) when 4^n_streams exceeds 4096.
  MlDetector(const CMatrix& effective_channel, const CMatrix& noise_cov, int n_streams);
  std::vector<int> detect(const CVector& y) const;

 private:
  CMatrix whiten_;       // L^-1 with noise_cov = L L^H
  CMatrix candidates_;   // whitened images, one column per symbol vector
  std::vector<std::vector<int>> bits_;
};

/// argmin_s (y - H s)^H C^-1 (y - H s) over all QPSK vectors, returned as bits.
std::vector<int> ml_detect(const CVector& y, const CMatrix& effective_channel, const CMatrix& noise_cov,
                           int n_streams);

/// Seed of trial `trial`'s channel draw; independent of worker count.
std::uint64_t trial_seed(std::uint64_t base_seed, int trial);

SweepResult run_mse_sweep(const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                          const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                          const HarnessOptions& opt = {});
SweepResult run_ber_sweep(const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                          const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                          const HarnessOptions& opt = {});
SweepResult run_convergence(const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                            const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                            const HarnessOptions& opt = {});
SweepResult run_experiment(Experiment e, const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                           const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                           const HarnessOptions& opt = {});

/// Header `p_s_db,algorithm,metric,value,trials,failures`, values with 10
/// significant digits.
void write_csv(const SweepResult& result, std::ostream& os);
/// Throws Error(Io) naming the path when it cannot be written.
void emit_csv(const SweepResult& result, const std::string& path);

struct CsvRow {
  double p_s_db = 0.0;
  std::string algorithm;
  std::string metric;
  double value = 0.0;
  int trials = 0;
  int failures = 0;
};
std::vector<CsvRow> parse_csv(std::istream& in);
std::vector<CsvRow> parse_csv_file(const std::string& path);

/// Value as printed in the CSV, parsed back.
double csv_rounded(double v);

}  // namespace relaynet::sim
