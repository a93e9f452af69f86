#include "relaynet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "relaynet/twoway.hpp"

namespace relaynet::sim {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)); }

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean(const std::vector<double>& v) {
  if (v.empty()) return kNan;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

cplx cn(std::mt19937_64& rng, double var) {
  std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

CVector cn_vector(std::mt19937_64& rng, int n, double var) {
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = cn(rng, var);
  return v;
}

SystemConfig at_power(const SystemConfig& cfg, double p_s_db) {
  SystemConfig c = cfg;
  std::fill(c.p_s.begin(), c.p_s.end(), db_to_linear(p_s_db));
  return c;
}

struct DesignRun {
  TransceiverDesign design;
  int iterations = 0;
  bool converged = true;
  bool monotone = true;
};

DesignRun design_for(Algorithm a, const SystemConfig& cfg, const ChannelRealization& ch, const HarnessOptions& opt,
                     const ProgramSink& sink) {
  DesignRun run;
  IterateOptions it = opt.iterate;
  SimplifiedOptions sp = opt.simplified;
  if (sink) it.sub.dump = sp.sub.dump = sink;
  auto from_trace = [&](const IterateResult& r) {
    run.design = r.design;
    run.iterations = r.trace.iters;
    run.converged = r.trace.converged;
    double prev = r.trace.initial_objective;
    for (double v : r.trace.objective_per_iter) {
      if (v > prev + 1e-8) run.monotone = false;
      prev = v;
    }
    if (!r.trace.failure.empty()) throw Error(ErrorCode::SolverFailure, r.trace.failure);
  };
  switch (a) {
    case Algorithm::NAF: {
      NafOptions no;
      no.stream_selection = true;
      run.design = naf_design(cfg, ch, no);
      break;
    }
    case Algorithm::IterativeOneWay: from_trace(iterate_minmax(cfg, ch, initial_design(cfg, ch), it)); break;
    case Algorithm::IterativeTwoWay: from_trace(twoway_iterate(cfg, ch, initial_design(cfg, ch), it)); break;
    case Algorithm::SimplifiedOneWay: {
      const SimplifiedDesignOutput s = simplified_design(cfg, ch, sp);
      run.design = s.design;
      run.iterations = s.inner_iterations;
      break;
    }
    case Algorithm::SimplifiedTwoWay: {
      const SimplifiedDesignOutput s = twoway_simplified(cfg, ch, sp);
      run.design = s.design;
      run.iterations = s.inner_iterations;
      break;
    }
  }
  check_feasible(cfg, ch, run.design);
  return run;
}

long bits_per_transmitter(const SystemConfig& cfg, const HarnessOptions& opt) {
  long unit = 1;
  for (int j = 0; j < cfg.transmitters(); ++j) unit = std::lcm(unit, 2L * cfg.streams(j));
  if (opt.bits_per_trial > 0) {
    if (opt.bits_per_trial % unit != 0)
      throw Error(ErrorCode::InvalidArgument,
                  "bits per trial must be a multiple of " + std::to_string(unit) + " (2 x streams per transmission)");
    return opt.bits_per_trial;
  }
  int ant = 1;
  for (int j = 0; j < cfg.transmitters(); ++j) ant = std::max(ant, cfg.tx_antennas(j));
  const long want = 1000L * ant;
  return (want + unit - 1) / unit * unit;
}

// Sends `bits` bits per transmitter through the two hops and counts the
// errors of every receiver's ML decisions.
void simulate_ber(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, long bits,
                  std::uint64_t seed, TrialRecord& rec) {
  const int n = cfg.transmitters();
  std::vector<MlDetector> det;
  for (int k = 0; k < cfg.receivers(); ++k) {
    const EquivalentChannel eq = equivalent_channel(cfg, ch, d, k);
    det.emplace_back(eq.h_bar, eq.c_bar, cfg.rx_streams(k));
  }
  std::vector<CMatrix> hb(n), rf(cfg.receivers());
  for (int j = 0; j < n; ++j) hb[j] = tx_channel(cfg, ch, j) * d.b[j];
  for (int k = 0; k < cfg.receivers(); ++k) rf[k] = rx_channel(cfg, ch, k) * d.f;
  rec.per_user_bit_errors.assign(cfg.receivers(), 0);
  rec.per_user_bits.assign(cfg.receivers(), 0);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<long> sent(n, 0);
  std::vector<std::vector<int>> b(n);
  std::vector<CVector> s(n);
  for (;;) {
    bool any = false;
    for (int j = 0; j < n; ++j) {
      const int nb = 2 * cfg.streams(j);
      if (sent[j] + nb > bits) {
        b[j].clear();
        continue;
      }
      any = true;
      b[j].resize(nb);
      for (int& x : b[j]) x = coin(rng) ? 1 : 0;
      sent[j] += nb;
    }
    if (!any) break;
    CVector r = cn_vector(rng, cfg.n_r, cfg.sigma2_r);
    for (int j = 0; j < n; ++j) {
      if (b[j].empty()) {
        s[j] = CVector::Zero(cfg.streams(j));
        continue;
      }
      s[j] = qpsk_modulate(b[j]);
      r += hb[j] * s[j];
    }
    for (int k = 0; k < cfg.receivers(); ++k) {
      CVector y = rx_channel(cfg, ch, k) * (d.f * r) + cn_vector(rng, cfg.rx_antennas(k), cfg.sigma2_d);
      const int self = self_transmitter(cfg, k);
      if (self >= 0) y -= rf[k] * hb[self] * s[self];
      const int des = desired_transmitter(cfg, k);
      if (b[des].empty()) continue;
      const std::vector<int> got = det[k].detect(y);
      long err = 0;
      for (std::size_t i = 0; i < got.size(); ++i) err += got[i] != b[des][i];
      rec.per_user_bit_errors[k] += err;
      rec.per_user_bits[k] += static_cast<long>(got.size());
    }
  }
  rec.bit_errors = 0;
  rec.bits_sent = 0;
  for (int k = 0; k < cfg.receivers(); ++k) {
    rec.bit_errors += rec.per_user_bit_errors[k];
    rec.bits_sent += rec.per_user_bits[k];
  }
}

std::vector<Metric> aggregate(Experiment e, const std::vector<const TrialRecord*>& ok) {
  std::vector<double> worst, avg, its, conv, mono, berw;
  long err = 0, sent = 0;
  for (const TrialRecord* r : ok) {
    worst.push_back(r->worst_nmse);
    avg.push_back(r->avg_nmse);
    its.push_back(r->iterations);
    conv.push_back(r->converged ? 1.0 : 0.0);
    mono.push_back(r->monotone ? 1.0 : 0.0);
    err += r->bit_errors;
    sent += r->bits_sent;
    double w = 0.0;
    for (std::size_t k = 0; k < r->per_user_bits.size(); ++k)
      if (r->per_user_bits[k] > 0)
        w = std::max(w, static_cast<double>(r->per_user_bit_errors[k]) / static_cast<double>(r->per_user_bits[k]));
    berw.push_back(w);
  }
  std::vector<Metric> m;
  switch (e) {
    case Experiment::Mse:
      m = {{"avg_nmse", mean(avg)}, {"iterations_mean", mean(its)}, {"worst_nmse", mean(worst)}};
      break;
    case Experiment::Ber:
      m = {{"ber_pooled", sent > 0 ? static_cast<double>(err) / static_cast<double>(sent) : kNan},
           {"ber_worst", mean(berw)},
           {"worst_nmse", mean(worst)}};
      break;
    case Experiment::Convergence:
      m = {{"converged_fraction", mean(conv)},
           {"iterations_mean", mean(its)},
           {"iterations_median", median(its)},
           {"monotone_fraction", mean(mono)}};
      break;
  }
  return m;
}

SweepResult run_sweep(Experiment e, const SystemConfig& cfg_in, const std::vector<Algorithm>& algorithms_in,
                      const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                      const HarnessOptions& opt) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  cfg_in.validate();
  std::vector<Algorithm> algs = algorithms_in;
  std::sort(algs.begin(), algs.end(),
            [](Algorithm a, Algorithm b) { return std::string(to_string(a)) < std::string(to_string(b)); });
  algs.erase(std::unique(algs.begin(), algs.end()), algs.end());
  for (Algorithm a : algs)
    if (!algorithm_matches(a, cfg_in.mode))
      throw Error(ErrorCode::InvalidArgument, std::string(to_string(a)) + " does not apply to " + to_string(cfg_in.mode));
  const long bits = e == Experiment::Ber ? bits_per_transmitter(cfg_in, opt) : 0;
  if (opt.dump_dir) std::filesystem::create_directories(*opt.dump_dir);

  SweepResult res;
  res.experiment = e;
  res.config = cfg_in;
  res.axis = p_s_db;
  res.algorithms = algs;
  res.trial_count = trials;
  res.base_seed = base_seed;

  const std::size_t na = algs.size(), np = p_s_db.size();
  // Slot (trial, axis, algorithm) holds that job's record.
  std::vector<TrialRecord> slots(static_cast<std::size_t>(trials) * np * na);
  auto slot = [&](int t, std::size_t p, std::size_t a) -> TrialRecord& {
    return slots[(static_cast<std::size_t>(t) * np + p) * na + a];
  };

  auto run_trial = [&](int t) {
    const std::uint64_t seed = trial_seed(base_seed, t);
    const ChannelRealization ch = generate_channels(cfg_in, seed);
    for (std::size_t p = 0; p < np; ++p) {
      const SystemConfig cfg = at_power(cfg_in, p_s_db[p]);
      for (std::size_t a = 0; a < na; ++a) {
        TrialRecord& rec = slot(t, p, a);
        rec.seed = seed;
        rec.trial = t;
        rec.algorithm = algs[a];
        rec.p_s_db = p_s_db[p];
        rec.p_r_db = 10.0 * std::log10(cfg.p_r);
        ProgramSink sink;
        int counter = 0;
        if (opt.dump_dir) {
          const std::string prefix = *opt.dump_dir + "/t" + std::to_string(t) + "_p" + std::to_string(p) + "_" +
                                     to_string(algs[a]) + "_";
          sink = [prefix, &counter](const std::string& tag, const conic::ConicProgram& prog) {
            std::ofstream os(prefix + std::to_string(counter++) + "_" + tag + ".txt");
            conic::dump_program(prog, os);
          };
        }
        try {
          const DesignRun run = design_for(algs[a], cfg, ch, opt, sink);
          rec.iterations = run.iterations;
          rec.converged = run.converged;
          rec.monotone = run.monotone;
          rec.per_user_mse = all_mse(cfg, ch, run.design);
          double worst = 0.0, sum = 0.0, streams = 0.0;
          for (int k = 0; k < cfg.receivers(); ++k) {
            worst = std::max(worst, rec.per_user_mse[k] / cfg.rx_streams(k));
            sum += rec.per_user_mse[k];
            streams += cfg.rx_streams(k);
          }
          rec.worst_nmse = worst;
          rec.avg_nmse = sum / streams;
          if (e == Experiment::Ber) simulate_ber(cfg, ch, run.design, bits, derive(seed, 0xbe7 + p), rec);
        } catch (const std::exception& ex) {
          rec.failed = true;
          rec.error = ex.what();
        }
      }
    }
  };

  const int workers = std::max(1, std::min(opt.workers, trials));
  if (workers == 1) {
    for (int t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int t = next++; t < trials; t = next++) run_trial(t);
      });
    for (auto& th : pool) th.join();
  }

  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t a = 0; a < na; ++a) {
      CurvePoint cp;
      cp.p_s_db = p_s_db[p];
      cp.algorithm = algs[a];
      std::vector<const TrialRecord*> ok;
      for (int t = 0; t < trials; ++t) {
        const TrialRecord& r = slot(t, p, a);
        res.records.push_back(r);
        if (r.failed)
          ++cp.failures;
        else
          ok.push_back(&r);
      }
      cp.trials = trials;
      cp.metrics = aggregate(e, ok);
      res.points.push_back(std::move(cp));
    }
  return res;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::IterativeOneWay: return "IterativeOneWay";
    case Algorithm::SimplifiedOneWay: return "SimplifiedOneWay";
    case Algorithm::IterativeTwoWay: return "IterativeTwoWay";
    case Algorithm::SimplifiedTwoWay: return "SimplifiedTwoWay";
    case Algorithm::NAF: return "NAF";
  }
  return "?";
}

bool algorithm_matches(Algorithm a, Mode mode) {
  switch (a) {
    case Algorithm::IterativeOneWay:
    case Algorithm::SimplifiedOneWay: return mode == Mode::OneWay;
    case Algorithm::IterativeTwoWay:
    case Algorithm::SimplifiedTwoWay: return mode == Mode::TwoWay;
    case Algorithm::NAF: return true;
  }
  return false;
}

Algorithm parse_algorithm(const std::string& s, Mode mode) {
  const std::string l = lower(trim(s));
  const bool two = mode == Mode::TwoWay;
  if (l == "naf") return Algorithm::NAF;
  if (l == "iterative") return two ? Algorithm::IterativeTwoWay : Algorithm::IterativeOneWay;
  if (l == "simplified") return two ? Algorithm::SimplifiedTwoWay : Algorithm::SimplifiedOneWay;
  for (Algorithm a : {Algorithm::IterativeOneWay, Algorithm::SimplifiedOneWay, Algorithm::IterativeTwoWay,
                      Algorithm::SimplifiedTwoWay})
    if (l == lower(to_string(a))) return a;
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + s + "'");
}

std::vector<Algorithm> parse_algorithms(const std::string& list, Mode mode) {
  std::vector<Algorithm> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(parse_algorithm(item, mode));
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no algorithms given");
  return out;
}

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::Mse: return "mse";
    case Experiment::Ber: return "ber";
    case Experiment::Convergence: return "convergence";
  }
  return "?";
}

Experiment parse_experiment(const std::string& s) {
  const std::string l = lower(trim(s));
  if (l == "mse") return Experiment::Mse;
  if (l == "ber") return Experiment::Ber;
  if (l == "convergence") return Experiment::Convergence;
  throw Error(ErrorCode::InvalidArgument, "unknown experiment '" + s + "'");
}

std::vector<double> parse_range(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(trim(item), &used));
      if (used != trim(item).size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad range '" + s + "'");
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "range must be start:step:stop, got '" + s + "'");
  const double a = parts[0], step = parts[1], b = parts[2];
  if (step == 0.0 || (b - a) / step < -1e-9) throw Error(ErrorCode::InvalidArgument, "empty or endless range '" + s + "'");
  const long n = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (long i = 0; i < n; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

double CurvePoint::metric(const std::string& name) const {
  for (const Metric& m : metrics)
    if (m.name == name) return m.value;
  throw Error(ErrorCode::InvalidArgument, "no metric '" + name + "'");
}

const CurvePoint& SweepResult::point(double p_s_db, Algorithm a) const {
  for (const CurvePoint& p : points)
    if (p.algorithm == a && std::abs(p.p_s_db - p_s_db) < 1e-9) return p;
  throw Error(ErrorCode::InvalidArgument, "no curve point for " + std::string(to_string(a)));
}

int SweepResult::total_failures() const {
  int f = 0;
  for (const CurvePoint& p : points) f += p.failures;
  return f;
}

bool SweepResult::warning() const {
  const std::size_t total = records.size();
  return total > 0 && static_cast<double>(total_failures()) > 0.05 * static_cast<double>(total);
}

CVector qpsk_modulate(const std::vector<int>& bits) {
  if (bits.size() % 2 != 0) throw Error(ErrorCode::InvalidArgument, "QPSK needs an even number of bits");
  const double a = 1.0 / std::sqrt(2.0);
  CVector s(static_cast<Eigen::Index>(bits.size() / 2));
  for (std::size_t i = 0; i < bits.size(); i += 2) {
    if ((bits[i] & ~1) || (bits[i + 1] & ~1)) throw Error(ErrorCode::InvalidArgument, "bits must be 0 or 1");
    s(static_cast<Eigen::Index>(i / 2)) = cplx((1 - 2 * bits[i]) * a, (1 - 2 * bits[i + 1]) * a);
  }
  return s;
}

MlDetector::MlDetector(const CMatrix& effective_channel, const CMatrix& noise_cov, int n_streams) {
  if (n_streams < 1 || n_streams > 6)
    throw Error(ErrorCode::InvalidArgument,
                "ML search over " + std::to_string(n_streams) + " streams exceeds 4096 candidates; use a smaller N_b");
  if (effective_channel.cols() != n_streams || noise_cov.rows() != effective_channel.rows() ||
      noise_cov.cols() != noise_cov.rows())
    throw Error(ErrorCode::DimensionMismatch, "ML detector dimensions");
  const Eigen::LLT<CMatrix> llt(linalg::hermitian_part(noise_cov));
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotHpd, "noise covariance is not positive definite");
  const Eigen::Index m = noise_cov.rows();
  whiten_ = llt.matrixL().solve(CMatrix::Identity(m, m));
  const CMatrix h = whiten_ * effective_channel;
  const int count = 1 << (2 * n_streams);
  candidates_.resize(m, count);
  bits_.resize(count);
  for (int c = 0; c < count; ++c) {
    std::vector<int> b(2 * n_streams);
    for (int i = 0; i < 2 * n_streams; ++i) b[i] = (c >> (2 * n_streams - 1 - i)) & 1;
    candidates_.col(c) = h * qpsk_modulate(b);
    bits_[c] = std::move(b);
  }
}

std::vector<int> MlDetector::detect(const CVector& y) const {
  if (y.size() != whiten_.rows()) throw Error(ErrorCode::DimensionMismatch, "received vector length");
  const CVector yw = whiten_ * y;
  Eigen::Index best = 0;
  (candidates_.colwise() - yw).colwise().squaredNorm().minCoeff(&best);
  return bits_[static_cast<std::size_t>(best)];
}

std::vector<int> ml_detect(const CVector& y, const CMatrix& effective_channel, const CMatrix& noise_cov,
                           int n_streams) {
  return MlDetector(effective_channel, noise_cov, n_streams).detect(y);
}

std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return derive(base_seed, static_cast<std::uint64_t>(trial));
}

SweepResult run_mse_sweep(const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                          const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                          const HarnessOptions& opt) {
  return run_sweep(Experiment::Mse, cfg, algorithms, p_s_db, trials, base_seed, opt);
}

SweepResult run_ber_sweep(const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                          const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                          const HarnessOptions& opt) {
  return run_sweep(Experiment::Ber, cfg, algorithms, p_s_db, trials, base_seed, opt);
}

SweepResult run_convergence(const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                            const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                            const HarnessOptions& opt) {
  return run_sweep(Experiment::Convergence, cfg, algorithms, p_s_db, trials, base_seed, opt);
}

SweepResult run_experiment(Experiment e, const SystemConfig& cfg, const std::vector<Algorithm>& algorithms,
                           const std::vector<double>& p_s_db, int trials, std::uint64_t base_seed,
                           const HarnessOptions& opt) {
  return run_sweep(e, cfg, algorithms, p_s_db, trials, base_seed, opt);
}

void write_csv(const SweepResult& result, std::ostream& os) {
  os << "p_s_db,algorithm,metric,value,trials,failures\n";
  for (const CurvePoint& p : result.points)
    for (const Metric& m : p.metrics)
      os << format_value(p.p_s_db) << ',' << to_string(p.algorithm) << ',' << m.name << ',' << format_value(m.value)
         << ',' << p.trials << ',' << p.failures << '\n';
}

void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_csv(result, os);
  os.flush();
  if (!os) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

std::vector<CsvRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "p_s_db,algorithm,metric,value,trials,failures")
    throw Error(ErrorCode::Io, "missing CSV header");
  std::vector<CsvRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(trim(item));
    if (f.size() != 6) throw Error(ErrorCode::Io, "CSV line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    try {
      CsvRow r;
      r.p_s_db = std::stod(f[0]);
      r.algorithm = f[1];
      r.metric = f[2];
      r.value = f[3] == "nan" ? kNan : std::stod(f[3]);
      r.trials = std::stoi(f[4]);
      r.failures = std::stoi(f[5]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Io, "CSV line " + std::to_string(lineno) + " is malformed");
    }
  }
  return rows;
}

std::vector<CsvRow> parse_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return parse_csv(in);
}

double csv_rounded(double v) {
  const std::string s = format_value(v);
  return s == "nan" ? kNan : std::stod(s);
}

}  // namespace relaynet::sim
