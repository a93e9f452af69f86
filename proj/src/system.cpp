#include "relaynet/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <sstream>

namespace relaynet {

const char* to_string(Mode m) { return m == Mode::TwoWay ? "twoway" : "oneway"; }

Mode parse_mode(const std::string& s) {
  std::string t;
  for (char c : s)
    if (c != '-' && c != '_') t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "oneway") return Mode::OneWay;
  if (t == "twoway") return Mode::TwoWay;
  throw Error(ErrorCode::Config, "unknown mode '" + s + "' (expected oneway or twoway)");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

int SystemConfig::tx_antennas(int j) const {
  if (j < 0 || j >= transmitters()) throw Error(ErrorCode::InvalidArgument, "transmitter index out of range");
  return j < K ? n_s.at(j) : n_d.at(j - K);
}

int SystemConfig::rx_antennas(int k) const {
  if (k < 0 || k >= receivers()) throw Error(ErrorCode::InvalidArgument, "receiver index out of range");
  if (mode == Mode::OneWay) return n_d.at(k);
  return k < K ? n_s.at(k) : n_d.at(k - K);
}

int SystemConfig::rx_streams(int k) const { return n_b.at(mode == Mode::TwoWay ? (k < K ? k + K : k - K) : k); }

int SystemConfig::total_streams() const {
  int total = 0;
  for (int j = 0; j < transmitters(); ++j) total += n_b.at(j);
  return total;
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::Config, m); };
  if (K < 1) fail("K must be >= 1");
  if (n_r < 1) fail("n_r must be >= 1");
  if (static_cast<int>(n_s.size()) != K) fail("n_s needs K entries");
  if (static_cast<int>(n_d.size()) != K) fail("n_d needs K entries");
  const int t = transmitters();
  if (static_cast<int>(n_b.size()) != t) fail("n_b needs one entry per transmitter");
  if (static_cast<int>(p_s.size()) != t) fail("p_s needs one entry per transmitter");
  for (int k = 0; k < K; ++k)
    if (n_s[k] < 1 || n_d[k] < 1) fail("antenna counts must be >= 1");
  for (int j = 0; j < t; ++j) {
    if (n_b[j] < 1 || n_b[j] > tx_antennas(j)) {
      std::ostringstream os;
      os << "n_b[" << j << "] = " << n_b[j] << " outside [1, " << tx_antennas(j) << "]";
      fail(os.str());
    }
    if (!(p_s[j] >= 0.0) || !std::isfinite(p_s[j])) fail("source powers must be finite and >= 0");
  }
  if (n_r < total_streams()) {
    std::ostringstream os;
    os << "n_r = " << n_r << " below total stream count " << total_streams();
    fail(os.str());
  }
  if (!(p_r >= 0.0) || !std::isfinite(p_r)) fail("relay power must be finite and >= 0");
  if (!(sigma2_r > 0.0) || !std::isfinite(sigma2_r)) fail("sigma2_r must be > 0");
  if (!(sigma2_d > 0.0) || !std::isfinite(sigma2_d)) fail("sigma2_d must be > 0");
}

SystemConfig SystemConfig::uniform(Mode mode, int K, int n_s, int n_r, int n_d, int n_b, double p_s_db, double p_r_db,
                                   double sigma2_r, double sigma2_d) {
  SystemConfig c;
  c.mode = mode;
  c.K = K;
  c.n_s.assign(K, n_s);
  c.n_d.assign(K, n_d);
  c.n_r = n_r;
  c.n_b.assign(c.transmitters(), n_b);
  c.p_s.assign(c.transmitters(), db_to_linear(p_s_db));
  c.p_r = db_to_linear(p_r_db);
  c.sigma2_r = sigma2_r;
  c.sigma2_d = sigma2_d;
  c.validate();
  return c;
}

namespace {

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::string v = value;
  std::replace(v.begin(), v.end(), ',', ' ');
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
      x = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size()) throw Error(ErrorCode::Config, "key '" + key + "': cannot parse '" + tok + "'");
    out.push_back(x);
  }
  if (out.empty()) throw Error(ErrorCode::Config, "key '" + key + "' has no value");
  return out;
}

int to_count(const std::string& key, double x) {
  if (x != std::floor(x) || x < 0 || x > 1e6) throw Error(ErrorCode::Config, "key '" + key + "' needs integers");
  return static_cast<int>(x);
}

template <typename T, typename Conv>
std::vector<T> broadcast(const std::string& key, const std::vector<double>& v, int n, Conv conv) {
  if (v.size() != 1 && static_cast<int>(v.size()) != n) {
    std::ostringstream os;
    os << "key '" << key << "' has " << v.size() << " values, expected 1 or " << n;
    throw Error(ErrorCode::Config, os.str());
  }
  std::vector<T> out(n);
  for (int i = 0; i < n; ++i) out[i] = conv(v.size() == 1 ? v[0] : v[i]);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

SystemConfig load_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << "line " << lineno << ": expected key = value";
      throw Error(ErrorCode::Config, os.str());
    }
    const std::string key = trim(line.substr(0, eq));
    static const char* known[] = {"K", "n_s", "n_r", "n_d", "n_b", "p_s_db", "p_r_db", "sigma2_r", "sigma2_d", "mode"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw Error(ErrorCode::Config, "unknown key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }
  for (const char* req : {"K", "n_s", "n_r", "n_d", "n_b", "p_s_db", "p_r_db"})
    if (!kv.count(req)) throw Error(ErrorCode::Config, std::string("missing key '") + req + "'");

  SystemConfig c;
  c.mode = kv.count("mode") ? parse_mode(kv["mode"]) : Mode::OneWay;
  const auto scalar = [&](const std::string& key) {
    const auto v = parse_list(key, kv[key]);
    if (v.size() != 1) throw Error(ErrorCode::Config, "key '" + key + "' must be a scalar");
    return v[0];
  };
  c.K = to_count("K", scalar("K"));
  if (c.K < 1) throw Error(ErrorCode::Config, "K must be >= 1");
  c.n_r = to_count("n_r", scalar("n_r"));
  auto count = [](const std::string& key) { return [key](double x) { return to_count(key, x); }; };
  c.n_s = broadcast<int>("n_s", parse_list("n_s", kv["n_s"]), c.K, count("n_s"));
  c.n_d = broadcast<int>("n_d", parse_list("n_d", kv["n_d"]), c.K, count("n_d"));
  c.n_b = broadcast<int>("n_b", parse_list("n_b", kv["n_b"]), c.transmitters(), count("n_b"));
  c.p_s = broadcast<double>("p_s_db", parse_list("p_s_db", kv["p_s_db"]), c.transmitters(), db_to_linear);
  c.p_r = db_to_linear(scalar("p_r_db"));
  if (kv.count("sigma2_r")) c.sigma2_r = scalar("sigma2_r");
  if (kv.count("sigma2_d")) c.sigma2_d = scalar("sigma2_d");
  c.validate();
  return c;
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file '" + path + "'");
  try {
    return load_config(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

namespace {

CMatrix gaussian(std::mt19937_64& rng, std::normal_distribution<double>& nd, int rows, int cols, double var) {
  const double s = std::sqrt(var / 2.0);
  CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = nd(rng);
      const double im = nd(rng);
      m(i, j) = cplx(s * re, s * im);
    }
  return m;
}

void require_index(int k, int n, const char* what) {
  if (k < 0 || k >= n) throw Error(ErrorCode::InvalidArgument, std::string(what) + " index out of range");
}

void require_precoders(const SystemConfig& cfg, const std::vector<CMatrix>& b) {
  if (static_cast<int>(b.size()) != cfg.transmitters())
    throw Error(ErrorCode::DimensionMismatch, "one precoder per transmitter required");
  for (int j = 0; j < cfg.transmitters(); ++j)
    if (b[j].rows() != cfg.tx_antennas(j) || b[j].cols() != cfg.streams(j))
      throw Error(ErrorCode::DimensionMismatch, "precoder shape differs from configuration");
}

void require_relay(const SystemConfig& cfg, const CMatrix& f) {
  if (f.rows() != cfg.n_r || f.cols() != cfg.n_r) throw Error(ErrorCode::DimensionMismatch, "relay matrix must be n_r x n_r");
}

}  // namespace

ChannelRealization generate_channels(const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  ChannelRealization ch;
  ch.seed = seed;
  for (int k = 0; k < cfg.K; ++k) ch.h.push_back(gaussian(rng, nd, cfg.n_r, cfg.n_s[k], 1.0 / cfg.n_s[k]));
  for (int k = 0; k < cfg.K; ++k) ch.g.push_back(gaussian(rng, nd, cfg.n_d[k], cfg.n_r, 1.0 / cfg.n_r));
  return ch;
}

int partner(const SystemConfig& cfg, int k) {
  require_index(k, cfg.receivers(), "user");
  if (cfg.mode == Mode::OneWay) return k;
  return k < cfg.K ? k + cfg.K : k - cfg.K;
}

CMatrix tx_channel(const SystemConfig& cfg, const ChannelRealization& ch, int j) {
  require_index(j, cfg.transmitters(), "transmitter");
  return j < cfg.K ? ch.h.at(j) : CMatrix(ch.g.at(j - cfg.K).transpose());
}

CMatrix rx_channel(const SystemConfig& cfg, const ChannelRealization& ch, int k) {
  require_index(k, cfg.receivers(), "receiver");
  if (cfg.mode == Mode::OneWay) return ch.g.at(k);
  return tx_channel(cfg, ch, k).transpose();
}

int desired_transmitter(const SystemConfig& cfg, int k) { return partner(cfg, k); }

int self_transmitter(const SystemConfig& cfg, int k) {
  require_index(k, cfg.receivers(), "receiver");
  return cfg.mode == Mode::TwoWay ? k : -1;
}

CMatrix received_covariance(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b) {
  require_precoders(cfg, b);
  CMatrix psi = cfg.sigma2_r * CMatrix::Identity(cfg.n_r, cfg.n_r);
  for (int j = 0; j < cfg.transmitters(); ++j) {
    const CMatrix hb = tx_channel(cfg, ch, j) * b[j];
    psi += hb * hb.adjoint();
  }
  return linalg::hermitian_part(psi);
}

CMatrix excluded_covariance(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                            int k) {
  require_index(k, cfg.transmitters(), "transmitter");
  require_precoders(cfg, b);
  CMatrix psi = cfg.sigma2_r * CMatrix::Identity(cfg.n_r, cfg.n_r);
  for (int j = 0; j < cfg.transmitters(); ++j) {
    if (j == k) continue;
    const CMatrix hb = tx_channel(cfg, ch, j) * b[j];
    psi += hb * hb.adjoint();
  }
  return linalg::hermitian_part(psi);
}

CMatrix effective_covariance(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                             int k) {
  const int self = self_transmitter(cfg, k);
  return self < 0 ? received_covariance(cfg, ch, b) : excluded_covariance(cfg, ch, b, self);
}

double relay_power(const CMatrix& f, const CMatrix& psi) {
  if (f.cols() != psi.rows() || psi.rows() != psi.cols())
    throw Error(ErrorCode::DimensionMismatch, "relay_power: F and Psi sizes differ");
  return std::max(0.0, (f * psi * f.adjoint()).trace().real());
}

EquivalentChannel equivalent_channel(const SystemConfig& cfg, const ChannelRealization& ch,
                                     const TransceiverDesign& d, int k) {
  require_index(k, cfg.receivers(), "receiver");
  require_relay(cfg, d.f);
  const int des = desired_transmitter(cfg, k);
  const CMatrix a = rx_channel(cfg, ch, k) * d.f;
  const CMatrix hb = tx_channel(cfg, ch, des) * d.b.at(des);
  CMatrix rest = effective_covariance(cfg, ch, d.b, k) - hb * hb.adjoint();
  EquivalentChannel out;
  out.h_bar = a * hb;
  out.c_bar = linalg::hermitian_part(a * rest * a.adjoint() +
                                     cfg.sigma2_d * CMatrix::Identity(cfg.rx_antennas(k), cfg.rx_antennas(k)));
  return out;
}

MseResult link_mse(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, int k) {
  const EquivalentChannel eq = equivalent_channel(cfg, ch, d, k);
  const CMatrix& w = d.w.at(k);
  if (w.rows() != cfg.rx_antennas(k) || w.cols() != cfg.rx_streams(k))
    throw Error(ErrorCode::DimensionMismatch, "receiver shape differs from configuration");
  const CMatrix e = w.adjoint() * eq.h_bar - CMatrix::Identity(w.cols(), w.cols());
  MseResult out;
  out.matrix = linalg::hermitian_part(e * e.adjoint() + w.adjoint() * eq.c_bar * w);
  out.value = out.matrix.trace().real();
  return out;
}

MseResult mse_oneway(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, int k) {
  if (cfg.mode != Mode::OneWay) throw Error(ErrorCode::InvalidArgument, "mse_oneway requires one-way mode");
  return link_mse(cfg, ch, d, k);
}

double mse_twoway(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, int k) {
  if (cfg.mode != Mode::TwoWay) throw Error(ErrorCode::InvalidArgument, "mse_twoway requires two-way mode");
  return link_mse(cfg, ch, d, k).value;
}

std::vector<double> all_mse(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d) {
  std::vector<double> out;
  for (int k = 0; k < cfg.receivers(); ++k) out.push_back(link_mse(cfg, ch, d, k).value);
  return out;
}

double worst_mse(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d) {
  const auto e = all_mse(cfg, ch, d);
  return *std::max_element(e.begin(), e.end());
}

std::vector<CMatrix> link_mmse_receivers(const SystemConfig& cfg, const ChannelRealization& ch,
                                         const std::vector<CMatrix>& b, const CMatrix& f) {
  require_precoders(cfg, b);
  require_relay(cfg, f);
  std::vector<CMatrix> w;
  for (int k = 0; k < cfg.receivers(); ++k) {
    const int des = desired_transmitter(cfg, k);
    const CMatrix a = rx_channel(cfg, ch, k) * f;
    const int n = cfg.rx_antennas(k);
    const CMatrix cov = a * effective_covariance(cfg, ch, b, k) * a.adjoint() + cfg.sigma2_d * CMatrix::Identity(n, n);
    w.push_back(linalg::solve_hpd(cov, a * tx_channel(cfg, ch, des) * b[des]));
  }
  return w;
}

TransceiverDesign naf_design(const SystemConfig& cfg, const ChannelRealization& ch, const NafOptions& opt) {
  cfg.validate();
  TransceiverDesign d;
  for (int j = 0; j < cfg.transmitters(); ++j) {
    const int n = cfg.tx_antennas(j);
    const int nb = cfg.streams(j);
    if (nb != n && !opt.stream_selection) {
      std::ostringstream os;
      os << "NAF needs n_b == antennas (transmitter " << j << ": " << nb << " vs " << n << ")";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
    d.b.push_back(std::sqrt(cfg.p_s[j] / nb) * CMatrix::Identity(n, nb));
  }
  const CMatrix psi = received_covariance(cfg, ch, d.b);
  d.f = std::sqrt(cfg.p_r / psi.trace().real()) * CMatrix::Identity(cfg.n_r, cfg.n_r);
  d.w = link_mmse_receivers(cfg, ch, d.b, d.f);
  return d;
}

void check_feasible(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& d, double tol) {
  require_precoders(cfg, d.b);
  for (int j = 0; j < cfg.transmitters(); ++j) {
    const double p = d.b[j].squaredNorm();
    if (p > cfg.p_s[j] + tol) {
      std::ostringstream os;
      os << "transmitter " << j << " power " << p << " exceeds " << cfg.p_s[j];
      throw Error(ErrorCode::Infeasible, os.str());
    }
  }
  const double pr = relay_power(d.f, received_covariance(cfg, ch, d.b));
  if (pr > cfg.p_r + tol) {
    std::ostringstream os;
    os << "relay power " << pr << " exceeds " << cfg.p_r;
    throw Error(ErrorCode::Infeasible, os.str());
  }
}

}  // namespace relaynet
