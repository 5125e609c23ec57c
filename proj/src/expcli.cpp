#include "nctomo/expcli.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "nctomo/error.hpp"
#include "nctomo/nctest.hpp"
#include "nctomo/parallel.hpp"
#include "nctomo/sampler.hpp"
#include "nctomo/version.hpp"
#include "textio.hpp"

namespace nctomo::expcli {

namespace {

const std::set<std::string> kKnownKeys = {"name", "state",   "eta",     "samples", "seed", "mode",
                                          "n_max", "n_blocks", "k_sigma", "outputs", "sweep"};

template <class T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config.") + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config.") + key + ": wrong type");
  }
}

template <class T>
T optional_field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config.") + key + ": wrong type");
  }
}

std::size_t count_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config.") + key + ": missing");
  const auto& v = j.at(key);
  // Accept 1e7-style floats as long as they are whole numbers.
  if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) return v.get<std::size_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && d == std::floor(d) && d < 1e15) return static_cast<std::size_t>(d);
  }
  throw ConfigError(std::string("config.") + key + ": expected a nonnegative integer");
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class RunLog {
 public:
  RunLog(const std::filesystem::path& path, std::ostream* echo)
      : os_(detail::open_for_write(path)), path_(path), echo_(echo), start_(std::chrono::steady_clock::now()) {}

  void line(const std::string& text) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << '[' << t << "s] " << text << '\n';
    os_ << s.str();
    os_.flush();
    if (echo_ != nullptr) *echo_ << s.str() << std::flush;
  }

  void close() { detail::finish_write(os_, path_); }

 private:
  std::ofstream os_;
  std::filesystem::path path_;
  std::ostream* echo_;
  std::chrono::steady_clock::time_point start_;
};

ExperimentConfig make(std::string name, states::StateModel state, double eta, std::size_t samples, tomo::Mode mode) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.state = std::move(state);
  c.eta = eta;
  c.samples = samples;
  c.mode = mode;
  // 2 nbar + 10 with nbar = 5 for every single-mode fixture.
  c.n_max = 20;
  return c;
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  auto os = detail::open_for_write(path);
  os << j.dump(2) << '\n';
  detail::finish_write(os, path);
}

RunResult run_single(const ExperimentConfig& config, RunLog& log, RunResult result) {
  log.line("sampling " + std::to_string(config.samples) + " quadratures of " + config.state.label() +
           " at eta=" + detail::fmt(config.eta) + ", seed " + std::to_string(config.seed));
  const auto est = tomo::estimate_photon_dist_streaming(config.state, config.eta, config.samples, config.seed,
                                                        config.mode, config.n_max, config.n_blocks);
  log.line("reconstructed p(n), n <= " + std::to_string(config.n_max) + " (" + tomo::to_string(config.mode) + ")");
  const auto report = nctest::compute_B(est, config.k_sigma);

  // Theory: the true distribution, or its Bernoulli convolution for the
  // noisy state.
  const double theory_eta = config.mode == tomo::Mode::true_state ? 1.0 : config.eta;
  const auto exact = states::bernoulli_convolve(states::photon_dist(config.state), theory_eta);
  const auto exact_est = tomo::NumberDistEstimate::from_exact(exact, config.n_max, theory_eta);
  const auto theory = nctest::compute_B(exact_est);

  {
    auto os = detail::open_for_write(result.csv);
    os << "n,theory,estimate,stderr\n";
    for (std::size_t n = 0; n < report.values.size(); ++n) {
      os << n << ',' << detail::fmt(theory.values[n]) << ',' << detail::fmt(report.values[n]) << ','
         << detail::fmt(report.std_err[n]) << '\n';
    }
    detail::finish_write(os, result.csv);
  }
  auto pn_path = result.csv;
  pn_path.replace_filename(config.name + "_pn.csv");
  {
    auto os = detail::open_for_write(pn_path);
    os << "n,theory,estimate,stderr\n";
    for (std::size_t n = 0; n < est.probs.size(); ++n) {
      os << n << ',' << detail::fmt(exact_est.probs[n]) << ',' << detail::fmt(est.probs[n]) << ','
         << detail::fmt(est.std_err[n]) << '\n';
    }
    detail::finish_write(os, pn_path);
  }

  nlohmann::json doc = {
      {"name", config.name},
      {"version", kVersion},
      {"timestamp", timestamp()},
      {"config", to_json(config)},
      {"estimate", tomo::to_json(est)},
      {"criterion", nctest::to_json(report)},
      {"theory", {{"probs", exact_est.probs}, {"B", theory.values}}},
  };
  write_json_file(doc, result.json);

  double min_sig = 0.0;
  int min_n = -1;
  for (std::size_t n = 0; n < report.significance.size(); ++n) {
    if (min_n < 0 || report.significance[n] < min_sig) {
      min_sig = report.significance[n];
      min_n = static_cast<int>(n);
    }
  }
  log.line("B(n): most negative significance " + detail::fmt(min_sig) + " at n=" + std::to_string(min_n) +
           "; verdict " + (report.nonclassical ? "nonclassical" : "not certified") + " at k=" +
           detail::fmt(config.k_sigma));
  result.nonclassical = report.nonclassical;
  return result;
}

RunResult run_sweep(const ExperimentConfig& config, RunLog& log, RunResult result) {
  const auto& twin = std::get<states::TwinBeam>(config.state.kind());
  const auto& etas = *config.sweep;
  log.line("twin-beam sweep over " + std::to_string(etas.size()) + " efficiencies, " +
           std::to_string(config.samples) + " samples each, seed " + std::to_string(config.seed));
  const auto reports =
      nctest::sweep_C_vs_eta(twin.lambda, etas, config.samples, config.seed, config.n_blocks, config.k_sigma);

  auto os = detail::open_for_write(result.csv);
  os << "eta,C_hat,stderr,theory\n";
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const double theory = states::theoretical_C(twin.lambda, etas[i]);
    os << detail::fmt(etas[i]) << ',' << detail::fmt(reports[i].values[0]) << ','
       << detail::fmt(reports[i].std_err[0]) << ',' << detail::fmt(theory) << '\n';
    auto p = nctest::to_json(reports[i]);
    p["eta"] = etas[i];
    p["theory"] = theory;
    points.push_back(std::move(p));
    log.line("eta=" + detail::fmt(etas[i]) + ": C=" + detail::fmt(reports[i].values[0]) + " +- " +
             detail::fmt(reports[i].std_err[0]) + " (theory " + detail::fmt(theory) + ")");
    result.nonclassical = result.nonclassical || reports[i].nonclassical;
  }
  detail::finish_write(os, result.csv);

  nlohmann::json doc = {
      {"name", config.name}, {"version", kVersion}, {"timestamp", timestamp()},
      {"config", to_json(config)}, {"sweep", points},
  };
  write_json_file(doc, result.json);
  return result;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.name.empty()) throw ConfigError("config.name: must be non-empty");
  for (char ch : c.name) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) {
      throw ConfigError("config.name: only letters, digits, '-', '_' and '.' are allowed");
    }
  }
  if (!(c.eta > 0.0 && c.eta <= 1.0)) throw ConfigError("config.eta: must lie in (0, 1]");
  if (c.n_blocks < 2) throw ConfigError("config.n_blocks: must be >= 2");
  if (c.samples < 10 * static_cast<std::size_t>(c.n_blocks)) {
    throw ConfigError("config.samples: must be at least 10 * n_blocks = " + std::to_string(10 * c.n_blocks));
  }
  if (!(c.k_sigma > 0.0 && std::isfinite(c.k_sigma))) throw ConfigError("config.k_sigma: must be positive");
  if (c.state.single_mode()) {
    if (c.sweep) throw ConfigError("config.sweep: only twin_beam states can be swept");
    if (c.n_max < 2 || c.n_max > tomo::kMaxKernelOrder) {
      throw ConfigError("config.n_max: must lie in [2, " + std::to_string(tomo::kMaxKernelOrder) + "]");
    }
    if (c.mode == tomo::Mode::true_state && !(c.eta > 0.5)) {
      throw EstimatorRefusal("config: true_state reconstruction needs eta > 0.5 (got " + detail::fmt(c.eta) +
                             "); use noisy_state");
    }
  } else {
    if (!c.sweep || c.sweep->empty()) throw ConfigError("config.sweep: twin_beam runs need a non-empty eta grid");
    if (c.mode != tomo::Mode::noisy_state) throw ConfigError("config.mode: twin-beam moments use noisy_state");
    for (double eta : *c.sweep) {
      if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("config.sweep: every eta must lie in (0, 1]");
    }
  }
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"name", c.name},         {"state", states::state_to_json(c.state)},
      {"eta", c.eta},           {"samples", c.samples},
      {"seed", c.seed},         {"mode", tomo::to_string(c.mode)},
      {"n_max", c.n_max},       {"n_blocks", c.n_blocks},
      {"k_sigma", c.k_sigma},   {"outputs", {{"dir", c.out_dir.generic_string()}}},
  };
  if (c.sweep) j["sweep"] = {{"etas", *c.sweep}};
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKnownKeys.contains(key)) throw ConfigError("config: unknown key \"" + key + "\"");
  }
  ExperimentConfig c;
  c.name = required<std::string>(j, "name");
  if (!j.contains("state")) throw ConfigError("config.state: missing");
  c.state = states::state_from_json(j.at("state"));
  c.eta = optional_field<double>(j, "eta", 1.0);
  c.samples = count_field(j, "samples");
  if (j.contains("seed")) {
    const auto& seed = j.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
      throw ConfigError("config.seed: expected a nonnegative integer");
    }
    c.seed = seed.get<std::uint64_t>();
  }
  c.mode = tomo::mode_from_string(optional_field<std::string>(j, "mode", "noisy_state"));
  c.n_max = optional_field<int>(j, "n_max", 20);
  c.n_blocks = optional_field<int>(j, "n_blocks", tomo::kDefaultBlocks);
  c.k_sigma = optional_field<double>(j, "k_sigma", 3.0);
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    if (!o.is_object()) throw ConfigError("config.outputs: expected an object");
    c.out_dir = optional_field<std::string>(o, "dir", "out");
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    if (s.is_object() && s.contains("etas")) {
      c.sweep = optional_field<std::vector<double>>(s, "etas", {});
    } else if (s.is_object() && s.contains("start")) {
      c.sweep = eta_grid(required<double>(s, "start"), required<double>(s, "stop"), required<double>(s, "step"));
    } else {
      throw ConfigError("config.sweep: expected {\"etas\": [...]} or {\"start\", \"stop\", \"step\"}");
    }
  }
  validate(c);
  return c;
}

std::vector<ExperimentConfig> load_configs(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  const nlohmann::json* list = &j;
  if (j.is_object() && j.contains("experiments")) list = &j.at("experiments");
  std::vector<ExperimentConfig> out;
  if (list->is_array()) {
    for (const auto& item : *list) out.push_back(config_from_json(item));
  } else {
    out.push_back(config_from_json(*list));
  }
  if (out.empty()) throw ConfigError(path.string() + ": no experiments");
  std::set<std::string> names;
  for (const auto& c : out) {
    if (!names.insert(c.name).second) throw ConfigError("config: duplicate experiment name \"" + c.name + "\"");
  }
  return out;
}

std::vector<double> eta_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(start >= stop)) throw ConfigError("sweep: need start >= stop and step > 0");
  std::vector<double> etas;
  const auto count = static_cast<long>(std::floor((start - stop) / step + 1e-9));
  for (long i = 0; i <= count; ++i) etas.push_back(std::round((start - i * step) * 1e12) / 1e12);
  return etas;
}

std::vector<Preset> list_presets() {
  using states::fixtures::amplitude_squeezed;
  using states::fixtures::even_cat;
  using states::fixtures::phase_squeezed;
  constexpr auto kTrue = tomo::Mode::true_state;
  constexpr auto kNoisy = tomo::Mode::noisy_state;
  std::vector<Preset> full = {
      {"fig1", false, "even cat nbar=5, eta=0.8, 1e7 samples, true state",
       make("fig1", even_cat(5.0), 0.8, 10'000'000, kTrue)},
      {"fig2", false, "phase-squeezed nbar=5, sinh^2 r=3, eta=0.8, 1e7 samples, true state",
       make("fig2", phase_squeezed(), 0.8, 10'000'000, kTrue)},
      {"fig3", false, "amplitude-squeezed nbar=5, sinh^2 r=3, eta=0.8, 1e7 samples, true state",
       make("fig3", amplitude_squeezed(), 0.8, 10'000'000, kTrue)},
      {"fig4", false, "even cat nbar=5, eta=0.8, 1e7 samples, noisy state",
       make("fig4", even_cat(5.0), 0.8, 10'000'000, kNoisy)},
      {"fig5", false, "phase-squeezed nbar=5, sinh^2 r=3, eta=0.8, 1e7 samples, noisy state",
       make("fig5", phase_squeezed(), 0.8, 10'000'000, kNoisy)},
      {"fig6", false, "amplitude-squeezed nbar=5, sinh^2 r=3, eta=0.8, 1e7 samples, noisy state",
       make("fig6", amplitude_squeezed(), 0.8, 10'000'000, kNoisy)},
      {"fig7", false, "phase-squeezed nbar=5, sinh^2 r=3, eta=0.4, 5e7 samples, noisy state",
       make("fig7", phase_squeezed(), 0.4, 50'000'000, kNoisy)},
      {"fig9", false, "twin beam |lambda|^2=0.5, eta 1.0 -> 0.3 step 0.05, 4e5 samples per point",
       make("fig9", states::fixtures::twin_beam(0.5), 1.0, 400'000, kNoisy)},
  };
  full.back().config.sweep = eta_grid(1.0, 0.3, 0.05);

  std::vector<Preset> out = full;
  for (const auto& p : full) {
    Preset d = p;
    d.desk = true;
    d.config.name = p.name + "-desk";
    d.config.samples = p.config.samples / 10;
    d.description = p.description + " (desk scale: samples / 10, error bars ~3x wider)";
    out.push_back(std::move(d));
  }
  return out;
}

Preset find_preset(const std::string& name, bool desk) {
  for (auto& p : list_presets()) {
    if (p.name == name && p.desk == desk) return p;
  }
  throw ConfigError("unknown preset \"" + name + "\" (try `list`)");
}

RunResult run(const ExperimentConfig& config, std::ostream* echo) {
  validate(config);
  RunResult result;
  result.json = config.out_dir / (config.name + ".json");
  result.csv = config.out_dir / (config.name + ".csv");
  result.log = config.out_dir / (config.name + ".log");
  RunLog log(result.log, echo);
  log.line("nctomo " + std::string(kVersion) + " run \"" + config.name + "\" with " +
           std::to_string(worker_count()) + " worker(s)");
  result = config.state.single_mode() ? run_single(config, log, result) : run_sweep(config, log, result);
  log.line("wrote " + result.json.string() + " and " + result.csv.string());
  log.close();
  return result;
}

int exit_code_for(std::exception_ptr error, std::ostream& err) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EstimatorRefusal& e) {
    err << "refused: " << e.what() << '\n';
    return kExitRefusal;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (...) {
    err << "error: unknown exception\n";
    return kExitRuntime;
  }
}

}  // namespace nctomo::expcli
