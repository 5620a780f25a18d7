#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "emgcascade/contamination.hpp"
#include "emgcascade/ecoc.hpp"
#include "emgcascade/features.hpp"
#include "emgcascade/metrics.hpp"
#include "emgcascade/naive_bayes.hpp"
#include "emgcascade/occ.hpp"
#include "emgcascade/signal_model.hpp"
#include "emgcascade/synthetic.hpp"

namespace emgcascade {

enum class Method { B, EC, NBH, NBS };

inline constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::B: return "B";
    case Method::EC: return "EC";
    case Method::NBH: return "NBH";
    case Method::NBS: return "NBS";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  for (auto m : {Method::B, Method::EC, Method::NBH, Method::NBS})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected B, EC, NBH or NBS)");
}

struct ExperimentConfig {
  std::optional<std::string> dataset;  // manifest path
  std::optional<SynthSpec> synth;
  std::vector<std::size_t> channels;   // empty: all channels
  double window_ms = 500.0;
  std::vector<double> snr_grid = {0, 1, 2, 3, 4, 5, 6, 10, 12};
  std::size_t folds = 10;
  std::size_t repeats = 3;
  std::uint64_t seed = 1;
  std::vector<Method> methods = {Method::B, Method::EC, Method::NBH, Method::NBS};
  DensityEstimator estimator = DensityEstimator::Gaussian;
  std::vector<double> nu_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> code_size_grid = {2, 3, 4, 5, 6};
  std::vector<std::size_t> k_grid = {1, 3, 5, 7};
  ChannelPolicy channel_policy;
  double ssc_threshold = 0.0;
  std::string output_dir = "results";
  bool per_subject = true;
  bool dump_features = false;
  std::size_t workers = 0;  // 0: EMGCASCADE_WORKERS or hardware concurrency

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (!(window_ms > 0.0)) fail("window_ms must be positive");
    if (snr_grid.empty()) fail("snr_grid must not be empty");
    for (double s : snr_grid)
      if (std::isnan(s) || (std::isinf(s) && s < 0) || s < -20.0) fail("snr_grid values must be >= -20 dB");
    for (double s : snr_grid)
      if (!channel_policy.reaches(s))
        fail("snr_grid value " + std::to_string(s) + " dB is below what clipping can reach (0 dB); "
             "pin channel_policy.kind to another noise to use negative SNRs");
    if (folds < 2) fail("folds must be >= 2");
    if (repeats < 1) fail("repeats must be >= 1");
    if (methods.empty()) fail("methods must not be empty");
    if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) fail("methods contain duplicates");
    if (nu_grid.empty()) fail("nu_grid must not be empty");
    for (double v : nu_grid)
      if (!(v > 0.0 && v <= 1.0)) fail("nu_grid values must lie in (0, 1]");
    if (code_size_grid.empty()) fail("code_size_grid must not be empty");
    for (double v : code_size_grid)
      if (!(v > 0.0)) fail("code_size_grid values must be positive");
    if (k_grid.empty()) fail("k_grid must not be empty");
    for (auto k : k_grid)
      if (k < 1) fail("k_grid values must be >= 1");
    if (std::set<std::size_t>(channels.begin(), channels.end()).size() != channels.size())
      fail("channels contain duplicates");
    if (channel_policy.max_channels && channel_policy.max_channels < channel_policy.min_channels)
      fail("channel_policy.max_channels must be >= min_channels");
  }
};

namespace detail {

inline double snr_from_json(const nlohmann::json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "clean") return kNoNoise;
    throw std::invalid_argument("config: bad SNR value '" + s + "'");
  }
  return v.get<double>();
}

inline nlohmann::json snr_to_json(double s) {
  if (std::isinf(s)) return "inf";
  return s;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "dataset", "synth", "channels", "window_ms", "snr_grid", "folds", "repeats", "seed",
      "methods", "estimator", "nu_grid", "code_size_grid", "k_grid", "channel_policy",
      "ssc_threshold", "output_dir", "per_subject", "dump_features", "workers"};
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
    if (j.contains("synth")) c.synth = j["synth"].get<SynthSpec>();
    if (j.contains("channels")) c.channels = j["channels"].get<std::vector<std::size_t>>();
    c.window_ms = j.value("window_ms", c.window_ms);
    if (j.contains("snr_grid")) {
      c.snr_grid.clear();
      for (const auto& v : j["snr_grid"]) c.snr_grid.push_back(detail::snr_from_json(v));
    }
    c.folds = j.value("folds", c.folds);
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    if (j.contains("estimator")) {
      const auto e = j["estimator"].get<std::string>();
      if (e == "NBG") c.estimator = DensityEstimator::Gaussian;
      else if (e == "NBGMT") c.estimator = DensityEstimator::GaussianMixture;
      else throw std::invalid_argument("config: estimator must be NBG or NBGMT");
    }
    if (j.contains("nu_grid")) c.nu_grid = j["nu_grid"].get<std::vector<double>>();
    if (j.contains("code_size_grid")) c.code_size_grid = j["code_size_grid"].get<std::vector<double>>();
    if (j.contains("k_grid")) c.k_grid = j["k_grid"].get<std::vector<std::size_t>>();
    if (j.contains("channel_policy")) {
      const auto& p = j["channel_policy"];
      for (const auto& [key, value] : p.items())
        if (key != "min_channels" && key != "max_channels" && key != "kind")
          throw std::invalid_argument("config: unknown channel_policy key '" + key + "'");
      c.channel_policy.min_channels = p.value("min_channels", c.channel_policy.min_channels);
      c.channel_policy.max_channels = p.value("max_channels", c.channel_policy.max_channels);
      if (p.contains("kind")) c.channel_policy.kind = noise_kind_from_string(p["kind"].get<std::string>());
    }
    c.ssc_threshold = j.value("ssc_threshold", c.ssc_threshold);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.per_subject = j.value("per_subject", c.per_subject);
    c.dump_features = j.value("dump_features", c.dump_features);
    c.workers = j.value("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  if (c.dataset) j["dataset"] = *c.dataset;
  if (c.synth) j["synth"] = *c.synth;
  j["channels"] = c.channels;
  j["window_ms"] = c.window_ms;
  j["snr_grid"] = nlohmann::json::array();
  for (double s : c.snr_grid) j["snr_grid"].push_back(detail::snr_to_json(s));
  j["folds"] = c.folds;
  j["repeats"] = c.repeats;
  j["seed"] = c.seed;
  j["methods"] = nlohmann::json::array();
  for (auto m : c.methods) j["methods"].push_back(std::string(to_string(m)));
  j["estimator"] = to_string(c.estimator);
  j["nu_grid"] = c.nu_grid;
  j["code_size_grid"] = c.code_size_grid;
  j["k_grid"] = c.k_grid;
  j["channel_policy"] = {{"min_channels", c.channel_policy.min_channels},
                         {"max_channels", c.channel_policy.max_channels}};
  if (c.channel_policy.kind) j["channel_policy"]["kind"] = std::string(to_string(*c.channel_policy.kind));
  j["ssc_threshold"] = c.ssc_threshold;
  j["output_dir"] = c.output_dir;
  j["per_subject"] = c.per_subject;
  j["dump_features"] = c.dump_features;
  return j;
}

/// Reads a JSON config. An empty file yields all defaults.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return ExperimentConfig{};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

struct MetricRecord {
  std::string subject;
  Method method = Method::B;
  double snr_db = 0.0;
  std::size_t fold = 0;
  std::size_t repeat = 0;
  double bac = 0.0;
  double kappa = 0.0;
  double micro_f1 = 0.0;
};

inline std::size_t worker_count(const ExperimentConfig& cfg) {
  if (cfg.workers) return cfg.workers;
  if (const char* env = std::getenv("EMGCASCADE_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Predictions of every configured method on one batch of feature rows.
struct SplitModels {
  FeatureLayout layout;
  DnbModel nb;
  std::optional<OccEnsemble> occ;
  std::optional<EcocModel> ecoc;

  int predict(Method m, const FullFeatureVector& x) const {
    switch (m) {
      case Method::B: return predict_B(nb, x);
      case Method::EC: return predict_ecoc(*ecoc, x);
      case Method::NBH: return emgcascade::predict(nb, x, ensemble_predict(*occ, x, DecisionMode::Crisp));
      case Method::NBS: return emgcascade::predict(nb, x, ensemble_predict(*occ, x, DecisionMode::Soft));
    }
    throw std::logic_error("unhandled method");
  }
};

inline SplitModels fit_split_models(const Matrix& X, std::span<const int> y, const FeatureLayout& layout,
                                    int classes, const ExperimentConfig& cfg, std::uint64_t split_seed) {
  SplitModels s;
  s.layout = layout;
  EstimatorConfig est{cfg.estimator, 1, derive_seed(split_seed, {0xe57})};
  if (cfg.estimator == DensityEstimator::GaussianMixture)
    est.components = tune_gmm_components(X, y, layout, classes, cfg.k_grid, derive_seed(split_seed, {0x7c})).components;
  s.nb = fit_dnb(X, y, layout, classes, est);
  const auto wants = [&](Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
  if (wants(Method::NBH) || wants(Method::NBS)) {
    OccOptions opt;
    opt.nu_grid = cfg.nu_grid;
    s.occ = train_occ_ensemble(X, layout, opt, derive_seed(split_seed, {0x0cc}));
  }
  if (wants(Method::EC))
    s.ecoc = tune_ecoc(X, y, layout, classes, cfg.code_size_grid, derive_seed(split_seed, {0xec}), est).model;
  return s;
}

/// Cross-validated comparison of the configured methods under contamination.
///
/// For every (repeat, fold): all methods are fitted on the clean training
/// fold; the test set is the clean fold plus one contaminated copy of each
/// of its windows, regenerated for every SNR in the grid. Randomness is keyed
/// by (seed, repeat, fold, snr index, window), so results do not depend on
/// the worker count.
inline std::vector<MetricRecord> run_experiment(const Dataset& ds, const ExperimentConfig& cfg,
                                                const std::string& subject = {}) {
  cfg.validate();
  ds.validate();
  const FeatureOptions fopt{cfg.ssc_threshold};
  const Matrix X = extract_feature_matrix(ds.windows, fopt);
  const auto labels = ds.labels();
  const auto layout = FeatureLayout::uniform(ds.channel_count, kFeaturesPerChannel);
  const auto splits = stratified_split(labels, cfg.folds, cfg.repeats, cfg.seed);

  std::vector<std::vector<MetricRecord>> per_split(splits.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t s = next++; s < splits.size(); s = next++) {
      const auto& split = splits[s];
      try {
        const std::uint64_t split_seed = derive_seed(cfg.seed, {0x5b17, split.repeat, split.fold});
        std::vector<int> ytr;
        for (auto i : split.train) ytr.push_back(labels[i]);
        const auto models = fit_split_models(select_rows(X, split.train), ytr, layout, ds.class_count, cfg, split_seed);

        // Clean half of the test set is shared by all SNR levels.
        std::vector<std::vector<int>> clean_pred(cfg.methods.size());
        for (auto i : split.test) {
          const auto x = as_feature_vector(X.row(i), layout);
          for (std::size_t m = 0; m < cfg.methods.size(); ++m) clean_pred[m].push_back(models.predict(cfg.methods[m], x));
        }
        for (std::size_t si = 0; si < cfg.snr_grid.size(); ++si) {
          const double snr = cfg.snr_grid[si];
          std::vector<ConfusionMatrix> cms(cfg.methods.size(), ConfusionMatrix(ds.class_count));
          for (std::size_t m = 0; m < cfg.methods.size(); ++m)
            for (std::size_t k = 0; k < split.test.size(); ++k) cms[m].add(labels[split.test[k]], clean_pred[m][k]);
          for (auto i : split.test) {
            Rng rng(cfg.seed, {0xc0a7, split.repeat, split.fold, si, i});
            const auto noisy = contaminate_window(ds.windows[i], snr, rng, cfg.channel_policy);
            const auto x = extract_features(noisy.window, fopt);
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) cms[m].add(labels[i], models.predict(cfg.methods[m], x));
          }
          for (std::size_t m = 0; m < cfg.methods.size(); ++m)
            per_split[s].push_back({subject, cfg.methods[m], snr, split.fold, split.repeat,
                                    balanced_accuracy(cms[m]), cohens_kappa(cms[m]), micro_f1(cms[m])});
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::make_exception_ptr(std::runtime_error(
              "repeat " + std::to_string(split.repeat) + ", fold " + std::to_string(split.fold) + ": " + e.what()));
      }
    }
  };

  const std::size_t n_workers = std::min(worker_count(cfg), splits.size());
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<MetricRecord> out;
  for (auto& v : per_split) out.insert(out.end(), v.begin(), v.end());
  // Canonical order: method (as configured), SNR (as configured), repeat, fold.
  auto method_pos = [&](Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) - cfg.methods.begin(); };
  auto snr_pos = [&](double s) { return std::find(cfg.snr_grid.begin(), cfg.snr_grid.end(), s) - cfg.snr_grid.begin(); };
  std::stable_sort(out.begin(), out.end(), [&](const MetricRecord& a, const MetricRecord& b) {
    return std::tuple(method_pos(a.method), snr_pos(a.snr_db), a.repeat, a.fold) <
           std::tuple(method_pos(b.method), snr_pos(b.snr_db), b.repeat, b.fold);
  });
  return out;
}

}  // namespace emgcascade
