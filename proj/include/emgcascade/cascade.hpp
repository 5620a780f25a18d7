#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgcascade/features.hpp"
#include "emgcascade/naive_bayes.hpp"
#include "emgcascade/occ.hpp"

namespace emgcascade {

inline constexpr int kCascadeFormatVersion = 1;

/// Trained two-stage recognizer: per-channel contamination detectors feeding
/// the channel-weighted naive Bayes classifier.
struct CascadeModel {
  FeatureOptions features;
  double window_ms = 500.0;
  double sample_rate_hz = 0.0;
  OccEnsemble occ;
  DnbModel dnb;
};

struct CascadeDecision {
  int label = 0;
  std::vector<double> contamination;  // r, one entry per channel
};

inline CascadeDecision classify(const CascadeModel& m, const FullFeatureVector& x, DecisionMode mode) {
  CascadeDecision d;
  d.contamination = ensemble_predict(m.occ, x, mode);
  d.label = predict(m.dnb, x, d.contamination);
  return d;
}

inline CascadeDecision classify(const CascadeModel& m, const SignalWindow& w, DecisionMode mode) {
  return classify(m, extract_features(w, m.features), mode);
}

inline CascadeModel train_cascade(const Matrix& X, std::span<const int> y, const FeatureLayout& layout,
                                  int classes, const EstimatorConfig& est, const OccOptions& occ_opt,
                                  std::uint64_t seed, DecisionMode mode = DecisionMode::Soft) {
  CascadeModel m;
  m.dnb = fit_dnb(X, y, layout, classes, est);
  m.occ = train_occ_ensemble(X, layout, occ_opt, seed, mode);
  return m;
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json to_json_value(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t cols) {
  Matrix m(0, cols);
  for (const auto& row : j) m.append_row(row.get<std::vector<double>>());
  return m;
}

inline nlohmann::json to_json_value(const OccEnsemble& e) {
  auto dets = nlohmann::json::array();
  for (const auto& d : e.detectors)
    dets.push_back({{"channel", d.channel},
                    {"feature_dim", d.model.dimension()},
                    {"nu", d.model.nu},
                    {"gamma", d.model.gamma},
                    {"rho", d.model.rho},
                    {"training_size", d.model.training_size},
                    {"alphas", d.model.alphas},
                    {"support_vectors", to_json_value(d.model.support_vectors)},
                    {"calibrator", {{"a", d.calibrator.a}, {"b", d.calibrator.b}}}});
  return {{"mode", e.mode == DecisionMode::Crisp ? "crisp" : "soft"},
          {"layout", e.layout.dims},
          {"detectors", dets}};
}

inline OccEnsemble occ_from_json(const nlohmann::json& j) {
  OccEnsemble e;
  e.mode = j.at("mode").get<std::string>() == "crisp" ? DecisionMode::Crisp : DecisionMode::Soft;
  e.layout.dims = j.at("layout").get<std::vector<std::size_t>>();
  for (const auto& d : j.at("detectors")) {
    ChannelDetector det;
    det.channel = d.at("channel").get<std::size_t>();
    det.model.nu = d.at("nu").get<double>();
    det.model.gamma = d.at("gamma").get<double>();
    det.model.rho = d.at("rho").get<double>();
    det.model.training_size = d.at("training_size").get<std::size_t>();
    det.model.alphas = d.at("alphas").get<std::vector<double>>();
    det.model.support_vectors = matrix_from_json(d.at("support_vectors"), d.at("feature_dim").get<std::size_t>());
    det.calibrator = {d.at("calibrator").at("a").get<double>(), d.at("calibrator").at("b").get<double>()};
    if (det.model.alphas.size() != det.model.support_vectors.rows())
      throw std::runtime_error("cascade model: alpha count differs from support vector count");
    e.detectors.push_back(std::move(det));
  }
  if (e.detectors.size() != e.layout.channels())
    throw std::runtime_error("cascade model: expected one detector per channel");
  return e;
}

inline nlohmann::json to_json_value(const DnbModel& m) {
  nlohmann::json j = {{"priors", m.priors.p}, {"layout", m.layout.dims}};
  if (const auto* g = std::get_if<GaussianFeatureModel>(&m.densities)) {
    std::vector<double> mean, var;
    for (const auto& p : g->params) {
      mean.push_back(p.mean);
      var.push_back(p.var);
    }
    j["estimator"] = "NBG";
    j["densities"] = {{"mean", mean}, {"var", var}, {"var_floor", g->var_floor}};
  } else {
    const auto& gm = std::get<GmmFeatureModel>(m.densities);
    auto mixtures = nlohmann::json::array();
    for (const auto& mix : gm.params) {
      std::vector<double> means, vars;
      for (const auto& c : mix.components) {
        means.push_back(c.mean);
        vars.push_back(c.var);
      }
      mixtures.push_back({{"weights", mix.weights}, {"means", means}, {"vars", vars}});
    }
    j["estimator"] = "NBGMT";
    j["densities"] = {{"components", gm.components}, {"mixtures", mixtures}, {"var_floor", gm.var_floor}};
  }
  return j;
}

inline DnbModel dnb_from_json(const nlohmann::json& j) {
  DnbModel m;
  m.priors.p = j.at("priors").get<std::vector<double>>();
  m.layout.dims = j.at("layout").get<std::vector<std::size_t>>();
  const std::size_t features = m.layout.total();
  const std::size_t expected = features * m.priors.p.size();
  const auto& d = j.at("densities");
  if (j.at("estimator").get<std::string>() == "NBG") {
    GaussianFeatureModel g;
    g.features = features;
    g.var_floor = d.at("var_floor").get<std::vector<double>>();
    const auto mean = d.at("mean").get<std::vector<double>>();
    const auto var = d.at("var").get<std::vector<double>>();
    if (mean.size() != expected || var.size() != expected)
      throw std::runtime_error("cascade model: density table has wrong size");
    for (std::size_t i = 0; i < expected; ++i) g.params.push_back({mean[i], var[i]});
    m.densities = std::move(g);
  } else {
    GmmFeatureModel g;
    g.features = features;
    g.components = d.at("components").get<std::size_t>();
    g.var_floor = d.at("var_floor").get<std::vector<double>>();
    for (const auto& mj : d.at("mixtures")) {
      Mixture1D mix;
      mix.weights = mj.at("weights").get<std::vector<double>>();
      const auto means = mj.at("means").get<std::vector<double>>();
      const auto vars = mj.at("vars").get<std::vector<double>>();
      for (std::size_t k = 0; k < means.size(); ++k) mix.components.push_back({means[k], vars[k]});
      g.params.push_back(std::move(mix));
    }
    if (g.params.size() != expected) throw std::runtime_error("cascade model: density table has wrong size");
    m.densities = std::move(g);
  }
  return m;
}

inline nlohmann::json to_json_value(const CascadeModel& m) {
  return {{"format", "emgcascade.cascade"},
          {"version", kCascadeFormatVersion},
          {"window_ms", m.window_ms},
          {"sample_rate_hz", m.sample_rate_hz},
          {"features", {{"wavelet", "db6"}, {"levels", kDecompositionLevels}, {"ssc_threshold", m.features.ssc_threshold}}},
          {"occ", to_json_value(m.occ)},
          {"dnb", to_json_value(m.dnb)}};
}

inline CascadeModel cascade_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "emgcascade.cascade")
    throw std::runtime_error("not a cascade model file");
  if (j.at("version").get<int>() != kCascadeFormatVersion)
    throw std::runtime_error("unsupported cascade model version " + j.at("version").dump());
  CascadeModel m;
  m.window_ms = j.at("window_ms").get<double>();
  m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
  m.features.ssc_threshold = j.at("features").at("ssc_threshold").get<double>();
  m.occ = occ_from_json(j.at("occ"));
  m.dnb = dnb_from_json(j.at("dnb"));
  if (m.occ.layout != m.dnb.layout) throw std::runtime_error("cascade model: stage layouts differ");
  return m;
}

inline void save_cascade(const std::filesystem::path& path, const CascadeModel& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json_value(m).dump(1) << '\n';
}

inline CascadeModel load_cascade(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return cascade_from_json(j);
}

}  // namespace emgcascade
