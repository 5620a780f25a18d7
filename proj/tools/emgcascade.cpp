#include <CLI11.hpp>
#include <json.hpp>

#include <emgcascade/emgcascade.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace emgcascade;
using nlohmann::json;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kMissingInput = 2;
constexpr int kFailure = 3;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

int report_error(const std::string& command, int code, const std::string& message) {
  json err = {{"error", {{"command", command}, {"code", code}, {"message", message}}}};
  std::cerr << err.dump() << std::endl;
  return code;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s.empty() ? "all" : s;
}

/// Staging directory next to `out`, renamed into place by commit().
class StagedOutput {
 public:
  explicit StagedOutput(fs::path out) : out_(std::move(out)) {
    if (fs::exists(out_)) {
      if (!fs::is_directory(out_) || (!fs::is_empty(out_) && !fs::exists(out_ / "manifest.json")))
        throw CliError(kBadInput, "output directory " + out_.string() + " exists and is not a previous run");
    }
    const auto parent = out_.has_parent_path() ? out_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    staging_ = parent / ("." + out_.filename().string() + ".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;
  ~StagedOutput() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }

  const fs::path& dir() const { return staging_; }

  void commit() {
    fs::remove_all(out_);
    fs::rename(staging_, out_);
    committed_ = true;
  }

 private:
  fs::path out_;
  fs::path staging_;
  bool committed_ = false;
};

/// Accepts either a config file or a manifest written by a previous run.
ExperimentConfig read_config_or_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw CliError(kMissingInput, "config not found: " + path.string());
  const std::string text = read_file(path);
  ExperimentConfig cfg;
  try {
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      const json j = json::parse(text);
      if (j.is_object() && j.value("format", std::string{}) == "emgcascade.manifest")
        cfg = config_from_json(j.at("config"));
      else
        cfg = config_from_json(j);
    }
  } catch (const json::exception& e) {
    throw CliError(kBadInput, path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CliError(kBadInput, path.string() + ": " + e.what());
  }
  if (cfg.dataset && fs::path(*cfg.dataset).is_relative())
    cfg.dataset = fs::absolute(path.parent_path() / *cfg.dataset).lexically_normal().string();
  return cfg;
}

std::vector<Recording> load_input(const ExperimentConfig& cfg) {
  if (cfg.dataset) {
    if (!fs::exists(*cfg.dataset)) throw CliError(kMissingInput, "dataset not found: " + *cfg.dataset);
    return load_recordings(*cfg.dataset);
  }
  if (cfg.synth) return generate_synthetic_recordings(*cfg.synth, derive_seed(cfg.seed, {0x5e7d}));
  throw CliError(kBadInput, "config names neither 'dataset' nor 'synth'");
}

/// Subject id -> recordings, in sorted order.
std::map<std::string, std::vector<Recording>> group_subjects(std::vector<Recording> recs, bool per_subject) {
  std::map<std::string, std::vector<Recording>> out;
  for (auto& r : recs) {
    const std::string key = per_subject ? (r.subject_id.empty() ? "all" : r.subject_id) : "all";
    out[key].push_back(std::move(r));
  }
  return out;
}

int cmd_run(const fs::path& config_path, std::optional<std::uint64_t> seed, std::optional<fs::path> out_dir) {
  ExperimentConfig cfg = read_config_or_manifest(config_path);
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.output_dir = out_dir->string();
  const auto subjects = group_subjects(load_input(cfg), cfg.per_subject);

  StagedOutput staged(cfg.output_dir);
  fs::create_directories(staged.dir() / "models");
  std::vector<MetricRecord> records;
  for (const auto& [subject, recs] : subjects) {
    const Dataset ds = build_dataset(recs, cfg.window_ms, cfg.channels);
    std::clog << "subject " << subject << ": " << ds.size() << " windows, " << ds.class_count << " classes, "
              << ds.channel_count << " channels\n";
    auto r = run_experiment(ds, cfg, subject);
    records.insert(records.end(), r.begin(), r.end());

    // Deployable cascade fitted on all of the subject's windows.
    const Matrix X = extract_feature_matrix(ds.windows, {cfg.ssc_threshold});
    const auto y = ds.labels();
    const auto layout = FeatureLayout::uniform(ds.channel_count, kFeaturesPerChannel);
    const std::uint64_t model_seed = derive_seed(cfg.seed, {0x40de1, fnv1a(subject)});
    EstimatorConfig est{cfg.estimator, 1, derive_seed(model_seed, {0xe57})};
    if (cfg.estimator == DensityEstimator::GaussianMixture)
      est.components = tune_gmm_components(X, y, layout, ds.class_count, cfg.k_grid, derive_seed(model_seed, {0x7c})).components;
    OccOptions occ;
    occ.nu_grid = cfg.nu_grid;
    const bool soft = std::find(cfg.methods.begin(), cfg.methods.end(), Method::NBH) == cfg.methods.end() ||
                      std::find(cfg.methods.begin(), cfg.methods.end(), Method::NBS) != cfg.methods.end();
    CascadeModel model = train_cascade(X, y, layout, ds.class_count, est, occ, derive_seed(model_seed, {0x0cc}),
                                       soft ? DecisionMode::Soft : DecisionMode::Crisp);
    model.window_ms = cfg.window_ms;
    model.sample_rate_hz = ds.windows.front().sample_rate_hz;
    model.features.ssc_threshold = cfg.ssc_threshold;
    save_cascade(staged.dir() / "models" / ("cascade_" + file_safe(subject) + ".json"), model);
    if (cfg.dump_features) write_feature_dump(staged.dir() / ("features_" + file_safe(subject) + ".csv"), X, y);
  }

  const auto rows = to_rows(records);
  write_results_csv(staged.dir() / "results.csv", rows);
  write_report(staged.dir(), rows, std::string(to_string(cfg.estimator)));

  const json config_json = config_to_json(cfg);
  json hashed = config_json;
  hashed.erase("output_dir");
  const std::string version = EMGCASCADE_VERSION;
  const json manifest = {{"format", "emgcascade.manifest"},
                         {"version", version},
                         {"seed", cfg.seed},
                         {"config_hash", hex64(fnv1a(hashed.dump(), fnv1a(version)))},
                         {"results_hash", hex64(fnv1a(read_file(staged.dir() / "results.csv")))},
                         {"subjects", json(std::vector<std::string>(
                                          [&] { std::vector<std::string> v; for (auto& [s, _] : subjects) v.push_back(s); return v; }()))},
                         {"config", config_json}};
  std::ofstream(staged.dir() / "manifest.json") << manifest.dump(2) << '\n';
  staged.commit();
  std::clog << "wrote " << cfg.output_dir << " (" << records.size() << " metric records)\n";
  return kOk;
}

int cmd_contaminate(const fs::path& in_dir, double snr, std::uint64_t seed, std::optional<fs::path> out_dir,
                    double window_ms, const ChannelPolicy& policy) {
  if (std::isnan(snr)) throw std::invalid_argument("--snr must be a number");
  if (!policy.reaches(snr))
    throw std::invalid_argument("SNR " + detail::format_double(snr) +
                                " dB is below what clipping can reach (0 dB); use --kind with another noise");
  const fs::path manifest_path = in_dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw CliError(kMissingInput, "no manifest.json in " + in_dir.string());
  json manifest;
  std::ifstream(manifest_path) >> manifest;
  const auto recs = load_recordings(manifest_path);
  const fs::path out = out_dir ? *out_dir
                               : fs::path(in_dir.lexically_normal().string() + "_snr" + detail::format_double(snr));
  StagedOutput staged(out);

  std::vector<ManifestEntry> entries;
  json windows = json::array();
  std::size_t index = 0;
  for (const auto& [file, meta] : manifest.items()) {
    const Recording& rec = recs[index];
    Recording noisy = rec;
    const std::size_t n = window_sample_count(window_ms, rec.sample_rate_hz);
    const auto segments = segment_recording(rec, window_ms);
    for (std::size_t w = 0; w < segments.size(); ++w) {
      Rng rng(seed, {0xc0, index, w});
      const auto c = contaminate_window(segments[w], snr, rng, policy);
      json affected = json::array(), measured = json::array();
      for (auto l : c.affected) {
        affected.push_back(l + 1);
        const double m = measured_snr_db(segments[w].samples.row(l), c.window.samples.row(l));
        measured.push_back(std::isfinite(m) ? json(m) : json(nullptr));
        std::copy(c.window.samples.row(l).begin(), c.window.samples.row(l).end(),
                  noisy.channels.row(l).begin() + static_cast<std::ptrdiff_t>(w * n));
      }
      windows.push_back({{"file", file},
                         {"window", w},
                         {"first_sample", w * n},
                         {"kind", std::string(to_string(c.kind))},
                         {"affected_channels", affected},
                         {"measured_snr_db", measured}});
    }
    entries.push_back({file, std::move(noisy)});
    ++index;
  }
  write_recordings(staged.dir(), entries);
  const json truth = {{"snr_db", std::isfinite(snr) ? json(snr) : json("inf")},
                      {"seed", seed},
                      {"window_ms", window_ms},
                      {"windows", windows}};
  std::ofstream(staged.dir() / "truth.json") << truth.dump(1) << '\n';
  staged.commit();
  std::clog << "wrote " << out.string() << " (" << windows.size() << " windows)\n";
  return kOk;
}

int cmd_report(const fs::path& dir) {
  const fs::path results = dir / "results.csv";
  if (!fs::exists(results)) throw CliError(kMissingInput, "no results.csv in " + dir.string());
  std::string estimator = "NB";
  if (fs::exists(dir / "manifest.json")) {
    json m;
    std::ifstream(dir / "manifest.json") >> m;
    if (m.contains("config")) estimator = m["config"].value("estimator", estimator);
  }
  const auto rows = read_results_csv(results);
  for (const auto& p : write_report(dir, rows, estimator)) std::clog << "wrote " << p.string() << '\n';
  return kOk;
}

int cmd_synth(const fs::path& spec_path, const fs::path& out, std::uint64_t seed) {
  if (!fs::exists(spec_path)) throw CliError(kMissingInput, "spec not found: " + spec_path.string());
  SynthSpec spec;
  try {
    const std::string text = read_file(spec_path);
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) spec = json::parse(text).get<SynthSpec>();
  } catch (const json::exception& e) {
    throw CliError(kBadInput, spec_path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CliError(kBadInput, spec_path.string() + ": " + e.what());
  }
  StagedOutput staged(out);
  std::vector<ManifestEntry> entries;
  for (auto& r : generate_synthetic_recordings(spec, seed))
    entries.push_back({"class" + std::to_string(r.class_label) + ".csv", std::move(r)});
  write_recordings(staged.dir(), entries);
  staged.commit();
  std::clog << "wrote " << out.string() << " (" << entries.size() << " recordings)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contamination-aware sEMG recognition benchmark"};
  app.set_version_flag("--version", std::string(EMGCASCADE_VERSION));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Cross-validated experiment with noise-extended test sets");
  std::string run_config;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_out;
  run->add_option("--config", run_config, "Config JSON (or a previous run's manifest.json)")->required();
  run->add_option("--seed", run_seed, "Override the master seed");
  run->add_option("--out", run_out, "Override the output directory");

  auto* cont = app.add_subcommand("contaminate", "Write a contaminated copy of a dataset plus truth.json");
  std::string cont_in;
  double cont_snr = 0.0;
  std::uint64_t cont_seed = 1;
  std::optional<std::string> cont_out, cont_kind;
  double cont_window = 500.0;
  std::size_t cont_min = 1, cont_max = 0;
  cont->add_option("--in", cont_in, "Dataset directory containing manifest.json")->required();
  cont->add_option("--snr", cont_snr, "SNR in dB")->required();
  cont->add_option("--seed", cont_seed, "Seed")->required();
  cont->add_option("--out", cont_out, "Output directory (default <in>_snr<SNR>)");
  cont->add_option("--window-ms", cont_window, "Window length in ms")->capture_default_str();
  cont->add_option("--kind", cont_kind, "Force one noise kind")
      ->check(CLI::IsMember({"power_line", "attenuation", "gaussian", "clipping", "baseline_wander"}));
  cont->add_option("--min-channels", cont_min, "Fewest channels contaminated per window")->capture_default_str();
  cont->add_option("--max-channels", cont_max, "Most channels contaminated per window (0: L/2)")->capture_default_str();

  auto* rep = app.add_subcommand("report", "Rank tables and plots from an existing results.csv");
  std::string rep_in;
  rep->add_option("--in", rep_in, "Run output directory")->required();

  auto* syn = app.add_subcommand("synth", "Write a synthetic dataset");
  std::string syn_spec, syn_out = "synthetic";
  std::uint64_t syn_seed = 1;
  syn->add_option("--spec", syn_spec, "Synthetic spec JSON")->required();
  syn->add_option("--out", syn_out, "Output directory")->capture_default_str();
  syn->add_option("--seed", syn_seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
    const auto subs = app.get_subcommands();
    return report_error(subs.empty() ? "emgcascade" : subs.front()->get_name(), kBadInput, e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*run) return cmd_run(run_config, run_seed, run_out ? std::optional<fs::path>(*run_out) : std::nullopt);
    if (*cont) {
      ChannelPolicy policy;
      policy.min_channels = cont_min;
      policy.max_channels = cont_max;
      if (cont_kind) policy.kind = noise_kind_from_string(*cont_kind);
      return cmd_contaminate(cont_in, cont_snr, cont_seed, cont_out ? std::optional<fs::path>(*cont_out) : std::nullopt,
                             cont_window, policy);
    }
    if (*rep) return cmd_report(rep_in);
    if (*syn) return cmd_synth(syn_spec, syn_out, syn_seed);
  } catch (const CliError& e) {
    return report_error(command, e.code, e.what());
  } catch (const std::invalid_argument& e) {
    return report_error(command, kBadInput, e.what());
  } catch (const std::exception& e) {
    return report_error(command, kFailure, e.what());
  }
  return kOk;
}
