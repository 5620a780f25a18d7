#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "emgcascade/dataset_io.hpp"
#include "emgcascade/experiment.hpp"
#include "emgcascade/statistics.hpp"

namespace emgcascade {

inline constexpr std::array<std::string_view, 3> kCriteria = {"bac", "kappa", "micro_f1"};

/// One row of the long-format results table.
struct ResultRow {
  std::string subject;
  std::string method;
  double snr_db = 0.0;
  std::string criterion;
  std::size_t fold = 0;
  std::size_t repeat = 0;
  double value = 0.0;
};

inline std::vector<ResultRow> to_rows(const std::vector<MetricRecord>& records) {
  std::vector<ResultRow> rows;
  for (const auto& r : records) {
    const std::string m(to_string(r.method));
    rows.push_back({r.subject, m, r.snr_db, "bac", r.fold, r.repeat, r.bac});
    rows.push_back({r.subject, m, r.snr_db, "kappa", r.fold, r.repeat, r.kappa});
    rows.push_back({r.subject, m, r.snr_db, "micro_f1", r.fold, r.repeat, r.micro_f1});
  }
  return rows;
}

inline constexpr std::string_view kResultsHeader = "subject,method,snr_db,criterion,fold,repeat,value";

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows)
    out << r.subject << ',' << r.method << ',' << detail::format_double(r.snr_db) << ',' << r.criterion << ','
        << r.fold << ',' << r.repeat << ',' << detail::format_double(r.value) << '\n';
}

inline void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_results_csv(out, rows);
}

inline std::vector<ResultRow> read_results_csv(std::istream& in, const std::string& name = "results.csv") {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw std::runtime_error(name + ": row 1: expected header '" + std::string(kResultsHeader) + "'");
  std::vector<ResultRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const std::string where = name + ": row " + std::to_string(n);
    const auto c = detail::split_csv_line(line);
    if (c.size() != 7) throw std::runtime_error(where + ": expected 7 columns, found " + std::to_string(c.size()));
    ResultRow r;
    r.subject = c[0];
    r.method = c[1];
    if (r.method.empty()) throw std::runtime_error(where + ": empty method");
    r.snr_db = detail::parse_double(c[2], where);
    r.criterion = c[3];
    if (std::find(kCriteria.begin(), kCriteria.end(), r.criterion) == kCriteria.end())
      throw std::runtime_error(where + ": unknown criterion '" + r.criterion + "'");
    auto parse_index = [&](const std::string& s) {
      const double v = detail::parse_double(s, where);
      if (v < 0 || v != std::floor(v)) throw std::runtime_error(where + ": bad index '" + s + "'");
      return static_cast<std::size_t>(v);
    };
    r.fold = parse_index(c[4]);
    r.repeat = parse_index(c[5]);
    r.value = detail::parse_double(c[6], where);
    if (std::isnan(r.value)) throw std::runtime_error(where + ": value is NaN");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_results_csv(in, path.filename().string());
}

/// Average ranks and significance for one (criterion, SNR) group.
struct RankEntry {
  std::string criterion;
  double snr_db = 0.0;
  std::vector<std::string> methods;
  std::size_t cases = 0;
  RankSummary summary;
};

/// Groups rows by (criterion, SNR); a case is one (subject, fold, repeat).
/// Methods keep their first-seen order.
inline std::vector<RankEntry> rank_table(const std::vector<ResultRow>& rows, double alpha = 0.05) {
  std::vector<std::string> methods;
  for (const auto& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);

  using CaseKey = std::tuple<std::string, std::size_t, std::size_t>;
  std::map<std::pair<std::size_t, double>, std::map<CaseKey, std::vector<double>>> groups;
  for (const auto& r : rows) {
    const auto crit = static_cast<std::size_t>(std::find(kCriteria.begin(), kCriteria.end(), r.criterion) - kCriteria.begin());
    auto& row = groups[{crit, r.snr_db}][{r.subject, r.fold, r.repeat}];
    if (row.empty()) row.assign(methods.size(), std::nan(""));
    const auto m = static_cast<std::size_t>(std::find(methods.begin(), methods.end(), r.method) - methods.begin());
    if (!std::isnan(row[m]))
      throw std::runtime_error("duplicate result for method " + r.method + " at " + r.criterion + ", snr " +
                               detail::format_double(r.snr_db));
    row[m] = r.value;
  }
  std::vector<RankEntry> out;
  for (const auto& [key, cases] : groups) {
    RankEntry e;
    e.criterion = std::string(kCriteria[key.first]);
    e.snr_db = key.second;
    e.methods = methods;
    std::vector<std::vector<double>> values;
    for (const auto& [ck, v] : cases) {
      for (std::size_t m = 0; m < v.size(); ++m)
        if (std::isnan(v[m]))
          throw std::runtime_error("method " + methods[m] + " missing for subject '" + std::get<0>(ck) + "', fold " +
                                   std::to_string(std::get<1>(ck)) + ", repeat " + std::to_string(std::get<2>(ck)) +
                                   " at " + e.criterion + ", snr " + detail::format_double(e.snr_db));
      values.push_back(v);
    }
    e.cases = values.size();
    e.summary = rank_methods(values, alpha);
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_ranks_csv(const std::filesystem::path& path, const std::vector<RankEntry>& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "criterion,snr_db,method,mean_rank,better_than\n";
  for (const auto& e : table)
    for (std::size_t m = 0; m < e.methods.size(); ++m) {
      // Methods that m significantly beats, ';'-separated.
      std::string beats;
      for (std::size_t o = 0; o < e.methods.size(); ++o) {
        const auto& sb = e.summary.significantly_better[o];
        if (std::find(sb.begin(), sb.end(), m) != sb.end()) beats += (beats.empty() ? "" : ";") + e.methods[o];
      }
      out << e.criterion << ',' << detail::format_double(e.snr_db) << ',' << e.methods[m] << ','
          << detail::format_double(e.summary.mean_rank[m]) << ',' << beats << '\n';
    }
}

inline void write_significance_csv(const std::filesystem::path& path, const std::vector<RankEntry>& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "criterion,snr_db,method_a,method_b,adjusted_p,significant\n";
  for (const auto& e : table)
    for (std::size_t i = 0; i < e.methods.size(); ++i)
      for (std::size_t j = i + 1; j < e.methods.size(); ++j) {
        const double p = e.summary.adjusted_p[i][j];
        const auto& bi = e.summary.significantly_better[i];
        const auto& bj = e.summary.significantly_better[j];
        const char* verdict = std::find(bi.begin(), bi.end(), j) != bi.end()   ? "b"
                              : std::find(bj.begin(), bj.end(), i) != bj.end() ? "a"
                                                                              : "";
        out << e.criterion << ',' << detail::format_double(e.snr_db) << ',' << e.methods[i] << ',' << e.methods[j]
            << ',' << detail::format_double(p) << ',' << verdict << '\n';
      }
}

namespace detail {

inline std::string svg_num(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

inline std::string snr_label(double s) { return std::isinf(s) ? std::string("clean") : format_double(s); }

}  // namespace detail

/// Average-rank-vs-SNR line chart for one criterion; one series per method.
/// SNR values are placed at equal spacing in ascending order.
inline std::string rank_plot_svg(const std::vector<RankEntry>& table, std::string_view criterion,
                                 const std::string& title) {
  std::vector<const RankEntry*> entries;
  for (const auto& e : table)
    if (e.criterion == criterion) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->snr_db < b->snr_db; });
  if (entries.empty()) throw std::runtime_error("no results for criterion " + std::string(criterion));
  const auto& methods = entries.front()->methods;
  const double k = static_cast<double>(methods.size());

  constexpr double W = 640, H = 400, left = 60, right = 110, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const double lo = 1.0, hi = std::max(2.0, k);
  auto xpos = [&](std::size_t i) {
    return entries.size() == 1 ? left + pw / 2 : left + pw * static_cast<double>(i) / static_cast<double>(entries.size() - 1);
  };
  auto ypos = [&](double r) { return top + ph * (hi - r) / (hi - lo); };
  static constexpr std::array<const char*, 8> colors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  s << "<g stroke=\"#999\">\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n";
  s << "</g>\n";
  for (int r = 1; r <= static_cast<int>(hi); ++r)
    s << "<text x=\"" << left - 8 << "\" y=\"" << detail::svg_num(ypos(r) + 4) << "\" text-anchor=\"end\">" << r << "</text>\n";
  for (std::size_t i = 0; i < entries.size(); ++i)
    s << "<text x=\"" << detail::svg_num(xpos(i)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << detail::snr_label(entries[i]->snr_db) << "</text>\n";
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">SNR [dB]</text>\n";
  s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
    << ")\">average rank</text>\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const char* color = colors[m % colors.size()];
    s << "<g class=\"series\" data-method=\"" << methods[m] << "\">\n<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < entries.size(); ++i)
      s << (i ? " " : "") << detail::svg_num(xpos(i)) << ',' << detail::svg_num(ypos(entries[i]->summary.mean_rank[m]));
    s << "\"/>\n";
    for (std::size_t i = 0; i < entries.size(); ++i)
      s << "<circle cx=\"" << detail::svg_num(xpos(i)) << "\" cy=\"" << detail::svg_num(ypos(entries[i]->summary.mean_rank[m]))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(m);
    s << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 35 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + pw + 40 << "\" y=\"" << ly + 4 << "\">" << methods[m] << "</text>\n</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

/// Writes ranks.csv, significance.csv and one SVG per criterion into `dir`.
/// Returns the SVG paths.
inline std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir,
                                                       const std::vector<ResultRow>& rows,
                                                       const std::string& estimator) {
  const auto table = rank_table(rows);
  write_ranks_csv(dir / "ranks.csv", table);
  write_significance_csv(dir / "significance.csv", table);
  std::vector<std::filesystem::path> svgs;
  for (auto crit : kCriteria) {
    if (std::none_of(table.begin(), table.end(), [&](const RankEntry& e) { return e.criterion == crit; })) continue;
    const auto path = dir / (estimator + "_" + std::string(crit) + ".svg");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << rank_plot_svg(table, crit, estimator + ": average rank (" + std::string(crit) + ")");
    svgs.push_back(path);
  }
  return svgs;
}

}  // namespace emgcascade
