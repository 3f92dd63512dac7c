// SPDX-License-Identifier: Apache-2.0
#include "cascade/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <set>

#include "cascade/error.hpp"

namespace cascade {

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr double kW = 640, kH = 400, kL = 70, kR = 150, kT = 40, kB = 60;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string svg_open(const std::string& title) {
  std::string s = fmt("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                      "viewBox=\"0 0 %.0f %.0f\">\n",
                      kW, kH, kW, kH);
  s += fmt("<rect x=\"0\" y=\"0\" width=\"%.0f\" height=\"%.0f\" fill=\"white\"/>\n", kW, kH);
  s += fmt("<text x=\"%.1f\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">",
           (kL + kW - kR) / 2) +
       xml_escape(title) + "</text>\n";
  return s;
}

std::string axes(const std::string& x_label, const std::string& y_label) {
  std::string s = fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", kL, kH - kB,
                      kW - kR, kH - kB);
  s += fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", kL, kT, kL, kH - kB);
  s += fmt("<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">",
           (kL + kW - kR) / 2, kH - 15) +
       xml_escape(x_label) + "</text>\n";
  s += fmt("<text x=\"18\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 18 %.1f)\">",
           (kT + kH - kB) / 2, (kT + kH - kB) / 2) +
       xml_escape(y_label) + "</text>\n";
  return s;
}

std::string tick(double x, double y, bool vertical_axis, const std::string& label) {
  if (vertical_axis) {
    return fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", x - 4, y, x, y) +
           fmt("<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">",
               x - 6, y + 3) +
           xml_escape(label) + "</text>\n";
  }
  return fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", x, y, x, y + 4) +
         fmt("<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">", x,
             y + 16) +
         xml_escape(label) + "</text>\n";
}

std::string short_num(double v) {
  if (v != 0.0 && (std::fabs(v) >= 1e4 || std::fabs(v) < 1e-2)) return fmt("%.2g", v);
  return fmt("%.3g", v);
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           std::span<const Series> series, bool log2_x) {
  auto tx = [&](double x) { return log2_x ? std::log2(x) : x; };
  double xmin = INFINITY, xmax = -INFINITY, ymin = 0.0, ymax = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!(xmax > xmin)) { xmin -= 0.5; xmax += 0.5; }
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  ymax += 0.05 * (ymax - ymin);
  const double pw = kW - kR - kL, ph = kH - kB - kT;
  auto px = [&](double x) { return kL + (tx(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kH - kB - (y - ymin) / (ymax - ymin) * ph; };

  std::string s = svg_open(title) + axes(x_label, y_label);
  for (int i = 0; i <= 5; ++i) {
    const double y = ymin + (ymax - ymin) * i / 5.0;
    s += tick(kL, py(y), true, short_num(y));
  }
  if (log2_x) {
    for (double e = std::ceil(xmin); e <= xmax + 1e-9; e += 1.0) {
      s += tick(kL + (e - xmin) / (xmax - xmin) * pw, kH - kB, false, short_num(std::exp2(e)));
    }
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double x = xmin + (xmax - xmin) * i / 5.0;
      s += tick(kL + (x - xmin) / (xmax - xmin) * pw, kH - kB, false, short_num(x));
    }
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (const auto& [x, y] : series[i].points) pts += fmt("%.2f,%.2f ", px(x), py(y));
    if (!pts.empty()) pts.pop_back();
    s += fmt("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"2\" points=\"", color) + pts + "\"/>\n";
    const double ly = kT + 16.0 * i + 8;
    s += fmt("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>\n",
             kW - kR + 10, ly, kW - kR + 30, ly, color);
    s += fmt("<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\">", kW - kR + 34, ly + 4) +
         xml_escape(series[i].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string svg_bar_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          std::span<const std::string> labels, std::span<const double> values) {
  double ymax = 0.0;
  for (double v : values) ymax = std::max(ymax, v);
  if (!(ymax > 0.0)) ymax = 1.0;
  ymax *= 1.05;
  const double pw = kW - kR - kL, ph = kH - kB - kT;
  const double slot = values.empty() ? pw : pw / static_cast<double>(values.size());
  std::string s = svg_open(title) + axes(x_label, y_label);
  for (int i = 0; i <= 5; ++i) {
    const double y = ymax * i / 5.0;
    s += tick(kL, kH - kB - y / ymax * ph, true, short_num(y));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = values[i] / ymax * ph;
    const double x = kL + slot * static_cast<double>(i);
    s += fmt("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n", x + slot * 0.1,
             kH - kB - h, slot * 0.8, h, kColors[0]);
    if (i < labels.size()) s += tick(x + slot / 2, kH - kB, false, labels[i]);
  }
  s += "</svg>\n";
  return s;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string s = "bandwidth_kbs,cpu_time_s,wall_time_s,transfer_time_s,uplink_bytes,downlink_bytes\n";
  for (const auto& r : rows) {
    s += fmt("%.6f,%.6f,%.6f,%.6f,%llu,%llu\n", r.bandwidth_kbs, r.cpu_time_s, r.wall_time_s, r.transfer_time_s,
             static_cast<unsigned long long>(r.uplink_bytes), static_cast<unsigned long long>(r.downlink_bytes));
  }
  return s;
}

std::vector<std::filesystem::path> emit_sweep_report(std::span<const SweepRow> rows, Task task,
                                                     const std::filesystem::path& csv_path) {
  write_text_file(csv_path, sweep_csv(rows));
  Series cpu{"CPU time", {}}, wall{"wall time", {}};
  for (const auto& r : rows) {
    cpu.points.emplace_back(r.bandwidth_kbs, r.cpu_time_s);
    wall.points.emplace_back(r.bandwidth_kbs, r.wall_time_s);
  }
  const Series both[] = {cpu, wall};
  auto svg_path = csv_path;
  svg_path.replace_extension(".svg");
  write_text_file(svg_path, svg_line_chart(std::string(task_name(task)) + " inference time vs bandwidth",
                                           "bandwidth (KB/s)", "time (s)", both, true));
  return {csv_path, svg_path};
}

FleetSummary analyze_fleet(const Fleet& in, const FleetReportOptions& opts) {
  const Fleet fleet = opts.unweighted ? in.unweighted() : in;
  const auto& pts = opts.ref.points(opts.task);
  FleetSummary s;
  s.task = opts.task;
  s.mem_req_mb = opts.mem_req_mb;
  s.memory_shortfall = memory_shortfall_fraction(fleet, opts.mem_req_mb);
  s.input_length = opts.input_length.value_or(pts.back().length);
  s.t_max_s = opts.t_max_s.value_or(cpu_time(opts.ref.ref_clock_ghz, opts.task, s.input_length, opts.ref));
  s.feasibility = feasibility_fraction(fleet, opts.task, s.input_length, s.t_max_s, opts.ref);
  double below = 0.0;
  for (const auto& r : fleet.records) {
    if (r.clock_ghz < opts.ref.ref_clock_ghz) below += r.market_share;
  }
  s.share_below_ref_clock = below;
  return s;
}

namespace {

std::vector<double> default_edges(const Fleet& fleet) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : fleet.records) {
    lo = std::min(lo, r.clock_ghz);
    hi = std::max(hi, r.clock_ghz);
  }
  std::vector<double> edges;
  for (double e = std::floor(lo * 4.0) / 4.0; e <= hi + 0.25; e += 0.25) edges.push_back(e);
  if (edges.size() < 2) edges.push_back(edges.back() + 0.25);
  return edges;
}

}  // namespace

FleetSummary emit_fleet_report(const Fleet& in, const FleetReportOptions& opts,
                               const std::filesystem::path& out_dir) {
  const Fleet fleet = opts.unweighted ? in.unweighted() : in;
  FleetSummary summary = analyze_fleet(in, opts);
  auto emit = [&](const std::string& name, const std::string& content) {
    write_text_file(out_dir / name, content);
    summary.files.push_back(out_dir / name);
  };

  // Memory coverage: cumulative share at or below each distinct memory size.
  std::set<double> sizes;
  for (const auto& r : fleet.records) sizes.insert(r.memory_mb);
  std::string csv = "memory_mb,cumulative_share\n";
  Series mem{"cumulative share", {}};
  for (double m : sizes) {
    double below_or_eq = 0.0;
    for (const auto& r : fleet.records) {
      if (r.memory_mb <= m) below_or_eq += r.market_share;
    }
    csv += fmt("%.6f,%.6f\n", m, below_or_eq);
    mem.points.emplace_back(m, 100.0 * below_or_eq);
  }
  emit("memory_coverage.csv", csv);
  emit("memory_coverage.svg", svg_line_chart("Cumulative share of devices by memory", "memory (MB)",
                                             "cumulative share (%)", std::span(&mem, 1)));

  // Feasibility curves, two reference lengths per task.
  for (Task task : {Task::TTS, Task::STT}) {
    const auto& pts = opts.ref.points(task);
    const double short_len = pts.front().length, long_len = pts.back().length;
    double slowest = 0.0;
    for (const auto& r : fleet.records) {
      slowest = std::max(slowest, cpu_time(r.clock_ghz, task, long_len, opts.ref));
    }
    const std::string unit = task == Task::TTS ? "chars" : "s audio";
    Series a{short_num(short_len) + " " + unit, {}}, b{short_num(long_len) + " " + unit, {}};
    std::string fcsv = fmt("t_max_s,fraction_len_%g,fraction_len_%g\n", short_len, long_len);
    constexpr int kSteps = 60;
    for (int i = 0; i <= kSteps; ++i) {
      const double t = slowest * 1.1 * i / kSteps;
      const double fa = feasibility_fraction(fleet, task, short_len, t, opts.ref);
      const double fb = feasibility_fraction(fleet, task, long_len, t, opts.ref);
      fcsv += fmt("%.6f,%.6f,%.6f\n", t, fa, fb);
      a.points.emplace_back(t, fa);
      b.points.emplace_back(t, fb);
    }
    const Series both[] = {a, b};
    const std::string stem = std::string("feasibility_") + task_name(task);
    emit(stem + ".csv", fcsv);
    emit(stem + ".svg", svg_line_chart(std::string("Share of devices meeting a CPU-time budget (") +
                                           task_name(task) + ")",
                                       "CPU time budget (s)", "share of devices", both));
  }

  const auto edges = opts.clock_edges.empty() ? default_edges(fleet) : opts.clock_edges;
  const auto hist = clock_histogram(fleet, edges, opts.ref.ref_clock_ghz);
  std::string hcsv = "bin_lo_ghz,bin_hi_ghz,share\n";
  std::vector<std::string> labels;
  std::vector<double> masses;
  for (const auto& bin : hist.bins) {
    hcsv += fmt("%.6f,%.6f,%.6f\n", bin.lo, bin.hi, bin.mass);
    labels.push_back(fmt("%.2f", bin.lo));
    masses.push_back(bin.mass);
  }
  emit("clock_histogram.csv", hcsv);
  emit("clock_histogram.svg",
       svg_bar_chart("CPU clock rate distribution", "clock (GHz, bin start)", "share of devices", labels, masses));

  std::string sum = "metric,value\n";
  sum += fmt("mem_req_mb,%.6f\n", summary.mem_req_mb);
  sum += fmt("memory_shortfall_fraction,%.6f\n", summary.memory_shortfall);
  sum += fmt("share_below_ref_clock,%.6f\n", summary.share_below_ref_clock);
  sum += fmt("ref_clock_ghz,%.6f\n", opts.ref.ref_clock_ghz);
  sum += std::string("task,") + task_name(summary.task) + "\n";
  sum += fmt("input_length,%.6f\n", summary.input_length);
  sum += fmt("t_max_s,%.6f\n", summary.t_max_s);
  sum += fmt("feasibility_fraction,%.6f\n", summary.feasibility);
  emit("summary.csv", sum);
  return summary;
}

}  // namespace cascade
