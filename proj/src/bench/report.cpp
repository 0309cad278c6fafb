#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "resa/bench.hpp"

namespace resa::bench {

namespace {

std::string num(double v, int precision = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string two_column(const std::string& header, const std::vector<std::pair<double, double>>& rows,
                       int x_precision) {
  std::string out = header + "\n";
  for (const auto& [x, y] : rows) out += num(x, x_precision) + "," + num(y) + "\n";
  return out;
}

std::vector<std::pair<double, double>> column(const std::vector<OverheadPoint>& curve, bool latency) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : curve) {
    out.emplace_back(static_cast<double>(p.backlog), latency ? p.latency_ms : p.ops_per_s);
  }
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out.push_back(c);
  }
  return out;
}

}  // namespace

std::string svg_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, bool log_x, double marker_x) {
  double x0 = 1e300, x1 = -1e300, y1 = 0;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      const double xv = log_x ? std::log10(std::max(x, 1e-9)) : x;
      x0 = std::min(x0, xv);
      x1 = std::max(x1, xv);
      y1 = std::max(y1, y);
      any = true;
    }
  }
  if (!any) throw Error("cannot plot an empty series");
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= 0) y1 = 1;
  y1 *= 1.1;
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  auto px = [&](double x) { return L + ((log_x ? std::log10(std::max(x, 1e-9)) : x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - y / y1 * (H - T - B); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + num(L, 1) + "\" y1=\"" + num(H - B, 1) + "\" x2=\"" + num(W - R, 1) + "\" y2=\"" + num(H - B, 1) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(L, 1) + "\" y1=\"" + num(T, 1) + "\" x2=\"" + num(L, 1) + "\" y2=\"" + num(H - B, 1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y1 * i / 4;
    s += "<text x=\"" + num(L - 6, 1) + "\" y=\"" + num(py(yv) + 4, 1) + "\" text-anchor=\"end\">" + num(yv, 1) + "</text>\n";
    const double xv = x0 + (x1 - x0) * i / 4;
    const double label = log_x ? std::pow(10, xv) : xv;
    s += "<text x=\"" + num(L + (W - L - R) * i / 4, 1) + "\" y=\"" + num(H - B + 16, 1) + "\" text-anchor=\"middle\">" + num(label, 1) + "</text>\n";
  }
  s += "<text x=\"" + num((L + W - R) / 2, 1) + "\" y=\"" + num(H - 12, 1) + "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((T + H - B) / 2, 1) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num((T + H - B) / 2, 1) + ")\">" + escape(y_label) + "</text>\n";
  if (marker_x >= 0) {
    s += "<line x1=\"" + num(px(marker_x), 1) + "\" y1=\"" + num(T, 1) + "\" x2=\"" + num(px(marker_x), 1) + "\" y2=\"" + num(H - B, 1) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto* color = kColors[i % 4];
    std::string pts;
    for (const auto& [x, y] : series[i].points) pts += num(px(x), 1) + "," + num(py(y), 1) + " ";
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    s += "<text x=\"" + num(W - R - 4, 1) + "\" y=\"" + num(T + 14 + 14 * static_cast<double>(i), 1) + "\" text-anchor=\"end\" fill=\"" + color + "\">" + escape(series[i].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

Files overhead_report(const std::vector<OverheadPoint>& baseline,
                      const std::vector<OverheadPoint>& replicated) {
  if (baseline.empty() && replicated.empty()) throw Error("overhead report: empty series");
  Files f;
  std::string summary = "variant,backlog,sent,delivered,ops_per_s,latency_ms,littles_ratio\n";
  auto add = [&](const std::string& variant, const std::vector<OverheadPoint>& curve) {
    for (const auto& p : curve) {
      summary += variant + "," + std::to_string(p.backlog) + "," + std::to_string(p.sent) + "," +
                 std::to_string(p.delivered) + "," + num(p.ops_per_s) + "," + num(p.latency_ms) + "," +
                 num(p.littles_ratio) + "\n";
    }
  };
  std::vector<Series> tput, lat;
  if (!baseline.empty()) {
    f["latency.csv"] = two_column("backlog,latency_ms", column(baseline, true), 0);
    f["throughput.csv"] = two_column("backlog,ops_per_s", column(baseline, false), 0);
    add("baseline", baseline);
    tput.push_back({"baseline", column(baseline, false)});
    lat.push_back({"baseline", column(baseline, true)});
  }
  if (!replicated.empty()) {
    f["latency_replicated.csv"] = two_column("backlog,latency_ms", column(replicated, true), 0);
    f["throughput_replicated.csv"] = two_column("backlog,ops_per_s", column(replicated, false), 0);
    add("replicated", replicated);
    tput.push_back({"replicated", column(replicated, false)});
    lat.push_back({"replicated", column(replicated, true)});
  }
  f["overhead.csv"] = summary;
  f["throughput.svg"] = svg_chart("Throughput vs backlog", "backlog (events)", "ops/s", tput, true);
  f["latency.svg"] = svg_chart("Latency vs backlog", "backlog (events)", "latency (ms)", lat, true);
  return f;
}

Files ordering_report(const std::vector<OrderingPoint>& points) {
  if (points.empty()) throw Error("ordering report: empty series");
  Files f;
  std::string csv = "clients,payload_bytes,ops_per_s,latency_ms\n";
  std::map<std::uint64_t, Series> by_payload;
  for (const auto& p : points) {
    csv += std::to_string(p.clients) + "," + std::to_string(p.payload) + "," + num(p.ops_per_s) + "," +
           num(p.latency_ms) + "\n";
    auto& s = by_payload[p.payload];
    s.label = std::to_string(p.payload) + " B";
    s.points.emplace_back(p.ops_per_s, p.latency_ms);
  }
  f["ordering.csv"] = csv;
  std::vector<Series> series;
  for (auto& [_, s] : by_payload) series.push_back(s);
  f["ordering.svg"] = svg_chart("Ordering: latency vs throughput", "throughput (ops/s)", "latency (ms)", series);
  return f;
}

Files leader_failure_report(const LeaderFailureReport& r, const LeaderFailureOptions& options) {
  if (r.throughput_ts.empty()) throw Error("leader-failure report: empty series");
  Files f;
  f["throughput_ts.csv"] = two_column("t_s,ops_per_s", r.throughput_ts, 3);
  f["latency_ts.csv"] = two_column("t_s,latency_ms", r.latency_ts, 3);
  std::string rep;
  rep += "crashed_unit=" + r.crashed_unit + "\n";
  rep += "crash_at_s=" + num(options.crash_at_s) + "\n";
  rep += "leader_timeout_s=" + num(static_cast<double>(options.leader_timeout_us) / 1e6) + "\n";
  rep += "pre_crash_ops_per_s=" + num(r.pre_crash_ops_per_s) + "\n";
  rep += "dropped_to_zero=" + std::string(r.dropped_to_zero ? "true" : "false") + "\n";
  rep += "outage_s=" + num(r.outage_s) + "\n";
  rep += "recovery_s=" + num(r.recovery_s) + "\n";
  rep += "recovered_at_s=" + num(r.recovered_at_s) + "\n";
  rep += "peak_latency_ms=" + num(r.peak_latency_ms) + "\n";
  rep += "sent=" + std::to_string(r.sent) + "\n";
  rep += "delivered=" + std::to_string(r.delivered) + "\n";
  rep += "missing=";
  for (std::size_t i = 0; i < r.missing.size(); ++i) rep += (i ? " " : "") + std::to_string(r.missing[i]);
  rep += "\n";
  f["recovery.txt"] = rep;
  f["throughput_ts.svg"] = svg_chart("Throughput under a leader failure", "time (s)", "ops/s",
                                     {{"delivered", r.throughput_ts}}, false, options.crash_at_s);
  f["latency_ts.svg"] = svg_chart("Latency under a leader failure", "time (s)", "latency (ms)",
                                  {{"per event", r.latency_ts}}, false, options.crash_at_s);
  return f;
}

void write_files(const Files& files, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir + ": " + ec.message());
  for (const auto& [name, contents] : files) {
    auto p = fs::path(out_dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << contents;
    if (!out) throw Error("cannot write " + p.string());
  }
}

}  // namespace resa::bench
