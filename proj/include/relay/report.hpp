// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Report emission: deterministic CSV series, JSON tables and static SVG
// charts (per-request stacked layer bars, latency/CPI dual series,
// per-window grouped p99 bars). Long runs are column-downsampled for the
// SVGs; the CSV/JSON always carry full data.

#ifndef RELAY_REPORT_HPP
#define RELAY_REPORT_HPP

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "relay/json_io.hpp"
#include "relay/stats.hpp"
#include "relay/util.hpp"

namespace relay {

struct ReportOptions {
    size_t window_size = 6'000;
    int64_t tail_threshold_ns = 25'000;
    size_t svg_max_columns = 1'200;
};

namespace report_detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}
inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

// Fixed palette: attributable layers first, then irq/sched buckets.
inline const char* bucket_color(size_t i) {
    static const char* colors[] = {"#4c78a8", "#f58518", "#e45756", "#72b7b2", "#54a24b",
                                   "#eeca3b", "#b279a2", "#2ca02c", "#9d755d", "#bab0ac"};
    return colors[i % 10];
}

class SvgBuilder {
public:
    SvgBuilder(int width, int height) : w_(width), h_(height) {
        out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
             << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
             << "\" viewBox=\"0 0 " << w_ << " " << h_ << "\">\n"
             << "<rect width=\"" << w_ << "\" height=\"" << h_ << "\" fill=\"white\"/>\n";
    }
    void rect(double x, double y, double rw, double rh, const std::string& fill) {
        out_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(rw)
             << "\" height=\"" << fmt(rh) << "\" fill=\"" << fill << "\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  bool dotted) {
        out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1\"";
        if (dotted) out_ << " stroke-dasharray=\"2,3\"";
        out_ << " points=\"";
        for (size_t i = 0; i < pts.size(); ++i)
            out_ << (i ? " " : "") << fmt(pts[i].first) << "," << fmt(pts[i].second);
        out_ << "\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, const std::string& stroke) {
        out_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
             << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"1\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 11) {
        out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-family=\"sans-serif\" font-size=\""
             << size << "\" fill=\"#333\">" << s << "</text>\n";
    }
    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    int w_, h_;
    std::ostringstream out_;
};

} // namespace report_detail

/// Writes the report files into `outdir` and returns their paths.
inline std::vector<std::string> emit_report(const AnalysisResult& analysis, const std::string& outdir,
                                            const ReportOptions& opts = {}) {
    namespace fs = std::filesystem;
    using namespace report_detail;
    fs::create_directories(outdir);
    std::vector<std::string> paths;
    auto out_path = [&](const char* name) {
        paths.push_back((fs::path(outdir) / name).string());
        return paths.back();
    };

    const auto& profiles = analysis.profiles;
    const auto& layer_names = analysis.layer_names;
    WindowedSeries windows = windowed_p99(profiles, opts.window_size);
    auto fairness = fairness_table(profiles);
    auto tails = tail_decompose(profiles, layer_names, opts.tail_threshold_ns);

    // series.csv
    {
        std::ostringstream csv;
        csv << "index,rid,tid,cpu,start_ts,total_ns";
        for (const auto& n : layer_names) csv << "," << n << "_ns";
        csv << ",irq_ns,irq_count,sched_ns,io_wait_ns,unattributed_ns,cpi\n";
        for (size_t i = 0; i < profiles.size(); ++i) {
            const auto& p = profiles[i];
            csv << i << "," << p.rid << "," << p.tid << "," << p.cpu << "," << p.start_ts << ","
                << p.total_ns;
            for (int64_t v : p.layer_self_ns) csv << "," << v;
            csv << "," << p.irq_ns << "," << p.irq_count << "," << p.sched_ns << "," << p.io_wait_ns
                << "," << p.unattributed_ns << ",";
            if (auto cpi = p.request_cpi()) csv << fmt3(*cpi);
            csv << "\n";
        }
        write_text_file(out_path("series.csv"), csv.str());
    }

    // windows.csv
    {
        std::ostringstream csv;
        csv << "window,tid,p99_ns,count\n";
        for (size_t w = 0; w < windows.windows.size(); ++w)
            for (const auto& [tid, cell] : windows.windows[w])
                csv << w + 1 << "," << tid << "," << cell.p99_ns << "," << cell.count << "\n";
        write_text_file(out_path("windows.csv"), csv.str());
    }

    // fairness.json
    {
        Json rows = Json::array();
        for (const auto& r : fairness)
            rows.push_back(Json{{"tid", r.tid}, {"irq_count", r.irq_count}, {"irq_ns", r.irq_ns}});
        write_text_file(out_path("fairness.json"), Json{{"rows", rows}}.dump(2) + "\n");
    }

    // tails.json
    {
        Json entries = Json::array();
        for (const auto& t : tails)
            entries.push_back(Json{{"rid", t.rid},
                                   {"tid", t.tid},
                                   {"total_ns", t.total_ns},
                                   {"dominant", t.dominant},
                                   {"share", std::stod(fmt3(t.share))}});
        write_text_file(out_path("tails.json"),
                        Json{{"threshold_ns", opts.tail_threshold_ns}, {"entries", entries}}.dump(2) + "\n");
    }

    // summary.json
    {
        int64_t irq_total = 0, sched_total = 0, io_total = 0;
        uint64_t irq_events = 0;
        for (const auto& p : profiles) {
            irq_total += p.irq_ns;
            sched_total += p.sched_ns;
            io_total += p.io_wait_ns;
            irq_events += p.irq_count;
        }
        Json doc{
            {"requests", profiles.size()},
            {"layers", layer_names},
            {"window_size", opts.window_size},
            {"windows", windows.windows.size()},
            {"tail_threshold_ns", opts.tail_threshold_ns},
            {"tail_requests", tails.size()},
            {"irq_ns_total", irq_total},
            {"irq_events_total", irq_events},
            {"sched_ns_total", sched_total},
            {"io_wait_ns_total", io_total},
            {"discarded_irq_intervals", analysis.discarded_irq_intervals},
            {"discarded_records", analysis.discarded_records},
            {"incomplete_requests", analysis.incomplete_requests},
        };
        write_text_file(out_path("summary.json"), doc.dump(2) + "\n");
    }

    const int width = 960, height = 360, margin = 40;
    const double plot_w = width - 2.0 * margin, plot_h = height - 2.0 * margin;
    const size_t stride = profiles.empty() ? 1 : std::max<size_t>(1, (profiles.size() + opts.svg_max_columns - 1) / opts.svg_max_columns);

    // latency + CPI dual series
    {
        SvgBuilder svg(width, height);
        int64_t max_total = 1;
        double max_cpi = 0.001;
        for (const auto& p : profiles) {
            max_total = std::max(max_total, p.total_ns);
            if (auto c = p.request_cpi()) max_cpi = std::max(max_cpi, *c);
        }
        std::vector<std::pair<double, double>> lat, cpi;
        for (size_t i = 0; i < profiles.size(); i += stride) {
            double x = margin + (profiles.size() > 1 ? plot_w * i / (profiles.size() - 1) : 0.0);
            lat.push_back({x, margin + plot_h - plot_h * profiles[i].total_ns / max_total});
            if (auto c = profiles[i].request_cpi())
                cpi.push_back({x, margin + plot_h - plot_h * (*c) / max_cpi});
        }
        svg.line(margin, margin + plot_h, margin + plot_w, margin + plot_h, "#999");
        svg.line(margin, margin, margin, margin + plot_h, "#999");
        if (!lat.empty()) svg.polyline(lat, "#4c78a8", false);
        if (!cpi.empty()) svg.polyline(cpi, "#e45756", true);
        svg.text(margin, margin - 8, "request latency (solid, max " + std::to_string(max_total) +
                                         " ns) and CPI (dotted, max " + fmt3(max_cpi) + ")");
        write_text_file(out_path("latency_cpi.svg"), svg.finish());
    }

    // stacked per-request layer bars
    {
        SvgBuilder svg(width, height);
        int64_t max_total = 1;
        for (const auto& p : profiles) max_total = std::max(max_total, p.total_ns);
        size_t cols = profiles.empty() ? 0 : (profiles.size() + stride - 1) / stride;
        double bar_w = cols ? plot_w / cols : plot_w;
        size_t col = 0;
        for (size_t i = 0; i < profiles.size(); i += stride, ++col) {
            const auto& p = profiles[i];
            double x = margin + col * bar_w;
            double y = margin + plot_h;
            auto stack = [&](int64_t v, size_t color_idx) {
                if (v <= 0) return;
                double h = plot_h * v / max_total;
                y -= h;
                svg.rect(x, y, bar_w, h, bucket_color(color_idx));
            };
            for (size_t l = 0; l < p.layer_self_ns.size(); ++l) stack(p.layer_self_ns[l], l);
            stack(p.io_wait_ns, layer_names.size() + 2);
            stack(p.irq_ns, layer_names.size());
            stack(p.sched_ns, layer_names.size() + 1);
        }
        svg.line(margin, margin + plot_h, margin + plot_w, margin + plot_h, "#999");
        std::string legend;
        for (size_t l = 0; l < layer_names.size(); ++l) legend += (l ? ", " : "") + layer_names[l];
        svg.text(margin, margin - 8, "per-request layer breakdown (" + legend + ", irq, sched, io wait)");
        write_text_file(out_path("layers.svg"), svg.finish());
    }

    // per-window per-thread p99 grouped bars
    {
        SvgBuilder svg(width, height);
        int64_t max_p99 = 1;
        std::vector<uint32_t> tids;
        for (const auto& w : windows.windows)
            for (const auto& [tid, cell] : w) {
                max_p99 = std::max(max_p99, cell.p99_ns);
                if (std::find(tids.begin(), tids.end(), tid) == tids.end()) tids.push_back(tid);
            }
        std::sort(tids.begin(), tids.end());
        size_t nw = windows.windows.size();
        double group_w = nw ? plot_w / nw : plot_w;
        double bar_w = tids.empty() ? group_w : group_w / (tids.size() + 1);
        for (size_t w = 0; w < nw; ++w) {
            for (size_t t = 0; t < tids.size(); ++t) {
                auto it = windows.windows[w].find(tids[t]);
                if (it == windows.windows[w].end()) continue;
                double h = plot_h * it->second.p99_ns / max_p99;
                svg.rect(margin + w * group_w + t * bar_w, margin + plot_h - h, bar_w, h,
                         bucket_color(t));
            }
            svg.text(margin + w * group_w + group_w / 2 - 4, margin + plot_h + 14,
                     std::to_string(w + 1), 9);
        }
        svg.line(margin, margin + plot_h, margin + plot_w, margin + plot_h, "#999");
        svg.text(margin, margin - 8, "per-window p99 latency by thread (max " +
                                         std::to_string(max_p99) + " ns, " +
                                         std::to_string(windows.window_size) + " requests/window)");
        write_text_file(out_path("windows_p99.svg"), svg.finish());
    }

    return paths;
}

} // namespace relay

#endif // RELAY_REPORT_HPP
