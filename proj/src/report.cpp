// SPDX-License-Identifier: Apache-2.0
#include "anticipate/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "anticipate/errors.hpp"

namespace anticipate {
namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string echo_lines(const ConfigEcho& echo) {
  std::string out;
  for (const auto& [k, v] : echo) out += "# " + k + "=" + v + "\n";
  return out;
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

}  // namespace

std::string percent_tag(double fraction) {
  const double pct = fraction * 100.0;
  if (std::abs(pct - std::round(pct)) < 1e-9) return std::to_string(static_cast<long long>(std::llround(pct)));
  return fixed(pct, 2);
}

std::string grid_csv(const std::vector<EvaluationReport>& reports, const ConfigEcho& echo, bool actions) {
  std::string out = echo_lines(echo);
  if (reports.empty()) return out;
  out += "model";
  for (const auto& c : reports.front().cells) {
    const std::string tag = "obs" + percent_tag(c.alpha) + "_pred" + percent_tag(c.beta);
    out += "," + tag;
    if (actions)
      for (std::size_t k = 1; k <= kActionPositions; ++k) out += "," + tag + "_action" + std::to_string(k);
  }
  out += "\n";
  for (const auto& r : reports) {
    out += r.model;
    for (const auto& c : r.cells) {
      out += "," + fixed(c.moc);
      if (actions)
        for (double a : c.action_accuracy) out += "," + fixed(a);
    }
    out += "\n";
  }
  return out;
}

std::string video_csv(const std::vector<EvaluationReport>& reports, const ConfigEcho& echo) {
  std::string out = echo_lines(echo);
  out += "model,video,alpha,beta,video_frames,observed_frames,horizon_frames,moc,predicted_segments";
  for (std::size_t k = 1; k <= kActionPositions; ++k) out += ",action" + std::to_string(k);
  out += "\n";
  for (const auto& r : reports) {
    for (const auto& v : r.videos) {
      out += r.model + "," + v.video_id + "," + percent_tag(v.alpha) + "," + percent_tag(v.beta) + "," +
             std::to_string(v.video_length) + "," + std::to_string(v.observed_frames) + "," +
             std::to_string(v.horizon_frames) + "," + fixed(v.moc) + "," + std::to_string(v.predicted_segments);
      for (std::size_t k = 0; k < kActionPositions; ++k)
        out += "," + std::string(!v.action_present[k] ? "" : v.action_hits[k] ? "1" : "0");
      out += "\n";
    }
  }
  return out;
}

std::string bucket_csv(const std::vector<EvaluationReport>& reports, const std::vector<std::size_t>& edges,
                       const ConfigEcho& echo) {
  std::string out = echo_lines(echo);
  out += "model,alpha,beta,lower_frames,upper_frames,videos,moc\n";
  for (const auto& r : reports) {
    for (double a : r.alphas) {
      for (double b : r.betas) {
        std::vector<VideoResult> cell;
        for (const auto& v : r.videos)
          if (std::abs(v.alpha - a) < 1e-12 && std::abs(v.beta - b) < 1e-12) cell.push_back(v);
        for (const auto& bucket : length_bucketed_moc(cell, edges)) {
          out += r.model + "," + percent_tag(a) + "," + percent_tag(b) + "," + std::to_string(bucket.lower) + "," +
                 std::to_string(bucket.upper) + "," + std::to_string(bucket.videos) + "," +
                 (bucket.moc ? fixed(*bucket.moc) : std::string()) + "\n";
        }
      }
    }
  }
  return out;
}

std::string moc_plot_svg(const std::vector<EvaluationReport>& reports, double alpha, const ConfigEcho& echo) {
  constexpr double W = 480, H = 320, left = 60, right = 130, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double bmin = 1.0, bmax = 0.0;
  for (const auto& r : reports)
    for (double b : r.betas) {
      bmin = std::min(bmin, b);
      bmax = std::max(bmax, b);
    }
  if (bmax <= bmin) bmax = bmin + 0.1;
  auto x_of = [&](double b) { return left + (b - bmin) / (bmax - bmin) * pw; };
  auto y_of = [&](double m) { return top + (1.0 - m) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(W, 0) + "\" height=\"" + fixed(H, 0) +
       "\" viewBox=\"0 0 " + fixed(W, 0) + " " + fixed(H, 0) + "\">\n";
  s += "<!--\n";
  for (const auto& [k, v] : echo) {
    std::string line = xml_escape(k + "=" + v);
    // "--" may not appear inside an XML comment.
    for (auto pos = line.find("--"); pos != std::string::npos; pos = line.find("--", pos)) line.replace(pos, 2, "- -");
    s += line + "\n";
  }
  s += "-->\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + fixed(W, 0) + "\" height=\"" + fixed(H, 0) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(left + pw / 2, 1) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">Observation " +
       percent_tag(alpha) + "%</text>\n";
  // axes and grid
  for (int i = 0; i <= 5; ++i) {
    const double m = i / 5.0;
    s += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(y_of(m), 1) + "\" x2=\"" + fixed(left + pw, 1) +
         "\" y2=\"" + fixed(y_of(m), 1) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + fixed(left - 6, 1) + "\" y=\"" + fixed(y_of(m) + 4, 1) +
         "\" text-anchor=\"end\" font-size=\"11\">" + fixed(m, 1) + "</text>\n";
  }
  if (!reports.empty()) {
    for (double b : reports.front().betas)
      s += "<text x=\"" + fixed(x_of(b), 1) + "\" y=\"" + fixed(top + ph + 16, 1) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + percent_tag(b) + "%</text>\n";
  }
  s += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(top + ph, 1) + "\" x2=\"" + fixed(left + pw, 1) +
       "\" y2=\"" + fixed(top + ph, 1) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(top, 1) + "\" x2=\"" + fixed(left, 1) + "\" y2=\"" +
       fixed(top + ph, 1) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fixed(left + pw / 2, 1) + "\" y=\"" + fixed(H - 12, 1) +
       "\" text-anchor=\"middle\" font-size=\"12\">Prediction %</text>\n";
  s += "<text x=\"16\" y=\"" + fixed(top + ph / 2, 1) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " +
       fixed(top + ph / 2, 1) + ")\">MoC</text>\n";

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const char* color = colors[i % std::size(colors)];
    std::string points;
    for (double b : r.betas) {
      const double m = r.cell(alpha, b).moc;
      if (!points.empty()) points += " ";
      points += fixed(x_of(b), 1) + "," + fixed(y_of(m), 1);
      s += "<circle cx=\"" + fixed(x_of(b), 1) + "\" cy=\"" + fixed(y_of(m), 1) + "\" r=\"3\" fill=\"" + color +
           "\"/>\n";
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points +
         "\"/>\n";
    const double ly = top + 14.0 + 18.0 * static_cast<double>(i);
    s += "<line x1=\"" + fixed(left + pw + 12, 1) + "\" y1=\"" + fixed(ly, 1) + "\" x2=\"" + fixed(left + pw + 32, 1) +
         "\" y2=\"" + fixed(ly, 1) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fixed(left + pw + 38, 1) + "\" y=\"" + fixed(ly + 4, 1) + "\" font-size=\"11\">" +
         xml_escape(r.model) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string loss_curve_csv(const std::vector<double>& curve, const ConfigEcho& echo) {
  std::string out = echo_lines(echo);
  out += "epoch,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) out += std::to_string(i + 1) + "," + fixed(curve[i], 9) + "\n";
  return out;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  out << text;
}

}  // namespace anticipate
