// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anticipate/evaluation.hpp"

namespace anticipate {

/// "# key=value" lines prepended to every CSV and embedded in SVG output.
using ConfigEcho = std::map<std::string, std::string>;

/// One row per model, one MoC column per (alpha, beta) named like "obs20_pred10".
/// With actions = true, three k-th action accuracy columns follow every MoC column.
std::string grid_csv(const std::vector<EvaluationReport>& reports, const ConfigEcho& echo, bool actions = false);

/// One row per model x video x alpha x beta.
std::string video_csv(const std::vector<EvaluationReport>& reports, const ConfigEcho& echo);

/// One row per model x alpha x beta x bucket.
std::string bucket_csv(const std::vector<EvaluationReport>& reports, const std::vector<std::size_t>& edges,
                       const ConfigEcho& echo);

/// Line plot of MoC against prediction fraction for one observation fraction.
std::string moc_plot_svg(const std::vector<EvaluationReport>& reports, double alpha, const ConfigEcho& echo);

/// Loss per epoch.
std::string loss_curve_csv(const std::vector<double>& curve, const ConfigEcho& echo);

void write_text(const std::filesystem::path& file, const std::string& text);

/// Column tag for a fraction, e.g. 0.2 -> "20".
std::string percent_tag(double fraction);

}  // namespace anticipate
