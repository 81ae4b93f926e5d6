// Copyright (c) 2026 The UBBR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ubbr/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "ubbr/errors.hpp"
#include "ubbr/io.hpp"

namespace ubbr {

double recall_at(std::span<const EvalRecord> records, double iou_thresh, std::size_t k) {
  if (k < 1) throw PreconditionError("recall_at: k must be >= 1");
  std::size_t total = 0;
  std::size_t covered = 0;
  for (const EvalRecord& r : records) {
    const std::size_t top = std::min(k, r.proposals.size());
    for (const Box& g : r.gts) {
      ++total;
      for (std::size_t i = 0; i < top; ++i) {
        if (iou(r.proposals[i].box, g) > iou_thresh) {
          ++covered;
          break;
        }
      }
    }
  }
  return total == 0 ? 0.0 : double(covered) / double(total);
}

std::vector<RecallPoint> recall_curve(std::span<const EvalRecord> records, double iou_thresh,
                                      std::span<const std::size_t> ks) {
  std::vector<RecallPoint> out;
  out.reserve(ks.size());
  for (std::size_t k : ks) out.push_back({k, recall_at(records, iou_thresh, k)});
  return out;
}

std::vector<std::size_t> log_k_grid(std::size_t max_k) {
  std::vector<std::size_t> out;
  for (std::size_t decade = 1; decade <= max_k; decade *= 10) {
    for (std::size_t m : {1U, 2U, 5U}) {
      if (decade * m <= max_k) out.push_back(decade * m);
    }
    if (decade > max_k / 10) break;
  }
  return out;
}

double corloc(std::span<const EvalRecord> records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const EvalRecord& r : records) {
    if (r.proposals.empty()) continue;
    const Box& top = r.proposals.front().box;
    if (std::any_of(r.gts.begin(), r.gts.end(), [&](const Box& g) { return iou(top, g) > 0.5; })) {
      ++hits;
    }
  }
  return 100.0 * double(hits) / double(records.size());
}

double mean_best_iou(std::span<const Box> boxes, std::span<const Box> gts) {
  if (boxes.empty()) return 0.0;
  if (gts.empty()) throw PreconditionError("mean_best_iou: no ground truths");
  double total = 0.0;
  for (const Box& b : boxes) total += iou(b, gts[match_nearest_gt(b, gts)]);
  return total / double(boxes.size());
}

std::vector<double> mean_iou_trajectory(std::span<const Box> before,
                                        std::span<const std::vector<Box>> trajectory,
                                        std::span<const Box> gts) {
  if (trajectory.empty()) throw PreconditionError("mean_iou_trajectory: empty trajectory");
  std::vector<double> out;
  out.reserve(trajectory.size() + 1);
  out.push_back(mean_best_iou(before, gts));
  for (const auto& step : trajectory) out.push_back(mean_best_iou(step, gts));
  return out;
}

std::vector<EvalRecord> make_records(
    std::span<const ProposalRecord> proposals,
    std::span<const std::pair<std::int64_t, std::vector<Box>>> gts_by_image) {
  std::map<std::int64_t, std::size_t> index;
  std::vector<EvalRecord> records;
  for (const auto& [id, gts] : gts_by_image) {
    index.emplace(id, records.size());
    records.push_back({id, {}, gts});
  }
  for (const ProposalRecord& p : proposals) {
    const auto it = index.find(p.image_id);
    if (it == index.end()) {
      throw DataError("proposal for image " + std::to_string(p.image_id) +
                      " has no ground-truth entry");
    }
    records[it->second].proposals.push_back(p.proposal);
  }
  return records;
}

namespace {

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

void write_recall_svg(std::ostream& os, const std::string& title,
                      std::span<const CurveSeries> series) {
  constexpr double kW = 480.0, kH = 360.0, kLeft = 60.0, kRight = 20.0, kTop = 40.0,
                   kBottom = 50.0;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;
  std::size_t max_k = 1;
  for (const auto& s : series) {
    for (const auto& p : s.points) max_k = std::max(max_k, p.k);
  }
  const double log_max = std::max(1.0, std::ceil(std::log10(double(max_k))));
  auto px = [&](std::size_t k) { return kLeft + plot_w * std::log10(double(k)) / log_max; };
  auto py = [&](double r) { return kTop + plot_h * (1.0 - r); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
     << "</text>\n"
     << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\""
     << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = 0; d <= int(log_max); ++d) {
    const double x = kLeft + plot_w * d / log_max;
    os << "<text x=\"" << x << "\" y=\"" << kH - kBottom + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">10^" << d << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double r = t / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(r) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << r << "</text>\n";
  }
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\" font-size=\"12\"># proposals</text>\n"
     << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
     << kTop + plot_h / 2 << ")\" text-anchor=\"middle\">recall</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : series[i].points) os << px(p.k) << ',' << py(p.recall) << ' ';
    os << "\"/>\n"
       << "<text x=\"" << kLeft + 8 << "\" y=\"" << kTop + 16 + 14 * double(i)
       << "\" font-size=\"11\" fill=\"" << color << "\">" << xml_escape(series[i].label) << "</text>\n";
  }
  os << "</svg>\n";
}

void save_recall_svg(const std::filesystem::path& path, const std::string& title,
                     std::span<const CurveSeries> series) {
  io::write_atomic(path, [&](std::ostream& os) { write_recall_svg(os, title, series); });
}

}  // namespace ubbr
