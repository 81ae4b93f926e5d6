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

#include "ubbr/proposals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "ubbr/errors.hpp"
#include "ubbr/io.hpp"
#include "ubbr/train.hpp"

namespace ubbr {

void SeedGridConfig::validate() const {
  if (scales.empty() || aspect_ratios.empty()) {
    throw PreconditionError("SeedGridConfig: scales and aspect ratios must be nonempty");
  }
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!std::all_of(scales.begin(), scales.end(), positive) ||
      !std::all_of(aspect_ratios.begin(), aspect_ratios.end(), positive) || !positive(stride)) {
    throw PreconditionError("SeedGridConfig: all values must be positive");
  }
}

std::vector<double> lattice_positions(double extent, double step) {
  const auto n = static_cast<std::size_t>(std::max(1.0, std::floor(extent / step + 1e-9)));
  const double margin = 0.5 * (extent - double(n - 1) * step);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = margin + double(i) * step;
  return out;
}

std::vector<Box> seed_grid(double image_w, double image_h, const SeedGridConfig& cfg) {
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw PreconditionError("seed_grid: image dimensions must be positive");
  }
  cfg.validate();
  const double short_side = std::min(image_w, image_h);
  const double step = cfg.stride * short_side;
  const std::vector<double> xs = lattice_positions(image_w, step);
  const std::vector<double> ys = lattice_positions(image_h, step);
  std::vector<Box> out;
  out.reserve(cfg.scales.size() * cfg.aspect_ratios.size() * xs.size() * ys.size());
  for (double scale : cfg.scales) {
    for (double ratio : cfg.aspect_ratios) {
      const double w = scale * short_side * std::sqrt(ratio);
      const double h = scale * short_side / std::sqrt(ratio);
      for (double y : ys) {
        for (double x : xs) out.push_back(clip_to_image(Box{x, y, w, h}, image_w, image_h));
      }
    }
  }
  return out;
}

std::vector<double> score_proposals(std::span<const Box> boxes, double neighbor_iou,
                                    std::size_t workers) {
  const std::size_t n = boxes.size();
  std::vector<double> scores(n, 0.0);
  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && iou(boxes[i], boxes[j]) > neighbor_iou) ++count;
      }
      scores[i] = static_cast<double>(count);
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    score_range(0, n);
    return scores;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(score_range, begin, end);
  }
  for (auto& t : pool) t.join();
  return scores;
}

std::vector<Proposal> decay_nms(std::span<const Proposal> proposals, const NmsConfig& cfg) {
  if (!(cfg.decay > 1.0)) throw PreconditionError("decay_nms: decay must be > 1");
  std::vector<Proposal> remaining(proposals.begin(), proposals.end());
  std::vector<bool> emitted(remaining.size(), false);
  std::vector<Proposal> out;
  out.reserve(remaining.size());
  for (std::size_t round = 0; round < remaining.size(); ++round) {
    std::size_t best = remaining.size();
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (!emitted[i] && (best == remaining.size() || remaining[i].score > remaining[best].score)) {
        best = i;
      }
    }
    emitted[best] = true;
    out.push_back(remaining[best]);
    const Box& sel = remaining[best].box;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (!emitted[i] && iou(sel, remaining[i].box) > cfg.iou_thresh) {
        remaining[i].score /= cfg.decay;
      }
    }
  }
  return out;
}

std::vector<Proposal> hard_nms(std::span<const Proposal> proposals, double iou_thresh) {
  std::vector<std::size_t> order(proposals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].score > proposals[b].score;
  });
  std::vector<Proposal> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Proposal& k) {
      return iou(k.box, proposals[i].box) > iou_thresh;
    });
    if (!suppressed) kept.push_back(proposals[i]);
  }
  return kept;
}

std::vector<Proposal> generate_proposals(const RegressorModel& model, const Scene& scene,
                                         const ProposalConfig& cfg, std::size_t workers) {
  const std::vector<Box> seeds = seed_grid(scene.width, scene.height, cfg.grid);
  const std::vector<Box> refined = refine(model, scene, seeds, cfg.iterations).back();
  const std::vector<double> scores = score_proposals(refined, cfg.neighbor_iou, workers);
  std::vector<Proposal> scored(refined.size());
  for (std::size_t i = 0; i < refined.size(); ++i) scored[i] = {refined[i], scores[i]};
  std::vector<Proposal> ranked = decay_nms(scored, cfg.nms);
  for (Proposal& p : ranked) p.box = clip_to_image(p.box, scene.width, scene.height);
  return ranked;
}

std::vector<Proposal> seed_proposals(const Scene& scene, const SeedGridConfig& cfg) {
  std::vector<Proposal> out;
  for (const Box& b : seed_grid(scene.width, scene.height, cfg)) out.push_back({b, 0.0});
  return out;
}

void write_proposals(std::ostream& os, std::span<const ProposalRecord> records) {
  os << "# image_id,xmin,ymin,xmax,ymax,score\n";
  for (const auto& r : records) {
    const Corners c = corner_from_center(r.proposal.box);
    os << r.image_id << ',' << io::format_double(c.xmin) << ',' << io::format_double(c.ymin)
       << ',' << io::format_double(c.xmax) << ',' << io::format_double(c.ymax) << ','
       << io::format_double(r.proposal.score) << '\n';
  }
}

void save_proposals(const std::filesystem::path& path, std::span<const ProposalRecord> records) {
  io::write_atomic(path, [&](std::ostream& os) { write_proposals(os, records); });
}

namespace {

template <typename T>
T parse_field(const std::string& field, std::size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw DataError("proposal file line " + std::to_string(line_no) + ": bad field '" + field +
                    "'");
  }
  return value;
}

}  // namespace

std::vector<ProposalRecord> read_proposals(std::istream& is) {
  std::vector<ProposalRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "image_id,xmin,ymin,xmax,ymax,score") continue;  // bare column header
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 6) {
      throw DataError("proposal file line " + std::to_string(line_no) + ": expected 6 fields, got " +
                      std::to_string(fields.size()));
    }
    ProposalRecord r;
    r.image_id = parse_field<std::int64_t>(fields[0], line_no);
    Corners c{parse_field<double>(fields[1], line_no), parse_field<double>(fields[2], line_no),
              parse_field<double>(fields[3], line_no), parse_field<double>(fields[4], line_no)};
    if (!(c.xmax > c.xmin) || !(c.ymax > c.ymin)) {
      throw DataError("proposal file line " + std::to_string(line_no) + ": degenerate box");
    }
    r.proposal.box = center_from_corner(c);
    r.proposal.score = parse_field<double>(fields[5], line_no);
    if (!std::isfinite(r.proposal.score) || r.proposal.score < 0.0 ||
        !is_valid(r.proposal.box)) {
      throw DataError("proposal file line " + std::to_string(line_no) +
                      ": non-finite or negative value");
    }
    out.push_back(r);
  }
  return out;
}

std::vector<ProposalRecord> load_proposals(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open proposal file " + path.string());
  return read_proposals(is);
}

}  // namespace ubbr
