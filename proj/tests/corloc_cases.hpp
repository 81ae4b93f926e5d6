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

#pragma once

// Twenty hand-built CorLoc records, in library and oracle form. Image 0 sits
// exactly on the IoU = 0.5 boundary and must count as a miss.

#include <vector>

#include "oracles.hpp"
#include "ubbr/evalkit.hpp"

namespace corloc_cases {

struct Case {
  std::vector<ubbr::EvalRecord> records;
  std::vector<oracle::Image> images;
};

inline Case build() {
  using ubbr::Box;
  struct Raw {
    std::vector<Box> preds;
    std::vector<Box> gts;
  };
  const Box g{50, 50, 20, 20};
  const std::vector<Raw> raw{
      {{{1, 0.5, 2, 1}}, {{1, 1, 2, 2}}},                 // IoU exactly 0.5: miss
      {{{1, 0.5001, 2, 1.0002}}, {{1, 1, 2, 2}}},         // just above: hit
      {{g}, {g}},                                         // identical: hit
      {{{80, 80, 10, 10}}, {g}},                          // disjoint: miss
      {{}, {g}},                                          // no prediction: miss
      {{{52, 50, 20, 20}}, {g}},                          // IoU 0.818: hit
      {{{60, 50, 20, 20}}, {g}},                          // IoU 1/3: miss
      {{{80, 80, 10, 10}, g}, {g}},                       // right box ranked second: miss
      {{g, {80, 80, 10, 10}}, {g}},                       // right box ranked first: hit
      {{{10, 10, 8, 8}}, {g, {10, 10, 8, 8}}},            // matches the second GT: hit
      {{{50, 50, 40, 40}}, {g}},                          // 4x too large, IoU 0.25: miss
      {{{50, 50, 28, 28}}, {g}},                          // IoU 0.51: hit
      {{{50, 50, 29, 29}}, {g}},                          // IoU 0.476: miss
      {{{50, 50, 14, 14}}, {g}},                          // IoU 0.49: miss
      {{{50, 50, 15, 15}}, {g}},                          // IoU 0.5625: hit
      {{{55, 55, 20, 20}}, {g}},                          // IoU 0.391: miss
      {{{54, 50, 20, 20}}, {g}},                          // IoU 0.667: hit
      {{{56, 50, 20, 20}}, {g}},                          // IoU 0.538: hit
      {{{57, 50, 20, 20}}, {g}},                          // IoU 0.481: miss
      {{{30, 30, 5, 5}}, {g, {30, 30, 6, 6}}},            // IoU 0.694 with second GT: hit
  };
  Case c;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    ubbr::EvalRecord r;
    r.image_id = std::int64_t(i);
    r.gts = raw[i].gts;
    oracle::Image im;
    for (const Box& b : raw[i].preds) {
      r.proposals.push_back({b, 1.0});
      im.predictions.push_back(oracle::rect(b.x, b.y, b.w, b.h));
    }
    for (const Box& b : raw[i].gts) im.gts.push_back(oracle::rect(b.x, b.y, b.w, b.h));
    c.records.push_back(std::move(r));
    c.images.push_back(std::move(im));
  }
  return c;
}

}  // namespace corloc_cases
