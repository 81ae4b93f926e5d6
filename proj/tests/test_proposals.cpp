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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "ubbr/errors.hpp"
#include "ubbr/proposals.hpp"

using namespace ubbr;

namespace {

std::vector<Proposal> random_proposals(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> c(0, 40), s(4, 20), sc(0, 10);
  std::vector<Proposal> out(n);
  for (auto& p : out) p = {Box{c(rng), c(rng), s(rng), s(rng)}, std::floor(sc(rng))};
  return out;
}

bool same_multiset(std::vector<Box> a, std::vector<Box> b) {
  const auto key = [](const Box& u, const Box& v) {
    return std::tie(u.x, u.y, u.w, u.h) < std::tie(v.x, v.y, v.w, v.h);
  };
  std::sort(a.begin(), a.end(), key);
  std::sort(b.begin(), b.end(), key);
  return a == b;
}

}  // namespace

TEST_CASE("seed grid layout") {
  SeedGridConfig one;
  one.scales = {0.5};
  one.aspect_ratios = {1.0};
  one.stride = 1.0;
  const auto single = seed_grid(100, 100, one);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == Box{50, 50, 50, 50});

  const SeedGridConfig def;
  const auto grid = seed_grid(600, 600, def);
  // Stride 37.5 px gives 16 centers per axis.
  CHECK(lattice_positions(600, 37.5).size() == 16);
  CHECK(grid.size() == 4 * 3 * 16 * 16);
  for (const Box& b : grid) {
    CHECK(b.xmin() >= 0);
    CHECK(b.ymin() >= 0);
    CHECK(b.xmax() <= 600 + 1e-9);
    CHECK(b.ymax() <= 600 + 1e-9);
  }
  // The first block is scale 0.125, ratio 0.5, unclipped in the middle.
  const Box& mid = grid[8 * 16 + 8];
  CHECK(mid.w / mid.h == doctest::Approx(0.5));
  CHECK(mid.w * mid.h == doctest::Approx(75.0 * 75.0));

  SeedGridConfig wide;
  wide.scales = {0.25};
  wide.aspect_ratios = {2.0};
  const auto w = seed_grid(400, 400, wide);
  const Box& inner = w[w.size() / 2 + 8];
  CHECK(inner.w / inner.h == doctest::Approx(2.0));

  // Non-square image: the shorter side sets scale and stride.
  const auto rect = seed_grid(200, 100, one);
  CHECK(rect.size() == 2);
  CHECK(rect[0].w == doctest::Approx(50));

  SeedGridConfig bad;
  bad.scales.clear();
  CHECK_THROWS_AS(seed_grid(10, 10, bad), PreconditionError);
}

TEST_CASE("lattice positions are centered") {
  const auto xs = lattice_positions(10, 4);
  REQUIRE(xs.size() == 2);
  CHECK(xs[0] == doctest::Approx(3));
  CHECK(xs[1] == doctest::Approx(7));
  CHECK(lattice_positions(10, 20).size() == 1);
  CHECK(lattice_positions(10, 20)[0] == doctest::Approx(5));
}

TEST_CASE("neighbor-count scores") {
  const std::vector<Box> one{{0, 0, 2, 2}};
  CHECK(score_proposals(one) == std::vector<double>{0});
  const std::vector<Box> five(5, Box{3, 3, 4, 4});
  CHECK(score_proposals(five) == std::vector<double>(5, 4));
  // Width 10 vs 8, same center: IoU 0.8.
  const std::vector<Box> three{{0, 0, 10, 10}, {0, 0, 8, 10}, {100, 0, 10, 10}};
  CHECK(iou(three[0], three[1]) == doctest::Approx(0.8));
  CHECK(score_proposals(three) == std::vector<double>{1, 1, 0});

  std::mt19937_64 rng(41);
  const auto props = random_proposals(rng, 60);
  std::vector<Box> boxes;
  for (const auto& p : props) boxes.push_back(p.box);
  const auto serial = score_proposals(boxes, 0.3);
  CHECK(score_proposals(boxes, 0.3, 4) == serial);
  std::vector<Box> rev(boxes.rbegin(), boxes.rend());
  auto rev_scores = score_proposals(rev, 0.3);
  std::reverse(rev_scores.begin(), rev_scores.end());
  CHECK(rev_scores == serial);
}

TEST_CASE("decay NMS trace on two identical boxes") {
  const Box b{10, 10, 6, 6};
  const std::vector<Proposal> in{{b, 10}, {b, 9}, {Box{100, 100, 6, 6}, 2}, {Box{200, 0, 6, 6}, 0.5}};
  const auto out = decay_nms(in);
  REQUIRE(out.size() == 4);
  CHECK(out[0].score == 10);
  CHECK(out[0].box == b);
  CHECK(out[1].score == 2);
  CHECK(out[2].box == b);
  CHECK(out[2].score == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(out[3].score == 0.5);
}

TEST_CASE("decay NMS properties") {
  std::vector<Proposal> disjoint;
  for (int i = 0; i < 6; ++i) disjoint.push_back({Box{30.0 * i, 0, 5, 5}, double((i * 7) % 6)});
  const auto plain = decay_nms(disjoint);
  for (std::size_t i = 1; i < plain.size(); ++i) CHECK(plain[i - 1].score >= plain[i].score);
  for (const auto& p : plain)
    CHECK(std::count(disjoint.begin(), disjoint.end(), p) == 1);

  // Equal scores keep input order.
  std::vector<Proposal> ties;
  for (int i = 0; i < 5; ++i) ties.push_back({Box{30.0 * i, 0, 5, 5}, 1.0});
  CHECK(decay_nms(ties) == ties);

  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const auto props = random_proposals(rng, 40);
    const auto out = decay_nms(props);
    REQUIRE(out.size() == props.size());
    std::vector<Box> a, b;
    for (const auto& p : props) a.push_back(p.box);
    for (const auto& p : out) b.push_back(p.box);
    CHECK(same_multiset(a, b));
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].score >= out[i].score);
    CHECK(decay_nms(props) == out);
  }
  CHECK_THROWS_AS(decay_nms(ties, NmsConfig{0.6, 1.0}), PreconditionError);
}

TEST_CASE("large decay approaches hard NMS") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    auto props = random_proposals(rng, 30);
    for (std::size_t i = 0; i < props.size(); ++i) props[i].score += 1.0 + 1e-3 * double(i);
    const auto hard = hard_nms(props, 0.6);
    const auto soft = decay_nms(props, NmsConfig{0.6, 1e12});
    REQUIRE(soft.size() >= hard.size());
    for (std::size_t i = 0; i < hard.size(); ++i) CHECK(soft[i].box == hard[i].box);
  }
}

TEST_CASE("proposal file format") {
  const std::vector<ProposalRecord> recs{{4, {Box{10, 20, 4, 6}, 3}},
                                         {4, {Box{0.1, 0.2, 0.3, 0.4}, 0.1}},
                                         {-2, {Box{1e6, 1, 2, 2}, 0}}};
  std::stringstream ss;
  write_proposals(ss, recs);
  const std::string text = ss.str();
  CHECK(text.find("4,8,17,12,23,3\n") != std::string::npos);
  std::istringstream in(text);
  const auto back = read_proposals(in);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].image_id == recs[i].image_id);
    CHECK(back[i].proposal.score == recs[i].proposal.score);
    CHECK(back[i].proposal.box.x == doctest::Approx(recs[i].proposal.box.x).epsilon(1e-15));
    CHECK(back[i].proposal.box.w == doctest::Approx(recs[i].proposal.box.w).epsilon(1e-12));
  }

  const auto fails_on_line = [](const std::string& body, const std::string& where) {
    std::istringstream is(body);
    try {
      read_proposals(is);
    } catch (const DataError& e) {
      return std::string(e.what()).find(where) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_on_line("# header\n1,0,0,1,1,0\n1,0,0,1\n", "line 3"));
  CHECK(fails_on_line("1,0,0,x,1,0\n", "line 1"));
  CHECK(fails_on_line("1,0,0,1,1,0\n\n1,5,0,1,1,0\n", "line 3"));
  CHECK(fails_on_line("1,0,0,1,1,-1\n", "line 1"));
  CHECK(fails_on_line("1.5,0,0,1,1,0\n", "line 1"));

  std::istringstream bare("image_id,xmin,ymin,xmax,ymax,score\r\n3,0,0,2,2,1\r\n");
  const auto one = read_proposals(bare);
  REQUIRE(one.size() == 1);
  CHECK(one[0].proposal.box == Box{1, 1, 2, 2});
}
