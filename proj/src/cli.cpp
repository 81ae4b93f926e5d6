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

#include "ubbr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ubbr/benchmark.hpp"
#include "ubbr/errors.hpp"
#include "ubbr/evalkit.hpp"
#include "ubbr/io.hpp"
#include "ubbr/proposals.hpp"
#include "ubbr/train.hpp"

namespace fs = std::filesystem;

namespace ubbr::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- options

struct SceneSource {
  bool synth = false;
  std::string annotations;
  std::string split;  // train | test | all; empty = command default
  std::size_t synth_train = 200;
  std::size_t synth_test = 50;
  double image_size = 256.0;
  std::size_t max_objects = 4;
  double feature_noise = 0.0;
  double short_side = 0.0;
  std::vector<std::int64_t> exclude;
};

struct Options {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  SceneSource scenes;
  SamplerConfig sampler;
  TrainConfig train = benchmark_train_config();
  LossConfig loss;
  std::string loss_name = "iou";
  ProposalConfig proposal;
  std::string model;
  std::string boxes;
  std::string out;
  std::string log;
  std::string out_dir;
  std::size_t iters = 1;
  std::size_t max_per_image = 0;
  bool grid_only = false;
  std::vector<std::string> proposal_files;
  double iou_thresh = 0.7;
  std::vector<std::size_t> ks;
};

void add_common(CLI::App& sub, Options& o) {
  sub.add_option("--config", "key = value file; command-line flags override it");
  sub.add_option("--seed", o.seed, "Base seed for every random stream");
  sub.add_option("--workers", o.workers, "Worker threads where supported")
      ->check(CLI::PositiveNumber);
}

void add_scene_source(CLI::App& sub, SceneSource& s) {
  sub.add_flag("--synth", s.synth, "Use generated scenes");
  sub.add_option("--annotations", s.annotations, "COCO-style annotation file");
  sub.add_option("--split", s.split, "Synthetic split: train, test or all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  sub.add_option("--synth-train", s.synth_train, "Synthetic training scenes");
  sub.add_option("--synth-test", s.synth_test, "Synthetic held-out scenes");
  sub.add_option("--image-size", s.image_size, "Synthetic image side in pixels");
  sub.add_option("--max-objects", s.max_objects, "Objects per synthetic scene, at most");
  sub.add_option("--feature-noise", s.feature_noise, "Gaussian noise on the feature raster");
  sub.add_option("--short-side", s.short_side, "Rescale annotated images to this shorter side");
  sub.add_option("--exclude-categories", s.exclude, "Drop images containing these categories")
      ->delimiter(',');
}

void add_sampler(CLI::App& sub, SamplerConfig& s) {
  sub.add_option("--alpha", s.alpha, "Center jitter range");
  sub.add_option("--beta", s.beta, "Scale jitter range");
  sub.add_option("--t", s.t, "Minimum IoU of a sampled box with its source");
  sub.add_option("--boxes-per-gt", s.boxes_per_gt, "Sampled boxes per ground truth");
}

void add_train(CLI::App& sub, Options& o) {
  TrainConfig& t = o.train;
  sub.add_option("--out", o.out, "Model file")->required();
  sub.add_option("--log", o.log, "Per-epoch log (default: <out>.log.csv)");
  sub.add_option("--loss", o.loss_name, "iou or smooth_l1")
      ->check(CLI::IsMember({"iou", "smooth_l1"}));
  sub.add_option("--lr", t.initial_lr, "Initial learning rate");
  sub.add_option("--momentum", t.momentum);
  sub.add_option("--weight-decay", t.weight_decay);
  sub.add_option("--lr-decay", t.lr_decay_factor, "Divisor applied on a plateau");
  sub.add_option("--patience", t.plateau_patience, "Plateau epochs before decaying");
  sub.add_option("--plateau-threshold", t.plateau_threshold);
  sub.add_option("--stop-lr", t.stop_lr);
  sub.add_option("--max-epochs", t.max_epochs);
  sub.add_option("--batch-size", t.minibatch_size);
  sub.add_option("--init-std", t.init_std);
  sub.add_option("--val-fraction", t.validation_fraction);
  sub.add_option("--pool-size", t.head.pool_size);
  sub.add_option("--hidden1", t.head.hidden1);
  sub.add_option("--hidden2", t.head.hidden2);
  sub.add_option("--epsilon", o.loss.epsilon, "IoU loss log offset");
  sub.add_option("--smooth-l1-delta", o.loss.smooth_l1_delta);
  sub.add_option("--fallback-weight", o.loss.fallback_weight);
  add_sampler(sub, o.sampler);
}

void add_grid(CLI::App& sub, ProposalConfig& p) {
  sub.add_option("--scales", p.grid.scales, "Seed sides, fractions of the shorter image side")
      ->delimiter(',');
  sub.add_option("--ratios", p.grid.aspect_ratios, "Seed width / height ratios")->delimiter(',');
  sub.add_option("--stride", p.grid.stride, "Seed spacing, fraction of the shorter side");
  sub.add_option("--neighbor-iou", p.neighbor_iou);
  sub.add_option("--nms-iou", p.nms.iou_thresh);
  sub.add_option("--nms-decay", p.nms.decay);
}

// ------------------------------------------------------------ config file

// Reads "key = value" lines ('#' starts a comment) and turns each into a
// "--key=value" argument placed before the explicit ones, so that explicit
// flags win. Keys must name an option of the subcommand.
std::vector<std::string> config_arguments(const CLI::App& sub, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key == "config" || sub.get_option_no_throw("--" + key) == nullptr)
      throw UsageError(where + ": unknown key '" + key + "'");
    // An empty value keeps the default, as in the resolved-config echo.
    if (value.empty()) continue;
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

std::string resolved_config(const CLI::App& sub) {
  std::ostringstream os;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const bool flag = opt->get_items_expected_max() == 0;
    std::string value;
    if (flag) {
      value = opt->as<bool>() ? "true" : "false";
    } else if (opt->count() > 0) {
      const auto res = opt->reduced_results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
      if (value.size() >= 2 && value.front() == '[' && value.back() == ']')
        value = value.substr(1, value.size() - 2);
      if (value == "{}") value.clear();
    }
    os << name << " = " << value << '\n';
  }
  return os.str();
}

std::string commented(const std::string& text) {
  std::ostringstream os;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) os << "# " << line << '\n';
  return os.str();
}

// ------------------------------------------------------------- utilities

std::vector<Scene> load_scenes(const SceneSource& s, std::uint64_t seed,
                               const std::string& default_split) {
  if (s.synth == !s.annotations.empty())
    throw UsageError("exactly one of --synth and --annotations is required");
  std::vector<Scene> scenes;
  if (s.synth) {
    SynthConfig cfg;
    cfg.image_width = cfg.image_height = s.image_size;
    cfg.max_objects = s.max_objects;
    cfg.features.noise_std = s.feature_noise;
    cfg.seed = seed;
    cfg.validate();
    const std::string split = s.split.empty() ? default_split : s.split;
    auto both = synthetic_split(cfg, split == "test" ? 0 : s.synth_train,
                                split == "train" ? 0 : s.synth_test);
    if (split == "train") {
      scenes = std::move(both.train);
    } else if (split == "test") {
      scenes = std::move(both.test);
    } else {
      // Held-out ids continue after the training ids so "all" stays unique.
      scenes = std::move(both.train);
      for (Scene& sc : both.test) {
        sc.id += std::int64_t(s.synth_train);
        scenes.push_back(std::move(sc));
      }
    }
  } else {
    AnnotationOptions opts;
    opts.short_side = s.short_side;
    opts.features.noise_std = s.feature_noise;
    opts.seed = seed;
    scenes = load_annotations(s.annotations, opts);
  }
  if (!s.exclude.empty())
    scenes = filter_categories(scenes, std::set<std::int64_t>(s.exclude.begin(), s.exclude.end()));
  return scenes;
}

void check_model_fits(const RegressorModel& model, const std::vector<Scene>& scenes) {
  for (const Scene& s : scenes)
    if (s.has_features() && s.features.channels() != model.shape.channels)
      throw DataError("model expects " + std::to_string(model.shape.channels) +
                      " feature channels but scene " + std::to_string(s.id) + " has " +
                      std::to_string(s.features.channels()));
}

std::vector<std::pair<std::int64_t, std::vector<Box>>> gts_by_image(
    const std::vector<Scene>& scenes) {
  std::vector<std::pair<std::int64_t, std::vector<Box>>> out;
  for (const Scene& s : scenes) out.emplace_back(s.id, s.gts);
  return out;
}

std::string fmt(double v) { return io::format_double(v); }

// -------------------------------------------------------------- commands

int cmd_train(Options& o, const std::string& config, std::ostream& out, std::ostream& err) {
  o.train.loss = o.loss_name == "smooth_l1" ? LossKind::SmoothL1 : LossKind::Iou;
  o.train.seed = o.seed;
  o.train.validate();
  o.sampler.validate();
  o.loss.validate();
  const auto scenes = load_scenes(o.scenes, o.seed, "train");
  if (scenes.empty()) throw DataError("no scenes to train on");
  const std::string log_path = o.log.empty() ? o.out + ".log.csv" : o.log;

  const TrainResult res = train(scenes, o.train, o.sampler, o.loss, [&](const EpochStats& s) {
    out << "epoch " << s.epoch << " lr " << s.lr << " train " << s.train_loss << " val "
        << s.val_loss << " val_iou " << s.val_input_iou << " -> " << s.val_refined_iou << '\n';
  });

  save_model(o.out, res.model);
  io::write_atomic(log_path, [&](std::ostream& os) {
    os << commented(config);
    os << "epoch,lr,train_loss,val_loss,val_input_iou,val_refined_iou,samples,fallbacks\n";
    for (const EpochStats& s : res.log)
      os << s.epoch << ',' << fmt(s.lr) << ',' << fmt(s.train_loss) << ',' << fmt(s.val_loss)
         << ',' << fmt(s.val_input_iou) << ',' << fmt(s.val_refined_iou) << ',' << s.samples
         << ',' << s.fallbacks << '\n';
  });
  if (res.diverged) {
    err << "training diverged: " << res.diagnostic << "\nlast good checkpoint written to "
        << o.out << '\n';
    return kNumericFailure;
  }
  out << "best epoch " << res.best_epoch << "; model written to " << o.out << '\n';
  return kOk;
}

int cmd_refine(Options& o, const std::string& config, std::ostream& out, std::ostream&) {
  if (o.iters == 0) throw UsageError("--iters must be >= 1");
  const RegressorModel model = load_model(o.model);
  const auto scenes = load_scenes(o.scenes, o.seed, "test");
  check_model_fits(model, scenes);

  // Input boxes per scene, in scene order; scores ride along unchanged.
  std::vector<std::vector<Box>> inputs(scenes.size());
  std::vector<std::vector<double>> scores(scenes.size());
  std::map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < scenes.size(); ++i) pos[scenes[i].id] = i;
  if (o.boxes.empty()) {
    o.sampler.validate();
    inputs = perturbed_inputs(scenes, o.sampler, o.seed);
    for (std::size_t i = 0; i < scenes.size(); ++i) scores[i].assign(inputs[i].size(), 0.0);
  } else {
    for (const ProposalRecord& r : load_proposals(o.boxes)) {
      const auto it = pos.find(r.image_id);
      if (it == pos.end())
        throw DataError("boxes file refers to unknown image " + std::to_string(r.image_id));
      inputs[it->second].push_back(r.proposal.box);
      scores[it->second].push_back(r.proposal.score);
    }
  }

  std::vector<std::vector<std::vector<Box>>> traj(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i)
    if (!inputs[i].empty()) traj[i] = refine(model, scenes[i], inputs[i], o.iters);

  fs::create_directories(o.out_dir);
  const auto records_at = [&](std::size_t k) {  // k = 0 is the input
    std::vector<ProposalRecord> recs;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto& boxes = k == 0 ? inputs[i] : traj[i].empty() ? inputs[i] : traj[i][k - 1];
      for (std::size_t j = 0; j < boxes.size(); ++j)
        recs.push_back({scenes[i].id, {boxes[j], scores[i][j]}});
    }
    return recs;
  };
  if (o.boxes.empty()) save_proposals(fs::path(o.out_dir) / "input.csv", records_at(0));
  for (std::size_t k = 1; k <= o.iters; ++k)
    save_proposals(fs::path(o.out_dir) / ("iter_" + std::to_string(k) + ".csv"), records_at(k));

  const RefinementReport rep = evaluate_refinement(model, scenes, inputs, o.iters);
  if (rep.boxes > 0) {
    io::write_atomic(fs::path(o.out_dir) / "trajectory.csv", [&](std::ostream& os) {
      os << commented(config) << "iteration,mean_iou\n";
      for (std::size_t k = 0; k < rep.mean_iou.size(); ++k)
        os << k << ',' << fmt(rep.mean_iou[k]) << '\n';
    });
    out << "iteration  mean IoU\n";
    for (std::size_t k = 0; k < rep.mean_iou.size(); ++k)
      out << (k == 0 ? std::string("input") : std::to_string(k)) << "  " << rep.mean_iou[k]
          << '\n';
    out << "non-decreasing on " << rep.monotone_scenes() << " / " << rep.per_scene.size()
        << " scenes\n";
  }
  return kOk;
}

int cmd_propose(Options& o, const std::string&, std::ostream& out, std::ostream&) {
  o.proposal.grid.validate();
  o.proposal.iterations = o.iters;
  if (o.iters == 0) throw UsageError("--iters must be >= 1");
  if (o.grid_only == !o.model.empty())
    throw UsageError("exactly one of --model and --grid-only is required");
  const auto scenes = load_scenes(o.scenes, o.seed, "test");
  std::optional<RegressorModel> model;
  if (!o.grid_only) {
    model = load_model(o.model);
    check_model_fits(*model, scenes);
  }
  std::vector<ProposalRecord> recs;
  for (const Scene& s : scenes) {
    auto props = model ? generate_proposals(*model, s, o.proposal, o.workers)
                       : seed_proposals(s, o.proposal.grid);
    if (o.max_per_image > 0 && props.size() > o.max_per_image) props.resize(o.max_per_image);
    for (const Proposal& p : props) recs.push_back({s.id, p});
  }
  save_proposals(o.out, recs);
  out << recs.size() << " proposals for " << scenes.size() << " images written to " << o.out
      << '\n';
  return kOk;
}

std::pair<std::string, std::string> labeled(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  return {fs::path(arg).stem().string(), arg};
}

int cmd_eval(Options& o, const std::string& config, std::ostream& out, std::ostream&) {
  const auto scenes = load_scenes(o.scenes, o.seed, "test");
  const auto gts = gts_by_image(scenes);
  fs::create_directories(o.out_dir);

  std::vector<CurveSeries> series;
  std::vector<std::pair<std::string, double>> corlocs;
  for (const std::string& arg : o.proposal_files) {
    const auto [label, path] = labeled(arg);
    const auto recs = load_proposals(path);
    const auto records = make_records(recs, gts);
    std::vector<std::size_t> ks = o.ks;
    if (ks.empty()) {
      std::size_t most = 1;
      for (const EvalRecord& r : records) most = std::max(most, r.proposals.size());
      ks = log_k_grid(most);
    }
    series.push_back({label, recall_curve(records, o.iou_thresh, ks)});
    // CorLoc only ever looks at the top-ranked proposal.
    std::vector<EvalRecord> top1 = records;
    for (EvalRecord& r : top1)
      if (r.proposals.size() > 1) r.proposals.resize(1);
    corlocs.emplace_back(label, corloc(top1));
  }

  io::write_atomic(fs::path(o.out_dir) / "recall.csv", [&](std::ostream& os) {
    os << commented(config) << "label,iou_thresh,k,recall\n";
    for (const CurveSeries& s : series)
      for (const RecallPoint& p : s.points)
        os << s.label << ',' << fmt(o.iou_thresh) << ',' << p.k << ',' << fmt(p.recall) << '\n';
  });
  io::write_atomic(fs::path(o.out_dir) / "corloc.csv", [&](std::ostream& os) {
    os << commented(config) << "label,corloc\n";
    for (const auto& [label, c] : corlocs) os << label << ',' << fmt(c) << '\n';
  });
  std::ostringstream title;
  title << "Recall at IoU " << o.iou_thresh;
  save_recall_svg(fs::path(o.out_dir) / "recall.svg", title.str(), series);

  for (const CurveSeries& s : series) {
    out << s.label << ":";
    for (const RecallPoint& p : s.points) out << " R@" << p.k << "=" << p.recall;
    out << '\n';
  }
  for (const auto& [label, c] : corlocs) out << label << ": CorLoc " << c << "%\n";
  return kOk;
}

int cmd_report(Options& o, const std::string& config, std::ostream& out, std::ostream&) {
  if (o.iters == 0) throw UsageError("--iters must be >= 1");
  const RegressorModel model = load_model(o.model);
  const auto scenes = load_scenes(o.scenes, o.seed, "test");
  check_model_fits(model, scenes);
  o.sampler.validate();
  o.proposal.grid.validate();

  const auto inputs = perturbed_inputs(scenes, o.sampler, o.seed);
  const RefinementReport rep = evaluate_refinement(model, scenes, inputs, o.iters);

  std::vector<EvalRecord> refined, grid;
  for (const Scene& s : scenes) {
    refined.push_back({s.id, generate_proposals(model, s, o.proposal, o.workers), s.gts});
    grid.push_back({s.id, seed_proposals(s, o.proposal.grid), s.gts});
  }
  const std::vector<std::size_t> ks = o.ks.empty() ? std::vector<std::size_t>{1, 10, 100} : o.ks;
  const auto top1 = [](std::vector<EvalRecord> r) {
    for (EvalRecord& e : r)
      if (e.proposals.size() > 1) e.proposals.resize(1);
    return r;
  };

  std::ostringstream md;
  md << "# Localization report\n\n";
  md << scenes.size() << " scenes, " << rep.boxes << " perturbed input boxes.\n\n";
  md << "Mean IoU with the nearest ground truth is reported as the localization measure; "
        "detector mAP is not computed because no detector is part of this pipeline.\n\n";
  md << "## Iterative refinement\n\n| pass | mean IoU |\n|---|---|\n";
  for (std::size_t k = 0; k < rep.mean_iou.size(); ++k)
    md << "| " << (k == 0 ? std::string("input") : std::to_string(k)) << " | "
       << fmt(rep.mean_iou[k]) << " |\n";
  md << "\nMean IoU non-decreasing over passes on " << rep.monotone_scenes() << " of "
     << rep.per_scene.size() << " scenes.\n\n";
  md << "## Proposal recall at IoU " << fmt(o.iou_thresh) << "\n\n| k | refined | seed grid |\n"
     << "|---|---|---|\n";
  for (std::size_t k : ks)
    md << "| " << k << " | " << fmt(recall_at(refined, o.iou_thresh, k)) << " | "
       << fmt(recall_at(grid, o.iou_thresh, k)) << " |\n";
  md << "\n## CorLoc (top-1 proposal)\n\n| proposals | CorLoc % |\n|---|---|\n";
  md << "| refined | " << fmt(corloc(top1(refined))) << " |\n";
  md << "| seed grid | " << fmt(corloc(top1(grid))) << " |\n";
  md << "\n## Configuration\n\n```\n" << config << "```\n";

  if (!o.out.empty()) io::write_atomic(o.out, [&](std::ostream& os) { os << md.str(); });
  out << md.str();
  return kOk;
}

int cmd_synth(Options& o, const std::string&, std::ostream& out, std::ostream&) {
  o.scenes.synth = true;
  const auto scenes = load_scenes(o.scenes, o.seed, "all");
  save_annotations(o.out, scenes);
  out << scenes.size() << " scenes written to " << o.out << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Class-agnostic bounding-box regression: train, refine, propose, evaluate."};
  app.name(args.empty() ? "ubbr" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  // Config-file values come first, so the last occurrence has to win.
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);

  auto* train_cmd = app.add_subcommand("train", "Train a regression head");
  add_common(*train_cmd, o);
  add_scene_source(*train_cmd, o.scenes);
  add_train(*train_cmd, o);

  auto* refine_cmd = app.add_subcommand("refine", "Iteratively refine boxes with a model");
  add_common(*refine_cmd, o);
  add_scene_source(*refine_cmd, o.scenes);
  refine_cmd->add_option("--model", o.model, "Model file")->required();
  refine_cmd->add_option("--boxes", o.boxes,
                         "Boxes in proposal format (default: perturbed ground truths)");
  refine_cmd->add_option("--iters", o.iters, "Refinement passes");
  refine_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();
  add_sampler(*refine_cmd, o.sampler);

  auto* propose_cmd = app.add_subcommand("propose", "Generate ranked object proposals");
  add_common(*propose_cmd, o);
  add_scene_source(*propose_cmd, o.scenes);
  propose_cmd->add_option("--model", o.model, "Model file");
  propose_cmd->add_flag("--grid-only", o.grid_only, "Emit the unrefined seed grid");
  propose_cmd->add_option("--iters", o.iters, "Refinement passes over the seeds");
  propose_cmd->add_option("--max-per-image", o.max_per_image, "Keep the top N (0 = all)");
  propose_cmd->add_option("--out", o.out, "Proposal file")->required();
  add_grid(*propose_cmd, o.proposal);

  auto* eval_cmd = app.add_subcommand("eval", "Recall curves and CorLoc of proposal files");
  add_common(*eval_cmd, o);
  add_scene_source(*eval_cmd, o.scenes);
  eval_cmd->add_option("--proposals", o.proposal_files, "[label=]path, repeatable")
      ->required()
      ->delimiter(';');
  eval_cmd->add_option("--iou", o.iou_thresh, "Recall IoU threshold");
  eval_cmd->add_option("--ks", o.ks, "Proposal budgets, e.g. 1,10,100")->delimiter(',');
  eval_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Summary of a model on a scene set");
  add_common(*report_cmd, o);
  add_scene_source(*report_cmd, o.scenes);
  report_cmd->add_option("--model", o.model, "Model file")->required();
  report_cmd->add_option("--iters", o.iters, "Refinement passes")->default_val(3);
  report_cmd->add_option("--iou", o.iou_thresh, "Recall IoU threshold");
  report_cmd->add_option("--ks", o.ks, "Proposal budgets")->delimiter(',');
  report_cmd->add_option("--out", o.out, "Markdown report file");
  add_sampler(*report_cmd, o.sampler);
  add_grid(*report_cmd, o.proposal);

  auto* synth_cmd = app.add_subcommand("synth", "Write generated scenes as annotations");
  add_common(*synth_cmd, o);
  add_scene_source(*synth_cmd, o.scenes);
  synth_cmd->add_option("--out", o.out, "Annotation file")->required();

  try {
    // Expand "--config FILE" into the arguments it stands for.
    std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::vector<std::string> expanded;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      std::string file;
      if (argv[i] == "--config" && i + 1 < argv.size()) {
        file = argv[++i];
      } else if (argv[i].rfind("--config=", 0) == 0) {
        file = argv[i].substr(9);
      } else {
        expanded.push_back(argv[i]);
        continue;
      }
      if (expanded.empty()) throw UsageError("--config must follow the subcommand name");
      CLI::App* sub = app.get_subcommand_no_throw(expanded.front());
      if (sub == nullptr) throw UsageError("unknown subcommand '" + expanded.front() + "'");
      const auto extra = config_arguments(*sub, file);
      expanded.insert(expanded.begin() + 1, extra.begin(), extra.end());
    }
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string config = resolved_config(*sub);
  out << "# " << sub->get_name() << " resolved config\n" << commented(config);

  try {
    const std::string& name = sub->get_name();
    if (name == "train") return cmd_train(o, config, out, err);
    if (name == "refine") return cmd_refine(o, config, out, err);
    if (name == "propose") return cmd_propose(o, config, out, err);
    if (name == "eval") return cmd_eval(o, config, out, err);
    if (name == "report") return cmd_report(o, config, out, err);
    return cmd_synth(o, config, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const PreconditionError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace ubbr::cli
