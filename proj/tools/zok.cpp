// Copyright 2026 The zok Authors.
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

// zok: command-line front end for the segmentation toolkit.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zok/core_io.hpp"
#include "zok/crf.hpp"
#include "zok/error.hpp"
#include "zok/learner.hpp"
#include "zok/metrics.hpp"
#include "zok/pipeline.hpp"
#include "zok/report.hpp"
#include "zok/slic.hpp"
#include "zok/synth.hpp"
#include "zok/weaksup.hpp"
#include "zok/zoomout.hpp"

namespace {

using namespace zok;
using nlohmann::json;

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

CLI::App* subcommand(CLI::App& app, const std::string& name, const std::string& help) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", "JSON file with option values; flags take precedence");
  return sub;
}

bool flag_given(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Replaces "--config file" with the file's keys as long flags, skipping keys
// whose flag is already on the command line.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  const CLI::App* sub = nullptr;
  std::size_t at = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!sub) {
      for (const auto* s : app.get_subcommands({})) {
        if (s->get_name() == args[i]) sub = s;
      }
      continue;
    }
    if (args[i] == "--config" || args[i].rfind("--config=", 0) == 0) {
      at = i;
      break;
    }
  }
  if (!sub || at == args.size()) return args;
  std::string path;
  if (args[at] == "--config") {
    require(at + 1 < args.size(), "--config needs a file");
    path = args[at + 1];
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(at), args.begin() + static_cast<std::ptrdiff_t>(at) + 2);
  } else {
    path = args[at].substr(9);
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(at));
  }
  require(!flag_given(args, "--config"), "--config given more than once");

  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail("malformed JSON config " + path + ": " + e.what());
  }
  require(j.is_object(), "JSON config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    const auto* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || it.key() == "config") {
      fail("unknown key '" + it.key() + "' in " + path + " for '" + sub->get_name() + "'");
    }
    if (flag_given(args, flag)) continue;
    const auto& v = it.value();
    if (opt->get_items_expected_max() == 0) {
      require(v.is_boolean(), "config key '" + it.key() + "' must be true or false");
      if (v.get<bool>()) args.push_back(flag);
      continue;
    }
    std::string text;
    if (v.is_string()) {
      text = v.get<std::string>();
    } else if (v.is_number() || v.is_boolean()) {
      text = v.dump();
    } else if (v.is_array()) {
      for (const auto& e : v) {
        require(e.is_number() || e.is_string(), "config key '" + it.key() + "' has a bad list");
        if (!text.empty()) text += ",";
        text += e.is_string() ? e.get<std::string>() : e.dump();
      }
    } else {
      fail("unsupported value for config key '" + it.key() + "'");
    }
    args.push_back(flag);
    args.push_back(text);
  }
  return args;
}

// Fallback for --threads, from ZOK_THREADS.
int g_default_threads = 1;

int threads_from_env() {
  const char* env = std::getenv("ZOK_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  require(*end == '\0' && v >= 1 && v <= 4096,
          std::string("ZOK_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(v);
}

void add_threads(CLI::App* sub, int& threads) {
  threads = g_default_threads;
  sub->add_option("--threads", threads, "worker threads (default $ZOK_THREADS or 1)")
      ->check(CLI::PositiveNumber);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      require(used == item.size(), "bad integer '" + item + "'");
    } catch (const std::logic_error&) {
      fail("bad integer '" + item + "' in list '" + text + "'");
    }
  }
  return out;
}

std::vector<std::uint32_t> parse_class_list(const std::string& text) {
  std::vector<std::uint32_t> out;
  for (int v : parse_int_list(text)) {
    require(v >= 0, "class indices must be >= 0");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

learner::LossKind parse_loss(const std::string& text) {
  if (text == "asymmetric") return learner::LossKind::kAsymmetric;
  if (text == "symmetric") return learner::LossKind::kSymmetric;
  fail("unknown loss '" + text + "' (expected asymmetric or symmetric)");
}

weaksup::LocalizationModel parse_localization(const std::string& text) {
  if (text == "global") return weaksup::LocalizationModel::kGlobal;
  if (text == "pixel") return weaksup::LocalizationModel::kPixel;
  fail("unknown localization model '" + text + "' (expected global or pixel)");
}

zoomout::Upsample parse_upsample(const std::string& text) {
  if (text == "nearest") return zoomout::Upsample::kNearest;
  if (text == "bilinear") return zoomout::Upsample::kBilinear;
  fail("unknown upsampling '" + text + "' (expected nearest or bilinear)");
}

void emit(const json& report, const std::string& out, cli::ReportFormat format) {
  const auto text = cli::report_emit(report, out, format);
  if (out.empty()) std::cout << text;
}

// Subcommand option blocks. Each registers its flags and returns the action.
using Action = std::function<void()>;

Action setup_slic(CLI::App& app) {
  auto* sub = subcommand(app, "slic", "SLIC superpixels of a PPM image");
  struct Opts {
    std::string input, out;
    slic::SlicParams p;
    bool no_connectivity = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--input", o->input, "input PPM image")->required();
  sub->add_option("--k", o->p.k, "target superpixel count")->capture_default_str();
  sub->add_option("--m", o->p.m, "compactness")->capture_default_str();
  sub->add_option("--max-iters", o->p.max_iters, "iteration cap")->capture_default_str();
  sub->add_option("--threshold", o->p.residual_threshold, "residual stopping threshold")
      ->capture_default_str();
  sub->add_flag("--no-connectivity", o->no_connectivity, "skip connectivity enforcement");
  add_threads(sub, o->p.threads);
  sub->add_option("--out", o->out, "output superpixel tensor (u32 HxW)")->required();
  return [o] {
    o->p.enforce_connectivity = !o->no_connectivity;
    const auto result = slic::run_slic(read_ppm(o->input), o->p);
    write_tensor(to_tensor(result.map), o->out);
    std::cout << "superpixels " << result.map.count << " iterations " << result.iterations_run << "\n";
  };
}

Action setup_rect(CLI::App& app) {
  auto* sub = subcommand(app, "rect", "rectangular region grid");
  struct Opts {
    std::string input, out;
    int width = 0, height = 0, count = 500;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--input", o->input, "PPM image giving the size");
  sub->add_option("--width", o->width, "image width");
  sub->add_option("--height", o->height, "image height");
  sub->add_option("--count", o->count, "target region count")->capture_default_str();
  sub->add_option("--out", o->out, "output region tensor (u32 HxW)")->required();
  return [o] {
    if (!o->input.empty()) {
      const auto img = read_ppm(o->input);
      o->width = img.width;
      o->height = img.height;
    }
    require(o->width > 0 && o->height > 0, "give --input or both --width and --height");
    write_tensor(to_tensor(zoomout::rect_regions(o->width, o->height, o->count)), o->out);
  };
}

Action setup_features(CLI::App& app) {
  auto* sub = subcommand(app, "features", "zoom-out features per superpixel");
  struct Opts {
    std::string image, superpixels, levels = "local,proximal:2", featmap, out;
    bool mirror = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--image", o->image, "input PPM image")->required();
  sub->add_option("--superpixels", o->superpixels, "superpixel tensor")->required();
  sub->add_option("--levels", o->levels, "comma-separated levels")->capture_default_str();
  sub->add_option("--featmap", o->featmap, "dense CxHxW feature map for pooled levels");
  sub->add_flag("--mirror", o->mirror, "max-fuse with the mirrored image");
  sub->add_option("--out", o->out, "output feature matrix (f32 NxD)")->required();
  return [o] {
    const auto img = read_ppm(o->image);
    const auto map = superpixels_from_tensor(read_tensor(o->superpixels));
    require(map.width == img.width && map.height == img.height,
            "image and superpixel map differ in shape");
    const auto levels = zoomout::parse_levels(o->levels);
    std::optional<zoomout::FeatureMap> fm;
    if (!o->featmap.empty()) fm = zoomout::featuremap_from_tensor(read_tensor(o->featmap));
    const auto feat = o->mirror ? zoomout::extract_features_mirrored(img, map, levels, fm)
                                : zoomout::extract_features(rgb_to_lab(img), map, levels, fm);
    write_tensor(to_tensor(feat.features), o->out);
  };
}

Action setup_pool(CLI::App& app) {
  auto* sub = subcommand(app, "pool", "pool a dense feature map over superpixels");
  struct Opts {
    std::string featmap, superpixels, upsample = "nearest", out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--featmap", o->featmap, "dense CxHxW feature map")->required();
  sub->add_option("--superpixels", o->superpixels, "superpixel tensor")->required();
  sub->add_option("--upsample", o->upsample, "nearest or bilinear")->capture_default_str();
  sub->add_option("--out", o->out, "output matrix (f32 NxC)")->required();
  return [o] {
    const auto mode = parse_upsample(o->upsample);
    const auto map = superpixels_from_tensor(read_tensor(o->superpixels));
    const auto fm = zoomout::featuremap_from_tensor(read_tensor(o->featmap));
    const auto up = zoomout::upsample_featuremap(fm, map.height, map.width, mode);
    write_tensor(to_tensor(zoomout::pool_over_superpixels(up, map)), o->out);
  };
}

Action setup_train(CLI::App& app) {
  auto* sub = subcommand(app, "train", "train the superpixel classifier");
  struct Opts {
    std::string features, labels, superpixels, weights, hidden = "1024,1024", loss = "asymmetric", out;
    learner::TrainConfig cfg;
    int classes = 0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--features", o->features, "feature matrix (f32 NxD)")->required();
  sub->add_option("--labels", o->labels,
                  "labels (u32 or u16 tensor of length N, 255 ignored; or a PGM with --superpixels)")
      ->required();
  sub->add_option("--superpixels", o->superpixels,
                  "superpixel tensor; a PGM --labels is reduced by majority vote");
  sub->add_option("--weights", o->weights,
                  "per-sample frequency weights (f32, length N; default superpixel sizes or 1)");
  sub->add_option("--classes", o->classes, "class count (0 infers)")->capture_default_str();
  sub->add_option("--hidden", o->hidden, "hidden layer sizes")->capture_default_str();
  sub->add_option("--loss", o->loss, "asymmetric or symmetric")->capture_default_str();
  sub->add_option("--epochs", o->cfg.epochs)->capture_default_str();
  sub->add_option("--lr", o->cfg.learning_rate)->capture_default_str();
  sub->add_option("--momentum", o->cfg.momentum)->capture_default_str();
  sub->add_option("--weight-decay", o->cfg.weight_decay)->capture_default_str();
  sub->add_option("--batch-size", o->cfg.batch_size)->capture_default_str();
  sub->add_option("--dropout", o->cfg.dropout)->capture_default_str();
  sub->add_option("--seed", o->cfg.seed)->capture_default_str();
  sub->add_option("--out", o->out, "output model (ZOM1)")->required();
  return [o] {
    o->cfg.hidden = parse_int_list(o->hidden);
    o->cfg.loss = parse_loss(o->loss);
    const auto x = matrix_from_tensor(read_tensor(o->features));
    std::vector<std::uint32_t> y;
    std::vector<double> w;
    std::optional<SuperpixelMap> map;
    if (!o->superpixels.empty()) map = superpixels_from_tensor(read_tensor(o->superpixels));
    if (std::filesystem::path(o->labels).extension() == ".pgm") {
      require(map.has_value(), "a PGM --labels needs --superpixels");
      auto gt = read_pgm(o->labels);
      for (auto v : metrics::majority_labels(gt, *map)) y.push_back(v);
    } else {
      y = read_tensor(o->labels).to_u32();
    }
    if (!o->weights.empty()) {
      for (float v : read_tensor(o->weights).to_f32()) w.push_back(v);
    } else if (map) {
      for (auto n : superpixel_sizes(*map)) w.push_back(static_cast<double>(n));
    }
    const auto result = learner::train(x, y, w, o->classes, o->cfg);
    learner::save_model(result.model, o->out);
    if (!result.epoch_loss.empty()) {
      std::printf("final loss %.6f\n", result.epoch_loss.back());
    }
  };
}

Action setup_predict(CLI::App& app) {
  auto* sub = subcommand(app, "predict", "classify feature rows");
  struct Opts {
    std::string model, features, out, probs;
    int threads = 1;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--model", o->model, "model file (ZOM1)")->required();
  sub->add_option("--features", o->features, "feature matrix (f32 NxD)")->required();
  sub->add_option("--out", o->out, "output labels (u32, length N)")->required();
  sub->add_option("--probs", o->probs, "also write class probabilities (f32 NxC)");
  add_threads(sub, o->threads);
  return [o] {
    const auto model = learner::load_model(o->model);
    const auto x = matrix_from_tensor(read_tensor(o->features));
    const auto probs = learner::predict_probabilities(model, x, o->threads);
    std::vector<std::uint32_t> labels(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
      const auto r = probs.row(i);
      labels[i] = static_cast<std::uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    write_tensor(Tensor::u32({static_cast<std::uint32_t>(labels.size())}, labels), o->out);
    if (!o->probs.empty()) write_tensor(to_tensor(probs), o->probs);
  };
}

Action setup_sample(CLI::App& app) {
  auto* sub = subcommand(app, "sample", "sample training points from localization scores");
  struct Opts {
    std::string scores, features, classes, mode = "diverse", out;
    int k = 20, k_bg = -1;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--scores", o->scores, "score field (f32 CxHxW)")->required();
  sub->add_option("--features", o->features, "feature field (f32 DxHxW)")->required();
  sub->add_option("--classes", o->classes, "present classes, comma-separated (default all)");
  sub->add_option("--k", o->k, "points per class")->capture_default_str();
  sub->add_option("--k-bg", o->k_bg, "background points (default k)");
  sub->add_option("--mode", o->mode, "diverse, topk or spatial")->capture_default_str();
  sub->add_option("--out", o->out, "output points (u32 rows class,row,col,rank)")->required();
  return [o] {
    const auto mode = weaksup::parse_sample_mode(o->mode);
    const auto scores = zoomout::featuremap_from_tensor(read_tensor(o->scores));
    const auto raw = zoomout::featuremap_from_tensor(read_tensor(o->features));
    const auto z = weaksup::normalize_features({raw}).fields.front();
    std::vector<std::uint32_t> classes;
    if (o->classes.empty()) {
      for (int c = 0; c < scores.channels; ++c) classes.push_back(static_cast<std::uint32_t>(c));
    } else {
      classes = parse_class_list(o->classes);
    }
    const int k_bg = o->k_bg < 0 ? o->k : o->k_bg;
    write_tensor(weaksup::to_tensor(weaksup::sample_image(scores, z, classes, o->k, k_bg, mode)), o->out);
  };
}

Action setup_crf(CLI::App& app) {
  auto* sub = subcommand(app, "crf", "mean-field refinement of class probabilities");
  struct Opts {
    std::string unary, image, superpixels, mode = "parallel", out, probs;
    crf::MeanFieldConfig mf;
    crf::ImageKernelParams k;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--unary", o->unary, "class probabilities (f32 NxC)")->required();
  sub->add_option("--image", o->image, "input PPM image")->required();
  sub->add_option("--superpixels", o->superpixels, "nodes are superpixels of this map");
  sub->add_option("--iters", o->mf.iterations)->capture_default_str();
  sub->add_option("--mode", o->mode, "parallel or sequential")->capture_default_str();
  sub->add_option("--damping", o->mf.damping)->capture_default_str();
  sub->add_option("--w-appearance", o->k.w_appearance)->capture_default_str();
  sub->add_option("--w-smooth", o->k.w_smooth)->capture_default_str();
  sub->add_option("--sigma-xy-appearance", o->k.sigma_xy_appearance)->capture_default_str();
  sub->add_option("--sigma-l", o->k.sigma_l)->capture_default_str();
  sub->add_option("--sigma-ab", o->k.sigma_ab)->capture_default_str();
  sub->add_option("--sigma-xy-smooth", o->k.sigma_xy_smooth)->capture_default_str();
  add_threads(sub, o->mf.threads);
  sub->add_option("--out", o->out, "output labels (u32)")->required();
  sub->add_option("--probs", o->probs, "also write refined Q (f32 NxC)");
  return [o] {
    o->mf.mode = crf::parse_update_mode(o->mode);
    require(o->mf.iterations >= 1, "--iters must be >= 1");
    require(o->mf.damping >= 0 && o->mf.damping < 1, "--damping must lie in [0, 1)");
    const auto probs = matrix_from_tensor(read_tensor(o->unary));
    const auto lab = rgb_to_lab(read_ppm(o->image));
    std::optional<SuperpixelMap> map;
    if (!o->superpixels.empty()) map = superpixels_from_tensor(read_tensor(o->superpixels));
    const auto nodes = map ? crf::superpixel_features(lab, *map) : crf::pixel_features(lab);
    require(nodes.nodes == probs.rows, "unary rows (" + std::to_string(probs.rows) +
                                           ") do not match node count (" +
                                           std::to_string(nodes.nodes) + ")");
    auto model = crf::model_from_probabilities(probs);
    crf::add_image_kernels(model, o->k);
    const auto state = crf::mean_field_refine(model, nodes, o->mf);
    const auto labels = crf::map_labels(state);
    if (map) {
      write_tensor(Tensor::u32({static_cast<std::uint32_t>(labels.size())}, labels), o->out);
    } else {
      write_tensor(Tensor::u32({static_cast<std::uint32_t>(lab.height),
                                static_cast<std::uint32_t>(lab.width)},
                               labels),
                   o->out);
    }
    if (!o->probs.empty()) {
      Matrix q(state.num_nodes, state.num_labels);
      for (std::size_t i = 0; i < state.q.size(); ++i) q.data[i] = static_cast<float>(state.q[i]);
      write_tensor(to_tensor(q), o->probs);
    }
  };
}

Action setup_eval(CLI::App& app) {
  auto* sub = subcommand(app, "eval", "segmentation scores of a label map");
  struct Opts {
    std::string pred, gt, report = "json", out;
    int classes = 0, ignore = kDefaultIgnoreLabel;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--pred", o->pred, "predicted labels (PGM)")->required();
  sub->add_option("--gt", o->gt, "ground-truth labels (PGM)")->required();
  sub->add_option("--classes", o->classes, "class count")->required()->check(CLI::PositiveNumber);
  sub->add_option("--ignore", o->ignore, "ignored ground-truth value")->capture_default_str()
      ->check(CLI::Range(0, 65535));
  sub->add_option("--report", o->report, "json or text")->capture_default_str();
  sub->add_option("--out", o->out, "report file (default stdout)");
  return [o] {
    const auto format = cli::parse_report_format(o->report);
    const auto ignore = static_cast<std::uint16_t>(o->ignore);
    const auto pred = read_pgm(o->pred, ignore);
    const auto gt = read_pgm(o->gt, ignore);
    const auto scores = metrics::seg_scores(metrics::confusion(pred, gt, o->classes));
    emit(cli::seg_report_json(scores), o->out, format);
  };
}

Action setup_eval_depth(CLI::App& app) {
  auto* sub = subcommand(app, "eval-depth", "depth error measures");
  struct Opts {
    std::string pred, gt, denominator = "pred", report = "json", out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--pred", o->pred, "predicted depth (f32 HxW)")->required();
  sub->add_option("--gt", o->gt, "ground-truth depth (f32 HxW)")->required();
  sub->add_option("--rel-denominator", o->denominator, "pred or gt")->capture_default_str();
  sub->add_option("--report", o->report, "json or text")->capture_default_str();
  sub->add_option("--out", o->out, "report file (default stdout)");
  return [o] {
    const auto format = cli::parse_report_format(o->report);
    metrics::RelDenominator denom;
    if (o->denominator == "pred") {
      denom = metrics::RelDenominator::kPredicted;
    } else if (o->denominator == "gt") {
      denom = metrics::RelDenominator::kGroundTruth;
    } else {
      fail("--rel-denominator must be pred or gt");
    }
    const auto pred = depth_from_tensor(read_tensor(o->pred));
    const auto gt = depth_from_tensor(read_tensor(o->gt));
    emit(cli::depth_report_json(metrics::depth_metrics(pred, gt, denom)), o->out, format);
  };
}

Action setup_synth(CLI::App& app) {
  auto* sub = subcommand(app, "synth", "generate a synthetic labeled dataset");
  struct Opts {
    std::string out_dir, shape = "quadrants";
    cli::SyntheticSpec spec;
    int count = 10;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--out-dir", o->out_dir, "output directory")->required();
  sub->add_option("--count", o->count, "number of images")->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--width", o->spec.width)->capture_default_str();
  sub->add_option("--height", o->spec.height)->capture_default_str();
  sub->add_option("--classes", o->spec.num_classes)->capture_default_str();
  sub->add_option("--shape", o->shape, "quadrants, blobs or stripes")->capture_default_str();
  sub->add_option("--noise", o->spec.noise_sigma, "RGB noise std")->capture_default_str();
  sub->add_option("--jitter", o->spec.shade_jitter, "per-region lightness std")->capture_default_str();
  sub->add_option("--gradient", o->spec.shade_gradient, "lightness ramp amplitude")->capture_default_str();
  sub->add_option("--min-blobs", o->spec.min_blobs)->capture_default_str();
  sub->add_option("--max-blobs", o->spec.max_blobs)->capture_default_str();
  sub->add_option("--min-radius", o->spec.min_radius)->capture_default_str();
  sub->add_option("--max-radius", o->spec.max_radius)->capture_default_str();
  return [o] {
    o->spec.shape = cli::parse_shape_kind(o->shape);
    cli::save_dataset(cli::synth_generate(o->spec, o->count, o->seed), o->out_dir);
  };
}

Action setup_pipeline(CLI::App& app) {
  auto* sub = subcommand(app, "pipeline", "train, predict and evaluate on a dataset pair");
  struct Opts {
    std::string train, test, mode = "full", hidden = "64", loss = "asymmetric";
    std::string crf_mode = "parallel", sample_mode = "diverse", sample_score = "raw";
    std::string loc_hidden = "64", loc_model = "global";
    std::string report, format = "json", pred_dir, model_out;
    bool no_timings = false;
    int sample_k_bg = -1;
    cli::PipelineConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  auto& c = o->cfg;
  c.train.hidden = {64};
  c.train.learning_rate = 1e-3;
  c.train.weight_decay = 1e-4;
  c.train.epochs = 20;
  sub->add_option("--train", o->train, "training dataset directory");
  sub->add_option("--test", o->test, "test dataset directory")->required();
  sub->add_option("--mode", o->mode, "full, oracle or weak")->capture_default_str();
  sub->add_option("--classes", c.num_classes, "class count (0 infers)")->capture_default_str();
  sub->add_option("--seed", c.seed)->capture_default_str();
  add_threads(sub, c.threads);
  sub->add_option("--k", c.slic.k, "SLIC superpixel count")->capture_default_str();
  sub->add_option("--m", c.slic.m, "SLIC compactness")->capture_default_str();
  sub->add_option("--max-iters", c.slic.max_iters, "SLIC iteration cap")->capture_default_str();
  sub->add_option("--levels", c.levels, "zoom-out levels")->capture_default_str();
  sub->add_option("--hidden", o->hidden, "classifier hidden sizes")->capture_default_str();
  sub->add_option("--loss", o->loss, "asymmetric or symmetric")->capture_default_str();
  sub->add_option("--epochs", c.train.epochs)->capture_default_str();
  sub->add_option("--lr", c.train.learning_rate)->capture_default_str();
  sub->add_option("--momentum", c.train.momentum)->capture_default_str();
  sub->add_option("--weight-decay", c.train.weight_decay)->capture_default_str();
  sub->add_option("--batch-size", c.train.batch_size)->capture_default_str();
  sub->add_flag("--crf", c.crf, "refine predictions with mean field");
  sub->add_option("--crf-iters", c.mean_field.iterations)->capture_default_str();
  sub->add_option("--crf-mode", o->crf_mode, "parallel or sequential")->capture_default_str();
  sub->add_option("--damping", c.mean_field.damping)->capture_default_str();
  sub->add_option("--w-appearance", c.kernels.w_appearance)->capture_default_str();
  sub->add_option("--w-smooth", c.kernels.w_smooth)->capture_default_str();
  sub->add_option("--cell", c.cell, "weak mode cell size")->capture_default_str();
  sub->add_option("--sample-k", c.k, "weak mode points per class")->capture_default_str();
  sub->add_option("--sample-k-bg", o->sample_k_bg, "weak mode background points (default k)");
  sub->add_option("--sample-mode", o->sample_mode, "diverse, topk or spatial")->capture_default_str();
  sub->add_option("--sample-score", o->sample_score, "raw or posterior")->capture_default_str();
  sub->add_option("--loc-hidden", o->loc_hidden, "localizer hidden sizes")->capture_default_str();
  sub->add_option("--loc-epochs", c.localizer.epochs)->capture_default_str();
  sub->add_option("--loc-lr", c.localizer.learning_rate)->capture_default_str();
  sub->add_option("--loc-model", o->loc_model, "global or pixel")->capture_default_str();
  sub->add_option("--report", o->report, "report file (default stdout)");
  sub->add_option("--format", o->format, "json or text")->capture_default_str();
  sub->add_option("--pred-dir", o->pred_dir, "write predicted label maps here");
  sub->add_option("--model-out", o->model_out, "write the trained classifier here");
  sub->add_flag("--no-timings", o->no_timings, "omit wall-clock timings from the report");
  return [o] {
    auto& c = o->cfg;
    c.mode = cli::parse_pipeline_mode(o->mode);
    c.train.hidden = parse_int_list(o->hidden);
    c.train.loss = parse_loss(o->loss);
    c.mean_field.mode = crf::parse_update_mode(o->crf_mode);
    c.sample_mode = weaksup::parse_sample_mode(o->sample_mode);
    c.sample_score = cli::parse_sample_score(o->sample_score);
    c.localizer.hidden = parse_int_list(o->loc_hidden);
    c.localizer.model = parse_localization(o->loc_model);
    c.k_bg = o->sample_k_bg < 0 ? c.k : o->sample_k_bg;
    const auto format = cli::parse_report_format(o->format);
    if (c.mode != cli::PipelineMode::kOracle) require(!o->train.empty(), "--train is required");

    const cli::Dataset train = o->train.empty() ? cli::Dataset{} : cli::load_dataset(o->train);
    const cli::Dataset test = cli::load_dataset(o->test);
    const auto result = cli::pipeline_run(train, test, c);
    if (!o->pred_dir.empty()) {
      std::filesystem::create_directories(o->pred_dir);
      for (std::size_t i = 0; i < test.size(); ++i) {
        write_pgm(result.predictions[i], std::filesystem::path(o->pred_dir) / (test[i].name + ".pgm"));
      }
    }
    if (!o->model_out.empty() && result.model) learner::save_model(*result.model, o->model_out);
    emit(cli::pipeline_report(result, !o->no_timings), o->report, format);
  };
}

}  // namespace

int main(int argc, char** argv) {
  try {
    g_default_threads = threads_from_env();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  CLI::App app{"zok: superpixel zoom-out segmentation toolkit", "zok"};
  app.require_subcommand(1);
  std::vector<std::pair<CLI::App*, Action>> actions;
  auto add = [&](Action (*setup)(CLI::App&)) {
    const auto before = app.get_subcommands({}).size();
    auto action = setup(app);
    actions.emplace_back(app.get_subcommands({})[before], std::move(action));
  };
  add(setup_slic);
  add(setup_rect);
  add(setup_features);
  add(setup_pool);
  add(setup_train);
  add(setup_predict);
  add(setup_sample);
  add(setup_crf);
  add(setup_eval);
  add(setup_eval_depth);
  add(setup_synth);
  add(setup_pipeline);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = expand_config(app, std::move(args));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kIo ? kExitIo : kExitValidation;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    for (auto& [sub, action] : actions) {
      if (sub->parsed()) action();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kIo ? kExitIo : kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
