#include "lfdeocc/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>

#include "lfdeocc/deoccnet.hpp"
#include "lfdeocc/io/light_field_dir.hpp"
#include "lfdeocc/io/mask_library.hpp"
#include "lfdeocc/io/png.hpp"
#include "lfdeocc/mask_embed.hpp"
#include "lfdeocc/metrics.hpp"
#include "lfdeocc/refocus.hpp"
#include "lfdeocc/training.hpp"
#include "lfdeocc/weights_io.hpp"

namespace lfdeocc {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("LFDEOCC_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("LFDEOCC_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return 0;
}

std::vector<LightField> load_sources(const fs::path& dir, std::vector<nlohmann::json>& manifests) {
  std::vector<fs::path> dirs;
  if (fs::exists(dir / "manifest.json")) {
    dirs.push_back(dir);
  } else {
    dirs = io::list_light_field_dirs(dir);
    if (dirs.empty()) throw io::IoError(dir / "manifest.json", "missing light-field manifest");
  }
  std::vector<LightField> lfs;
  for (const fs::path& d : dirs) {
    io::LightFieldDir lfd = io::read_light_field_dir(d);
    lfs.push_back(std::move(lfd.lf));
    manifests.push_back(std::move(lfd.manifest));
  }
  return lfs;
}

// ---- synthesize

struct SynthesizeArgs {
  std::string lf_dir, mask_dir, out;
  std::size_t layers = 1;
  std::size_t count = 1;
  std::optional<std::uint64_t> seed;
  bool shuffle_channels = false;
  bool shuffle_masks_independently = false;
  bool binarize_alpha = false;
};

void cmd_synthesize(const SynthesizeArgs& a, std::ostream& out) {
  std::vector<nlohmann::json> manifests;
  const std::vector<LightField> lfs = load_sources(a.lf_dir, manifests);
  const std::vector<MaskAsset> masks = io::load_mask_library(a.mask_dir);
  SynthesisConfig cfg;
  cfg.layer_count = a.layers;
  cfg.channel_shuffle = a.shuffle_channels;
  cfg.independent_mask_shuffle = a.shuffle_masks_independently;
  cfg.binarize_alpha = a.binarize_alpha;
  cfg.seed = resolve_seed(a.seed);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.count; ++i) {
    const SynthesisResult r = synthesize_indexed(lfs, masks, cfg, i);
    io::write_sample_dir(fs::path(a.out) / fmt::format("sample_{:04}", i), r, manifests[r.source]);
  }
  io::write_json(fs::path(a.out) / "synthesis.json", {{"count", a.count},
                                                      {"layers", a.layers},
                                                      {"seed", cfg.seed},
                                                      {"shuffle_channels", cfg.channel_shuffle},
                                                      {"shuffle_masks_independently", cfg.independent_mask_shuffle},
                                                      {"binarize_alpha", cfg.binarize_alpha},
                                                      {"sources", lfs.size()},
                                                      {"masks", masks.size()}});
  out << fmt::format("wrote {} samples to {}\n", a.count, a.out);
}

// ---- refocus

struct RefocusArgs {
  std::string lf_dir, out, method = "avg", sweep;
  std::optional<double> disparity;
};

void cmd_refocus(const RefocusArgs& a, std::ostream& out) {
  if (a.disparity.has_value() == !a.sweep.empty()) throw UsageError("give exactly one of --disparity and --sweep");
  std::vector<double> disparities;
  if (a.disparity) {
    disparities = {*a.disparity};
  } else {
    try {
      disparities = parse_sweep(a.sweep);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const LightField lf = io::read_light_field_dir(a.lf_dir).lf;
  fs::create_directories(a.out);

  nlohmann::json sharp = nlohmann::json::array();
  nlohmann::json holes = nlohmann::json::array();
  nlohmann::json files = nlohmann::json::array();
  double best = disparities.front();
  double best_score = -1.0;
  for (std::size_t i = 0; i < disparities.size(); ++i) {
    const Refocused r = a.method == "median" ? sa_median(lf, disparities[i]) : sa_average(lf, disparities[i]);
    std::vector<std::uint8_t> valid(r.holes.size());
    for (std::size_t p = 0; p < valid.size(); ++p) valid[p] = r.holes[p] == 0;
    const double score = mean_gradient_magnitude(r.image, std::span<const std::uint8_t>(valid));
    const std::string name = fmt::format("refocus_{:03}.png", i);
    io::write_png(fs::path(a.out) / name, r.image);
    sharp.push_back(score);
    holes.push_back(r.hole_count());
    files.push_back(name);
    if (score > best_score) {
      best_score = score;
      best = disparities[i];
    }
  }
  io::write_json(fs::path(a.out) / "sharpness.json", {{"method", a.method},
                                                      {"disparities", disparities},
                                                      {"sharpness", sharp},
                                                      {"holes", holes},
                                                      {"files", files},
                                                      {"best_disparity", best}});
  out << fmt::format("refocused at {} disparities, sharpest {}\n", disparities.size(), best);
}

// ---- train

const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    const nlohmann::json train = TrainConfig{};
    const nlohmann::json network = NetworkConfig{};
    for (const auto& [key, v] : train.items()) k.insert(key);
    for (const auto& [key, v] : network.items()) k.insert(key);
    k.erase("in_channels");
    return k;
  }();
  return keys;
}

struct TrainArgs {
  std::string data, config, out, resume;
  std::optional<std::size_t> epochs, max_steps;
  std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  nlohmann::json j = nlohmann::json::object();
  if (!a.config.empty()) j = io::read_json(a.config);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (!config_keys().contains(key)) throw UsageError("unknown config field '" + key + "'");
  }
  TrainConfig tcfg;
  NetworkConfig ncfg;
  ncfg.base_depth = 8;
  try {
    tcfg = j.get<TrainConfig>();
    from_json(j, ncfg);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  if (a.epochs) tcfg.epochs = *a.epochs;
  if (a.max_steps) tcfg.max_steps = *a.max_steps;
  // --seed, then the config's seed, then LFDEOCC_SEED
  if (a.seed || !j.contains("seed")) tcfg.seed = resolve_seed(a.seed);

  const std::vector<TrainingSample> data = io::load_dataset(a.data);
  if (!j.contains("angular_rows")) ncfg.angular_rows = data.front().lf.grid().rows;
  if (!j.contains("angular_cols")) ncfg.angular_cols = data.front().lf.grid().cols;
  try {
    tcfg.validate();
    ncfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  DeOccNet net = DeOccNet::build(ncfg, tcfg.seed);
  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  TrainOptions options;
  options.checkpoint_dir = out_dir / "checkpoints";
  if (!a.resume.empty()) options.resume_from = a.resume;
  const TrainingLog log = train(net, data, tcfg, options);

  save_weights(net, out_dir / "weights.docn");
  io::write_text(out_dir / "train_log.csv", log.to_csv());
  nlohmann::json summary = log.summary();
  summary["train"] = tcfg;
  summary["network"] = ncfg;
  summary["samples"] = data.size();
  summary["parameters"] = net.parameter_count();
  io::write_json(out_dir / "train_summary.json", summary);
  out << fmt::format("trained {} steps over {} epochs; weights in {}\n", log.entries.size(), log.epochs_completed,
                     (out_dir / "weights.docn").string());
}

// ---- infer

struct InferArgs {
  std::string weights, lf_dir, out;
  std::optional<double> rectify_disparity;
};

Image pad_edge(const Image& img, std::size_t h, std::size_t w) {
  Image out(h, w, img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out.at(c, y, x) = img.at(c, std::min(y, img.height() - 1), std::min(x, img.width() - 1));
      }
    }
  }
  return out;
}

void cmd_infer(const InferArgs& a, std::ostream& out) {
  DeOccNet net = load_network(a.weights);
  const io::LightFieldDir lfd = io::read_light_field_dir(a.lf_dir);
  const double d0 = a.rectify_disparity.value_or(lfd.rectified_disparity().value_or(0.0));
  LightField lf = d0 == 0.0 ? lfd.lf : rectify(lfd.lf, d0);
  const NetworkConfig& cfg = net.config();
  if (lf.grid().rows != cfg.angular_rows || lf.grid().cols != cfg.angular_cols) {
    throw WeightsError(WeightsErrorKind::ConfigMismatch, "in_channels",
                       fmt::format("light field has {}x{} views, weights expect {}x{}", lf.grid().rows,
                                   lf.grid().cols, cfg.angular_rows, cfg.angular_cols));
  }
  const std::size_t m = cfg.spatial_multiple();
  const std::size_t h = lf.height();
  const std::size_t w = lf.width();
  const std::size_t ph = (h + m - 1) / m * m;
  const std::size_t pw = (w + m - 1) / m * m;
  if (ph != h || pw != w) {
    std::vector<Image> views;
    for (const Image& v : lf.views()) views.push_back(pad_edge(v, ph, pw));
    lf = LightField(lf.grid(), std::move(views));
  }
  const nn::Tensor stacked = stack_channels(lf);
  const nn::Tensor y = net.infer(stacked.reshaped({1, stacked.dim(0), ph, pw}));
  Image pred(h, w, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t yy = 0; yy < h; ++yy) {
      for (std::size_t x = 0; x < w; ++x) pred.at(c, yy, x) = std::clamp(y.at(0, c, yy, x), 0.0f, 1.0f);
    }
  }
  const fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_png(path, pred);
  out << fmt::format("wrote {} (rectified at disparity {})\n", a.out, d0);
}

// ---- evaluate / report

struct EvaluateArgs {
  std::string pred, gt, out, method;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  std::vector<EvalRow> rows;
  if (fs::is_directory(a.pred)) {
    std::vector<fs::path> preds;
    for (const fs::directory_entry& e : fs::directory_iterator(a.pred)) {
      if (e.is_regular_file() && e.path().extension() == ".png") preds.push_back(e.path());
    }
    std::ranges::sort(preds);
    if (preds.empty()) throw io::IoError(a.pred, "no prediction PNGs found");
    for (const fs::path& p : preds) {
      fs::path g = fs::path(a.gt) / p.filename();
      if (!fs::exists(g)) g = fs::path(a.gt) / p.stem() / "gt.png";
      if (!fs::exists(g)) throw io::IoError(p, "no matching groundtruth under " + a.gt);
      rows.push_back(evaluate_scene(p.stem().string(), to_rgb(io::read_png(p)), to_rgb(io::read_png(g))));
    }
  } else {
    fs::path g(a.gt);
    if (fs::is_directory(g)) g /= "gt.png";
    rows.push_back(evaluate_scene(fs::path(a.pred).stem().string(), to_rgb(io::read_png(a.pred)),
                                  to_rgb(io::read_png(g))));
  }
  const EvalReport report = assemble_report(std::move(rows), a.method);
  fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_json(path, report);
  io::write_text(fs::path(path).replace_extension(".csv"), to_csv(report));
  out << fmt::format("average l1 {:.6f}  psnr {:.4f}  ssim {:.6f}\n", report.average.l1, report.average.psnr,
                     report.average.ssim);
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const std::string& in : a.inputs) {
    try {
      reports.push_back(io::read_json(in).get<EvalReport>());
    } catch (const nlohmann::json::exception& e) {
      throw io::IoError(in, std::string("not an evaluation report: ") + e.what());
    }
  }
  const fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_text(path, comparison_csv(reports));
  out << fmt::format("compared {} reports into {}\n", reports.size(), a.out);
}

nlohmann::json error_json(const std::exception& e) {
  nlohmann::json j = {{"message", e.what()}};
  if (const auto* w = dynamic_cast<const WeightsError*>(&e)) {
    j["error"] = std::string("weights_") + to_string(w->kind());
    if (!w->field().empty()) j["field"] = w->field();
  } else if (const auto* io_err = dynamic_cast<const io::IoError*>(&e)) {
    j["error"] = "io";
    j["path"] = io_err->path().string();
  } else if (dynamic_cast<const UsageError*>(&e) != nullptr) {
    j["error"] = "usage";
  } else if (dynamic_cast<const TrainingDiverged*>(&e) != nullptr) {
    j["error"] = "diverged";
  } else if (dynamic_cast<const std::invalid_argument*>(&e) != nullptr) {
    j["error"] = "invalid_argument";
  } else {
    j["error"] = "runtime";
  }
  return j;
}

}  // namespace

std::vector<double> parse_sweep(const std::string& text) {
  const auto first = text.find(':');
  const auto second = first == std::string::npos ? std::string::npos : text.find(':', first + 1);
  if (second == std::string::npos || text.find(':', second + 1) != std::string::npos) {
    throw std::invalid_argument("sweep must look like lo:hi:n, got '" + text + "'");
  }
  double lo = 0.0;
  double hi = 0.0;
  long long n = 0;
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, first);
    const std::string b = text.substr(first + 1, second - first - 1);
    const std::string c = text.substr(second + 1);
    lo = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    hi = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    n = std::stoll(c, &used);
    if (used != c.size()) throw std::invalid_argument(c);
  } catch (const std::exception&) {
    throw std::invalid_argument("sweep must look like lo:hi:n, got '" + text + "'");
  }
  if (n < 1) throw std::invalid_argument("sweep count must be at least 1");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("sweep bounds must be finite");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Light-field de-occlusion toolkit: occluder synthesis, synthetic-aperture refocusing, "
               "DeOccNet training, inference and evaluation.",
               "lfdeocc"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string error_json_path;
  app.add_option("--error-json", error_json_path, "On failure, write a JSON error description to this path");

  SynthesizeArgs syn;
  auto* s = app.add_subcommand("synthesize", "Plant occluder masks into light fields");
  s->add_option("--lf-dir", syn.lf_dir, "Light-field directory, or a directory of them")->required();
  s->add_option("--mask-dir", syn.mask_dir, "Directory of mask PNGs")->required();
  s->add_option("--out", syn.out, "Output directory for sample_NNNN folders")->required();
  s->add_option("--layers", syn.layers, "Occlusion layers per sample")->check(CLI::Range(1, 16));
  s->add_option("--count", syn.count, "Number of samples");
  s->add_option("--seed", syn.seed, "Random seed (falls back to LFDEOCC_SEED, then 0)");
  s->add_flag("--shuffle-channels", syn.shuffle_channels, "Randomly permute the RGB channels of each sample");
  s->add_flag("--shuffle-masks-independently", syn.shuffle_masks_independently,
              "Draw the mask channel permutation separately from the scene's");
  s->add_flag("--binarize-alpha", syn.binarize_alpha, "Threshold mask alpha at 0.5");

  RefocusArgs ref;
  auto* r = app.add_subcommand("refocus", "Synthetic-aperture refocusing");
  r->add_option("--lf-dir", ref.lf_dir, "Light-field directory")->required();
  auto* dopt = r->add_option("--disparity", ref.disparity, "Refocus disparity");
  auto* sopt = r->add_option("--sweep", ref.sweep, "Disparity sweep lo:hi:n");
  dopt->excludes(sopt);
  r->add_option("--method", ref.method, "Aggregation across views")->check(CLI::IsMember({"avg", "median"}));
  r->add_option("--out", ref.out, "Output directory for refocus_NNN.png and sharpness.json")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train DeOccNet on synthesized samples");
  t->add_option("--data", tr.data, "Directory of samples (light field + gt.png)")->required();
  t->add_option("--config", tr.config, "JSON file with training and network fields");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--epochs", tr.epochs, "Override the configured epoch count");
  t->add_option("--max-steps", tr.max_steps, "Stop after this many steps");
  t->add_option("--seed", tr.seed, "Seed for initialization and shuffling");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Predict the occlusion-free center view");
  i->add_option("--weights", inf.weights, "Weights or checkpoint file")->required();
  i->add_option("--lf-dir", inf.lf_dir, "Light-field directory")->required();
  i->add_option("--out", inf.out, "Output PNG path")->required();
  i->add_option("--rectify-disparity", inf.rectify_disparity,
                "Rectify at this disparity first (default: manifest rectified_disparity, else 0)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score predictions against groundtruth");
  e->add_option("--pred", ev.pred, "Prediction PNG or directory of PNGs")->required();
  e->add_option("--gt", ev.gt, "Groundtruth PNG, sample directory, or directory of either")->required();
  e->add_option("--out", ev.out, "Report JSON path (a CSV is written next to it)")->required();
  e->add_option("--method", ev.method, "Method name stored in the report");

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "Combine evaluation reports into one comparison table");
  p->add_option("--inputs", rep.inputs, "Report JSON files")->required();
  p->add_option("--out", rep.out, "Comparison CSV path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) cmd_synthesize(syn, out);
    if (r->parsed()) cmd_refocus(ref, out);
    if (t->parsed()) cmd_train(tr, out);
    if (i->parsed()) cmd_infer(inf, out);
    if (e->parsed()) cmd_evaluate(ev, out);
    if (p->parsed()) cmd_report(rep, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    if (!error_json_path.empty()) {
      try {
        io::write_json(error_json_path, error_json(ex));
      } catch (const std::exception& inner) {
        err << "error: could not write error JSON: " << inner.what() << "\n";
      }
    }
    return dynamic_cast<const UsageError*>(&ex) != nullptr ? 2 : 1;
  }
  return 0;
}

}  // namespace lfdeocc
