#include "corticarve_cli/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "corticarve/checkpoint.hpp"
#include "corticarve/config_file.hpp"
#include "corticarve/distance.hpp"
#include "corticarve/io.hpp"
#include "corticarve/metrics.hpp"
#include "corticarve/phantom.hpp"
#include "corticarve/report.hpp"
#include "corticarve/synthesis.hpp"
#include "corticarve/train.hpp"
#include "json.hpp"

namespace corticarve::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  static const auto log = [] {
    auto l = spdlog::stderr_color_st("corticarve");
    l->set_pattern("%^%l%$: %v");
    return l;
  }();
  return log;
}

int thread_cap() {
  if (const char* env = std::getenv("CORTICARVE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ProjectConfig load_project(const std::string& path) { return path.empty() ? ProjectConfig{} : load_config(path); }

void emit(bool as_json, const json& j, const std::string& text) {
  if (as_json) {
    std::cout << j.dump() << "\n";
  } else {
    std::cout << text;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

json draws_to_json(const SynthesisDraws& d) {
  json labels = json::object();
  for (const auto& [id, mean] : d.label_mean) labels[std::to_string(id)] = {{"mean", mean}, {"sd", d.label_sd.at(id)}};
  return {{"translation_mm", {d.translation_mm[0], d.translation_mm[1], d.translation_mm[2]}},
          {"rotation_deg", {d.rotation_deg[0], d.rotation_deg[1], d.rotation_deg[2]}},
          {"scale", {d.scale[0], d.scale[1], d.scale[2]}},
          {"deformation_voxel_length_mm", d.deformation_voxel_length_mm},
          {"deformation_sd_mm", d.deformation_sd_mm},
          {"labels", labels},
          {"bias_voxel_length_mm", d.bias_voxel_length_mm},
          {"bias_sd", d.bias_sd},
          {"gamma", d.gamma},
          {"downsample_factor", d.downsample_factor},
          {"crop_mm", d.crop_mm}};
}

struct Common {
  bool json = false;
};

// generate ------------------------------------------------------------------

struct GenerateArgs {
  std::string labels, config, out_dir, format = "nii.gz";
  std::uint64_t seed = 0;
  int count = 1;
  int jobs = 1;
};

int cmd_generate(const GenerateArgs& a, const Common& c) {
  if (a.format != "nii.gz" && a.format != "nii" && a.format != "raw") {
    throw UsageError("--format must be one of nii.gz, nii, raw");
  }
  const ProjectConfig cfg = load_project(a.config);
  const LabelVolume labels = read_label_volume(a.labels);
  const int jobs = std::min(a.jobs, thread_cap());
  fs::create_directories(a.out_dir);

  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<json> manifest(static_cast<std::size_t>(a.count));
  const auto worker = [&] {
    for (int i = next++; i < a.count; i = next++) {
      try {
        const std::uint64_t seed = mix_seed(a.seed, static_cast<std::uint64_t>(i));
        const SynthSample s = synthesize_sample(labels, cfg.synthesis, seed);
        const std::string stem = fmt::format("sample_{:04d}", i);
        const fs::path dir(a.out_dir);
        write_volume(s.image, dir / (stem + "_image." + a.format));
        write_volume(s.mask, dir / (stem + "_mask." + a.format));
        write_volume(s.sdt, dir / (stem + "_sdt." + a.format));
        json j = {{"index", i}, {"seed", seed}, {"draws", draws_to_json(s.draws)}};
        write_text(dir / (stem + "_draws.json"), j.dump(2) + "\n");
        manifest[static_cast<std::size_t>(i)] = std::move(j);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = a.count;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
  logger()->info("wrote {} samples to {}", a.count, a.out_dir);
  emit(c.json, {{"samples", a.count}, {"out_dir", a.out_dir}},
       fmt::format("generated {} samples in {}\n", a.count, a.out_dir));
  return kOk;
}

// phantom -------------------------------------------------------------------

struct PhantomArgs {
  std::string out;
  std::uint64_t seed = 0;
  int size = 32;
  double spacing = 8.0;
};

int cmd_phantom(const PhantomArgs& a, const Common& c) {
  PhantomConfig pc;
  pc.dims = {a.size, a.size, a.size};
  pc.spacing_mm = a.spacing;
  const LabelVolume labels = make_phantom(pc, a.seed);
  write_volume(labels, a.out);
  emit(c.json, {{"out", a.out}, {"labels", unique_labels(labels)}}, fmt::format("wrote {}\n", a.out));
  return kOk;
}

// sdt -----------------------------------------------------------------------

struct SdtArgs {
  std::string mask, out, weights;
  double band = 0.0;
  double background_weight = 0.1;
};

int cmd_sdt(const SdtArgs& a, const Common& c) {
  if (!a.weights.empty() && !(a.band > 0.0)) throw UsageError("--weights requires --band");
  const BinaryMask mask = read_mask(a.mask);
  if (a.band > 0.0) {
    const BandedSdt b = banded_signed_distance(mask, a.band, a.background_weight);
    write_volume(b.values, a.out);
    if (!a.weights.empty()) write_volume(b.weights, a.weights);
  } else {
    write_volume(signed_distance_transform(mask), a.out);
  }
  emit(c.json, {{"out", a.out}}, fmt::format("wrote {}\n", a.out));
  return kOk;
}

// labels-xc -----------------------------------------------------------------

struct XcArgs {
  std::string image, labels, out;
  int k = 6;
};

int cmd_labels_xc(const XcArgs& a, const Common& c) {
  const ScalarVolume head = read_scalar_volume(a.image);
  const LabelVolume brain = read_label_volume(a.labels);
  const ExtracerebralLabeling xc = fit_extracerebral_labels(head, brain, a.k);
  if (xc.degenerate) logger()->warn("tied intensities left some extra-cerebral bins empty");
  write_volume(xc.labels, a.out);
  emit(c.json, {{"out", a.out}, {"new_labels", xc.new_label_ids}, {"bin_counts", xc.bin_counts},
                {"degenerate", xc.degenerate}},
       fmt::format("wrote {} ({} extra-cerebral labels)\n", a.out, xc.new_label_ids.size()));
  return kOk;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> labels;
  std::string config, out, history, head;
  int phantoms = 0;
  std::int64_t steps = -1;
  double lr = 0.0;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, const Common& c, const CLI::App& sub) {
  if (a.labels.empty() && a.phantoms <= 0) throw UsageError("train needs --labels or --phantoms");
  ProjectConfig cfg = load_project(a.config);
  TrainConfig& tc = cfg.train;
  if (sub.count("--steps")) tc.steps = a.steps;
  if (sub.count("--lr")) tc.learning_rate = a.lr;
  if (sub.count("--seed")) tc.seed = a.seed;
  if (!a.head.empty()) tc.network.head = head_from_string(a.head);
  tc.checkpoint_path = a.out;

  std::vector<LabelVolume> maps;
  for (const auto& p : a.labels) maps.push_back(read_label_volume(p));
  for (int i = 0; i < a.phantoms; ++i) {
    maps.push_back(make_phantom(PhantomConfig{}, mix_seed(tc.seed, 1000 + static_cast<std::uint64_t>(i))));
  }
  // The network operates on the label-map lattice.
  const Grid& g = maps.front().grid;
  if (std::abs(g.spacing[0] - g.spacing[1]) > 1e-6 || std::abs(g.spacing[0] - g.spacing[2]) > 1e-6) {
    throw Error(Errc::invalid_argument, "training label maps must have isotropic spacing");
  }
  tc.network.input_dims = g.dims;
  tc.network.voxel_size_mm = g.spacing[0];
  tc.validate();

  UNet<float> model(tc.network, mix_seed(tc.seed, 0));
  const auto log = logger();
  const TrainHistory h = train_loop(model, maps, cfg.synthesis, tc, [&](std::int64_t step, double loss, const TrainState& s) {
    if (step % 50 == 0 || step == tc.steps) log->info("step {} loss {:.5f} lr {:.3g}", step, loss, s.lr);
  });

  if (!a.history.empty()) {
    std::string csv = "step,train_loss,val_loss,lr\n";
    std::size_t v = 0;
    for (std::int64_t step = 0; step <= tc.steps; ++step) {
      std::string train = step > 0 ? fmt::format("{:.8g}", h.train_loss[static_cast<std::size_t>(step - 1)]) : "";
      std::string val, lr;
      if (v < h.validation.size() && h.validation[v].step == step) {
        val = fmt::format("{:.8g}", h.validation[v].loss);
        lr = fmt::format("{:.8g}", h.validation[v].lr);
        ++v;
      }
      if (!train.empty() || !val.empty()) csv += fmt::format("{},{},{},{}\n", step, train, val, lr);
    }
    write_text(a.history, csv);
  }
  const double final_loss = h.train_loss.empty() ? 0.0 : h.train_loss.back();
  emit(c.json, {{"checkpoint", a.out}, {"steps", tc.steps}, {"final_loss", final_loss}, {"lr", h.state.lr}},
       fmt::format("wrote {} after {} steps (last loss {:.5f})\n", a.out, tc.steps, final_loss));
  return kOk;
}

// strip ---------------------------------------------------------------------

struct StripArgs {
  std::string model, image, out, out_sdt;
  double threshold = 0.0;
};

int cmd_strip(const StripArgs& a, const Common& c) {
  const UNet<float> model = load_checkpoint(a.model);
  if (!a.out_sdt.empty() && model.config().head != Head::sdt) {
    throw UsageError("--out-sdt needs a model with an SDT head");
  }
  const ScalarVolume image = read_scalar_volume(a.image);
  const StripResult r = strip(model, image, a.threshold);
  write_volume(r.mask, a.out);
  if (!a.out_sdt.empty()) write_volume(r.sdt, a.out_sdt);
  const std::size_t n = count_true(r.mask);
  const double voxel_ml = std::abs(image.grid.affine.block<3, 3>(0, 0).determinant()) / 1000.0;
  emit(c.json, {{"out", a.out}, {"brain_voxels", n}, {"brain_volume_ml", n * voxel_ml}},
       fmt::format("wrote {} ({} brain voxels)\n", a.out, n));
  return kOk;
}

// evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> pred, truth, baseline;
  std::string method = "method", baseline_name = "baseline", csv, summary;
};

int cmd_evaluate(const EvaluateArgs& a, const Common& c) {
  if (a.pred.size() != a.truth.size()) throw UsageError("--pred and --truth need the same number of files");
  if (!a.baseline.empty() && a.baseline.size() != a.truth.size()) {
    throw UsageError("--baseline needs one file per --truth file");
  }
  std::vector<CaseRow> rows;
  MethodReports method{a.method, {}};
  MethodReports baseline{a.baseline_name, {}};
  for (std::size_t i = 0; i < a.truth.size(); ++i) {
    const BinaryMask truth = read_mask(a.truth[i]);
    const std::string id = fs::path(a.truth[i]).filename().string();
    method.reports.push_back(evaluate_masks(read_mask(a.pred[i]), truth));
    rows.push_back({id, a.method, method.reports.back()});
    if (!a.baseline.empty()) {
      baseline.reports.push_back(evaluate_masks(read_mask(a.baseline[i]), truth));
      rows.push_back({id, a.baseline_name, baseline.reports.back()});
    }
  }
  std::vector<MethodReports> all{method};
  if (!a.baseline.empty()) all.push_back(baseline);
  const CohortSummary summary = summarize_cohort(all, a.baseline.empty() ? a.method : a.baseline_name);
  const std::string text = summary_text(summary);
  if (!a.csv.empty()) write_text(a.csv, case_csv(rows));
  if (!a.summary.empty()) write_text(a.summary, text);

  json j = {{"cases", summary.cases}, {"reference", summary.reference}, {"methods", json::array()}};
  for (const auto& m : summary.methods) {
    json mj = {{"method", m.method}};
    for (const auto& s : m.metrics) {
      mj[s.metric] = {{"mean", s.mean}, {"sd", s.sd}};
      if (s.versus_reference) mj[s.metric]["p_value"] = s.versus_reference->p_value;
    }
    j["methods"].push_back(mj);
  }
  emit(c.json, j, text);
  return kOk;
}

// dv / ebv ------------------------------------------------------------------

int cmd_dv(const std::vector<std::string>& frames, const Common& c) {
  if (frames.size() < 2) throw UsageError("dv needs at least two frame masks");
  std::vector<BinaryMask> masks;
  for (const auto& f : frames) masks.push_back(read_mask(f));
  const double dv = discordant_voxel_pct(masks);
  emit(c.json, {{"frames", frames.size()}, {"dv_pct", dv}}, fmt::format("{:.4f}\n", dv));
  return kOk;
}

int cmd_ebv(const std::string& mask, const Common& c) {
  const double ebv = exposed_boundary_pct(read_mask(mask));
  emit(c.json, {{"ebv_pct", ebv}}, fmt::format("{:.4f}\n", ebv));
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Brain extraction from synthetic training data"};
  app.name("corticarve");
  app.require_subcommand(1);
  Common common;
  app.add_flag("--json", common.json, "Print a machine-readable summary on stdout");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Synthesize training samples from a label map");
  generate->add_option("--labels", gen.labels, "Label map")->required();
  generate->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  generate->add_option("--config", gen.config, "Configuration file");
  generate->add_option("--count", gen.count, "Number of samples")->check(CLI::PositiveNumber);
  generate->add_option("--seed", gen.seed, "Base seed");
  generate->add_option("--jobs", gen.jobs, "Parallel workers (capped by CORTICARVE_THREADS)")->check(CLI::PositiveNumber);
  generate->add_option("--format", gen.format, "Output container: nii.gz, nii or raw");

  PhantomArgs ph;
  auto* phantom = app.add_subcommand("phantom", "Write a procedural head label map");
  phantom->add_option("--out", ph.out, "Output label map")->required();
  phantom->add_option("--seed", ph.seed, "Seed");
  phantom->add_option("--size", ph.size, "Voxels per axis")->check(CLI::PositiveNumber);
  phantom->add_option("--spacing", ph.spacing, "Voxel size (mm)")->check(CLI::PositiveNumber);

  SdtArgs sd;
  auto* sdt = app.add_subcommand("sdt", "Signed distance transform of a mask");
  sdt->add_option("--mask", sd.mask, "Input mask")->required();
  sdt->add_option("--out", sd.out, "Output distance volume")->required();
  sdt->add_option("--band", sd.band, "Clamp to +/- this many mm (0 = no banding)")->check(CLI::NonNegativeNumber);
  sdt->add_option("--background-weight", sd.background_weight, "Weight outside the band")->check(CLI::PositiveNumber);
  sdt->add_option("--weights", sd.weights, "Also write the banding weights here");

  XcArgs xc;
  auto* labels_xc = app.add_subcommand("labels-xc", "Add intensity-clustered extra-cerebral labels");
  labels_xc->add_option("--image", xc.image, "Head image")->required();
  labels_xc->add_option("--labels", xc.labels, "Brain label map")->required();
  labels_xc->add_option("--out", xc.out, "Output label map")->required();
  labels_xc->add_option("--k", xc.k, "Number of extra-cerebral labels")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a network on synthesized samples");
  train->add_option("--labels", tr.labels, "Training label maps");
  train->add_option("--phantoms", tr.phantoms, "Add this many procedural label maps")->check(CLI::NonNegativeNumber);
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  train->add_option("--config", tr.config, "Configuration file");
  train->add_option("--steps", tr.steps, "Optimization steps")->check(CLI::NonNegativeNumber);
  train->add_option("--lr", tr.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  train->add_option("--seed", tr.seed, "Seed");
  train->add_option("--head", tr.head, "sdt or dice")->check(CLI::IsMember({"sdt", "dice"}));
  train->add_option("--history", tr.history, "Loss history CSV");

  StripArgs st;
  auto* strip_cmd = app.add_subcommand("strip", "Compute a brain mask");
  strip_cmd->add_option("--model", st.model, "Checkpoint")->required();
  strip_cmd->add_option("--image", st.image, "Input image")->required();
  strip_cmd->add_option("--out", st.out, "Output mask")->required();
  strip_cmd->add_option("--threshold", st.threshold, "SDT threshold (mm)");
  strip_cmd->add_option("--out-sdt", st.out_sdt, "Also write the predicted signed distance");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compare predicted masks with references");
  evaluate->add_option("--pred", ev.pred, "Predicted masks")->required();
  evaluate->add_option("--truth", ev.truth, "Reference masks")->required();
  evaluate->add_option("--method", ev.method, "Name of the predicted method");
  evaluate->add_option("--baseline", ev.baseline, "Masks of a method to test against");
  evaluate->add_option("--baseline-name", ev.baseline_name, "Name of the baseline method");
  evaluate->add_option("--csv", ev.csv, "Per-case CSV output");
  evaluate->add_option("--summary", ev.summary, "Summary table output");

  std::vector<std::string> frames;
  auto* dv = app.add_subcommand("dv", "Percent discordant voxels across frame masks");
  dv->add_option("frames", frames, "Frame masks")->required();

  std::string ebv_mask;
  auto* ebv = app.add_subcommand("ebv", "Percent exposed boundary voxels of a mask");
  ebv->add_option("mask", ebv_mask, "Mask")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, std::cerr);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return cmd_generate(gen, common);
    if (*phantom) return cmd_phantom(ph, common);
    if (*sdt) return cmd_sdt(sd, common);
    if (*labels_xc) return cmd_labels_xc(xc, common);
    if (*train) return cmd_train(tr, common, *train);
    if (*strip_cmd) return cmd_strip(st, common);
    if (*evaluate) return cmd_evaluate(ev, common);
    if (*dv) return cmd_dv(frames, common);
    if (*ebv) return cmd_ebv(ebv_mask, common);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const Error& e) {
    logger()->error("{} ({})", e.what(), errc_name(e.code()));
    return kDataError;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return kDataError;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace corticarve::cli
