#include "sct/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sct/error.hpp"
#include "sct/inference.hpp"
#include "sct/metrics.hpp"
#include "sct/phantom.hpp"
#include "sct/pipeline.hpp"
#include "sct/text.hpp"
#include "sct/volume_io.hpp"

namespace sct::cli {

namespace fs = std::filesystem;

namespace {

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

std::size_t as_size(const RunConfig& c, const std::string& key) {
  const auto v = text::parse_int(c.at(key));
  if (v < 0) fail(ErrorCode::InvalidArgument, key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

void write_split(const fs::path& path, const Split& split, double ratio, std::uint64_t seed) {
  std::string s = "ratio = " + text::format_double(ratio) + "\nseed = " + std::to_string(seed) + "\ntrain =";
  for (const auto& id : split.train) s += " " + id;
  s += "\nval =";
  for (const auto& id : split.val) s += " " + id;
  s += "\n";
  write_text(path, s);
}

Split read_split(const fs::path& path) {
  const auto kv = text::parse_key_values(read_text(path));
  Split s;
  const auto ids = [&](const char* key) {
    std::vector<std::string> out;
    const auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorCode::InvalidArgument, path.string() + ": missing '" + key + "'");
    for (auto id : text::split_whitespace(it->second)) out.emplace_back(id);
    return out;
  };
  s.train = ids("train");
  s.val = ids("val");
  return s;
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) fail(ErrorCode::MissingPath, std::string(what) + " is required");
  if (!fs::is_directory(path)) fail(ErrorCode::MissingPath, std::string(what) + " not found: " + path);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) fail(ErrorCode::MissingPath, std::string(what) + " is required");
  if (!fs::is_regular_file(path)) fail(ErrorCode::MissingPath, std::string(what) + " not found: " + path);
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
  std::string out;
  std::size_t count = 25;
  std::uint64_t seed = 0;
  std::string mode = "mri";
  std::string organ = "brain";
  double jitter = 0.05;
  std::size_t nx = 64, ny = 64, nz = 16;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
  if (a.out.empty()) fail(ErrorCode::MissingPath, "--out is required");
  PhantomSpec base = default_phantom(a.mode == "cbct" ? SourceMode::Cbct : SourceMode::Mri);
  if (a.mode != "mri" && a.mode != "cbct") fail(ErrorCode::InvalidArgument, "--mode must be mri or cbct");
  base.dims = {a.nx, a.ny, a.nz};
  base.organ = parse_organ(a.organ);
  const auto cohort = generate_cohort(a.count, base, a.seed, a.jitter);
  for (const auto& c : cohort) save_case(a.out, c);
  out << "wrote " << cohort.size() << " cases to " << a.out << "\n";
  return kOk;
}

struct SplitArgs {
  std::string data_dir;
  std::string out;
  double ratio = 0.9;
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a, std::ostream& out) {
  require_dir(a.data_dir, "--data-dir");
  if (a.out.empty()) fail(ErrorCode::MissingPath, "--out is required");
  std::vector<std::string> ids;
  for (const auto& c : discover_cases(a.data_dir)) ids.push_back(c.case_id);
  const Split s = split_dataset(ids, a.ratio, a.seed);
  write_split(a.out, s, a.ratio, a.seed);
  out << "train " << s.train.size() << ", val " << s.val.size() << " -> " << a.out << "\n";
  return kOk;
}

int cmd_train(const std::string& config_path, const RunConfig& overrides, std::ostream& out) {
  RunConfig config = default_run_config();
  if (!config_path.empty()) {
    require_file(config_path, "--config");
    config = parse_run_config(read_text(config_path), config);
  }
  for (const auto& [k, v] : overrides) config[k] = v;

  // Validate everything before touching the run directory.
  const TrainConfig tc = train_config_from(config);
  const ModelSpec spec = model_spec_from(config);
  validate(tc);
  validate(spec);
  require_dir(config.at("data_dir"), "data_dir");
  if (config.at("run_dir").empty()) fail(ErrorCode::MissingPath, "run_dir is required");
  if (!config.at("split").empty()) require_file(config.at("split"), "split");

  std::vector<CaseRecord> cases;
  for (const auto& p : discover_cases(config.at("data_dir"))) cases.push_back(load_case(p, tc.task, tc.organ));
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.case_id);
  const Split split = config.at("split").empty() ? split_dataset(ids, tc.split_ratio, tc.seed)
                                                 : read_split(config.at("split"));
  const auto train_cases = select_cases(cases, split.train);
  const auto val_cases = select_cases(cases, split.val);

  const fs::path run_dir = config.at("run_dir");
  fs::create_directories(run_dir);
  write_text(run_dir / "config", format_run_config(config));
  write_split(run_dir / "split.txt", split, tc.split_ratio, tc.seed);

  out << "training on " << train_cases.size() << " cases, validating on " << val_cases.size() << "\n";
  TrainOptions options;
  options.run_dir = run_dir;
  const auto start = std::chrono::steady_clock::now();
  options.on_epoch = [&](const EpochRecord& e) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << "epoch " << e.epoch << " lr " << e.lr << " train " << e.train_loss << " val " << e.val_loss << " ("
        << elapsed << " s)\n";
  };
  const auto result = train(train_cases, val_cases, tc, spec, options);
  out << "best epoch " << result.history.epochs[result.history.best_index].epoch << " val "
      << result.history.best_val_loss << " -> " << (run_dir / "best.ckpt").string() << "\n";
  return kOk;
}

struct PredictArgs {
  std::string checkpoint, input, mask, output, case_dir, out_dir;
  float fill = -1024.0f;
  std::size_t batch_size = 4;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "--checkpoint");
  SynthesisOptions opt;
  opt.outside_fill = a.fill;
  opt.batch_size = a.batch_size;
  if (!a.case_dir.empty()) {
    require_dir(a.case_dir, "--case-dir");
    if (a.out_dir.empty()) fail(ErrorCode::MissingPath, "--out-dir is required with --case-dir");
    const auto report = batch_predict(a.checkpoint, a.case_dir, a.out_dir, opt);
    out << "wrote " << report.written.size() << " volumes, " << report.failures.size() << " failures\n";
    for (const auto& f : report.failures) out << "  failed " << f.case_id << ": " << f.message << "\n";
    return kOk;
  }
  require_file(a.input, "--input");
  if (a.output.empty()) fail(ErrorCode::MissingPath, "--output is required");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Volume source = load_mha(a.input, source_unit(ck.config.task));
  std::optional<Volume> mask;
  if (!a.mask.empty()) {
    require_file(a.mask, "--mask");
    mask = load_mask(a.mask);
  }
  const auto result = synthesize(ck, source, mask, opt);
  save_mha(a.output, result.sct);
  out << "wrote " << a.output << " (" << result.seconds << " s)\n";
  return kOk;
}

struct EvaluateArgs {
  std::string pred_dir, gt_dir, mask_dir, out, psnr_range;
  bool verbose = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  require_dir(a.pred_dir, "--pred-dir");
  require_dir(a.gt_dir, "--gt-dir");
  const std::string mask_dir = a.mask_dir.empty() ? a.gt_dir : a.mask_dir;
  require_dir(mask_dir, "--mask-dir");
  if (a.out.empty()) fail(ErrorCode::MissingPath, "--out is required");
  EvalOptions opt;
  if (!a.psnr_range.empty()) {
    if (!a.psnr_range.starts_with("fixed:")) fail(ErrorCode::InvalidArgument, "--psnr-range expects fixed:<R>");
    opt.fixed_range = text::parse_double(std::string_view(a.psnr_range).substr(6));
  }

  std::vector<std::string> ids;
  constexpr std::string_view suffix = "_ct.mha";
  for (const auto& entry : fs::directory_iterator(a.gt_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix))
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());

  std::vector<EvalCase> cases;
  EvaluationReport load_failures;
  for (const auto& id : ids) {
    try {
      fs::path pred = fs::path(a.pred_dir) / (id + "_sct.mha");
      if (!fs::exists(pred)) pred = fs::path(a.pred_dir) / (id + "_ct.mha");
      cases.push_back({id, load_mha(pred, Unit::HU), load_mha(fs::path(a.gt_dir) / (id + "_ct.mha"), Unit::HU),
                       load_mask(fs::path(mask_dir) / (id + "_mask.mha"))});
    } catch (const std::exception& e) {
      load_failures.failures.push_back({id, e.what()});
    }
  }
  auto report = evaluate_cases(cases, opt);
  report.failures.insert(report.failures.begin(), load_failures.failures.begin(), load_failures.failures.end());
  write_text(a.out, report_csv(report));

  if (a.verbose)
    for (const auto& c : report.cases) {
      out << c.case_id << ": mae " << c.mae << " HU, psnr "
          << (c.psnr.defined ? text::format_double(c.psnr.db) : "undefined") << " dB (R=" << c.data_range << ")";
      if (c.psnr_alternate)
        out << ", psnr " << (c.psnr_alternate->defined ? text::format_double(c.psnr_alternate->db) : "undefined")
            << " dB (" << (opt.fixed_range ? "per-case range" : "fixed range 4095") << ")";
      out << ", ssim " << c.ssim << "\n";
    }
  for (const auto& f : report.failures) out << "failed " << f.case_id << ": " << f.message << "\n";
  out << "MAE " << format_summary(report.mae) << " HU, PSNR " << format_summary(report.psnr) << " dB, SSIM "
      << format_summary(report.ssim, 4) << " over " << report.mae.count << " cases\n";
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::UnknownKey: return kUnknownKey;
    case ErrorCode::MissingPath: return kMissingPath;
    default: return kFailure;
  }
}

} // namespace

RunConfig default_run_config() {
  const TrainConfig t;
  const ModelSpec m;
  RunConfig c;
  c["data_dir"] = "";
  c["run_dir"] = "";
  c["split"] = "";
  c["slices"] = std::to_string(t.slices);
  c["samples_per_volume"] = std::to_string(t.samples_per_volume);
  c["batch_size"] = std::to_string(t.batch_size);
  c["epochs"] = std::to_string(t.epochs);
  c["lr0"] = "auto";
  c["lr_min"] = text::format_double(t.lr_min);
  c["beta1"] = text::format_double(t.optimizer.beta1);
  c["beta2"] = text::format_double(t.optimizer.beta2);
  c["eps"] = text::format_double(t.optimizer.eps);
  c["weight_decay"] = text::format_double(t.optimizer.weight_decay);
  c["split_ratio"] = text::format_double(t.split_ratio);
  c["seed"] = std::to_string(t.seed);
  c["loss_masking"] = std::string(to_string(t.loss_masking));
  c["task"] = std::string(to_string(t.task));
  c["organ"] = std::string(to_string(t.organ));
  c["p_low"] = text::format_double(t.p_low);
  c["p_high"] = text::format_double(t.p_high);
  c["depth"] = std::to_string(m.depth);
  c["base_width"] = std::to_string(m.base_width);
  c["norm"] = std::string(to_string(m.norm));
  c["activation"] = std::string(to_string(m.activation));
  c["final_activation"] = std::string(to_string(m.final_activation));
  return c;
}

RunConfig parse_run_config(const std::string& text_in, const RunConfig& base) {
  RunConfig c = base;
  for (const auto& [k, v] : text::parse_key_values(text_in)) {
    if (!c.contains(k)) fail(ErrorCode::UnknownKey, "unknown config key '" + k + "'");
    c[k] = v;
  }
  return c;
}

std::string format_run_config(const RunConfig& config) {
  std::string s;
  for (const auto& [k, v] : config) s += k + " = " + v + "\n";
  return s;
}

TrainConfig train_config_from(const RunConfig& c) {
  TrainConfig t;
  t.slices = as_size(c, "slices");
  t.samples_per_volume = as_size(c, "samples_per_volume");
  t.batch_size = as_size(c, "batch_size");
  t.epochs = as_size(c, "epochs");
  if (c.at("lr0") != "auto") t.lr0 = text::parse_double(c.at("lr0"));
  t.lr_min = text::parse_double(c.at("lr_min"));
  t.optimizer.beta1 = text::parse_double(c.at("beta1"));
  t.optimizer.beta2 = text::parse_double(c.at("beta2"));
  t.optimizer.eps = text::parse_double(c.at("eps"));
  t.optimizer.weight_decay = text::parse_double(c.at("weight_decay"));
  t.split_ratio = text::parse_double(c.at("split_ratio"));
  t.seed = text::parse_uint(c.at("seed"));
  t.loss_masking = parse_loss_masking(c.at("loss_masking"));
  t.task = parse_task(c.at("task"));
  t.organ = parse_organ(c.at("organ"));
  t.p_low = text::parse_double(c.at("p_low"));
  t.p_high = text::parse_double(c.at("p_high"));
  return t;
}

ModelSpec model_spec_from(const RunConfig& c) {
  ModelSpec m;
  m.in_channels = as_size(c, "slices");
  m.depth = as_size(c, "depth");
  m.base_width = as_size(c, "base_width");
  m.norm = parse_norm(c.at("norm"));
  m.activation = parse_activation(c.at("activation"));
  m.final_activation = parse_final_activation(c.at("final_activation"));
  return m;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"2.5D synthetic CT: phantom generation, training, prediction and evaluation", "sct25d"};
  app.require_subcommand(1);

  PhantomArgs phantom_args;
  auto* phantom = app.add_subcommand("phantom", "Generate a paired phantom cohort in the case layout");
  phantom->add_option("--out", phantom_args.out, "Output case directory")->required();
  phantom->add_option("--count", phantom_args.count, "Number of cases");
  phantom->add_option("--seed", phantom_args.seed, "Random seed");
  phantom->add_option("--mode", phantom_args.mode, "Source modality: mri or cbct");
  phantom->add_option("--organ", phantom_args.organ, "Organ tag");
  phantom->add_option("--jitter", phantom_args.jitter, "Per-case geometric jitter");
  phantom->add_option("--nx", phantom_args.nx);
  phantom->add_option("--ny", phantom_args.ny);
  phantom->add_option("--nz", phantom_args.nz);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Split the cases of a directory into train/val ids");
  split->add_option("--data-dir", split_args.data_dir, "Case directory")->required();
  split->add_option("--out", split_args.out, "Split manifest path")->required();
  split->add_option("--ratio", split_args.ratio, "Training fraction");
  split->add_option("--seed", split_args.seed, "Shuffle seed");

  std::string config_path;
  RunConfig train_values = default_run_config();
  std::map<std::string, CLI::Option*> train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a model; every config key is also a flag");
  train_cmd->add_option("--config", config_path, "key = value config file");
  for (auto& [key, value] : train_values) train_flags[key] = train_cmd->add_option(flag_name(key), value);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Synthesize CT volumes from a checkpoint");
  predict->add_option("--checkpoint", predict_args.checkpoint)->required();
  predict->add_option("--input", predict_args.input, "Source volume (.mha)");
  predict->add_option("--mask", predict_args.mask, "Optional mask (.mha)");
  predict->add_option("--output", predict_args.output, "Output sCT (.mha)");
  predict->add_option("--case-dir", predict_args.case_dir, "Predict every case of a directory");
  predict->add_option("--out-dir", predict_args.out_dir, "Output directory for --case-dir");
  predict->add_option("--fill", predict_args.fill, "HU value outside the mask");
  predict->add_option("--batch-size", predict_args.batch_size);

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Masked MAE/PSNR/SSIM between predictions and CT");
  evaluate->add_option("--pred-dir", eval_args.pred_dir)->required();
  evaluate->add_option("--gt-dir", eval_args.gt_dir)->required();
  evaluate->add_option("--mask-dir", eval_args.mask_dir);
  evaluate->add_option("--out", eval_args.out, "report.csv path")->required();
  evaluate->add_option("--psnr-range", eval_args.psnr_range, "fixed:<R> to use a fixed PSNR range");
  evaluate->add_flag("--verbose", eval_args.verbose);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(phantom_args, out);
    if (split->parsed()) return cmd_split(split_args, out);
    if (train_cmd->parsed()) {
      RunConfig overrides;
      for (const auto& [key, opt] : train_flags)
        if (opt->count() > 0) overrides[key] = train_values[key];
      return cmd_train(config_path, overrides, out);
    }
    if (predict->parsed()) return cmd_predict(predict_args, out);
    if (evaluate->parsed()) return cmd_evaluate(eval_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

} // namespace sct::cli
