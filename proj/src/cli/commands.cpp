#include "fcanet/cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "fcanet/common/errors.hpp"
#include "fcanet/common/seed.hpp"
#include "fcanet/data/dataset.hpp"
#include "fcanet/model/checkpoint.hpp"
#include "fcanet/model/grad_suite.hpp"
#include "fcanet/numerics/grad_suite.hpp"
#include "fcanet/train/trainer.hpp"

namespace fcanet::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;

data::CorpusPaths corpus_paths(const RunConfig& cfg) {
  if (cfg.speech_root.empty()) throw ConfigError("data.speech_root is not set");
  if (cfg.noise_root.empty()) throw ConfigError("data.noise_root is not set");
  return {cfg.speech_root, cfg.noise_root};
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::string percent(double fraction) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * fraction << '%';
  return s.str();
}

// First key whose value differs between two key=value documents.
std::string first_difference(const std::string& a, const std::string& b) {
  const auto da = kv::parse(a), db = kv::parse(b);
  for (const auto& la : da) {
    for (const auto& lb : db) {
      if (la.key == lb.key && la.value != lb.value) return la.key + " (" + lb.value + " vs " + la.value + ")";
    }
  }
  return "unknown key";
}

}  // namespace

void cmd_prepare(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const auto paths = corpus_paths(cfg);
  const auto manifest = data::discover_manifest(paths);
  data::validate_manifest(manifest, paths);
  make_dir(out_dir);
  data::write_manifest(manifest, out_dir / kSpeechManifest, out_dir / kNoiseManifest);
  log << "manifest: " << manifest.entries.size() << " speech files (train "
      << data::count_split(manifest, data::Split::train) << ", val " << data::count_split(manifest, data::Split::val)
      << ", test " << data::count_split(manifest, data::Split::test) << "), " << manifest.noise.size()
      << " noise files\n";

  const auto noise = data::NoiseBank::load(manifest, paths);
  const data::ClipSource test(manifest, data::Split::test, paths, noise, cfg.seed, cfg.silence_fraction);
  const auto sets = data::build_eval_sets(test, noise, cfg.seed);
  std::string digests;
  for (const auto& set : sets) {
    const auto file = data::eval_set_file_name(set.condition);
    data::write_eval_set(set, out_dir / file);
    const auto line = data::sha256_hex(out_dir / file) + "  " + file;
    log << line << " (" << set.clip_ids.size() << " clips)\n";
    digests += line + "\n";
  }
  write_text(out_dir / "eval_digests.txt", digests);
}

void cmd_train(const RunConfig& cfg, const fs::path& out_dir, const fs::path& resume, std::ostream& log) {
  const auto paths = corpus_paths(cfg);
  const auto manifest = data::read_manifest(out_dir / kSpeechManifest, out_dir / kNoiseManifest);
  const auto noise = data::NoiseBank::load(manifest, paths);
  const data::ClipSource train_src(manifest, data::Split::train, paths, noise, cfg.seed, cfg.silence_fraction);
  const data::ClipSource val_src(manifest, data::Split::val, paths, noise, cfg.seed, cfg.silence_fraction);
  const train::SplitExamples train_set(train_src), val_set(val_src);

  train::Net net(cfg.model, derive_seed(cfg.seed, "model"));
  if (!resume.empty()) {
    model::restore_checkpoint(net, model::read_file_bytes(resume));
    log << "resumed weights from " << resume.string() << "\n";
  }
  train::Trainer trainer(net, cfg.plan(), {&train_set, &val_set, &noise}, cfg.mfcc, cfg.worker_count());
  log << "training " << cfg.name << ": " << train_set.size() << " train / " << val_set.size() << " val clips\n";
  const auto fit = trainer.fit([&](const train::EpochRecord& r) {
    log << "epoch " << r.epoch << " stage " << r.stage << " lr " << r.lr << " loss " << r.train_loss << " train "
        << percent(r.train_acc) << " val " << percent(r.val_acc) << " (" << std::fixed << std::setprecision(1)
        << r.seconds << " s)" << std::defaultfloat << std::setprecision(6) << "\n";
  });

  make_dir(out_dir);
  write_text(out_dir / kCheckpoint, fit.best_checkpoint);
  auto hist = open_out(out_dir / kHistory);
  train::write_history_csv(fit.history, hist);
  write_text(out_dir / kResolvedConfig, cfg.to_kv());
  log << "best epoch " << fit.best_epoch << " val " << percent(fit.best_val_acc)
      << (fit.stopped_early ? " (early stop)" : "") << "\n";
}

void cmd_eval(const RunConfig& cfg, const fs::path& out_dir, const fs::path& checkpoint, std::ostream& log) {
  const auto bytes = model::read_file_bytes(checkpoint);
  const auto stored = model::checkpoint_config(bytes);
  if (!(stored == cfg.model)) {
    throw ConfigError("checkpoint model differs from the run config at " +
                      first_difference(cfg.model.to_kv(), stored.to_kv()));
  }
  train::Net net(stored, 0);
  model::restore_checkpoint(net, bytes);
  const auto fp = model::count_footprint(stored);
  const features::MfccExtractor mfcc(cfg.mfcc);

  std::ostringstream csv;
  csv << "model,variant,attention,params,macs,condition,accuracy\n";
  for (const auto& condition : data::eval_conditions()) {
    const auto file = out_dir / data::eval_set_file_name(condition);
    if (!fs::exists(file)) throw ConfigError("missing eval set " + file.string() + " (run prepare first)");
    const auto set = data::read_eval_set(file);
    if (set.clip_ids.empty()) throw DataError("eval set " + file.string() + " is empty");
    std::vector<std::vector<float>> feats(set.audio.size());
    parallel_for(
        set.audio.size(),
        [&](std::size_t i) {
          features::AudioClip clip;
          clip.samples.assign(set.audio[i].begin(), set.audio[i].end());
          feats[i] = train::clip_features(mfcc, clip);
        },
        cfg.worker_count());
    const auto pred = train::predict(net, feats, cfg.train.batch_size);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.labels[i];
    const double acc = static_cast<double>(hits) / static_cast<double>(pred.size());
    csv << cfg.name << ',' << model::format(stored.placement) << ',' << model::format(stored.attention) << ','
        << fp.params << ',' << fp.macs << ',' << condition.name() << ',' << kv::format(acc) << '\n';
    log << std::left << std::setw(6) << condition.name() << " " << percent(acc) << " (" << hits << "/" << pred.size()
        << ")\n";
  }
  make_dir(out_dir);
  write_text(out_dir / kEvalReport, csv.str());
}

void cmd_count(const RunConfig& cfg, const fs::path& out_dir, bool all_variants, bool layers, std::ostream& log) {
  std::vector<model::ModelConfig> variants{cfg.model};
  if (all_variants) {
    variants.clear();
    auto base = cfg.model;
    base.attention = model::Attention::none;
    base.placement = model::Placement::none;
    variants.push_back(base);
    for (auto a : {model::Attention::se, model::Attention::eca, model::Attention::c2d}) {
      for (auto p : {model::Placement::pre, model::Placement::post, model::Placement::all, model::Placement::final}) {
        auto v = cfg.model;
        v.attention = a;
        v.placement = p;
        variants.push_back(v);
      }
    }
  }
  auto base = cfg.model;
  base.attention = model::Attention::none;
  base.placement = model::Placement::none;
  const auto base_fp = model::count_footprint(base);

  std::ostringstream csv;
  csv << "model,variant,attention,params,macs\n";
  log << std::left << std::setw(10) << "attention" << std::setw(10) << "placement" << std::right << std::setw(10)
      << "params" << std::setw(14) << "MACs" << std::setw(12) << "MAC delta" << "\n";
  for (const auto& v : variants) {
    const auto fp = model::count_footprint(v);
    csv << cfg.name << ',' << model::format(v.placement) << ',' << model::format(v.attention) << ',' << fp.params << ','
        << fp.macs << '\n';
    const double delta = (static_cast<double>(fp.macs) - static_cast<double>(base_fp.macs)) /
                         static_cast<double>(base_fp.macs);
    log << std::left << std::setw(10) << model::format(v.attention) << std::setw(10) << model::format(v.placement)
        << std::right << std::setw(10) << fp.params << std::setw(14) << fp.macs << std::setw(11) << std::fixed
        << std::setprecision(2) << 100.0 * delta << "%" << std::defaultfloat << "\n";
    if (layers) {
      for (const auto& l : fp.layers) {
        log << "    " << std::left << std::setw(22) << l.name << std::right << std::setw(10) << l.params
            << std::setw(14) << l.macs << "\n";
      }
    }
  }
  if (!out_dir.empty()) {
    make_dir(out_dir);
    write_text(out_dir / kFootprint, csv.str());
  }
}

bool cmd_gradcheck(const RunConfig& cfg, std::size_t seeds, std::size_t coords, const fs::path& out_dir,
                   std::ostream& log) {
  if (seeds == 0) throw ConfigError("gradcheck needs at least one seed");
  std::ostringstream csv;
  csv << "case,seeds,max_rel_error,kinks,pass\n";
  bool all_pass = true;
  std::size_t cases = 0;
  auto report = [&](const std::string& name, std::size_t n, const numerics::GradCheckResult& r, std::size_t kinks) {
    const bool pass = r.deterministic && r.max_rel_error <= kGradTolerance;
    all_pass = all_pass && pass;
    ++cases;
    csv << name << ',' << n << ',' << kv::format(r.max_rel_error) << ',' << kinks << ',' << (pass ? "true" : "false")
        << '\n';
    log << std::left << std::setw(24) << name << std::right << std::setw(12) << std::scientific << std::setprecision(2)
        << r.max_rel_error << std::defaultfloat << std::setw(8) << kinks << "  " << (pass ? "PASS" : "FAIL") << "\n";
  };
  log << std::left << std::setw(24) << "case" << std::right << std::setw(12) << "max rel err" << std::setw(8) << "kinks"
      << "\n";
  for (const auto& p : numerics::check_primitives(seeds, cfg.seed)) report(p.op, p.seeds, p.worst, p.kinks);
  for (const auto& v : model::check_model_variants(cfg.seed, 1e-5, coords)) report("model:" + v.name, 1, v.result, v.result.kinks);
  log << cases << " cases, " << (all_pass ? "all within " : "some above ") << kGradTolerance << "\n";
  if (!out_dir.empty()) {
    make_dir(out_dir);
    write_text(out_dir / kGradReport, csv.str());
  }
  return all_pass;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FCA-Net keyword spotting: data preparation, training, evaluation and verification", "fcanet"};
  app.require_subcommand(1);
  std::string config_path, out_dir, resume, checkpoint, fault;
  std::uint64_t seed = 0;
  std::size_t seeds = 20, coords = 0;
  bool all_variants = false, layers = false;

  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "key=value run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    auto* o = sub->add_option("--out", out_dir, "output directory");
    if (needs_out) o->required();
    sub->add_option("--inject-fault", fault, "OP:FACTOR scales that op's backward gradient")->group("");
  };
  auto* prepare = app.add_subcommand("prepare", "write the manifest and the five evaluation sets");
  common(prepare, true);
  auto* train = app.add_subcommand("train", "fit a network and write the best checkpoint and history");
  common(train, true);
  train->add_option("--resume", resume, "start from this checkpoint's weights")->check(CLI::ExistingFile);
  auto* eval = app.add_subcommand("eval", "score a checkpoint on every evaluation condition");
  common(eval, true);
  eval->add_option("--checkpoint", checkpoint, "checkpoint to score (default: <out>/checkpoint.fcan)");
  auto* count = app.add_subcommand("count", "report parameters and MACs");
  common(count, false);
  count->add_flag("--all", all_variants, "every attention kind and placement plus the baseline");
  count->add_flag("--layers", layers, "per-layer breakdown");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every op and model variant");
  common(gradcheck, false);
  gradcheck->add_option("--seeds", seeds, "random draws per primitive");
  gradcheck->add_option("--coords", coords, "model coordinates sampled per tensor (0 = all)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  }

  struct FaultReset {
    ~FaultReset() { numerics::set_backward_fault("", 1.0); }
  } reset;
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    for (auto* sub : app.get_subcommands()) {
      if (sub->count("--seed")) cfg.seed = seed;
    }
    cfg.validate();
    if (!fault.empty()) {
      const auto colon = fault.rfind(':');
      if (colon == std::string::npos) throw ConfigError("--inject-fault expects OP:FACTOR");
      double factor = 0.0;
      const std::string f = fault.substr(colon + 1);
      if (f == "nan") factor = std::numeric_limits<double>::quiet_NaN();
      else kv::parse_value("--inject-fault", f, factor);
      numerics::set_backward_fault(fault.substr(0, colon), factor);
    }
    if (app.got_subcommand(prepare)) {
      cmd_prepare(cfg, out_dir, out);
    } else if (app.got_subcommand(train)) {
      cmd_train(cfg, out_dir, resume, out);
    } else if (app.got_subcommand(eval)) {
      cmd_eval(cfg, out_dir, checkpoint.empty() ? fs::path(out_dir) / kCheckpoint : fs::path(checkpoint), out);
    } else if (app.got_subcommand(count)) {
      cmd_count(cfg, out_dir, all_variants, layers, out);
    } else if (!cmd_gradcheck(cfg, seeds, coords, out_dir, out)) {
      return kVerificationFailed;
    }
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  }
  return kOk;
}

}  // namespace fcanet::cli
