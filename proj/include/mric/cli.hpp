#pragma once

// Command-line front end: ingest, augment, split, train, eval, predict.
//
// Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 numeric
// abort. Failures print exactly one line "error: <category>: <reason>" to
// the error stream.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mric/dataset.hpp"
#include "mric/model.hpp"
#include "mric/report.hpp"
#include "mric/train.hpp"
#include "mric/weights.hpp"

namespace mric::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2, kNumeric = 3 };

/// Everything a command may need. Flags override the --config file, which
/// overrides these defaults.
struct RunConfig {
  TrainConfig train;
  std::string data_root;
  std::string manifest = "manifest.jsonl";
  std::string out_dir = "run";
  std::string weights;
  std::string image;
  std::size_t k = 9;
  std::string ratios = "0.8,0.1,0.1";
  std::uint64_t seed = 0;
  std::string optimizer = "adam";
  std::string freeze = "conv";
  std::string split = "test";
  std::size_t input_size = 224;
  std::size_t width_divisor = 1;
  bool include_originals = true;
};

namespace detail {

/// Advisory lock on "<manifest>.lock" for the lifetime of the object.
class ManifestLock {
 public:
  ManifestLock(const fs::path& manifest, bool exclusive) {
    const std::string lock_path = manifest.string() + ".lock";
    fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + lock_path);
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      throw IoError("cannot lock " + lock_path);
    }
  }
  ~ManifestLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  ManifestLock(const ManifestLock&) = delete;
  ManifestLock& operator=(const ManifestLock&) = delete;

 private:
  int fd_ = -1;
};

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

/// Parses `key = value` lines (TOML subset: comments, quoted strings,
/// [section] headers are ignored) into flag arguments.
inline std::vector<std::string> config_file_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValueError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (key == "config") continue;
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

inline void print_counts_header(std::ostream& out) {
  out << std::left << std::setw(12) << "Dataset" << std::setw(16) << "Tumor Affected" << std::setw(17)
      << "Healthy Subject" << "Total Image\n";
}

inline void print_counts_row(std::ostream& out, const std::string& name, const ClassCounts& c) {
  out << std::left << std::setw(12) << name << std::setw(16) << c.tumor << std::setw(17) << c.healthy
      << c.total() << "\n";
}

inline ModelGraph model_for(const RunConfig& rc) {
  return build_model(rc.seed, ModelConfig::scaled(rc.width_divisor, rc.input_size));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline int cmd_ingest(const RunConfig& rc, std::ostream& out) {
  if (rc.data_root.empty()) throw ValueError("--data-root is required");
  DatasetManifest m = ingest(rc.data_root);
  detail::ManifestLock lock(rc.manifest, true);
  write_manifest(rc.manifest, m);
  detail::print_counts_header(out);
  detail::print_counts_row(out, fs::path(rc.data_root).filename().string(), m.class_counts(false));
  return kOk;
}

inline int cmd_augment(const RunConfig& rc, std::ostream& out) {
  detail::ManifestLock lock(rc.manifest, true);
  const DatasetManifest in = read_manifest(rc.manifest);
  const DatasetManifest m = augment_manifest(in, rc.k, rc.seed);
  write_manifest(rc.manifest, m);
  detail::print_counts_header(out);
  detail::print_counts_row(out, "Original", m.class_counts(false));
  detail::print_counts_row(out, "Augmented", m.class_counts(true));
  return kOk;
}

inline int cmd_split(const RunConfig& rc, std::ostream& out) {
  const SplitRatios ratios = parse_ratios(rc.ratios);
  validate_ratios(ratios);
  detail::ManifestLock lock(rc.manifest, true);
  const DatasetManifest m = stratified_group_split(read_manifest(rc.manifest), ratios, rc.seed);
  if (const auto leaks = find_leaks(m); !leaks.empty()) {
    throw ValueError("split leaks origin group " + leaks.front());
  }
  write_manifest(rc.manifest, m);
  out << std::left << std::setw(8) << "Split" << std::setw(8) << "Tumor" << std::setw(9) << "Healthy"
      << "Total\n";
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto c = m.class_counts(std::nullopt, s);
    out << std::left << std::setw(8) << to_string(s) << std::setw(8) << c.tumor << std::setw(9) << c.healthy
        << c.total() << "\n";
  }
  return kOk;
}

inline int cmd_train(const RunConfig& rc, std::ostream& out) {
  TrainConfig tc = rc.train;
  tc.seed = rc.seed;
  tc.optimizer = parse_optimizer(rc.optimizer);
  tc.freeze = detail::split_list(rc.freeze);
  tc.validate();

  DatasetManifest m;
  {
    detail::ManifestLock lock(rc.manifest, false);
    m = read_manifest(rc.manifest);
  }
  ModelGraph model = detail::model_for(rc);
  if (!rc.weights.empty()) {
    // Transfer path: base layers from the archive, head from the seed.
    load_weights(model, fs::path(rc.weights), LoadPolicy::kBaseOnly);
  }
  const auto train = ManifestImages::from_split(m, Split::kTrain, rc.input_size, rc.include_originals);
  const auto val = ManifestImages::from_split(m, Split::kVal, rc.input_size, true);
  if (train.size() == 0) throw ValueError("manifest has no train records; run split first");
  if (val.size() == 0) throw ValueError("manifest has no val records; run split first");

  const auto curves = fit(model, train, val, tc, [&out, &tc](const EpochStats& s) {
    out << "epoch " << s.epoch << "/" << tc.epochs << " train_loss=" << format_g9(s.train_loss)
        << " train_acc=" << format_g9(s.train_acc) << " val_loss=" << format_g9(s.val_loss)
        << " val_acc=" << format_g9(s.val_acc) << "\n";
  });
  const fs::path archive = fs::path(rc.out_dir) / "weights";
  save_weights(model, archive);
  mric::detail::write_file(archive / "curves.csv", curves_csv(curves));
  mric::detail::write_file(fs::path(rc.out_dir) / "curves.csv", curves_csv(curves));
  out << "weights written to " << archive.string() << "\n";
  return kOk;
}

inline int cmd_eval(const RunConfig& rc, std::ostream& out) {
  if (rc.weights.empty()) throw ValueError("--weights is required");
  const fs::path archive(rc.weights);
  ModelGraph model = build_model(rc.seed, read_model_config(archive));
  load_weights(model, archive, LoadPolicy::kStrict);

  DatasetManifest m;
  {
    detail::ManifestLock lock(rc.manifest, false);
    m = read_manifest(rc.manifest);
  }
  const auto source = ManifestImages::from_split(m, parse_split(rc.split), model.config.input_size, true);
  if (source.size() == 0) throw ValueError("manifest has no " + rc.split + " records");

  std::vector<EpochStats> curves;
  if (std::ifstream in(archive / "curves.csv"); in) {
    std::stringstream ss;
    ss << in.rdbuf();
    curves = parse_curves_csv(ss.str());
  }
  const EvalReport report = make_report(predict_all(model, source), std::move(curves));
  emit_report(report, rc.out_dir);
  out << scores_table(report);
  return kOk;
}

inline int cmd_predict(const RunConfig& rc, std::ostream& out) {
  if (rc.image.empty()) throw ValueError("--image is required");
  ModelGraph model;
  if (rc.weights.empty()) {
    model = detail::model_for(rc);
  } else {
    model = build_model(rc.seed, read_model_config(rc.weights));
    load_weights(model, fs::path(rc.weights), LoadPolicy::kStrict);
  }
  SampleRecord r;
  r.path = rc.image;
  const Tensor img = load_sample(r, model.config.input_size);
  const double p = forward(model, img, Mode::kInference).item();
  out << (p >= 0.5 ? "tumor" : "healthy") << " " << format_g9(p) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Parsing

/// Runs one command line (args excludes the program name).
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Binary brain-MRI classifier: VGG-19 backbone with a dropout/dense head", "mri-classify"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file; flags override it");
  };
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", rc.manifest, "Dataset manifest (JSON lines)");
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", rc.seed, "Global random seed"); };
  auto add_model_size = [&](CLI::App* sub) {
    sub->add_option("--input-size", rc.input_size, "Model input side length (multiple of 32)");
    sub->add_option("--width-divisor", rc.width_divisor, "Divide every layer width by this factor");
  };

  auto* ingest_cmd = app.add_subcommand("ingest", "Inventory <data-root>/{tumor,healthy} into a manifest");
  ingest_cmd->add_option("--data-root", rc.data_root, "Directory with tumor/ and healthy/ subdirectories");
  add_manifest(ingest_cmd);
  add_config(ingest_cmd);

  auto* augment_cmd = app.add_subcommand("augment", "Append k shift/rotation augmentations per original");
  add_manifest(augment_cmd);
  augment_cmd->add_option("--k", rc.k, "Augmented copies per original image");
  add_seed(augment_cmd);
  add_config(augment_cmd);

  auto* split_cmd = app.add_subcommand("split", "Stratified, origin-grouped train/val/test split");
  add_manifest(split_cmd);
  split_cmd->add_option("--ratios", rc.ratios, "train,val,test fractions");
  add_seed(split_cmd);
  add_config(split_cmd);

  auto* train_cmd = app.add_subcommand("train", "Train and write <out-dir>/weights");
  add_manifest(train_cmd);
  train_cmd->add_option("--out-dir", rc.out_dir, "Run output directory");
  train_cmd->add_option("--weights", rc.weights, "Pretrained archive; base layers are loaded, head stays fresh");
  train_cmd->add_option("--epochs", rc.train.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", rc.train.batch_size, "Mini-batch size");
  train_cmd->add_option("--lr", rc.train.learning_rate, "Learning rate");
  train_cmd->add_option("--optimizer", rc.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--freeze", rc.freeze,
                        "Frozen layers: comma list of names or conv, base, head, all, none");
  train_cmd->add_option("--include-originals", rc.include_originals,
                        "Train on un-augmented originals as well as augmentations");
  add_seed(train_cmd);
  add_model_size(train_cmd);
  add_config(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Score a split and write the report files to <out-dir>");
  add_manifest(eval_cmd);
  eval_cmd->add_option("--weights", rc.weights, "Trained weight archive");
  eval_cmd->add_option("--out-dir", rc.out_dir, "Report directory");
  eval_cmd->add_option("--split", rc.split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  add_seed(eval_cmd);
  add_config(eval_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "Print '<label> <probability>' for one image");
  predict_cmd->add_option("--weights", rc.weights, "Weight archive; fresh seeded weights when omitted");
  predict_cmd->add_option("--image,image", rc.image, "PNG or JPEG file");
  add_seed(predict_cmd);
  add_model_size(predict_cmd);
  add_config(predict_cmd);

  try {
    // Config values go first so later command-line flags win.
    std::vector<std::string> effective = args;
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
      }
      if (!path.empty() && !args.empty()) {
        // Keys the chosen command does not take are skipped, so one file
        // can serve every command.
        const auto extra = detail::config_file_args(path);
        CLI::App* sub = app.get_subcommand_no_throw(args.front());
        std::vector<std::string> kept;
        for (std::size_t j = 0; j + 1 < extra.size(); j += 2) {
          if (sub == nullptr || sub->get_option_no_throw(extra[j]) != nullptr) {
            kept.push_back(extra[j]);
            kept.push_back(extra[j + 1]);
          }
        }
        effective.insert(effective.begin() + 1, kept.begin(), kept.end());
        break;
      }
    }
    std::reverse(effective.begin(), effective.end());  // CLI11 consumes from the back
    try {
      app.parse(effective);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: validation: " << detail::one_line(e.what()) << "\n";
      return kValidation;
    }

    if (*ingest_cmd) return cmd_ingest(rc, out);
    if (*augment_cmd) return cmd_augment(rc, out);
    if (*split_cmd) return cmd_split(rc, out);
    if (*train_cmd) return cmd_train(rc, out);
    if (*eval_cmd) return cmd_eval(rc, out);
    if (*predict_cmd) return cmd_predict(rc, out);
    return kValidation;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::kIo:
        err << "error: io: " << detail::one_line(e.what()) << "\n";
        return kIo;
      case ErrorKind::kNumeric:
        err << "error: numeric: " << detail::one_line(e.what()) << "\n";
        return kNumeric;
      case ErrorKind::kValidation:
        break;
    }
    err << "error: validation: " << detail::one_line(e.what()) << "\n";
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << detail::one_line(e.what()) << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: validation: " << detail::one_line(e.what()) << "\n";
    return kValidation;
  }
}

}  // namespace mric::cli
