#include "analogy/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "analogy/episodes.hpp"
#include "analogy/rpm_generator.hpp"
#include "analogy/rpm_io.hpp"
#include "analogy/rpm_validator.hpp"
#include "analogy/training.hpp"

namespace analogy::cli {

using nlohmann::json;
using rpm::RpmProblem;

namespace {

constexpr int kCrossShapeEpochs = 400;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<RpmProblem> read_corpus(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("no such file: " + path);
  try {
    return rpm::load_corpus(path);
  } catch (const rpm::ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<int> parse_shapes(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(rpm::parse_shape(item));
  return out;
}

std::pair<int, int> parse_hw(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw CLI::ValidationError("--raster", "expected HxW, e.g. 20x20");
  return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

void write_corpus_file(const std::vector<RpmProblem>& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  rpm::save_corpus(c, path);
}

struct GenerateArgs {
  std::string config = "center";
  std::size_t count = 0;
  std::uint64_t seed = kDefaultSeed;
  std::uint64_t first_index = 0;
  std::string out;
  std::string raster;
  std::string shapes;
};

int do_generate(const GenerateArgs& a, std::ostream& out) {
  rpm::GeneratorOptions opts;
  if (!a.raster.empty()) opts.raster_hw = parse_hw(a.raster);
  const rpm::AttributeDomain domain = a.shapes.empty()
                                          ? rpm::AttributeDomain::full()
                                          : rpm::AttributeDomain::with_shapes(parse_shapes(a.shapes));
  const auto corpus =
      rpm::generate_corpus(rpm::parse_config(a.config), domain, a.seed, a.count, opts, a.first_index);
  write_corpus_file(corpus, a.out);
  std::map<std::string, std::size_t> histogram;
  for (const RpmProblem& p : corpus) ++histogram[rpm::task_signature(p)];
  out << "wrote " << corpus.size() << " problems to " << a.out << " (hash "
      << rpm::corpus_hash(corpus) << ")\n";
  out << histogram.size() << " task signatures\n";
  for (const auto& [sig, n] : histogram) out << std::setw(6) << n << "  " << sig << "\n";
  return kOk;
}

struct TrainArgs {
  std::string mode = "baseline";
  std::string data;
  std::string out;
  std::string config_file;
  std::string resume;
  std::size_t preset = 0;
  bool cross_shapes = false;
  bool quiet = false;
  std::string maml_analogy;
};

int do_train(const TrainArgs& a, const training::RunConfig& cli_cfg,
             const std::set<std::string>& explicit_keys, std::ostream& out, std::ostream& err) {
  training::RunConfig cfg = cli_cfg;
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw DataError("cannot open config file " + a.config_file);
    // Flags given on the command line take precedence over the file.
    json merged = json::parse(in);
    const json cli = training::run_config_to_json(cli_cfg);
    for (const std::string& key : explicit_keys) merged[key] = cli.at(key);
    cfg = training::run_config_from_json(merged);
  }
  training::check_run_config(cfg);

  const auto corpus = read_corpus(a.data);
  training::Corpora data = training::prepare_corpora(
      corpus, {.cross_shapes = a.cross_shapes, .subsample = a.preset, .seed = cfg.seed});
  data.data_record["source"] = a.data;
  data.data_record["source_hash"] = rpm::corpus_hash(corpus);
  if (!a.config_file.empty()) data.data_record["config_file"] = a.config_file;

  const std::filesystem::path dir(a.out);
  std::filesystem::create_directories(dir / "data");
  write_corpus_file(data.train, dir / "data" / "train.jsonl");
  write_corpus_file(data.val, dir / "data" / "val.jsonl");
  write_corpus_file(data.test, dir / "data" / "test.jsonl");

  out << "resolved config: " << training::run_config_to_json(cfg).dump() << "\n";
  training::TrainOptions options;
  options.out_dir = dir;
  options.verbose = !a.quiet;
  if (!a.resume.empty()) options.resume_from = a.resume;
  try {
    const training::TrainResult r = training::train(cfg, data, options);
    out << "train " << data.train.size() << " val " << data.val.size() << " test "
        << data.test.size() << "\n";
    out << "best epoch " << r.best_epoch << " val accuracy " << r.best_val_accuracy << "\n";
    out << "test accuracy " << r.test_accuracy << "\n";
  } catch (const training::TrainingAborted& e) {
    err << e.what() << "\n";
    return kTrainingAbort;
  }
  return kOk;
}

int do_eval(const std::string& data_path, const std::string& ckpt, bool validate_only,
            std::ostream& out) {
  const auto corpus = read_corpus(data_path);
  if (validate_only) {
    std::size_t valid = 0;
    for (const RpmProblem& p : corpus) {
      const rpm::ValidationReport r = rpm::validate_problem(p);
      if (r.valid(p.answer)) {
        ++valid;
      } else {
        out << "problem " << p.id << " invalid:";
        for (const std::string& issue : r.issues) out << " " << issue << ";";
        out << "\n";
      }
    }
    out << "valid " << valid << " / " << corpus.size() << "\n";
    return valid == corpus.size() ? kOk : kDataError;
  }
  if (ckpt.empty()) throw CLI::ValidationError("--ckpt", "required unless --validate-only");
  if (corpus.empty()) throw DataError("no problems in " + data_path);
  const Checkpoint c = load_checkpoint(ckpt);
  const training::EvalResult r = training::evaluate(c.config, c.params, corpus);
  out << "accuracy " << r.accuracy << " (" << corpus.size() << " problems)\n";
  return kOk;
}

int do_split(const std::string& data_path, const std::string& out_dir, bool cross_shapes,
             std::uint64_t seed, std::ostream& out) {
  const auto corpus = read_corpus(data_path);
  const training::Corpora c =
      training::prepare_corpora(corpus, {.cross_shapes = cross_shapes, .seed = seed});
  json record = c.data_record;
  record["source"] = data_path;
  record["source_hash"] = rpm::corpus_hash(corpus);
  const std::filesystem::path dir(out_dir);
  write_corpus_file(c.train, dir / "train.jsonl");
  write_corpus_file(c.val, dir / "val.jsonl");
  write_corpus_file(c.test, dir / "test.jsonl");
  record["counts"] = {{"train", c.train.size()}, {"val", c.val.size()}, {"test", c.test.size()}};
  std::ofstream(dir / "split.json") << record.dump(2) << "\n";
  out << record.dump(2) << "\n";
  return kOk;
}

int do_report(const std::vector<std::string>& runs, const std::string& out_file,
              std::ostream& out) {
  struct Row {
    std::string run, mode;
    std::size_t train = 0, batch = 0;
    int epochs = 0, best_epoch = 0;
    std::uint64_t seed = 0;
    double val = 0, test = 0;
  };
  std::vector<Row> rows;
  for (const std::string& dir : runs) {
    std::ifstream in(std::filesystem::path(dir) / "manifest.json");
    if (!in) throw DataError("no manifest.json in " + dir);
    const json m = json::parse(in);
    Row r;
    r.run = dir;
    r.mode = m.at("mode").get<std::string>();
    r.train = m.at("data").at("train").at("count").get<std::size_t>();
    r.batch = m.at("config").at("batch_size").get<std::size_t>();
    r.epochs = m.at("config").at("epochs").get<int>();
    r.seed = m.at("config").at("seed").get<std::uint64_t>();
    r.best_epoch = m.at("best").at("epoch").get<int>();
    r.val = m.at("best").at("val_accuracy").get<double>();
    r.test = m.at("test_accuracy").is_null() ? 0.0 : m.at("test_accuracy").get<double>();
    rows.push_back(r);
  }
  std::ostringstream csv;
  csv << "run,mode,train,batch,epochs,seed,best_epoch,val_accuracy,test_accuracy\n";
  for (const Row& r : rows) {
    csv << r.run << "," << r.mode << "," << r.train << "," << r.batch << "," << r.epochs << ","
        << r.seed << "," << r.best_epoch << "," << r.val << "," << r.test << "\n";
  }
  out << std::left << std::setw(32) << "run" << std::setw(15) << "mode" << std::setw(8) << "train"
      << std::setw(7) << "batch" << std::setw(8) << "epochs" << std::setw(8) << "best"
      << std::setw(9) << "val%" << "test%\n";
  for (const Row& r : rows) {
    out << std::left << std::setw(32) << r.run << std::setw(15) << r.mode << std::setw(8) << r.train
        << std::setw(7) << r.batch << std::setw(8) << r.epochs << std::setw(8) << r.best_epoch
        << std::setw(9) << std::fixed << std::setprecision(2) << 100 * r.val << 100 * r.test
        << "\n";
  }
  // Mode x training-set-size grid of mean test accuracy over runs.
  std::set<std::size_t> sizes;
  std::map<std::string, std::map<std::size_t, std::pair<double, int>>> grid;
  for (const Row& r : rows) {
    sizes.insert(r.train);
    auto& cell = grid[r.mode][r.train];
    cell.first += r.test;
    ++cell.second;
  }
  out << "\nmean test accuracy (%) by mode and training size\n" << std::setw(15) << "mode";
  for (std::size_t s : sizes) out << std::setw(10) << s;
  out << "\n";
  for (const auto& [mode, cells] : grid) {
    out << std::setw(15) << mode;
    for (std::size_t s : sizes) {
      const auto it = cells.find(s);
      if (it == cells.end()) {
        out << std::setw(10) << "-";
      } else {
        out << std::setw(10) << std::fixed << std::setprecision(2)
            << 100 * it->second.first / it->second.second;
      }
    }
    out << "\n";
  }
  if (!out_file.empty()) {
    std::ofstream f(out_file);
    if (!f) throw DataError("cannot write " + out_file);
    f << csv.str();
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-analogical contrastive learning on generated matrix reasoning problems"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate an rpm-jsonl corpus");
  generate->add_option("--config", gen.config, "center | grid2 | grid3")
      ->check(CLI::IsMember({"center", "grid2", "grid3"}));
  generate->add_option("--count", gen.count, "Number of problems")->required();
  generate->add_option("--seed", gen.seed, "Global seed");
  generate->add_option("--first-index", gen.first_index, "Index of the first problem");
  generate->add_option("--out", gen.out, "Output file")->required();
  generate->add_option("--raster", gen.raster, "Also render HxW rasters");
  generate->add_option("--shapes", gen.shapes, "Comma-separated shape names to draw from");

  TrainArgs tr;
  training::RunConfig cfg;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--mode", tr.mode)
      ->check(CLI::IsMember({"baseline", "analogy", "analogy-inf", "analogy-var", "analogy-gen",
                             "meta-contrast", "maml"}));
  train->add_option("--data", tr.data, "Corpus file (split 6/2/2 unless --cross-shapes)")
      ->required();
  train->add_option("--out", tr.out, "Run directory")->required();
  train->add_option("--batch", cfg.batch_size, "Minibatch size (presets 2 and 32)")
      ->check(CLI::PositiveNumber);
  train->add_option("--epochs", cfg.epochs)->check(CLI::NonNegativeNumber);
  train->add_option("--k", cfg.queries, "Queries per episode")->check(CLI::Range(1, 8));
  train->add_option("--preset-subsample", tr.preset, "Few-shot training size")
      ->check(CLI::IsMember({14, 35, 77, 161, 322, 651}));
  train->add_flag("--cross-shapes", tr.cross_shapes, "Train on triangle/square/hexagon only");
  train->add_option("--seed", cfg.seed);
  train->add_option("--lr", cfg.lr)->check(CLI::PositiveNumber);
  std::string kernel_name;
  train->add_option("--kernel", kernel_name, "Kernel for meta-contrast")
      ->check(CLI::IsMember({"none", "inference", "variational", "generative"}));
  train->add_option("--pull-margin", cfg.pull_margin)->check(CLI::Range(0.0, 0.5));
  train->add_option("--push-margin", cfg.push_margin)->check(CLI::Range(0.0, 0.5));
  train->add_option("--weight-analogy", cfg.weights.analogy)->check(CLI::NonNegativeNumber);
  train->add_option("--weight-contrastive", cfg.weights.contrastive)->check(CLI::NonNegativeNumber);
  train->add_option("--eval-every", cfg.eval_every)->check(CLI::PositiveNumber);
  train->add_option("--inner-lr", cfg.inner_lr)->check(CLI::NonNegativeNumber);
  train->add_option("--n-ways", cfg.n_ways)->check(CLI::Range(1, 64));
  train->add_option("--k-shot", cfg.k_shot)->check(CLI::PositiveNumber);
  train->add_option("--maml-analogy", tr.maml_analogy, "on | off")
      ->check(CLI::IsMember({"on", "off"}));
  train->add_option("--meta-batches", cfg.meta_batches, "Meta batches per epoch");
  train->add_option("--embed-dim", cfg.embed_dim)->check(CLI::PositiveNumber);
  train->add_option("--latent-dim", cfg.latent_dim)->check(CLI::PositiveNumber);
  train->add_option("--config-file", tr.config_file, "JSON run config; flags override it");
  train->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  std::string eval_data, eval_ckpt;
  bool validate_only = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or validate a corpus");
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--ckpt", eval_ckpt);
  eval->add_flag("--validate-only", validate_only, "Run the rule checker only");

  std::string split_data, split_out;
  bool split_cross = false;
  std::uint64_t split_seed = kDefaultSeed;
  auto* split = app.add_subcommand("split", "Write train/val/test files");
  split->add_option("--data", split_data)->required();
  split->add_option("--out", split_out)->required();
  split->add_flag("--cross-shapes", split_cross);
  split->add_option("--seed", split_seed);

  std::vector<std::string> report_runs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Summarize run directories");
  report->add_option("--run", report_runs, "Run directory (repeatable)")->required();
  report->add_option("--out", report_out, "CSV output file");

  std::vector<std::string> argv{"analogy"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::vector<const char*> cargv;
  for (const auto& s : argv) cargv.push_back(s.c_str());
  // CLI11 parses in reverse order from a vector, so use argc/argv.
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*generate) return do_generate(gen, out);
    if (*train) {
      std::set<std::string> explicit_keys;
      const std::map<std::string, std::string> keys{
          {"--batch", "batch_size"}, {"--epochs", "epochs"}, {"--k", "queries"},
          {"--seed", "seed"}, {"--lr", "lr"}, {"--kernel", "kernel"},
          {"--pull-margin", "pull_margin"}, {"--push-margin", "push_margin"},
          {"--weight-analogy", "weight_analogy"}, {"--weight-contrastive", "weight_contrastive"},
          {"--eval-every", "eval_every"}, {"--inner-lr", "inner_lr"}, {"--n-ways", "n_ways"},
          {"--k-shot", "k_shot"}, {"--meta-batches", "meta_batches"},
          {"--maml-analogy", "maml_analogy"}, {"--embed-dim", "embed_dim"},
          {"--latent-dim", "latent_dim"}, {"--mode", "mode"}};
      for (const auto& [flag, key] : keys) {
        if (train->count(flag)) explicit_keys.insert(key);
      }
      if (explicit_keys.count("mode")) explicit_keys.insert("kernel");
      if (tr.cross_shapes && !train->count("--epochs") && tr.config_file.empty()) {
        cfg.epochs = kCrossShapeEpochs;
      }
      training::apply_mode_name(tr.mode, cfg);
      if (!kernel_name.empty()) cfg.kernel = losses::parse_kernel_mode(kernel_name);
      if (!tr.maml_analogy.empty()) cfg.maml_analogy = tr.maml_analogy == "on";
      return do_train(tr, cfg, explicit_keys, out, err);
    }
    if (*eval) return do_eval(eval_data, eval_ckpt, validate_only, out);
    if (*split) return do_split(split_data, split_out, split_cross, split_seed, out);
    if (*report) return do_report(report_runs, report_out, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const rpm::ParseError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const episodes::ConfigurationError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const CheckpointError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const rpm::GenerationError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace analogy::cli
