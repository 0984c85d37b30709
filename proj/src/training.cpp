#include "analogy/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "analogy/rpm_io.hpp"

namespace analogy::training {

using nlohmann::json;
using losses::KernelMode;
using rpm::RpmProblem;

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kShuffleTag = 0x5f;
constexpr std::uint64_t kBatchTag = 0xba;
constexpr std::uint64_t kMetaTag = 0x3e7a;
constexpr std::uint64_t kEvalTag = 0xe7a1;
constexpr std::uint64_t kEvalHalvesTag = 0x4a1f;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Terms {
  Tensor nce = Tensor::scalar(0.0);
  Tensor analogy = Tensor::scalar(0.0);
  bool correct = false;
};

losses::HeadOutputs heads(const RunConfig& run, const model::EncoderConfig& cfg,
                          const ParamStore& params, std::span<const rpm::Panel> context,
                          KernelMode kernel, Rng& rng) {
  losses::HeadOutputs h;
  h.embedding = model::encode_context(cfg, params, context);
  switch (kernel) {
    case KernelMode::none:
      break;
    case KernelMode::inference:
      h.task_scores = model::infer_task_scores(cfg, params, *h.embedding);
      break;
    case KernelMode::variational: {
      model::Variational v = model::variational_encode(cfg, params, *h.embedding, rng);
      h.mu = v.mu;
      h.sigma = v.sigma;
      break;
    }
    case KernelMode::generative:
      h.recon = model::decode_context(cfg, params, *h.embedding);
      break;
  }
  (void)run;
  return h;
}

// NCE on the support (and, with analogy, on each query context) plus the
// analogy kernel summed over queries.
Terms problem_terms(const RunConfig& run, const model::EncoderConfig& cfg, const ParamStore& params,
                    const RpmProblem& p, const rpm::AttributeDomain& domain, Rng& rng,
                    bool with_analogy) {
  Terms t;
  const Tensor scores = model::score_choices(cfg, params, p.context, p.choices);
  t.nce = losses::nce_loss(scores, p.answer);
  t.correct = model::argmax(scores.data()) == p.answer;
  if (!with_analogy) return t;
  const episodes::Episode ep = episodes::make_queries(p, run.queries, rng, domain);
  losses::EpisodeOutputs out;
  out.support = heads(run, cfg, params, p.context, run.kernel, rng);
  for (const episodes::Context& q : ep.queries) {
    t.nce = t.nce + losses::nce_loss(model::score_choices(cfg, params, q, p.choices), p.answer);
    out.queries.push_back(heads(run, cfg, params, q, run.kernel, rng));
  }
  if (run.kernel == KernelMode::generative) {
    out.target = model::reconstruction_target(cfg, p.context, p.choices[p.answer]);
  }
  t.analogy = losses::analogy_loss(out, run.kernel);
  return t;
}

std::pair<Tensor, Tensor> task_terms(const RunConfig& run, const model::EncoderConfig& cfg,
                                     const ParamStore& params,
                                     const std::vector<const RpmProblem*>& problems,
                                     const rpm::AttributeDomain& domain, Rng& rng,
                                     bool with_analogy, std::size_t* correct) {
  Tensor nce = Tensor::scalar(0.0), analogy = Tensor::scalar(0.0);
  for (const RpmProblem* p : problems) {
    Terms t = problem_terms(run, cfg, params, *p, domain, rng, with_analogy);
    nce = nce + t.nce;
    analogy = analogy + t.analogy;
    if (correct) *correct += t.correct;
  }
  const double inv = 1.0 / static_cast<double>(problems.size());
  return {scale(nce, inv), scale(analogy, inv)};
}

json corpus_record(const std::vector<RpmProblem>& c) {
  return {{"count", c.size()}, {"hash", rpm::corpus_hash(c)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Parameter values only; optimizer moments and the step counter are reset.
ParamStore snapshot(const ParamStore& p) {
  ParamStore s = p.clone();
  for (auto& e : s.entries()) {
    std::fill(e.first_moment.begin(), e.first_moment.end(), 0.0);
    std::fill(e.second_moment.begin(), e.second_moment.end(), 0.0);
  }
  s.set_step(0);
  return s;
}

json accuracy_json(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

// State shared by both loops.
struct Run {
  const RunConfig& cfg;
  const Corpora& data;
  const TrainOptions& options;
  model::EncoderConfig encoder;
  ParamStore params;
  ParamStore best;
  ParamStore epoch_start;
  int best_epoch = 0;
  double best_val = 0.0;
  bool have_best = false;
  int start_epoch = 1;
  json history = json::array();
  std::string steps_csv = "step,nce,analogy,contrastive,total,accuracy\n";
  std::string epochs_csv = "epoch,train_loss,train_accuracy,val_accuracy\n";
  std::vector<double> epoch_seconds;

  Run(const RunConfig& c, const Corpora& d, const TrainOptions& o)
      : cfg(c), data(d), options(o), encoder(encoder_for(c, d.train)) {
    params = model::init_params(encoder, cfg.seed);
    if (options.resume_from) {
      Checkpoint ckpt = load_checkpoint_for(*options.resume_from, encoder);
      params = std::move(ckpt.params);
      start_epoch = static_cast<int>(ckpt.epoch) + 1;
      const json& tr = ckpt.training;
      history = tr.value("history", json::array());
      for (const json& h : history) {
        epochs_csv += std::to_string(h.at("epoch").get<int>()) + "," +
                      fmt(h.at("train_loss").get<double>()) + "," +
                      fmt(h.at("train_accuracy").get<double>()) + "," +
                      (h.at("val_accuracy").is_null() ? std::string()
                                                      : fmt(h.at("val_accuracy").get<double>())) +
                      "\n";
      }
      if (tr.contains("best")) {
        best = model::init_params(encoder, 0);
        params_from_json(tr.at("best").at("params"), best);
        best_epoch = tr.at("best").at("epoch").get<int>();
        best_val = tr.at("best").at("val_accuracy").get<double>();
        have_best = true;
      }
    }
  }

  void log_step(const losses::LossBundle& b, double accuracy) {
    steps_csv += std::to_string(params.step()) + "," + fmt(b.nce) + "," + fmt(b.analogy) + "," +
                 fmt(b.contrastive) + "," + fmt(b.total_value) + "," + fmt(accuracy) + "\n";
  }

  void finish_epoch(int epoch, double loss, double accuracy, std::optional<double> val) {
    json h{{"epoch", epoch},
           {"train_loss", loss},
           {"train_accuracy", accuracy},
           {"val_accuracy", accuracy_json(val)}};
    history.push_back(h);
    epochs_csv += std::to_string(epoch) + "," + fmt(loss) + "," + fmt(accuracy) + "," +
                  (val ? fmt(*val) : std::string()) + "\n";
    if (val && (!have_best || *val > best_val)) {
      best = snapshot(params);
      best_epoch = epoch;
      best_val = *val;
      have_best = true;
    }
    if (options.verbose) {
      std::cerr << "epoch " << epoch << " loss " << fmt(loss) << " train_acc " << fmt(accuracy)
                << (val ? " val_acc " + fmt(*val) : std::string()) << "\n";
    }
  }

  bool evaluate_now(int epoch) const {
    return epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
  }

  Checkpoint checkpoint(int epoch, bool with_training) const {
    Checkpoint c;
    c.config = encoder;
    c.params = params.clone();
    c.epoch = epoch;
    if (with_training) {
      c.training = {{"history", history}};
      if (have_best) {
        c.training["best"] = {
            {"epoch", best_epoch}, {"val_accuracy", best_val}, {"params", params_to_json(best)}};
      }
    }
    return c;
  }

  json manifest(const std::string& status, std::optional<double> test_accuracy) const {
    json data_json = data.data_record;
    data_json["train"] = corpus_record(data.train);
    data_json["val"] = corpus_record(data.val);
    data_json["test"] = corpus_record(data.test);
    json m{{"format", "run-manifest v1"},
           {"mode", mode_name(cfg)},
           {"status", status},
           {"config", run_config_to_json(cfg)},
           {"encoder", encoder_config_to_json(encoder)},
           {"data", data_json},
           {"epochs", history},
           {"steps", params.step()},
           {"best", {{"epoch", best_epoch}, {"val_accuracy", best_val},
                     {"checkpoint", "best.ckpt.json"}}},
           {"final_checkpoint", "last.ckpt.json"},
           {"test_accuracy", accuracy_json(test_accuracy)}};
    return m;
  }

  void write_artifacts(const json& m, int last_epoch, const std::string& ckpt_name) const {
    if (!options.out_dir) return;
    const auto& dir = *options.out_dir;
    std::filesystem::create_directories(dir);
    write_text(dir / "manifest.json", m.dump(2) + "\n");
    write_text(dir / "steps.csv", steps_csv);
    write_text(dir / "epochs.csv", epochs_csv);
    save_checkpoint(checkpoint(last_epoch, true), dir / ckpt_name);
    if (ckpt_name == "last.ckpt.json") {
      Checkpoint b;
      b.config = encoder;
      b.params = have_best ? best.clone() : snapshot(params);
      b.epoch = best_epoch;
      save_checkpoint(b, dir / "best.ckpt.json");
    }
    json timing{{"epoch_seconds", epoch_seconds},
                {"total_seconds", std::accumulate(epoch_seconds.begin(), epoch_seconds.end(), 0.0)}};
    write_text(dir / "timing.json", timing.dump(2) + "\n");
  }

  // Rolls back to the parameters at the start of the failing epoch.
  [[noreturn]] void abort(int epoch, const std::string& why) {
    params = epoch_start.clone();
    json m = manifest("aborted: " + why, std::nullopt);
    m["final_checkpoint"] = "last_good.ckpt.json";
    write_artifacts(m, epoch - 1, "last_good.ckpt.json");
    throw TrainingAborted("training aborted in epoch " + std::to_string(epoch) + ": " + why);
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TrainResult finish(Run& run, const std::function<double(const ParamStore&)>& test_eval) {
  if (!run.have_best) {
    // No evaluated epoch: the initial (or resumed) model stands in.
    run.best = snapshot(run.params);
    run.best_epoch = run.start_epoch - 1;
  }
  const double test_accuracy = test_eval(run.best);
  TrainResult r;
  r.manifest = run.manifest("completed", test_accuracy);
  run.write_artifacts(r.manifest, std::max(run.cfg.epochs, run.start_epoch - 1), "last.ckpt.json");
  r.encoder = run.encoder;
  r.final_params = run.params.clone();
  r.best_params = run.best.clone();
  r.best_epoch = run.best_epoch;
  r.best_val_accuracy = run.best_val;
  r.test_accuracy = test_accuracy;
  r.steps_csv = run.steps_csv;
  r.epochs_csv = run.epochs_csv;
  return r;
}

TrainResult train_standard(const RunConfig& cfg, const Corpora& data, const TrainOptions& options) {
  Run run(cfg, data, options);
  std::vector<RpmProblem> batch;
  for (int epoch = run.start_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    run.epoch_start = run.params.clone();
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, {kShuffleTag, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0, batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(data.train[order[i]]);
      }
      Rng rng(derive_seed(cfg.seed, {kBatchTag, static_cast<std::uint64_t>(epoch), batches}));
      BatchStats stats;
      try {
        stats = batch_loss(cfg, run.encoder, run.params, batch, data.train, data.noise_domain, rng);
      } catch (const losses::NonFiniteLoss& e) {
        run.abort(epoch, e.what());
      } catch (const NumericDomainError& e) {
        run.abort(epoch, e.what());
      }
      stats.bundle.total.backward();
      adam_step(run.params, cfg.lr, cfg.adam);
      run.log_step(stats.bundle, static_cast<double>(stats.correct) / stats.count);
      loss_sum += stats.bundle.total_value;
      correct += stats.correct;
      ++batches;
    }
    std::optional<double> val;
    if (run.evaluate_now(epoch)) val = evaluate(run.encoder, run.params, data.val).accuracy;
    run.epoch_seconds.push_back(seconds_since(t0));
    run.finish_epoch(epoch, loss_sum / static_cast<double>(batches),
                     static_cast<double>(correct) / static_cast<double>(order.size()), val);
  }
  return finish(run, [&](const ParamStore& p) {
    return evaluate(run.encoder, p, data.test).accuracy;
  });
}

TrainResult train_maml(const RunConfig& cfg, const Corpora& data, const TrainOptions& options) {
  Run run(cfg, data, options);
  const std::size_t per_batch = static_cast<std::size_t>(cfg.n_ways) * 2 * cfg.k_shot;
  const std::size_t count =
      cfg.meta_batches ? cfg.meta_batches : std::max<std::size_t>(1, data.train.size() / per_batch);
  for (int epoch = run.start_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    run.epoch_start = run.params.clone();
    Rng meta_rng(derive_seed(cfg.seed, {kMetaTag, static_cast<std::uint64_t>(epoch)}));
    const auto batches = episodes::meta_task_batches(data.train, cfg.n_ways, cfg.k_shot, meta_rng,
                                                     count);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Rng rng(derive_seed(cfg.seed, {kBatchTag, static_cast<std::uint64_t>(epoch), b}));
      double nce_sum = 0.0, analogy_sum = 0.0, total_sum = 0.0;
      std::size_t batch_correct = 0, batch_count = 0;
      for (const episodes::MetaTask& task : batches[b]) {
        std::vector<const RpmProblem*> support, query;
        for (std::size_t i : task.support) support.push_back(&data.train[i]);
        for (std::size_t i : task.query) query.push_back(&data.train[i]);
        losses::LossBundle bundle;
        ParamStore adapted;
        try {
          adapted = adapt(cfg, run.encoder, run.params, support, data.noise_domain, rng);
          auto [nce, analogy] = task_terms(cfg, run.encoder, adapted, query, data.noise_domain, rng,
                                           cfg.maml_analogy, &batch_correct);
          bundle = losses::total_loss(nce, analogy, Tensor::scalar(0.0),
                                      {cfg.maml_analogy ? cfg.weights.analogy : 0.0, 0.0},
                                      cfg.kernel);
        } catch (const losses::NonFiniteLoss& e) {
          run.abort(epoch, e.what());
        } catch (const NumericDomainError& e) {
          run.abort(epoch, e.what());
        }
        batch_count += query.size();
        bundle.total.backward();
        const double inv = 1.0 / static_cast<double>(batches[b].size());
        auto& outer = run.params.entries();
        const auto& inner = adapted.entries();
        for (std::size_t e = 0; e < outer.size(); ++e) {
          auto g = outer[e].value.mutable_grad();
          const auto ga = inner[e].value.grad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += inv * ga[i];
        }
        nce_sum += bundle.nce * inv;
        analogy_sum += bundle.analogy * inv;
        total_sum += bundle.total_value * inv;
      }
      adam_step(run.params, cfg.lr, cfg.adam);
      losses::LossBundle logged;
      logged.nce = nce_sum;
      logged.analogy = analogy_sum;
      logged.total_value = total_sum;
      run.log_step(logged, static_cast<double>(batch_correct) / batch_count);
      loss_sum += total_sum;
      correct += batch_correct;
      seen += batch_count;
    }
    std::optional<double> val;
    if (run.evaluate_now(epoch)) {
      val = evaluate_adapted(cfg, run.encoder, run.params, data.val, data.noise_domain).accuracy;
    }
    run.epoch_seconds.push_back(seconds_since(t0));
    run.finish_epoch(epoch, loss_sum / static_cast<double>(batches.size()),
                     static_cast<double>(correct) / static_cast<double>(seen), val);
  }
  return finish(run, [&](const ParamStore& p) {
    return evaluate_adapted(cfg, run.encoder, p, data.test, data.noise_domain).accuracy;
  });
}

}  // namespace

std::string mode_name(const RunConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::meta_contrast: return "meta-contrast";
    case TrainMode::maml: return "maml";
    case TrainMode::analogy:
      switch (cfg.kernel) {
        case KernelMode::none: return "analogy";
        case KernelMode::inference: return "analogy-inf";
        case KernelMode::variational: return "analogy-var";
        case KernelMode::generative: return "analogy-gen";
      }
  }
  return "baseline";
}

void apply_mode_name(std::string_view name, RunConfig& cfg) {
  if (name == "baseline") {
    cfg.mode = TrainMode::baseline;
  } else if (name == "analogy") {
    cfg.mode = TrainMode::analogy;
    cfg.kernel = KernelMode::none;
  } else if (name == "analogy-inf") {
    cfg.mode = TrainMode::analogy;
    cfg.kernel = KernelMode::inference;
  } else if (name == "analogy-var") {
    cfg.mode = TrainMode::analogy;
    cfg.kernel = KernelMode::variational;
  } else if (name == "analogy-gen") {
    cfg.mode = TrainMode::analogy;
    cfg.kernel = KernelMode::generative;
  } else if (name == "meta-contrast") {
    cfg.mode = TrainMode::meta_contrast;
    cfg.kernel = KernelMode::inference;
  } else if (name == "maml") {
    cfg.mode = TrainMode::maml;
  } else {
    throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
  }
}

json run_config_to_json(const RunConfig& c) {
  return {{"mode", mode_name(c)},
          {"kernel", losses::to_string(c.kernel)},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"seed", c.seed},
          {"queries", c.queries},
          {"pull_margin", c.pull_margin},
          {"push_margin", c.push_margin},
          {"weight_analogy", c.weights.analogy},
          {"weight_contrastive", c.weights.contrastive},
          {"eval_every", c.eval_every},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
          {"inner_lr", c.inner_lr},
          {"n_ways", c.n_ways},
          {"k_shot", c.k_shot},
          {"maml_analogy", c.maml_analogy},
          {"meta_batches", c.meta_batches},
          {"embed_dim", c.embed_dim},
          {"attribute_slots", c.attribute_slots},
          {"rule_slots", c.rule_slots},
          {"task_dim", c.task_dim},
          {"latent_dim", c.latent_dim}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("mode")) apply_mode_name(j.at("mode").get<std::string>(), c);
  if (j.contains("kernel")) c.kernel = losses::parse_kernel_mode(j.at("kernel").get<std::string>());
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.queries = j.value("queries", c.queries);
  c.pull_margin = j.value("pull_margin", c.pull_margin);
  c.push_margin = j.value("push_margin", c.push_margin);
  c.weights.analogy = j.value("weight_analogy", c.weights.analogy);
  c.weights.contrastive = j.value("weight_contrastive", c.weights.contrastive);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
  }
  c.inner_lr = j.value("inner_lr", c.inner_lr);
  c.n_ways = j.value("n_ways", c.n_ways);
  c.k_shot = j.value("k_shot", c.k_shot);
  c.maml_analogy = j.value("maml_analogy", c.maml_analogy);
  c.meta_batches = j.value("meta_batches", c.meta_batches);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.attribute_slots = j.value("attribute_slots", c.attribute_slots);
  c.rule_slots = j.value("rule_slots", c.rule_slots);
  c.task_dim = j.value("task_dim", c.task_dim);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  return c;
}

void check_run_config(const RunConfig& c) {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (c.batch_size == 0) fail("batch size must be positive");
  if (c.epochs < 0) fail("epochs must be nonnegative");
  if (!(c.lr > 0.0)) fail("learning rate must be positive");
  if (c.queries < 1 || c.queries > 8) fail("query count must be in 1..8");
  if (c.pull_margin < 0 || c.pull_margin > 0.5 || c.push_margin < 0 || c.push_margin > 0.5) {
    fail("margins must lie in [0, 0.5]");
  }
  if (c.weights.analogy < 0 || c.weights.contrastive < 0) fail("loss weights must be nonnegative");
  if (c.inner_lr < 0) fail("inner learning rate must be nonnegative");
  if (c.n_ways < 1 || c.k_shot < 1) fail("n_ways and k_shot must be positive");
  if (!c.embed_dim || !c.attribute_slots || !c.rule_slots || !c.task_dim || !c.latent_dim) {
    fail("model widths must be positive");
  }
}

model::EncoderConfig encoder_for(const RunConfig& run, const std::vector<RpmProblem>& data) {
  if (data.empty()) throw std::invalid_argument("training corpus is empty");
  const RpmProblem& first = data.front();
  for (const RpmProblem& p : data) {
    if (p.config != first.config) {
      throw std::invalid_argument("training corpus mixes panel configurations");
    }
  }
  const auto& raster = first.context[0].raster;
  model::EncoderConfig cfg =
      raster ? model::make_encoder_config(first.config, model::InputMode::raster, raster->height,
                                          raster->width)
             : model::make_encoder_config(first.config);
  cfg.embed_dim = run.embed_dim;
  cfg.attribute_slots = run.attribute_slots;
  cfg.rule_slots = run.rule_slots;
  cfg.task_dim = run.task_dim;
  cfg.latent_dim = run.latent_dim;
  return cfg;
}

Scorer model_scorer(const model::EncoderConfig& cfg, const ParamStore& params) {
  return [&cfg, &params](const RpmProblem& p) {
    const Tensor s = model::score_choices(cfg, params, p.context, p.choices);
    return std::vector<double>(s.data().begin(), s.data().end());
  };
}

EvalResult evaluate(const Scorer& scorer, const std::vector<RpmProblem>& corpus) {
  EvalResult r;
  std::size_t correct = 0;
  for (const RpmProblem& p : corpus) {
    const std::vector<double> s = scorer(p);
    EvalRecord rec;
    rec.id = p.id;
    rec.predicted = model::argmax(s);
    rec.answer = p.answer;
    rec.best_score = s[static_cast<std::size_t>(rec.predicted)];
    rec.correct = rec.predicted == p.answer;
    correct += rec.correct;
    r.records.push_back(rec);
  }
  r.accuracy = corpus.empty() ? 0.0 : static_cast<double>(correct) / corpus.size();
  return r;
}

EvalResult evaluate(const model::EncoderConfig& cfg, const ParamStore& params,
                    const std::vector<RpmProblem>& corpus) {
  return evaluate(model_scorer(cfg, params), corpus);
}

BatchStats batch_loss(const RunConfig& run, const model::EncoderConfig& cfg,
                      const ParamStore& params, const std::vector<RpmProblem>& batch,
                      const std::vector<RpmProblem>& pair_pool,
                      const rpm::AttributeDomain& noise_domain, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const bool with_analogy = run.mode != TrainMode::baseline;
  std::vector<const RpmProblem*> ptrs;
  for (const RpmProblem& p : batch) ptrs.push_back(&p);
  BatchStats stats;
  stats.count = batch.size();
  auto [nce, analogy] =
      task_terms(run, cfg, params, ptrs, noise_domain, rng, with_analogy, &stats.correct);
  Tensor contrastive = Tensor::scalar(0.0);
  if (run.mode == TrainMode::meta_contrast && pair_pool.size() >= 2) {
    const std::size_t n_pairs = std::max<std::size_t>(1, batch.size() / 2);
    const auto pairs = episodes::make_domain_pairs(pair_pool, n_pairs, rng, 1, noise_domain);
    std::vector<losses::PairScores> scores;
    for (const episodes::DomainPair& pair : pairs) {
      auto views = [&](const episodes::Episode& ep) {
        std::vector<Tensor> out;
        out.push_back(model::infer_task_scores(cfg, params,
                                               model::encode_context(cfg, params, ep.support)));
        for (const episodes::Context& q : ep.queries) {
          out.push_back(
              model::infer_task_scores(cfg, params, model::encode_context(cfg, params, q)));
        }
        return out;
      };
      scores.push_back({views(pair.source), views(pair.target)});
    }
    contrastive = scale(losses::meta_contrastive_loss(scores, run.pull_margin, run.push_margin),
                        1.0 / static_cast<double>(pairs.size()));
  }
  losses::LossWeights w = run.weights;
  if (!with_analogy) w = {0.0, 0.0};
  if (run.mode != TrainMode::meta_contrast) w.contrastive = 0.0;
  stats.bundle = losses::total_loss(nce, analogy, contrastive, w, run.kernel);
  return stats;
}

Tensor task_loss(const RunConfig& run, const model::EncoderConfig& cfg, const ParamStore& params,
                 const std::vector<const RpmProblem*>& problems,
                 const rpm::AttributeDomain& noise_domain, Rng& rng, bool with_analogy) {
  auto [nce, analogy] = task_terms(run, cfg, params, problems, noise_domain, rng, with_analogy,
                                   nullptr);
  return with_analogy ? nce + scale(analogy, run.weights.analogy) : nce;
}

ParamStore adapt(const RunConfig& run, const model::EncoderConfig& cfg, const ParamStore& params,
                 const std::vector<const RpmProblem*>& support,
                 const rpm::AttributeDomain& noise_domain, Rng& rng) {
  ParamStore adapted = params.clone();
  if (run.inner_lr == 0.0 || support.empty()) return adapted;
  const Tensor loss = task_loss(run, cfg, adapted, support, noise_domain, rng, run.maml_analogy);
  if (!std::isfinite(loss.item())) throw losses::NonFiniteLoss("non-finite inner loss");
  loss.backward();
  for (auto& e : adapted.entries()) {
    auto v = e.value.mutable_data();
    const auto g = e.value.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= run.inner_lr * g[i];
  }
  adapted.zero_grad();
  return adapted;
}

EvalResult evaluate_adapted(const RunConfig& run, const model::EncoderConfig& cfg,
                            const ParamStore& params, const std::vector<RpmProblem>& corpus,
                            const rpm::AttributeDomain& noise_domain) {
  Rng rng(derive_seed(run.seed, {kEvalTag}));
  EvalResult r;
  std::size_t correct = 0;
  for (auto [sig, members] : episodes::group_by_signature(corpus)) {
    if (members.size() < static_cast<std::size_t>(run.k_shot) + 1) continue;
    rng.shuffle(members);
    std::vector<const RpmProblem*> support;
    for (int i = 0; i < run.k_shot; ++i) support.push_back(&corpus[members[i]]);
    const ParamStore adapted = adapt(run, cfg, params, support, noise_domain, rng);
    std::vector<RpmProblem> queries;
    for (std::size_t i = run.k_shot; i < members.size(); ++i) queries.push_back(corpus[members[i]]);
    for (const EvalRecord& rec : evaluate(cfg, adapted, queries).records) {
      correct += rec.correct;
      r.records.push_back(rec);
    }
  }
  if (r.records.empty()) return evaluate(cfg, params, corpus);
  r.accuracy = static_cast<double>(correct) / r.records.size();
  return r;
}

Corpora prepare_corpora(const std::vector<RpmProblem>& corpus, const DataPlan& plan) {
  auto names = [](const std::vector<int>& shapes) {
    json out = json::array();
    for (int s : shapes) out.push_back(rpm::shape_name(s));
    return out;
  };
  Corpora c;
  json record = json::object();
  if (plan.cross_shapes) {
    const episodes::SplitSpec spec{.seed = plan.seed};
    const episodes::SplitResult split = episodes::cross_attribute_split(corpus, spec);
    c.train = split.train;
    std::vector<std::size_t> order(split.eval.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(plan.seed, {kEvalHalvesTag}));
    rng.shuffle(order);
    const std::size_t half = order.size() / 2;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < half ? c.val : c.test).push_back(split.eval[order[i]]);
    }
    record["split"] = {{"kind", "cross-attribute"},
                       {"train_shapes", names(spec.train_shapes)},
                       {"eval_shapes", names(spec.eval_shapes)},
                       {"discarded", split.discarded},
                       {"seed", plan.seed}};
    c.noise_domain = rpm::AttributeDomain::with_shapes(spec.train_shapes);
  } else {
    episodes::DatasetSplit s = episodes::fold_split(corpus, plan.seed);
    c.train = std::move(s.train);
    c.val = std::move(s.val);
    c.test = std::move(s.test);
    record["split"] = {{"kind", "folds-6-2-2"}, {"seed", plan.seed}};
  }
  if (plan.subsample) {
    c.train = episodes::few_shot_subsample(c.train, plan.subsample, plan.seed);
    record["subsample"] = {{"size", plan.subsample}, {"seed", plan.seed}};
  }
  if (c.train.empty() || c.val.empty() || c.test.empty()) {
    throw episodes::ConfigurationError("split left an empty train, validation or test set");
  }
  c.data_record = record;
  return c;
}

TrainResult train(const RunConfig& run, const Corpora& data, const TrainOptions& options) {
  check_run_config(run);
  if (run.mode == TrainMode::maml) return train_maml(run, data, options);
  return train_standard(run, data, options);
}

}  // namespace analogy::training
