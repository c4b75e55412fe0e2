// sset: prepare, train, infer, rerank, eval and gradcheck.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sset/checkpoint.hpp"
#include "sset/config.hpp"
#include "sset/eval.hpp"
#include "sset/formats.hpp"
#include "sset/kg_store.hpp"
#include "sset/rerank.hpp"
#include "sset/synthetic.hpp"
#include "sset/trainer.hpp"

namespace fs = std::filesystem;
using namespace sset;

namespace {

struct Args {
  std::string dataset;
  std::string text_emb;
  std::string sem_probs;
  std::string ska_probs;
  std::string scores;
  std::string checkpoint;
  std::string out;
  std::string config;
  std::string preset;
  std::string split = "test";
  std::string log;
  std::optional<std::uint64_t> seed;
  std::optional<int> k_hops;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<std::size_t> topk;
  std::optional<std::size_t> epochs;
  bool no_kd = false;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

ConfigFile resolve_config(const Args& a) {
  ConfigFile cfg;
  if (a.preset == "fb15ket") cfg.train = TrainConfig::fb15ket();
  else if (a.preset == "yago43ket") cfg.train = TrainConfig::yago43ket();
  else if (!a.preset.empty()) throw UsageError("unknown preset '" + a.preset + "' (fb15ket, yago43ket)");
  if (!a.config.empty()) cfg = load_config(a.config, cfg);
  auto& t = cfg.train;
  if (a.seed) t.seed = *a.seed;
  if (a.k_hops) t.hops = *a.k_hops;
  if (a.lambda) t.lambda = *a.lambda;
  if (a.epochs) t.epochs = *a.epochs;
  if (a.alpha) cfg.rerank.alpha = *a.alpha;
  if (a.topk) cfg.rerank.k = *a.topk;
  if (a.no_kd) t.kd_enabled = false;
  t.validate();
  cfg.rerank.validate();
  return cfg;
}

void print_graph_summary(const KnowledgeGraph& g) {
  std::cout << "entities\t" << g.num_entities() << "\n"
            << "relations\t" << g.num_relations() << "\n"
            << "types\t" << g.num_types() << "\n"
            << "triples\t" << g.triples().size() << "\n"
            << "train\t" << g.assertions(Split::train).size() << "\n"
            << "valid\t" << g.assertions(Split::valid).size() << "\n"
            << "test\t" << g.assertions(Split::test).size() << "\n";
}

int cmd_prepare(const Args& a) {
  require(a.dataset, "--dataset");
  if (!fs::is_directory(a.dataset)) throw UsageError("--dataset must be a dataset directory");
  for (const char* name : {"entity_text.tsv", "triples.tsv"}) {
    if (!fs::exists(fs::path(a.dataset) / name)) {
      throw UsageError(a.dataset + " is not a dataset directory (no " + name + ")");
    }
  }
  std::optional<DatasetManifest> manifest;
  if (a.preset == "fb15ket") manifest = DatasetManifest::fb15ket();
  else if (a.preset == "yago43ket") manifest = DatasetManifest::yago43ket();
  else if (!a.preset.empty()) throw UsageError("unknown preset '" + a.preset + "'");
  const auto g = load_dataset(a.dataset, manifest);
  const fs::path out = a.out.empty() ? fs::path(a.dataset) / "graph.idx" : fs::path(a.out);
  write_graph_index(g, out);
  print_graph_summary(g);
  std::cout << "index\t" << out.string() << "\n";
  return 0;
}

int cmd_train(const Args& a) {
  require(a.dataset, "--dataset");
  require(a.out, "--out");
  const auto cfg = resolve_config(a);
  const auto g = open_graph(a.dataset);

  std::optional<ProbabilityTable> teacher;
  if (!a.sem_probs.empty()) {
    teacher = read_and_check_probability_file(a.sem_probs, static_cast<std::uint32_t>(g.num_entities()),
                                              static_cast<std::uint32_t>(g.num_types()));
  } else if (cfg.train.kd_enabled) {
    throw UsageError("KD is enabled but --sem-probs was not given (use --no-kd or kd = false)");
  }

  TrainState state;
  if (!a.checkpoint.empty()) {
    state = load_checkpoint(a.checkpoint);
    check_checkpoint_matches(state.model, g);
    std::cerr << "resuming from epoch " << state.epochs_completed << "\n";
  } else {
    std::optional<TextualEmbeddings> text;
    if (!a.text_emb.empty()) text = read_textual_embeddings(a.text_emb);
    state.model = init_model<float>(g, cfg.train, text ? &*text : nullptr, cfg.train.seed);
  }

  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log") : fs::path(a.log);
  std::ofstream log(log_path, a.checkpoint.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot open log file " + log_path.string());
  train(g, cfg.train, teacher ? &*teacher : nullptr, state, [&](const EpochRecord& r) {
    const auto line = format_epoch_record(r);
    log << line << "\n" << std::flush;
    std::cout << line << "\n" << std::flush;
  });
  save_checkpoint(a.out, state);
  std::cerr << "checkpoint written to " << a.out << " after epoch " << state.epochs_completed << "\n";
  return 0;
}

int cmd_infer(const Args& a) {
  require(a.dataset, "--dataset");
  require(a.checkpoint, "--checkpoint");
  require(a.out, "--out");
  const auto g = open_graph(a.dataset);
  const auto state = load_checkpoint(a.checkpoint);
  check_checkpoint_matches(state.model, g);
  const auto result = infer_all(g, state.model, a.topk.value_or(0));
  write_probability_file(a.out, result.probabilities);
  std::cout << "rows\t" << g.num_entities() << "\n"
            << "no_evidence\t" << result.no_evidence.size() << "\n";
  return 0;
}

int cmd_rerank(const Args& a) {
  require(a.sem_probs, "--sem-probs");
  require(a.ska_probs, "--ska-probs");
  require(a.out, "--out");
  ConfigFile cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  if (a.alpha) cfg.rerank.alpha = *a.alpha;
  if (a.topk) cfg.rerank.k = *a.topk;
  cfg.rerank.validate();
  const auto p = read_and_check_probability_file(a.sem_probs, std::nullopt, std::nullopt);
  const auto q = read_and_check_probability_file(a.ska_probs, p.num_entities(), p.num_types());
  write_probability_file(a.out, rerank_tables(p, q, cfg.rerank));
  std::cout << "alpha\t" << cfg.rerank.alpha << "\n"
            << "k\t" << std::min<std::size_t>(cfg.rerank.k, p.num_types()) << "\n";
  return 0;
}

int cmd_eval(const Args& a) {
  require(a.dataset, "--dataset");
  require(a.scores, "--scores");
  const auto g = open_graph(a.dataset);
  const auto scores = read_and_check_probability_file(a.scores, static_cast<std::uint32_t>(g.num_entities()),
                                                      static_cast<std::uint32_t>(g.num_types()));
  Split split;
  if (a.split == "test") split = Split::test;
  else if (a.split == "valid") split = Split::valid;
  else throw UsageError("--split must be test or valid");
  std::cout << format_report(evaluate(g, scores, split));
  return 0;
}

int cmd_gradcheck(const Args& a) {
  const auto start = std::chrono::steady_clock::now();
  const auto g = a.dataset.empty() ? toy_graph() : open_graph(a.dataset);
  const std::uint64_t seed = a.seed.value_or(7);

  TrainConfig cfg;
  cfg.hops = a.k_hops.value_or(2);
  cfg.temps = {1.0, 3.0};
  cfg.sample_triples = 3;
  cfg.sample_types = 2;
  cfg.struct_dim = 6;
  cfg.dim = 5;
  if (!a.config.empty()) cfg = load_config(a.config, {cfg, {}}).train;
  if (a.k_hops) cfg.hops = *a.k_hops;

  const auto text = a.text_emb.empty() ? random_text_embeddings(g, 4, seed + 1) : read_textual_embeddings(a.text_emb);
  const auto teacher = a.sem_probs.empty() ? random_teacher(g, seed + 2)
                                           : read_and_check_probability_file(a.sem_probs, std::nullopt, std::nullopt);
  const auto model = init_model<double>(g, cfg, &text, seed);

  std::mt19937_64 rng(seed + 3);
  std::vector<ViewPlan> plans;
  for (auto e : training_entities(g)) {
    try {
      plans.push_back(plan_views(g, e, cfg.sample_triples, cfg.sample_types, ViewMode::train, &rng));
    } catch (const NoEvidenceError&) {
    }
  }
  if (plans.empty()) throw std::runtime_error("gradcheck: no entity with evidence");

  double worst = 0.0;
  const double lambdas[] = {a.lambda.value_or(0.0), 0.5, 1.0};
  const std::size_t count = a.lambda ? 1 : 3;
  for (std::size_t i = 0; i < count; ++i) {
    LossOptions opts;
    opts.lambda = lambdas[i];
    opts.negative_sign = cfg.negative_sign;
    const auto r = check_ska_gradient(g, model, plans, &teacher, opts, 1e-6, 0, seed);
    std::printf("lambda=%.2f\tcoords=%zu\tmax_rel_error=%.3e\tmax_abs_error=%.3e\n", lambdas[i], r.checked,
                r.max_rel_error, r.max_abs_error);
    worst = std::max(worst, r.max_rel_error);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("max_rel_error\t%.3e\nseconds\t%.2f\n%s\n", worst, secs, worst < 1e-4 ? "OK" : "FAILED");
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge graph entity typing: structural aggregation, re-ranking and evaluation"};
  app.require_subcommand(1);
  Args a;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--dataset", a.dataset, "Dataset directory or prepared index");
    sub->add_option("--out", a.out, "Output file");
    sub->add_option("--config", a.config, "key = value config file");
    sub->add_option("--seed", a.seed, "Random seed");
  };

  auto* prepare = app.add_subcommand("prepare", "Validate a dataset and write its binary index");
  add_common(prepare);
  prepare->add_option("--preset", a.preset, "Check counts against published statistics (fb15ket, yago43ket)");

  auto* train_cmd = app.add_subcommand("train", "Train the structural model");
  add_common(train_cmd);
  train_cmd->add_option("--text-emb", a.text_emb, "Directory with entity.emb, relation.emb, type.emb");
  train_cmd->add_option("--sem-probs", a.sem_probs, "Teacher probability file for KD");
  train_cmd->add_option("--checkpoint", a.checkpoint, "Resume from this checkpoint");
  train_cmd->add_option("--k-hops", a.k_hops, "Maximum hop order K");
  train_cmd->add_option("--lambda", a.lambda, "SFNA weight in the combined loss");
  train_cmd->add_option("--epochs", a.epochs, "Total number of epochs");
  train_cmd->add_option("--preset", a.preset, "Start from dataset defaults (fb15ket, yago43ket)");
  train_cmd->add_option("--log", a.log, "Training log path (default: <out>.log)");
  train_cmd->add_flag("--no-kd", a.no_kd, "Disable the KD term");

  auto* infer = app.add_subcommand("infer", "Write structural probabilities for every entity");
  add_common(infer);
  infer->add_option("--checkpoint", a.checkpoint, "Trained checkpoint");
  infer->add_option("--topk", a.topk, "Keep only the top-k types per entity (0: dense)");

  auto* rerank_cmd = app.add_subcommand("rerank", "Blend teacher probabilities into the top-k structural candidates");
  add_common(rerank_cmd);
  rerank_cmd->add_option("--sem-probs", a.sem_probs, "Teacher probability file (p)");
  rerank_cmd->add_option("--ska-probs", a.ska_probs, "Structural probability file (q)");
  rerank_cmd->add_option("--alpha", a.alpha, "Mixing weight");
  rerank_cmd->add_option("--topk", a.topk, "Candidate pool size k");

  auto* eval_cmd = app.add_subcommand("eval", "Filtered Hit@1/3/10, MR and MRR");
  add_common(eval_cmd);
  eval_cmd->add_option("--scores", a.scores, "Probability file to evaluate");
  eval_cmd->add_option("--split", a.split, "test or valid");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the training gradient");
  add_common(gradcheck);
  gradcheck->add_option("--text-emb", a.text_emb, "Textual embedding directory (default: random)");
  gradcheck->add_option("--sem-probs", a.sem_probs, "Teacher probability file (default: random)");
  gradcheck->add_option("--k-hops", a.k_hops, "Maximum hop order K");
  gradcheck->add_option("--lambda", a.lambda, "Check only this lambda");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return cmd_prepare(a);
    if (*train_cmd) return cmd_train(a);
    if (*infer) return cmd_infer(a);
    if (*rerank_cmd) return cmd_rerank(a);
    if (*eval_cmd) return cmd_eval(a);
    if (*gradcheck) return cmd_gradcheck(a);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
