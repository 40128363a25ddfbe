// guidedgen: synthetic corpus, training, decoding and evaluation from the command line.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "guidedgen/core.hpp"
#include "guidedgen/dataset.hpp"
#include "guidedgen/decode.hpp"
#include "guidedgen/error.hpp"
#include "guidedgen/eval.hpp"
#include "guidedgen/generator.hpp"
#include "guidedgen/pipeline.hpp"
#include "guidedgen/rewards.hpp"
#include "guidedgen/rl.hpp"
#include "guidedgen/scorer.hpp"
#include "guidedgen/synth.hpp"

namespace fs = std::filesystem;
using namespace guidedgen;

namespace {

const char* const kVocabFile = "vocab.txt";
const char* const kPlainScorerFile = "scorer_plain.lm";
const char* const kFinetunedScorerFile = "scorer_finetuned.lm";
const char* const kMleCkpt = "mle.ckpt";
const char* const kRlCkpt = "rl.ckpt";
const char* const kMetricsFile = "metrics.jsonl";

void add_config(CLI::App* sub) {
  static std::string unused;
  sub->add_option("--config", unused, "flat key = value file; keys are long flag names, flags given on the "
                                      "command line win")
      ->check(CLI::ExistingFile);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// `--config FILE` becomes one `--key=value` argument per line of FILE, placed
// before the real arguments so that later command-line values take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> injected;
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    else continue;
    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw CLI::ConversionError(path + ":" + std::to_string(n) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
        value = value.substr(1, value.size() - 2);
      injected.push_back("--" + key + "=" + value);
    }
  }
  if (injected.empty() || args.size() < 2) return args;
  // Subcommand name is the first positional argument.
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

void echo_config(const CLI::App* sub, std::ostream& out) {
  out << "# " << sub->get_name() << " resolved configuration\n" << sub->config_to_str(true, false);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// ---- synth ----

struct SynthOpts {
  std::size_t n = 0;
  std::optional<std::size_t> n_dev, n_test;
  std::uint64_t seed = 1;
  std::string out;
  std::string grammar;
  bool force = false;
  CorpusShape shape;
};

void add_synth(CLI::App& app, SynthOpts& o) {
  auto* sub = app.add_subcommand("synth", "write train/dev/test JSONL files and the grammar manifest");
  add_config(sub);
  sub->add_option("--n", o.n, "training records")->required();
  sub->add_option("--n-dev", o.n_dev, "dev records (default n/5)");
  sub->add_option("--n-test", o.n_test, "test records (default n/5)");
  sub->add_option("--seed", o.seed, "random seed")->envname("GUIDEDGEN_SEED")->capture_default_str();
  sub->add_option("--out", o.out, "output directory")->required();
  sub->add_option("--grammar", o.grammar, "grammar JSON (default: built-in grammar)")->check(CLI::ExistingFile);
  sub->add_flag("--force", o.force, "overwrite existing files");
  sub->add_option("--min-concepts", o.shape.min_concepts)->capture_default_str();
  sub->add_option("--max-concepts", o.shape.max_concepts)->capture_default_str();
  sub->add_option("--min-refs", o.shape.min_refs)->capture_default_str();
  sub->add_option("--max-refs", o.shape.max_refs)->capture_default_str();
}

int run_synth(const SynthOpts& o) {
  if (o.n < 1) throw UsageError("n_records must be ≥ 1");
  const Grammar g = o.grammar.empty() ? default_grammar() : Grammar::load(o.grammar);
  const fs::path dir(o.out);
  const std::vector<std::string> names = {"train.jsonl", "dev.jsonl", "test.jsonl", "grammar.json"};
  if (!o.force) {
    for (const auto& n : names)
      if (fs::exists(dir / n)) throw UsageError((dir / n).string() + " exists (use --force to overwrite)");
  }
  const Splits s = generate_splits(g, o.n, o.n_dev.value_or(o.n / 5), o.n_test.value_or(o.n / 5), o.seed, o.shape);
  fs::create_directories(dir);
  save_dataset((dir / "train.jsonl").string(), s.train);
  save_dataset((dir / "dev.jsonl").string(), s.dev);
  save_dataset((dir / "test.jsonl").string(), s.test);
  g.save((dir / "grammar.json").string());
  std::cerr << "wrote " << s.train.size() << "/" << s.dev.size() << "/" << s.test.size() << " records to "
            << dir.string() << "\n";
  return 0;
}

// ---- train ----

struct TrainOpts {
  std::string data, dev, grammar, out, init, profiles;
  std::string phase = "both";
  bool inputs_only = false;
  int epochs_mle = 10;
  int epochs_rl = 1;
  std::string sampler = "beam";
  std::string reward_profile = "training";
  std::string reward_weights;
  PplBounds bounds;
  GeneratorConfig gen;
  TrainConfig train;
};

void add_train(CLI::App& app, TrainOpts& o) {
  auto* sub = app.add_subcommand("train", "MLE pre-training and/or REINFORCE fine-tuning");
  add_config(sub);
  sub->add_option("--data", o.data, "training records (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--dev", o.dev, "dev records for early stopping and metrics")->check(CLI::ExistingFile);
  sub->add_option("--grammar", o.grammar, "grammar manifest; selects the fine-tuned scorer's sub-corpus")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "model directory")->required();
  sub->add_option("--phase", o.phase, "mle, rl or both")
      ->check(CLI::IsMember({"mle", "rl", "both"}))
      ->capture_default_str();
  sub->add_flag("--inputs-only", o.inputs_only, "rl phase on concept sets alone; references are ignored");
  sub->add_option("--init", o.init, "MLE checkpoint for the rl phase; vocabulary and scorers are read from its directory (default <out>/mle.ckpt)");
  sub->add_option("--epochs-mle", o.epochs_mle)->capture_default_str();
  sub->add_option("--epochs-rl", o.epochs_rl)->capture_default_str();
  sub->add_option("--batch-size", o.train.batch_size)->capture_default_str();
  sub->add_option("--lr-mle", o.train.lr_mle)->capture_default_str();
  sub->add_option("--lr-rl", o.train.lr_rl)->capture_default_str();
  sub->add_option("--samples", o.train.samples_per_input, "samples per input (>= 2)")->capture_default_str();
  sub->add_option("--sampler", o.sampler, "beam or random")
      ->check(CLI::IsMember({"beam", "random"}))
      ->capture_default_str();
  sub->add_option("--epsilon", o.train.epsilon, "chance a beam sample is replaced by a random one")
      ->capture_default_str();
  sub->add_option("--reward-profile", o.reward_profile, "named weight profile for the rl reward")
      ->capture_default_str();
  sub->add_option("--reward-weights", o.reward_weights, "explicit w1,w2,w3,w4 (overrides the profile)");
  sub->add_option("--profiles", o.profiles, "weight profile overrides file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.train.seed)->envname("GUIDEDGEN_SEED")->capture_default_str();
  sub->add_option("--patience", o.train.patience, "early-stopping patience, 0 disables")->capture_default_str();
  sub->add_option("--clip", o.train.clip_norm, "global gradient norm limit, 0 disables")->capture_default_str();
  sub->add_option("--ppl-lower", o.bounds.lower)->capture_default_str();
  sub->add_option("--ppl-upper", o.bounds.upper)->capture_default_str();
  sub->add_option("--embed-dim", o.gen.embed_dim)->capture_default_str();
  sub->add_option("--hidden-dim", o.gen.hidden_dim)->capture_default_str();
  sub->add_option("--window", o.gen.window)->capture_default_str();
  sub->add_option("--beam-k", o.train.beam_k)->capture_default_str();
  sub->add_option("--max-steps", o.train.max_steps)->capture_default_str();
}

nlohmann::ordered_json metrics_row(int global_epoch, const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = global_epoch;
  j["phase"] = m.phase;
  j["phase_epoch"] = m.epoch;
  j[m.phase == "mle" ? "train_nll" : "mean_reward"] = m.train_value;
  if (m.has_dev) {
    j["dev_nll"] = m.dev_loss;
    j["dev_cov"] = m.dev_coverage;
    j["dev_ppl"] = m.dev_ppl;
    j["dev_bleu4"] = m.dev_bleu4;
  }
  return j;
}

std::vector<DatasetRecord> require_refs(const std::vector<DatasetRecord>& records, const std::string& path) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].refs.empty()) {
      throw DataError(path + ": record " + std::to_string(i + 1) + " has no references (rl accepts --inputs-only)");
    }
  }
  return records;
}

int run_train(const TrainOpts& o, const CLI::App* sub) {
  if (o.inputs_only && o.phase != "rl") throw UsageError("--inputs-only requires --phase rl");
  const bool do_mle = o.phase != "rl";
  const bool do_rl = o.phase != "mle";
  const fs::path dir(o.out);

  TrainConfig cfg = o.train;
  cfg.sampler = parse_sampler(o.sampler);
  WeightProfiles profiles;
  if (!o.profiles.empty()) profiles.load_overrides(o.profiles);
  cfg.reward_weights = o.reward_weights.empty() ? profiles.get(o.reward_profile) : parse_weights(o.reward_weights);
  cfg.epochs = o.epochs_mle;
  cfg.validate();
  o.bounds.validate();
  if (do_rl) cfg.reward_weights.validate();

  fs::path init = o.init.empty() ? dir / kMleCkpt : fs::path(o.init);
  if (do_rl && !do_mle && !fs::exists(init)) {
    throw UsageError("rl phase needs an MLE checkpoint; " + init.string() + " not found (see --init)");
  }

  std::vector<DatasetRecord> train = load_dataset(o.data);
  if (train.empty()) throw DataError(o.data + ": no records");
  if (!o.inputs_only) require_refs(train, o.data);
  if (o.inputs_only)
    for (auto& r : train) r.refs.clear();
  std::vector<DatasetRecord> dev;
  if (!o.dev.empty()) dev = load_dataset(o.dev);
  std::optional<Grammar> grammar;
  if (!o.grammar.empty()) grammar = Grammar::load(o.grammar);
  warn_uncovered_refs(train, std::cerr);

  fs::create_directories(dir);
  {
    auto log = open_out(dir / "run.log");
    echo_config(sub, log);
  }
  echo_config(sub, std::cerr);

  std::optional<Vocab> vocab;
  std::optional<ScorerPair> scorers;
  std::optional<TrainableGenerator> gen;
  if (do_mle) {
    if (!grammar) std::cerr << "warning: no --grammar; the fine-tuned scorer sees every reference\n";
    vocab = training_vocab(train, {&dev}, grammar ? &*grammar : nullptr);
    vocab->save((dir / kVocabFile).string());
    scorers = train_scorers(*vocab, train, grammar ? &*grammar : nullptr);
    scorers->plain.save((dir / kPlainScorerFile).string(), vocab->hash());
    scorers->finetuned.save((dir / kFinetunedScorerFile).string(), vocab->hash());
    GeneratorConfig gc = o.gen;
    gc.vocab_size = vocab->size();
    gen.emplace(gc, cfg.seed);
  } else {
    // Vocabulary and scorers live next to the initial checkpoint.
    const fs::path src = init.has_parent_path() ? init.parent_path() : fs::path(".");
    vocab = Vocab::load((src / kVocabFile).string());
    scorers = ScorerPair{TrigramScorer::load((src / kPlainScorerFile).string(), vocab->hash()),
                         TrigramScorer::load((src / kFinetunedScorerFile).string(), vocab->hash())};
    gen = TrainableGenerator::load(init.string(), vocab->hash());
    if (!fs::equivalent(src, dir)) {
      vocab->save((dir / kVocabFile).string());
      scorers->plain.save((dir / kPlainScorerFile).string(), vocab->hash());
      scorers->finetuned.save((dir / kFinetunedScorerFile).string(), vocab->hash());
    }
  }

  const auto enc_train = encode_records(*vocab, train);
  const auto enc_dev = encode_records(*vocab, dev);
  DevEvaluator dev_eval{enc_dev, DecodeConfig{}, &scorers->finetuned};
  auto metrics = open_out(dir / kMetricsFile);
  int global_epoch = 0;
  auto on_epoch = [&](const EpochMetrics& m, const TrainableGenerator&) {
    metrics << metrics_row(++global_epoch, m).dump() << "\n" << std::flush;
    std::cerr << m.phase << " epoch " << m.epoch << ": " << (m.phase == "mle" ? "nll " : "reward ") << m.train_value;
    if (m.has_dev) std::cerr << " dev_cov " << m.dev_coverage << " dev_ppl " << m.dev_ppl;
    std::cerr << "\n";
  };

  try {
    if (do_mle) {
      const auto rep = train_mle(*gen, enc_train, cfg, enc_dev.empty() ? nullptr : &dev_eval, on_epoch);
      gen->save((dir / kMleCkpt).string(), vocab->hash());
      std::cerr << "mle: best epoch " << rep.best_epoch << "\n";
    }
    if (do_rl) {
      TrainConfig rl_cfg = cfg;
      rl_cfg.epochs = o.epochs_rl;
      const ScoringContext ctx{&scorers->plain, &scorers->finetuned, o.bounds};
      train_rl(*gen, enc_train, rl_cfg, ctx, enc_dev.empty() ? nullptr : &dev_eval, on_epoch);
      gen->save((dir / kRlCkpt).string(), vocab->hash());
    }
  } catch (const NumericError&) {
    const fs::path dump = dir / "nan_dump.ckpt";
    gen->save(dump.string(), vocab->hash());
    std::cerr << "parameters dumped to " << dump.string() << "\n";
    throw;
  }
  return 0;
}

// ---- generate ----

struct GenerateOpts {
  std::string model, checkpoint, data, out, profiles;
  std::string preset = "plain";
  DecodeConfig decode;
  bool interpolate = false, guided_beam = false, rerank = false;
  std::string rerank_profile = "rerank";
  std::string fragment_profile = "guided_beam";
  std::string rerank_pool = "union";
  std::string interp_lm = "finetuned";
  PplBounds bounds;
};

struct GenerateHandles {
  CLI::Option* beam_k;
  CLI::Option* alpha;
  CLI::Option* max_steps;
  CLI::Option* interpolate;
  CLI::Option* guided_beam;
  CLI::Option* rerank;
  CLI::Option* rerank_pool;
};

GenerateHandles add_generate(CLI::App& app, GenerateOpts& o) {
  auto* sub = app.add_subcommand("generate", "decode one sentence per input record");
  add_config(sub);
  GenerateHandles h{};
  sub->add_option("--model", o.model, "model directory written by train")->required();
  sub->add_option("--checkpoint", o.checkpoint, "generator checkpoint (default <model>/rl.ckpt, else mle.ckpt)");
  sub->add_option("--data", o.data, "input records (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output JSONL")->required();
  sub->add_option("--preset", o.preset, "plain|unilm|beam-r|beam-m|beam-m-r|gbeam-r|gd|gbeam-m-r|rlb-gd")
      ->capture_default_str();
  h.beam_k = sub->add_option("--beam-k", o.decode.beam_k)->capture_default_str();
  h.alpha = sub->add_option("--alpha", o.decode.alpha, "generator weight in interpolation")->capture_default_str();
  h.max_steps = sub->add_option("--max-steps", o.decode.max_steps)->capture_default_str();
  h.interpolate = sub->add_flag("--interpolate,!--no-interpolate", o.interpolate, "mix in the scorer's next-token distribution");
  h.guided_beam = sub->add_flag("--guided-beam,!--no-guided-beam", o.guided_beam, "run the coverage-guided second beam");
  h.rerank = sub->add_flag("--rerank,!--no-rerank", o.rerank, "re-rank the final pool by comprehensive score");
  sub->add_option("--rerank-profile", o.rerank_profile)->capture_default_str();
  sub->add_option("--fragment-profile", o.fragment_profile, "weights for guided-beam fragment scores")
      ->capture_default_str();
  h.rerank_pool = sub->add_option("--rerank-pool", o.rerank_pool, "b, bg or union")
                      ->check(CLI::IsMember({"b", "bg", "union"}))
                      ->capture_default_str();
  sub->add_option("--interp-lm", o.interp_lm, "scorer used for interpolation: plain or finetuned")
      ->check(CLI::IsMember({"plain", "finetuned"}))
      ->capture_default_str();
  sub->add_option("--profiles", o.profiles, "weight profile overrides file")->check(CLI::ExistingFile);
  sub->add_option("--ppl-lower", o.bounds.lower)->capture_default_str();
  sub->add_option("--ppl-upper", o.bounds.upper)->capture_default_str();
  return h;
}

fs::path pick_checkpoint(const fs::path& model, const std::string& explicit_ckpt) {
  if (!explicit_ckpt.empty()) {
    if (!fs::exists(explicit_ckpt)) throw UsageError("checkpoint " + explicit_ckpt + " not found");
    return explicit_ckpt;
  }
  for (const char* name : {kRlCkpt, kMleCkpt})
    if (fs::exists(model / name)) return model / name;
  throw UsageError("no checkpoint in " + model.string() + " (expected rl.ckpt or mle.ckpt)");
}

int run_generate(const GenerateOpts& o, const GenerateHandles& h, const CLI::App* sub) {
  const fs::path model(o.model);
  const fs::path ckpt = pick_checkpoint(model, o.checkpoint);
  WeightProfiles profiles;
  if (!o.profiles.empty()) profiles.load_overrides(o.profiles);

  DecodeConfig cfg = decode_preset(o.preset);
  if (h.beam_k->count()) cfg.beam_k = o.decode.beam_k;
  if (h.alpha->count()) cfg.alpha = o.decode.alpha;
  if (h.max_steps->count()) cfg.max_steps = o.decode.max_steps;
  if (h.interpolate->count()) cfg.interpolation_on = o.interpolate;
  if (h.guided_beam->count()) cfg.guided_beam_on = o.guided_beam;
  if (h.rerank->count()) cfg.rerank_on = o.rerank;
  cfg.rerank_pool = parse_rerank_pool(o.rerank_pool);
  cfg.rerank_weights = profiles.get(o.rerank_profile);
  cfg.fragment_weights = profiles.get(o.fragment_profile);
  cfg.validate();
  o.bounds.validate();
  echo_config(sub, std::cerr);
  std::cerr << "# decode: preset=" << o.preset << " interpolate=" << cfg.interpolation_on
            << " guided_beam=" << cfg.guided_beam_on << " rerank=" << cfg.rerank_on << " checkpoint=" << ckpt.string()
            << "\n";

  const Vocab vocab = Vocab::load((model / kVocabFile).string());
  const auto plain = TrigramScorer::load((model / kPlainScorerFile).string(), vocab.hash());
  const auto finetuned = TrigramScorer::load((model / kFinetunedScorerFile).string(), vocab.hash());
  const auto gen = TrainableGenerator::load(ckpt.string(), vocab.hash());
  const auto records = load_dataset(o.data);
  const auto enc = encode_records(vocab, records);

  const ScoringContext ctx{&plain, &finetuned, o.bounds};
  const DecodeScorers scorers{o.interp_lm == "plain" ? &plain : &finetuned, ctx};
  auto out = open_out(o.out);
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const TokenSequence seq = generate(gen, enc[i].query, cfg, scorers).output;
    const auto words = vocab.decode(seq.content());
    const ScoreBreakdown s = full_breakdown(cfg.rerank_weights, enc[i].query, seq, ctx);
    nlohmann::ordered_json j;
    j["concepts"] = records[i].concepts.words();
    j["output"] = join_tokens(words);
    j["log_prob"] = seq.log_prob;
    j["scores"] = {{"s_ppl", s.s_ppl}, {"s_ppl_f", s.s_ppl_f}, {"s_cov", s.s_cov}, {"s_len", s.s_len}, {"r", s.r}};
    out << j.dump() << "\n";
  }
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  std::string outputs, data, model, out, json_out;
  std::string scorer = "finetuned";
};

void add_evaluate(CLI::App& app, EvaluateOpts& o) {
  auto* sub = app.add_subcommand("evaluate", "BLEU, ROUGE, coverage, perplexity, length and concept-order distance");
  add_config(sub);
  sub->add_option("--outputs", o.outputs, "generate output JSONL")->required()->check(CLI::ExistingFile);
  sub->add_option("--data", o.data, "records with references, same order")->required()->check(CLI::ExistingFile);
  sub->add_option("--model", o.model, "model directory (vocabulary and scorers)")->required();
  sub->add_option("--out", o.out, "text report (key = value)")->required();
  sub->add_option("--json", o.json_out, "machine-readable report (default <out>.json)");
  sub->add_option("--scorer", o.scorer, "perplexity scorer: plain or finetuned")
      ->check(CLI::IsMember({"plain", "finetuned"}))
      ->capture_default_str();
}

std::vector<std::vector<std::string>> load_outputs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(tokenize(j.at("output").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError(path + ": no outputs");
  return out;
}

int run_evaluate(const EvaluateOpts& o, const CLI::App* sub) {
  echo_config(sub, std::cerr);
  const fs::path model(o.model);
  const Vocab vocab = Vocab::load((model / kVocabFile).string());
  const auto scorer = TrigramScorer::load(
      (model / (o.scorer == "plain" ? kPlainScorerFile : kFinetunedScorerFile)).string(), vocab.hash());
  const auto outputs = load_outputs(o.outputs);
  const auto records = load_dataset(o.data);
  const EvalReport rep = evaluate_outputs(records, outputs, scorer, vocab);
  open_out(o.out) << rep.to_text();
  open_out(o.json_out.empty() ? o.out + ".json" : o.json_out) << rep.to_json() << "\n";
  std::cout << rep.to_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guidedgen: concept-set to sentence generation with reward-guided decoding"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  SynthOpts synth;
  TrainOpts train;
  GenerateOpts gen;
  EvaluateOpts eval;
  add_synth(app, synth);
  add_train(app, train);
  const GenerateHandles gen_handles = add_generate(app, gen);
  add_evaluate(app, eval);

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth") return run_synth(synth);
    if (name == "train") return run_train(train, sub);
    if (name == "generate") return run_generate(gen, gen_handles, sub);
    if (name == "evaluate") return run_evaluate(eval, sub);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
