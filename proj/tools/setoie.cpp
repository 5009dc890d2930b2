// setoie command-line entry point: convert, synth, train, extract, score.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data error, 3 numeric failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "setoie/core.hpp"
#include "setoie/data/corpus.hpp"
#include "setoie/data/lcs_align.hpp"
#include "setoie/data/lsoie.hpp"
#include "setoie/data/synth.hpp"
#include "setoie/data/tuples_tsv.hpp"
#include "setoie/errors.hpp"
#include "setoie/eval/carb.hpp"
#include "setoie/eval/oie2016.hpp"
#include "setoie/eval/report.hpp"
#include "setoie/eval/stopwords.hpp"
#include "setoie/eval/wire57.hpp"
#include "setoie/nn/checkpoint.hpp"
#include "setoie/nn/model.hpp"
#include "setoie/nn/train.hpp"

using json = nlohmann::json;
using namespace setoie;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

// ---- convert ---------------------------------------------------------------

struct ConvertOptions {
  std::string format = "imojie";
  std::string in, out, report;
  std::size_t slots = 20;

  json to_json() const {
    return {{"format", format}, {"in", in}, {"out", out}, {"report", report}, {"slots", slots}};
  }
};

json skipped_tuples_json(std::size_t record, const data::Alignment& a) {
  json out = json::array();
  for (const auto& s : a.skipped)
    out.push_back({{"record", record}, {"tuple", s.tuple_index}, {"reason", s.reason}, {"unmatched", s.unmatched}});
  return out;
}

int run_convert(const ConvertOptions& opt) {
  std::vector<data::MaskedRecord> records;
  json skipped_records = json::array();
  json skipped_tuples = json::array();
  json rejected_layers = json::array();
  std::size_t input_records = 0, input_tuples = 0, accepted_tuples = 0;

  auto add_generative = [&](const std::vector<data::GenerativeRecord>& in) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      ++input_records;
      input_tuples += in[i].tuples.size();
      auto a = data::lcs_align(in[i], opt.slots);
      for (auto& s : skipped_tuples_json(i, a)) skipped_tuples.push_back(s);
      accepted_tuples += a.accepted.size();
      if (a.grid.masks.empty()) {
        skipped_records.push_back({{"record", i}, {"sentence", in[i].sentence}, {"reason", "no alignable tuple"}});
        continue;
      }
      records.push_back({in[i].sentence, std::move(a.seq), std::move(a.grid)});
    }
  };

  if (opt.format == "imojie") {
    add_generative(data::read_imojie_jsonl(opt.in));
  } else if (opt.format == "tsv") {
    add_generative(data::read_tuples_tsv(opt.in));
  } else {
    const auto conll = data::read_conll(opt.in);
    for (std::size_t i = 0; i < conll.size(); ++i) {
      ++input_records;
      input_tuples += conll[i].layers.size();
      auto conv = data::lsoie_convert(conll[i], opt.slots);
      const std::string sentence = join_tokens(conll[i].tokens);
      for (const auto& reason : conv.rejected_layers)
        rejected_layers.push_back({{"record", i}, {"line", conll[i].first_line}, {"reason", reason}});
      if (!conv.accepted()) {
        skipped_records.push_back({{"record", i},
                                   {"line", conll[i].first_line},
                                   {"sentence", sentence},
                                   {"reason", "filtered: no layer with predicate, A0 and a further argument"}});
        continue;
      }
      accepted_tuples += conv.grid->masks.size();
      records.push_back({sentence, std::move(conv.seq), std::move(*conv.grid)});
    }
  }

  auto out = open_output(opt.out);
  data::write_masked_jsonl(out, records);
  json report{{"command", "convert"},
              {"config", opt.to_json()},
              {"input_records", input_records},
              {"output_records", records.size()},
              {"input_tuples", input_tuples},
              {"accepted_tuples", accepted_tuples},
              {"skipped_records", skipped_records},
              {"skipped_tuples", skipped_tuples}};
  if (opt.format == "lsoie") report["rejected_layers"] = rejected_layers;
  write_json_file(opt.report, report);
  std::cerr << "convert: " << records.size() << "/" << input_records << " records, " << accepted_tuples << "/"
            << input_tuples << " tuples\n";
  return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthOptions {
  std::string pool, out, masks, meta;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::vector<double> probabilities{0.1, 0.2, 0.35, 0.35};
  std::vector<std::string> conjunctions{"while", "and"};
  std::size_t slots = 20;

  json to_json() const {
    return {{"pool", pool},   {"out", out},       {"masks", masks},
            {"n", n},         {"seed", seed},     {"probabilities", probabilities},
            {"conjunctions", conjunctions}, {"slots", slots}};
  }
};

int run_synth(SynthOptions opt) {
  if (opt.meta.empty()) opt.meta = opt.out + ".meta.json";
  data::SynthConfig cfg;
  if (opt.probabilities.size() != 4) throw ConfigError("--probabilities takes four values");
  for (std::size_t k = 0; k < 4; ++k) cfg.templates[k].probability = opt.probabilities[k];
  cfg.conjunctions = opt.conjunctions;
  const auto pool = data::read_triplet_pool(opt.pool);
  const auto sentences = data::synth_generate(pool, opt.n, opt.seed, cfg);

  std::vector<data::GenerativeRecord> records;
  std::vector<data::MaskedRecord> masked;
  std::array<std::size_t, 4> counts{};
  std::size_t tuples = 0;
  for (const auto& s : sentences) {
    ++counts[static_cast<std::size_t>(s.kind)];
    tuples += s.gold.size();
    records.push_back({s.sentence, s.gold});
    if (!opt.masks.empty()) {
      auto seq = tokenize(s.sentence, true);
      masked.push_back({s.sentence, seq, grid_from_tuples(seq, s.spans, opt.slots)});
    }
  }
  {
    auto out = open_output(opt.out);
    data::write_tuples_tsv(out, records);
  }
  if (!opt.masks.empty()) {
    auto out = open_output(opt.masks);
    data::write_masked_jsonl(out, masked);
  }
  json freq = json::object(), cnt = json::object();
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string name(data::kTemplateNames[k]);
    cnt[name] = counts[k];
    freq[name] = opt.n ? static_cast<double>(counts[k]) / static_cast<double>(opt.n) : 0.0;
  }
  write_json_file(opt.meta, {{"command", "synth"},
                             {"config", opt.to_json()},
                             {"seed", opt.seed},
                             {"sentences", sentences.size()},
                             {"tuples", tuples},
                             {"template_counts", cnt},
                             {"template_frequencies", freq}});
  std::cerr << "synth: " << sentences.size() << " sentences, " << tuples << " tuples\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainOptions {
  std::vector<std::string> data;
  std::string out, metrics;
  std::uint64_t seed = 0;
  double lr = 5e-4;
  double weight_decay = 1e-6;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  double validation_fraction = 0.1;
  std::optional<double> stop_at_f1;
  std::size_t slots = 20;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t feedforward = 128;
  std::size_t max_length = 256;
  bool freeze_encoder = false;
  std::vector<double> class_weights{1.0, 2.0, 2.0, 2.0};
  std::string reduction = "mean";
  bool focal = false;
  double focal_gamma = 2.0;

  json to_json() const {
    return {{"data", data},
            {"out", out},
            {"seed", seed},
            {"lr", lr},
            {"weight_decay", weight_decay},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"validation_fraction", validation_fraction},
            {"stop_at_f1", stop_at_f1 ? json(*stop_at_f1) : json(nullptr)},
            {"slots", slots},
            {"hidden", hidden},
            {"layers", layers},
            {"feedforward", feedforward},
            {"max_length", max_length},
            {"freeze_encoder", freeze_encoder},
            {"class_weights", class_weights},
            {"reduction", reduction},
            {"focal", focal},
            {"focal_gamma", focal_gamma}};
  }
};

json history_json(const std::vector<nn::EpochMetrics>& history) {
  json out = json::array();
  for (const auto& m : history)
    out.push_back({{"epoch", m.epoch},
                   {"train_loss", m.train_loss},
                   {"validation_f1", m.validation_f1},
                   {"best_f1", m.best_f1},
                   {"improved", m.improved}});
  return out;
}

int run_train(TrainOptions opt) {
  if (opt.metrics.empty()) opt.metrics = opt.out + ".metrics.json";
  if (opt.class_weights.size() != kNumClasses) throw ConfigError("--class-weights takes four values");

  nn::TrainConfig tc;
  tc.learning_rate = opt.lr;
  tc.weight_decay = opt.weight_decay;
  tc.batch_size = opt.batch_size;
  tc.max_epochs = opt.epochs;
  tc.seed = opt.seed;
  tc.validation_fraction = opt.validation_fraction;
  tc.stop_at_f1 = opt.stop_at_f1;
  std::copy(opt.class_weights.begin(), opt.class_weights.end(), tc.loss.class_weights.begin());
  if (opt.reduction == "mean")
    tc.loss.reduction = LossReduction::MeanOverCells;
  else if (opt.reduction == "weighted_mean")
    tc.loss.reduction = LossReduction::WeightedMean;
  else
    tc.loss.reduction = LossReduction::Sum;
  tc.loss.focal = opt.focal;
  tc.loss.focal_gamma = opt.focal_gamma;
  tc.validate();

  nn::TaggerConfig mc;
  mc.encoder.hidden = opt.hidden;
  mc.encoder.layers = opt.layers;
  mc.encoder.feedforward = opt.feedforward;
  mc.encoder.max_length = opt.max_length;
  mc.slots = opt.slots;
  mc.freeze_encoder = opt.freeze_encoder;
  mc.seed = opt.seed;

  std::vector<nn::Example> examples;
  std::size_t too_long = 0;
  for (const auto& path : opt.data)
    for (auto& r : data::read_masked_jsonl(path, opt.slots)) {
      if (r.seq.size() > opt.max_length) {
        ++too_long;
        continue;
      }
      examples.push_back({std::move(r.seq), std::move(r.grid)});
    }
  if (too_long) std::cerr << "train: skipped " << too_long << " over-length sentences\n";
  if (examples.empty()) throw DataError("no training examples");

  std::vector<TokenSequence> seqs;
  for (const auto& e : examples) seqs.push_back(e.seq);
  auto model = nn::make_reference_tagger(nn::Vocabulary::build(seqs), mc);

  const json config = opt.to_json();
  auto checkpoint_meta = [&](std::size_t epoch, double f1) {
    return json{{"command", "train"}, {"config", config}, {"epoch", epoch}, {"validation_f1", f1}};
  };
  // The initial weights are the last good checkpoint until an epoch improves on them.
  nn::save_checkpoint(opt.out, model, mc, checkpoint_meta(0, 0.0));

  std::vector<nn::EpochMetrics> history;
  nn::EpochCallback<nn::ReferenceEncoder> on_epoch = [&](const nn::EpochMetrics& m,
                                                          const nn::ReferenceTagger& current) {
    history.push_back(m);
    std::cerr << "epoch " << m.epoch << "  loss " << m.train_loss << "  f1 " << m.validation_f1
              << (m.improved ? "  *" : "") << '\n';
    if (m.improved) nn::save_checkpoint(opt.out, current, mc, checkpoint_meta(m.epoch, m.validation_f1));
  };

  json metrics{{"command", "train"}, {"config", config}, {"examples", examples.size()}};
  try {
    const auto result = nn::train(model, std::span<const nn::Example>(examples), tc, on_epoch);
    metrics["status"] = "completed";
    metrics["history"] = history_json(result.history);
    metrics["best_epoch"] = result.best_epoch;
    metrics["best_f1"] = result.best_f1;
    metrics["train_size"] = result.train_indices.size();
    metrics["validation_size"] = result.validation_indices.size();
  } catch (const NumericalError&) {
    metrics["status"] = "diverged";
    metrics["history"] = history_json(history);
    write_json_file(opt.metrics, metrics);
    throw;
  }
  write_json_file(opt.metrics, metrics);
  return 0;
}

// ---- extract ---------------------------------------------------------------

struct ExtractOptions {
  std::string checkpoint, in, out, meta;
  bool require_all_parts = true;
  std::size_t batch_size = 32;

  json to_json() const {
    return {{"checkpoint", checkpoint}, {"in", in}, {"out", out}, {"require_all_parts", require_all_parts},
            {"batch_size", batch_size}};
  }
};

int run_extract(ExtractOptions opt) {
  if (opt.meta.empty()) opt.meta = opt.out + ".meta.json";
  if (opt.batch_size == 0) throw ConfigError("--batch-size must be at least 1");
  const auto loaded = nn::load_checkpoint(opt.checkpoint);
  const auto& model = loaded.model;

  std::ifstream in(opt.in);
  if (!in) throw DataError("cannot open '" + opt.in + "'");
  std::vector<std::string> sentences;
  std::vector<TokenSequence> seqs;
  std::vector<std::size_t> skipped_lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto seq = tokenize(line, true);
    if (seq.size() > loaded.config.encoder.max_length) {
      std::cerr << "warning: line " << lineno << ": " << seq.size() << " tokens exceeds the maximum of "
                << loaded.config.encoder.max_length << "; skipped\n";
      skipped_lines.push_back(lineno);
      continue;
    }
    sentences.push_back(line);
    seqs.push_back(std::move(seq));
  }

  std::vector<data::GenerativeRecord> records;
  std::size_t tuples = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t b = 0; b < seqs.size(); b += opt.batch_size) {
    const std::size_t end = std::min(b + opt.batch_size, seqs.size());
    for (std::size_t i = b; i < end; ++i) {
      const auto p = model.forward(seqs[i]);
      auto ex = nn::decode(p, seqs[i], opt.require_all_parts);
      tuples += ex.size();
      records.push_back({sentences[i], std::move(ex)});
    }
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  {
    auto out = open_output(opt.out);
    data::write_tuples_tsv(out, records);
  }
  write_json_file(opt.meta, {{"command", "extract"},
                             {"config", opt.to_json()},
                             {"model", nn::to_json(loaded.config)},
                             {"sentences", sentences.size()},
                             {"tuples", tuples},
                             {"skipped_lines", skipped_lines}});
  if (!skipped_lines.empty())
    std::cerr << "extract: skipped " << skipped_lines.size() << " over-length sentences\n";
  const double secs = elapsed.count();
  std::cout << "extract: " << sentences.size() << " sentences, " << tuples << " tuples; throughput "
            << (secs > 0 ? static_cast<double>(sentences.size()) / secs : 0.0) << " sentences/sec (batch "
            << opt.batch_size << ")\n";
  return 0;
}

// ---- score -----------------------------------------------------------------

struct ScoreOptions {
  std::string scheme, gold, pred, out;

  json to_json() const { return {{"scheme", scheme}, {"gold", gold}, {"pred", pred}, {"out", out}}; }
};

int run_score(const ScoreOptions& opt) {
  const auto gold = data::read_tuples_tsv(opt.gold);
  const auto pred = data::read_tuples_tsv(opt.pred);
  const auto corpus = eval::align_corpus(gold, pred);
  eval::BenchmarkReport report;
  if (opt.scheme == "oie2016")
    report = eval::oie2016_score(corpus);
  else if (opt.scheme == "wire57")
    report = eval::wire57_score(corpus);
  else if (opt.scheme == "carb")
    report = eval::carb_score(corpus);
  else
    report = eval::carb_1to1_score(corpus);
  for (const auto& s : report.unaligned_sentences)
    std::cerr << "warning: predicted sentence not in gold, excluded: " << s << '\n';
  json j = eval::to_json(report);
  j["command"] = "score";
  j["config"] = opt.to_json();
  j["stopwords"] = {{"version", eval::kStopwordsVersion}, {"checksum", eval::kStopwordsChecksum}};
  write_json_file(opt.out, j);
  std::cout << eval::format_table({report});
  return 0;
}

// Config files are read by the top-level parser, so `setoie train --config f`
// is rewritten to `setoie --config f train`.
std::vector<std::string> hoist_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc), config, rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = {args[i], args[i + 1]};
      ++i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = {args[i]};
    } else {
      rest.push_back(args[i]);
    }
  }
  rest.insert(rest.begin(), config.begin(), config.end());
  // CLI11 consumes the vector form from the back.
  std::reverse(rest.begin(), rest.end());
  return rest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-prediction open information extraction toolkit", "setoie"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file; options go under a [train] (or other command) section, flags override it");

  ConvertOptions conv;
  auto* convert = app.add_subcommand("convert", "Convert a corpus into mask-level training records");
  convert->add_option("--format", conv.format, "Input format")
      ->check(CLI::IsMember({"imojie", "lsoie", "tsv"}))
      ->capture_default_str();
  convert->add_option("--in", conv.in, "Input file")->required();
  convert->add_option("--out", conv.out, "Output JSON-lines file")->required();
  convert->add_option("--report", conv.report, "Skipped-record report (JSON)")->required();
  convert->add_option("--slots", conv.slots, "Maximum triplets per sentence")->capture_default_str();

  SynthOptions syn;
  auto* synth = app.add_subcommand("synth", "Generate template sentences from a triplet pool");
  synth->add_option("--pool", syn.pool, "Triplet pool TSV")->required();
  synth->add_option("--n", syn.n, "Number of sentences")->capture_default_str();
  synth->add_option("--seed", syn.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", syn.out, "Output tuples TSV")->required();
  synth->add_option("--masks", syn.masks, "Also write exact-span training records (JSON lines)");
  synth->add_option("--meta", syn.meta, "Metadata JSON (default: <out>.meta.json)");
  synth->add_option("--probabilities", syn.probabilities, "single, pair, comma, period")
      ->expected(4)
      ->capture_default_str();
  synth->add_option("--conjunctions", syn.conjunctions, "Pair-template conjunctions")->capture_default_str();
  synth->add_option("--slots", syn.slots, "Slot count for --masks")->capture_default_str();

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "Train the reference tagger");
  train->add_option("--data", tr.data, "Training records (JSON lines); repeatable")->required();
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  train->add_option("--metrics", tr.metrics, "Metrics JSON (default: <out>.metrics.json)");
  train->add_option("--seed", tr.seed)->capture_default_str();
  train->add_option("--lr", tr.lr)->capture_default_str();
  train->add_option("--weight-decay", tr.weight_decay)->capture_default_str();
  train->add_option("--batch-size", tr.batch_size)->capture_default_str();
  train->add_option("--epochs", tr.epochs)->capture_default_str();
  train->add_option("--validation-fraction", tr.validation_fraction)->capture_default_str();
  train->add_option("--stop-at-f1", tr.stop_at_f1);
  train->add_option("--slots", tr.slots)->capture_default_str();
  train->add_option("--hidden", tr.hidden)->capture_default_str();
  train->add_option("--layers", tr.layers)->capture_default_str();
  train->add_option("--feedforward", tr.feedforward)->capture_default_str();
  train->add_option("--max-length", tr.max_length)->capture_default_str();
  train->add_flag("--freeze-encoder", tr.freeze_encoder);
  train->add_option("--class-weights", tr.class_weights, "background, subject, relation, object")
      ->expected(4)
      ->capture_default_str();
  train->add_option("--reduction", tr.reduction)
      ->check(CLI::IsMember({"mean", "weighted_mean", "sum"}))
      ->capture_default_str();
  train->add_flag("--focal", tr.focal);
  train->add_option("--focal-gamma", tr.focal_gamma)->capture_default_str();

  ExtractOptions ext;
  auto* extract = app.add_subcommand("extract", "Extract tuples from sentences, one per line");
  extract->add_option("--checkpoint", ext.checkpoint)->required();
  extract->add_option("--in", ext.in, "sentences.txt")->required();
  extract->add_option("--out", ext.out, "Output tuples TSV")->required();
  extract->add_option("--meta", ext.meta, "Metadata JSON (default: <out>.meta.json)");
  extract->add_option("--require-all-parts", ext.require_all_parts)->capture_default_str();
  extract->add_option("--batch-size", ext.batch_size)->capture_default_str();

  ScoreOptions sc;
  auto* score = app.add_subcommand("score", "Score predicted tuples against gold");
  score->add_option("--scheme", sc.scheme)->required()->check(CLI::IsMember({"oie2016", "wire57", "carb", "carb11"}));
  score->add_option("--gold", sc.gold)->required();
  score->add_option("--pred", sc.pred)->required();
  score->add_option("--out", sc.out, "Report JSON")->required();

  try {
    app.parse(hoist_config(argc, argv));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*convert) return run_convert(conv);
    if (*synth) return run_synth(syn);
    if (*train) return run_train(tr);
    if (*extract) return run_extract(ext);
    if (*score) return run_score(sc);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "error: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
