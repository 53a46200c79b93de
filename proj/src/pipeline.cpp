#include "fsgen/pipeline.hpp"

#include "fsgen/checkpoint.hpp"
#include "fsgen/collector.hpp"
#include "fsgen/search.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fsgen {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t rows_fnv(const std::vector<Index>& rows) {
  std::string buf;
  buf.reserve(rows.size() * 4);
  for (Index r : rows) {
    buf += std::to_string(r);
    buf += ',';
  }
  return fnv1a64(buf);
}

RowPartition partition(const RunConfig& cfg, const Dataset& ds) {
  return split_ab_rows(ds, cfg.ab_ratio, derive_seed(cfg.seed, "ab-split"));
}

void ensure_out_dir(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
}

Corpus load_checked_corpus(const RunConfig& cfg, const ArtifactPaths& paths,
                           const Dataset& ds) {
  Corpus corpus = load_corpus(paths.corpus);
  if (corpus.config_hash != collect_config_hash(cfg))
    throw ArtifactError("corpus " + paths.corpus.string() +
                        " was produced under a different configuration");
  if (corpus.seed != cfg.seed)
    throw ArtifactError("corpus " + paths.corpus.string() +
                        " was produced with a different seed");
  if (corpus.vocab.n_features != static_cast<int>(ds.n_features()))
    throw ArtifactError("corpus vocabulary does not match the dataset width");
  return corpus;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<LossRow> read_loss_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open loss history: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,L,L_rec,L_evt,L_kl")
    throw ArtifactError("loss history has an unexpected header: " + path.string());
  std::vector<LossRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRow row;
    char* end = nullptr;
    row.epoch = static_cast<int>(std::strtol(line.c_str(), &end, 10));
    double* cells[4] = {&row.total, &row.rec, &row.evt, &row.kl};
    for (double* cell : cells) {
      if (*end != ',')
        throw ArtifactError("malformed loss history row: " + line);
      *cell = std::strtod(end + 1, &end);
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw ArtifactError("loss history is empty: " + path.string());
  return rows;
}

}  // namespace

ArtifactPaths artifact_paths(const RunConfig& cfg) {
  std::filesystem::path out(cfg.out_dir);
  return {out / "corpus.jsonl",      out / "model.ckpt",
          out / "loss_history.csv",  out / "report.json",
          out / "synthetic.csv",     out / "synthetic_truth.json"};
}

Dataset load_input(const RunConfig& cfg) {
  if (cfg.dataset_path.empty()) return make_synthetic_planted(cfg.synthetic).first;
  return load_csv(cfg.dataset_path, cfg.target_column, cfg.task);
}

ArtifactPaths cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.dataset_path.empty())
    throw ConfigError("synth needs a synthetic dataset config, not a CSV path");
  auto [ds, truth] = make_synthetic_planted(cfg.synthetic);
  ArtifactPaths paths = artifact_paths(cfg);
  ensure_out_dir(cfg);
  write_csv(ds, paths.synthetic_csv, cfg.target_column);

  json t;
  t["informative"] = truth.informative;
  t["interaction_weight"] = truth.interaction_weight;
  std::vector<double> w(truth.weights.data(),
                        truth.weights.data() + truth.weights.size());
  t["weights"] = w;
  std::ofstream out(paths.synthetic_truth);
  out << t.dump(2) << '\n';
  if (!out) throw ArtifactError("cannot write " + paths.synthetic_truth.string());
  return paths;
}

std::filesystem::path cmd_collect(const RunConfig& cfg) {
  cfg.validate();
  Dataset ds = load_input(cfg);
  ArtifactPaths paths = artifact_paths(cfg);
  ensure_out_dir(cfg);

  try {
    RowPartition part = partition(cfg, ds);
    Dataset a = select_rows(ds, part.a_rows);
    std::vector<CorpusRecord> records =
        cfg.collector == "rl"
            ? collect(a, cfg.collect_epochs, cfg.model_kind(), cfg.seed, cfg.dqn)
            : random_collect(a, cfg.collect_epochs, cfg.model_kind(), cfg.seed);
    Corpus corpus{FeatureTokenVocab{static_cast<int>(a.n_features())},
                  std::move(records), collect_config_hash(cfg), cfg.seed,
                  cfg.collector};
    save_corpus(corpus, paths.corpus);
  } catch (const Error& e) {
    throw StageFailure(exit_code::collect, std::string("collect stage: ") + e.what());
  }
  return paths.corpus;
}

std::filesystem::path cmd_train(const RunConfig& cfg) {
  cfg.validate();
  Dataset ds = load_input(cfg);
  ArtifactPaths paths = artifact_paths(cfg);
  Corpus corpus = load_checked_corpus(cfg, paths, ds);

  try {
    std::vector<CorpusRecord> augmented =
        augment(corpus.vocab, corpus.records, cfg.hyper.n_shuffles, cfg.seed);
    SubsetVae<float> model(corpus.vocab, cfg.hyper, cfg.seed);
    std::vector<LossRow> history = model.train(augmented, cfg.seed);

    std::ofstream out(paths.loss_history);
    out << "epoch,L,L_rec,L_evt,L_kl\n";
    for (const LossRow& row : history)
      out << row.epoch << ',' << fmt17(row.total) << ',' << fmt17(row.rec) << ','
          << fmt17(row.evt) << ',' << fmt17(row.kl) << '\n';
    if (!out)
      throw ArtifactError("cannot write " + paths.loss_history.string());
    save_checkpoint(paths.checkpoint.string(), model, train_config_hash(cfg));
  } catch (const ArtifactError&) {
    throw;
  } catch (const Error& e) {
    throw StageFailure(exit_code::train, std::string("train stage: ") + e.what());
  }
  return paths.checkpoint;
}

namespace {

std::string select_impl(const RunConfig& cfg, double collect_s, double train_s) {
  cfg.validate();
  const Clock::time_point t0 = Clock::now();
  Dataset ds = load_input(cfg);
  ArtifactPaths paths = artifact_paths(cfg);
  Corpus corpus = load_checked_corpus(cfg, paths, ds);

  std::uint64_t ckpt_hash = 0;
  SubsetVae<float> model = load_checkpoint(paths.checkpoint.string(), &ckpt_hash);
  if (ckpt_hash != train_config_hash(cfg))
    throw ArtifactError("checkpoint " + paths.checkpoint.string() +
                        " was produced under a different configuration");
  if (model.meta.seed != cfg.seed)
    throw ArtifactError("checkpoint " + paths.checkpoint.string() +
                        " was produced with a different seed");
  if (model.vocab().n_features != corpus.vocab.n_features)
    throw ArtifactError("checkpoint and corpus disagree on the vocabulary");
  std::vector<LossRow> history = read_loss_history(paths.loss_history);

  json report;
  try {
    RowPartition part = partition(cfg, ds);
    Dataset a = select_rows(ds, part.a_rows);

    std::vector<CandidateResult> candidates;
    std::vector<std::string> diagnostics;
    CandidateResult best =
        select_best(model, corpus.records, a, cfg.model_kind(), cfg.search,
                    cfg.seed, &candidates, &diagnostics);

    // Subset B exists only from here on; everything above saw A rows alone.
    Dataset b = select_rows(ds, part.b_rows);
    const std::uint64_t final_seed = derive_seed(cfg.seed, "final-score");
    UtilityScore chosen_b =
        fit_predict_score(a, b, best.decoded, cfg.model_kind(), final_seed);
    std::vector<int> all_features(static_cast<std::size_t>(ds.n_features()));
    for (std::size_t i = 0; i < all_features.size(); ++i)
      all_features[i] = static_cast<int>(i);
    UtilityScore full_b =
        fit_predict_score(a, b, all_features, cfg.model_kind(), final_seed);
    std::vector<int> kbest =
        kbest_baseline(a, static_cast<int>(best.decoded.size()));
    UtilityScore kbest_b =
        fit_predict_score(a, b, kbest, cfg.model_kind(), final_seed);

    bool disjoint = true;
    for (Index r : part.b_rows)
      disjoint = disjoint &&
                 !std::binary_search(part.a_rows.begin(), part.a_rows.end(), r);
    const bool covers = static_cast<Index>(part.a_rows.size() +
                                           part.b_rows.size()) == ds.n_samples();

    report["audit"] = {
        {"a_row_count", part.a_rows.size()},
        {"b_row_count", part.b_rows.size()},
        {"a_rows_fnv", hex64(rows_fnv(part.a_rows))},
        {"b_rows_fnv", hex64(rows_fnv(part.b_rows))},
        {"disjoint", disjoint},
        {"covers_all_rows", covers},
        {"b_used_only_in_stage", "report"}};
    report["artifacts"] = {{"corpus", paths.corpus.string()},
                           {"checkpoint", paths.checkpoint.string()},
                           {"loss_history", paths.loss_history.string()},
                           {"report", paths.report.string()}};
    report["augmentation"] = {
        {"n_shuffles", cfg.hyper.n_shuffles},
        {"base_records", corpus.records.size()},
        {"trained_records",
         corpus.records.size() *
             (static_cast<std::size_t>(cfg.hyper.n_shuffles) + 1)}};

    json cand_list = json::array();
    for (const CandidateResult& cand : candidates) {
      json c;
      c["seed_set"] = std::vector<int>(cand.seed.interior().begin(),
                                       cand.seed.interior().end());
      c["decoded"] = cand.decoded;
      c["downstream_a"] = cand.downstream.value;
      c["predicted_before"] = cand.predicted_before;
      c["predicted_after"] = cand.predicted_after;
      cand_list.push_back(std::move(c));
    }
    report["candidates"] = std::move(cand_list);
    report["diagnostics"] = diagnostics;

    std::vector<std::string> names;
    for (int idx : best.decoded)
      names.push_back(ds.feature_names[static_cast<std::size_t>(idx)]);
    report["chosen"] = {{"indices", best.decoded},
                        {"names", names},
                        {"size", best.decoded.size()},
                        {"predicted_before", best.predicted_before},
                        {"predicted_after", best.predicted_after}};

    report["config"] = json::parse(config_echo(cfg));
    report["config_hash"] = hex64(config_hash(cfg));
    report["seed"] = cfg.seed;

    json curve = json::array();
    for (const LossRow& row : history)
      curve.push_back({{"epoch", row.epoch},
                       {"total", row.total},
                       {"rec", row.rec},
                       {"evt", row.evt},
                       {"kl", row.kl}});
    report["losses"] = {{"curve", std::move(curve)},
                        {"final_total", history.back().total},
                        {"final_rec", history.back().rec},
                        {"final_evt", history.back().evt},
                        {"final_kl", history.back().kl}};

    report["scores"] = {{"metric", to_string(chosen_b.metric)},
                        {"chosen_b", chosen_b.value},
                        {"chosen_b_clamped", chosen_b.clamped01()},
                        {"full_b", full_b.value},
                        {"kbest_b", kbest_b.value},
                        {"kbest_k", kbest.size()},
                        {"kbest_indices", kbest}};
  } catch (const Error& e) {
    throw StageFailure(exit_code::select, std::string("select stage: ") + e.what());
  }

  const double select_s = seconds_since(t0);
  report["timings"] = {{"collect_s", collect_s},
                       {"train_s", train_s},
                       {"select_s", select_s},
                       {"total_s", collect_s + train_s + select_s}};

  ensure_out_dir(cfg);
  std::string text = report.dump(2) + "\n";
  std::ofstream out(artifact_paths(cfg).report);
  out << text;
  if (!out)
    throw ArtifactError("cannot write " + artifact_paths(cfg).report.string());
  return text;
}

}  // namespace

std::string cmd_select(const RunConfig& cfg) { return select_impl(cfg, 0.0, 0.0); }

std::string cmd_pipeline(const RunConfig& cfg, const std::string& stage_only) {
  if (stage_only == "collect") return cmd_collect(cfg).string();
  if (stage_only == "train") return cmd_train(cfg).string();
  if (stage_only == "select") return cmd_select(cfg);
  if (!stage_only.empty())
    throw ConfigError("unknown stage '" + stage_only +
                      "' (expected collect, train or select)");

  Clock::time_point t0 = Clock::now();
  cmd_collect(cfg);
  const double collect_s = seconds_since(t0);
  t0 = Clock::now();
  cmd_train(cfg);
  const double train_s = seconds_since(t0);
  return select_impl(cfg, collect_s, train_s);
}

std::string cmd_inspect(const std::filesystem::path& artifact) {
  std::ifstream in(artifact);
  if (!in) throw ArtifactError("cannot open artifact: " + artifact.string());
  std::string first;
  std::getline(in, first);
  in.close();

  std::ostringstream out;
  if (!first.empty() && first.front() == '{') {
    Corpus corpus = load_corpus(artifact);
    std::size_t rl = 0, random = 0, augmented = 0;
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (const auto& rec : corpus.records) {
      switch (rec.origin) {
        case RecordOrigin::RL: ++rl; break;
        case RecordOrigin::Random: ++random; break;
        case RecordOrigin::Augmented: ++augmented; break;
      }
      lo = std::min(lo, rec.utility);
      hi = std::max(hi, rec.utility);
      sum += rec.utility;
    }
    out << "corpus " << artifact.string() << "\n"
        << "  n_features       " << corpus.vocab.n_features << "\n"
        << "  records          " << corpus.records.size() << " (rl " << rl
        << ", random " << random << ", augmented " << augmented << ")\n"
        << "  distinct subsets " << distinct_subsets(corpus.records) << "\n"
        << "  utility          min " << lo << "  mean "
        << sum / static_cast<double>(corpus.records.size()) << "  max " << hi
        << "\n"
        << "  collector        " << corpus.collector << "\n"
        << "  seed             " << corpus.seed << "\n"
        << "  config_hash      " << hex64(corpus.config_hash) << "\n";
    return out.str();
  }

  std::uint64_t hash = 0;
  SubsetVae<float> model = load_checkpoint(artifact.string(), &hash);
  const Hyperparams& hp = model.hyper();
  out << "checkpoint " << artifact.string() << "\n"
      << "  n_features  " << model.vocab().n_features << "\n"
      << "  model       embed " << hp.token_embed_dim << ", enc x"
      << hp.n_layers_enc << ", dec x" << hp.n_layers_dec << ", heads "
      << hp.n_heads << ", latent " << hp.latent_dim << "\n"
      << "  parameters  " << model.params().scalar_count() << " scalars in "
      << model.params().count() << " tensors\n"
      << "  trained     " << model.meta.epochs_run << " epochs, seed "
      << model.meta.seed << "\n"
      << "  final loss  " << model.meta.final_loss << " (rec "
      << model.meta.final_rec << ", evt " << model.meta.final_evt << ", kl "
      << model.meta.final_kl << ")\n"
      << "  config_hash " << hex64(hash) << "\n";
  return out.str();
}

}  // namespace fsgen
