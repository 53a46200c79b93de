#include "fsgen/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

namespace fsgen {

using nlohmann::json;

std::string to_string(RecordOrigin origin) {
  switch (origin) {
    case RecordOrigin::RL: return "rl";
    case RecordOrigin::Random: return "random";
    case RecordOrigin::Augmented: return "augmented";
  }
  throw Error("unreachable record origin");
}

RecordOrigin origin_from_string(const std::string& name) {
  if (name == "rl") return RecordOrigin::RL;
  if (name == "random") return RecordOrigin::Random;
  if (name == "augmented") return RecordOrigin::Augmented;
  throw DataError("unknown record origin '" + name + "'");
}

void validate_record(const FeatureTokenVocab& vocab, const CorpusRecord& rec) {
  validate_wire(vocab, rec.tokens);
  if (!(rec.utility >= 0.0 && rec.utility <= 1.0))
    throw DataError("corpus utility " + std::to_string(rec.utility) +
                    " outside [0,1]");
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write corpus file: " + path.string());

  json header;
  header["format"] = "fsgen-corpus-v1";
  header["n_features"] = corpus.vocab.n_features;
  header["vocab_fingerprint"] = hex64(corpus.vocab.fingerprint());
  header["config_hash"] = hex64(corpus.config_hash);
  header["seed"] = corpus.seed;
  header["collector"] = corpus.collector;
  out << header.dump() << '\n';

  for (const auto& rec : corpus.records) {
    validate_record(corpus.vocab, rec);
    json line;
    line["tokens"] = std::vector<int>(rec.tokens.interior().begin(),
                                      rec.tokens.interior().end());
    line["utility"] = rec.utility;
    line["origin"] = to_string(rec.origin);
    out << line.dump() << '\n';
  }
  if (!out) throw ArtifactError("corpus write failed: " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open corpus file: " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw ArtifactError("empty corpus file: " + path.string());

  Corpus corpus;
  try {
    json header = json::parse(line);
    if (header.value("format", "") != "fsgen-corpus-v1")
      throw ArtifactError("unrecognized corpus format in " + path.string());
    corpus.vocab.n_features = header.at("n_features").get<int>();
    corpus.config_hash =
        std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);
    corpus.seed = header.at("seed").get<std::uint64_t>();
    corpus.collector = header.value("collector", "");
    if (header.value("vocab_fingerprint", "") != hex64(corpus.vocab.fingerprint()))
      throw ArtifactError("corpus vocabulary fingerprint mismatch in " +
                          path.string());
  } catch (const json::exception& e) {
    throw ArtifactError("corpus header parse error in " + path.string() + ": " +
                        e.what());
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json obj = json::parse(line);
      CorpusRecord rec;
      rec.tokens = wrap_interior(corpus.vocab, obj.at("tokens").get<std::vector<int>>());
      rec.utility = obj.at("utility").get<double>();
      rec.origin = origin_from_string(obj.at("origin").get<std::string>());
      validate_record(corpus.vocab, rec);
      corpus.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ArtifactError("corpus line " + std::to_string(line_no) +
                          " parse error: " + e.what());
    }
  }
  if (corpus.records.empty())
    throw ArtifactError("corpus has no records: " + path.string());
  return corpus;
}

std::vector<CorpusRecord> augment(const FeatureTokenVocab& vocab,
                                  const std::vector<CorpusRecord>& records,
                                  int n_shuffles, std::uint64_t seed) {
  if (n_shuffles < 0) throw ConfigError("n_shuffles must be >= 0");
  std::mt19937_64 rng(derive_seed(seed, "augment"));
  std::vector<CorpusRecord> out;
  out.reserve(records.size() * (static_cast<std::size_t>(n_shuffles) + 1));
  for (const auto& rec : records) {
    validate_record(vocab, rec);
    out.push_back(rec);
    std::vector<int> interior(rec.tokens.interior().begin(),
                              rec.tokens.interior().end());
    for (int s = 0; s < n_shuffles; ++s) {
      std::vector<int> perm = interior;
      std::shuffle(perm.begin(), perm.end(), rng);
      CorpusRecord copy;
      copy.tokens = wrap_interior(vocab, std::move(perm));
      copy.utility = rec.utility;
      copy.origin = RecordOrigin::Augmented;
      out.push_back(std::move(copy));
    }
  }
  return out;
}

std::size_t distinct_subsets(const std::vector<CorpusRecord>& records) {
  std::set<std::vector<int>> seen;
  for (const auto& rec : records) {
    std::vector<int> key(rec.tokens.interior().begin(), rec.tokens.interior().end());
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    seen.insert(std::move(key));
  }
  return seen.size();
}

}  // namespace fsgen
