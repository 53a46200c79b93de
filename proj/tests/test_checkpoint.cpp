#include <doctest.h>

#include "fsgen/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fsgen;

namespace {

struct ScratchPath {
  std::filesystem::path path;
  explicit ScratchPath(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {}
  ~ScratchPath() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

SubsetVae<float> tiny_model() {
  Hyperparams hp;
  hp.token_embed_dim = 16;
  hp.n_layers_enc = 1;
  hp.n_layers_dec = 1;
  hp.n_heads = 2;
  hp.ffn_dim = 24;
  hp.latent_dim = 5;
  hp.evaluator_width = 7;
  hp.alpha = 0.75;
  hp.learning_rate = 3e-4;
  SubsetVae<float> model(FeatureTokenVocab{6}, hp, 13);
  model.meta.seed = 99;
  model.meta.epochs_run = 17;
  model.meta.final_loss = 0.125;
  model.meta.final_rec = 0.5;
  model.meta.final_evt = 0.0625;
  model.meta.final_kl = 0.25;
  return model;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  ScratchPath f("fsgen_ckpt_rt.bin");
  SubsetVae<float> model = tiny_model();
  save_checkpoint(f.path, model, 0xabcdef0123456789ull);

  std::uint64_t hash = 0;
  SubsetVae<float> back = load_checkpoint(f.path.string(), &hash);

  CHECK(hash == 0xabcdef0123456789ull);
  CHECK(back.vocab().n_features == 6);
  CHECK(back.hyper().token_embed_dim == 16);
  CHECK(back.hyper().alpha == 0.75);
  CHECK(back.hyper().learning_rate == 3e-4);
  CHECK(back.meta.seed == 99);
  CHECK(back.meta.epochs_run == 17);
  CHECK(back.meta.final_loss == 0.125);
  CHECK(back.meta.final_kl == 0.25);

  REQUIRE(back.params().count() == model.params().count());
  auto it = model.params().begin(), jt = back.params().begin();
  for (; it != model.params().end(); ++it, ++jt) {
    CHECK(it->name == jt->name);
    CHECK(it->value == jt->value);
  }

  // Behaviour carries over, not just bytes.
  TokenSequence probe = subset_to_sequence(model.vocab(), {0, 3});
  auto da = model.encode(probe);
  auto db = back.encode(probe);
  CHECK(da.m == db.m);
  CHECK(da.sigma == db.sigma);
}

TEST_CASE("checkpoint rejects a foreign version tag") {
  ScratchPath f("fsgen_ckpt_magic.bin");
  save_checkpoint(f.path, tiny_model(), 1);
  std::string bytes = slurp(f.path);
  bytes.replace(0, 19, "fsgen-checkpoint-v9");
  spit(f.path, bytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(f.path.string()),
                       doctest::Contains("version"), ArtifactError);
}

TEST_CASE("checkpoint rejects a tensor table that contradicts the header") {
  ScratchPath f("fsgen_ckpt_shape.bin");
  save_checkpoint(f.path, tiny_model(), 1);
  std::string bytes = slurp(f.path);
  // Shrinking the declared vocabulary desynchronizes every tensor that
  // involves the embedding table.
  auto pos = bytes.find("n_features 6");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 12, "n_features 5");
  spit(f.path, bytes);
  CHECK_THROWS_AS(load_checkpoint(f.path.string()), ArtifactError);
}

TEST_CASE("checkpoint rejects a truncated blob") {
  ScratchPath f("fsgen_ckpt_trunc.bin");
  save_checkpoint(f.path, tiny_model(), 1);
  std::string bytes = slurp(f.path);
  spit(f.path, bytes.substr(0, bytes.size() - 10));
  CHECK_THROWS_WITH_AS(load_checkpoint(f.path.string()),
                       doctest::Contains("truncated"), ArtifactError);
}

TEST_CASE("checkpoint load reports a missing file") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), ArtifactError);
}
