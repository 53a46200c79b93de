#include "fsgen/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fsgen {

namespace {

constexpr const char* kMagic = "fsgen-checkpoint-v1";

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Reads one manifest line and strips the expected key, returning the rest.
std::string expect(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line))
    throw ArtifactError("checkpoint manifest ends before '" + key + "'");
  if (line.compare(0, key.size(), key) != 0 || line.size() <= key.size() ||
      line[key.size()] != ' ')
    throw ArtifactError("checkpoint manifest expected '" + key + "', got '" +
                        line + "'");
  return line.substr(key.size() + 1);
}

double expect_double(std::istream& in, const std::string& key) {
  return std::stod(expect(in, key));
}

long long expect_int(std::istream& in, const std::string& key) {
  return std::stoll(expect(in, key));
}

}  // namespace

void save_checkpoint(const std::string& path, const SubsetVae<float>& model,
                     std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot open checkpoint for writing: " + path);

  const Hyperparams& hp = model.hyper();
  out << kMagic << '\n';
  out << "n_features " << model.vocab().n_features << '\n';
  out << "token_embed_dim " << hp.token_embed_dim << '\n';
  out << "n_layers_enc " << hp.n_layers_enc << '\n';
  out << "n_layers_dec " << hp.n_layers_dec << '\n';
  out << "n_heads " << hp.n_heads << '\n';
  out << "ffn_dim " << hp.ffn_dim << '\n';
  out << "latent_dim " << hp.latent_dim << '\n';
  out << "alpha " << fmt_double(hp.alpha) << '\n';
  out << "beta " << fmt_double(hp.beta) << '\n';
  out << "gamma " << fmt_double(hp.gamma) << '\n';
  out << "batch_size " << hp.batch_size << '\n';
  out << "epochs " << hp.epochs << '\n';
  out << "learning_rate " << fmt_double(hp.learning_rate) << '\n';
  out << "n_shuffles " << hp.n_shuffles << '\n';
  out << "dropout " << fmt_double(hp.dropout) << '\n';
  out << "evaluator_width " << hp.evaluator_width << '\n';
  out << "seed " << model.meta.seed << '\n';
  out << "epochs_run " << model.meta.epochs_run << '\n';
  out << "final_loss " << fmt_double(model.meta.final_loss) << '\n';
  out << "final_rec " << fmt_double(model.meta.final_rec) << '\n';
  out << "final_evt " << fmt_double(model.meta.final_evt) << '\n';
  out << "final_kl " << fmt_double(model.meta.final_kl) << '\n';
  out << "config_hash " << hex64(config_hash) << '\n';

  std::size_t scalars = 0;
  for (const auto& p : model.params()) {
    out << "tensor " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols()
        << '\n';
    scalars += static_cast<std::size_t>(p.value.size());
  }
  out << "blob " << scalars << '\n';
  // Scalars are written in each tensor's column-major storage order.
  for (const auto& p : model.params())
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(float)));
  if (!out) throw ArtifactError("failed writing checkpoint: " + path);
}

SubsetVae<float> load_checkpoint(const std::string& path,
                                 std::uint64_t* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open checkpoint: " + path);

  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic)
    throw ArtifactError("unsupported checkpoint version tag: '" + magic + "'");

  FeatureTokenVocab vocab{static_cast<int>(expect_int(in, "n_features"))};
  Hyperparams hp;
  hp.token_embed_dim = static_cast<Index>(expect_int(in, "token_embed_dim"));
  hp.n_layers_enc = static_cast<int>(expect_int(in, "n_layers_enc"));
  hp.n_layers_dec = static_cast<int>(expect_int(in, "n_layers_dec"));
  hp.n_heads = static_cast<int>(expect_int(in, "n_heads"));
  hp.ffn_dim = static_cast<Index>(expect_int(in, "ffn_dim"));
  hp.latent_dim = static_cast<Index>(expect_int(in, "latent_dim"));
  hp.alpha = expect_double(in, "alpha");
  hp.beta = expect_double(in, "beta");
  hp.gamma = expect_double(in, "gamma");
  hp.batch_size = static_cast<Index>(expect_int(in, "batch_size"));
  hp.epochs = static_cast<int>(expect_int(in, "epochs"));
  hp.learning_rate = expect_double(in, "learning_rate");
  hp.n_shuffles = static_cast<int>(expect_int(in, "n_shuffles"));
  hp.dropout = expect_double(in, "dropout");
  hp.evaluator_width = static_cast<Index>(expect_int(in, "evaluator_width"));

  SubsetVae<float> model(vocab, hp, 0);
  model.meta.seed = static_cast<std::uint64_t>(expect_int(in, "seed"));
  model.meta.epochs_run = static_cast<int>(expect_int(in, "epochs_run"));
  model.meta.final_loss = expect_double(in, "final_loss");
  model.meta.final_rec = expect_double(in, "final_rec");
  model.meta.final_evt = expect_double(in, "final_evt");
  model.meta.final_kl = expect_double(in, "final_kl");
  std::uint64_t hash = std::stoull(expect(in, "config_hash"), nullptr, 16);
  if (config_hash) *config_hash = hash;

  std::vector<Param<float>*> order;
  std::size_t declared = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "blob") break;
    if (kind != "tensor")
      throw ArtifactError("checkpoint manifest has unexpected line: " + line);
    std::string name;
    Index rows = 0, cols = 0;
    if (!(ls >> name >> rows >> cols))
      throw ArtifactError("malformed tensor line: " + line);
    Param<float>* p = model.params().find(name);
    if (!p || p->value.rows() != rows || p->value.cols() != cols)
      throw ArtifactError("checkpoint tensor '" + name +
                          "' does not match the declared model shape");
    order.push_back(p);
    declared += static_cast<std::size_t>(rows * cols);
  }
  {
    std::istringstream ls(line);
    std::string kind;
    std::size_t count = 0;
    if (!(ls >> kind >> count) || kind != "blob" || count != declared)
      throw ArtifactError("checkpoint blob header disagrees with tensor table");
  }
  if (order.size() != model.params().count())
    throw ArtifactError("checkpoint tensor table is incomplete");

  for (Param<float>* p : order) {
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (in.gcount() !=
        static_cast<std::streamsize>(p->value.size() * sizeof(float)))
      throw ArtifactError("checkpoint blob truncated at tensor '" + p->name + "'");
  }
  return model;
}

}  // namespace fsgen
