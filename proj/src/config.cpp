#include "fsgen/config.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <string>

namespace fsgen {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& scope,
                  std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known)
      throw ConfigError("unknown config key '" + scope + "." + it.key() + "'");
  }
}

template <class T>
void read(const json& obj, const std::string& scope, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + scope + "." + key + "': " + e.what());
  }
}

json full_json(const RunConfig& c) {
  json j;
  j["dataset"] = {{"path", c.dataset_path},
                  {"target", c.target_column},
                  {"task", to_string(c.task)},
                  {"synthetic",
                   {{"n_real", c.synthetic.n_real},
                    {"n_fake", c.synthetic.n_fake},
                    {"n_samples", c.synthetic.n_samples},
                    {"noise_std", c.synthetic.noise_std},
                    {"seed", c.synthetic.seed}}}};
  j["split"] = {{"ab_ratio", c.ab_ratio}};
  j["collector"] = {{"kind", c.collector},
                    {"epochs", c.collect_epochs},
                    {"buffer_capacity", c.dqn.buffer_capacity},
                    {"minibatch", c.dqn.minibatch},
                    {"discount", c.dqn.discount},
                    {"target_sync", c.dqn.target_sync},
                    {"eps_start", c.dqn.eps_start},
                    {"eps_min", c.dqn.eps_min},
                    {"eps_decay", c.dqn.eps_decay},
                    {"p_participate", c.dqn.p_participate},
                    {"q_hidden", c.dqn.q_hidden},
                    {"learning_rate", c.dqn.learning_rate}};
  j["downstream"] = {{"model", c.model},
                     {"n_trees", c.tree.n_trees},
                     {"max_depth", c.tree.max_depth},
                     {"min_leaf", c.tree.min_leaf},
                     {"bootstrap", c.tree.bootstrap},
                     {"feature_subsample", c.tree.feature_subsample},
                     {"knn_k", c.knn.k}};
  j["hyper"] = {{"token_embed_dim", c.hyper.token_embed_dim},
                {"n_layers_enc", c.hyper.n_layers_enc},
                {"n_layers_dec", c.hyper.n_layers_dec},
                {"n_heads", c.hyper.n_heads},
                {"ffn_dim", c.hyper.ffn_dim},
                {"latent_dim", c.hyper.latent_dim},
                {"alpha", c.hyper.alpha},
                {"beta", c.hyper.beta},
                {"gamma", c.hyper.gamma},
                {"batch_size", c.hyper.batch_size},
                {"epochs", c.hyper.epochs},
                {"learning_rate", c.hyper.learning_rate},
                {"n_shuffles", c.hyper.n_shuffles},
                {"dropout", c.hyper.dropout},
                {"evaluator_width", c.hyper.evaluator_width}};
  j["search"] = {{"top_k", c.search.top_k},
                 {"eta", c.search.eta},
                 {"n_steps", c.search.n_steps},
                 {"max_decode_len", c.search.max_decode_len},
                 {"use_mean_latent", c.search.use_mean_latent},
                 {"safeguard", c.search.safeguard}};
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

}  // namespace

ModelKind RunConfig::model_kind() const {
  if (model == "tree_ensemble") return tree;
  if (model == "single_tree") return SingleTreeOptions{tree.max_depth, tree.min_leaf};
  if (model == "knn") return knn;
  throw ConfigError("unknown downstream model '" + model + "'");
}

void RunConfig::validate() const {
  if (!(ab_ratio > 0.0 && ab_ratio < 1.0))
    throw ConfigError("split.ab_ratio must lie in (0,1)");
  if (collector != "rl" && collector != "random")
    throw ConfigError("collector.kind must be 'rl' or 'random'");
  if (collect_epochs < 1) throw ConfigError("collector.epochs must be >= 1");
  if (dataset_path.empty()) {
    if (synthetic.n_real < 1 || synthetic.n_samples < 2)
      throw ConfigError("synthetic spec needs n_real >= 1 and n_samples >= 2");
  } else if (target_column.empty()) {
    throw ConfigError("dataset.target must name the target column");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must be non-empty");
  if (tree.n_trees < 1 || tree.max_depth < 1 || tree.min_leaf < 1)
    throw ConfigError("downstream tree options must be positive");
  if (knn.k < 1) throw ConfigError("downstream.knn_k must be >= 1");
  model_kind();  // rejects unknown model names
  dqn.validate();
  hyper.validate();
  search.validate();
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  RunConfig c;
  require_keys(j, "", {"dataset", "split", "collector", "downstream", "hyper",
                       "search", "seed", "out_dir"});
  read(j, "", "seed", c.seed);
  read(j, "", "out_dir", c.out_dir);

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    require_keys(d, "dataset", {"path", "target", "task", "synthetic"});
    read(d, "dataset", "path", c.dataset_path);
    read(d, "dataset", "target", c.target_column);
    if (d.contains("task")) c.task = task_from_string(d.at("task").get<std::string>());
    if (d.contains("synthetic")) {
      const json& s = d["synthetic"];
      require_keys(s, "dataset.synthetic",
                   {"n_real", "n_fake", "n_samples", "noise_std", "seed"});
      read(s, "dataset.synthetic", "n_real", c.synthetic.n_real);
      read(s, "dataset.synthetic", "n_fake", c.synthetic.n_fake);
      read(s, "dataset.synthetic", "n_samples", c.synthetic.n_samples);
      read(s, "dataset.synthetic", "noise_std", c.synthetic.noise_std);
      read(s, "dataset.synthetic", "seed", c.synthetic.seed);
    }
  }
  if (j.contains("split")) {
    require_keys(j["split"], "split", {"ab_ratio"});
    read(j["split"], "split", "ab_ratio", c.ab_ratio);
  }
  if (j.contains("collector")) {
    const json& k = j["collector"];
    require_keys(k, "collector",
                 {"kind", "epochs", "buffer_capacity", "minibatch", "discount",
                  "target_sync", "eps_start", "eps_min", "eps_decay",
                  "p_participate", "q_hidden", "learning_rate"});
    read(k, "collector", "kind", c.collector);
    read(k, "collector", "epochs", c.collect_epochs);
    read(k, "collector", "buffer_capacity", c.dqn.buffer_capacity);
    read(k, "collector", "minibatch", c.dqn.minibatch);
    read(k, "collector", "discount", c.dqn.discount);
    read(k, "collector", "target_sync", c.dqn.target_sync);
    read(k, "collector", "eps_start", c.dqn.eps_start);
    read(k, "collector", "eps_min", c.dqn.eps_min);
    read(k, "collector", "eps_decay", c.dqn.eps_decay);
    read(k, "collector", "p_participate", c.dqn.p_participate);
    read(k, "collector", "q_hidden", c.dqn.q_hidden);
    read(k, "collector", "learning_rate", c.dqn.learning_rate);
  }
  if (j.contains("downstream")) {
    const json& d = j["downstream"];
    require_keys(d, "downstream",
                 {"model", "n_trees", "max_depth", "min_leaf", "bootstrap",
                  "feature_subsample", "knn_k"});
    read(d, "downstream", "model", c.model);
    read(d, "downstream", "n_trees", c.tree.n_trees);
    read(d, "downstream", "max_depth", c.tree.max_depth);
    read(d, "downstream", "min_leaf", c.tree.min_leaf);
    read(d, "downstream", "bootstrap", c.tree.bootstrap);
    read(d, "downstream", "feature_subsample", c.tree.feature_subsample);
    read(d, "downstream", "knn_k", c.knn.k);
  }
  if (j.contains("hyper")) {
    const json& h = j["hyper"];
    require_keys(h, "hyper",
                 {"token_embed_dim", "n_layers_enc", "n_layers_dec", "n_heads",
                  "ffn_dim", "latent_dim", "alpha", "beta", "gamma", "batch_size",
                  "epochs", "learning_rate", "n_shuffles", "dropout",
                  "evaluator_width"});
    read(h, "hyper", "token_embed_dim", c.hyper.token_embed_dim);
    read(h, "hyper", "n_layers_enc", c.hyper.n_layers_enc);
    read(h, "hyper", "n_layers_dec", c.hyper.n_layers_dec);
    read(h, "hyper", "n_heads", c.hyper.n_heads);
    read(h, "hyper", "ffn_dim", c.hyper.ffn_dim);
    read(h, "hyper", "latent_dim", c.hyper.latent_dim);
    read(h, "hyper", "alpha", c.hyper.alpha);
    read(h, "hyper", "beta", c.hyper.beta);
    read(h, "hyper", "gamma", c.hyper.gamma);
    read(h, "hyper", "batch_size", c.hyper.batch_size);
    read(h, "hyper", "epochs", c.hyper.epochs);
    read(h, "hyper", "learning_rate", c.hyper.learning_rate);
    read(h, "hyper", "n_shuffles", c.hyper.n_shuffles);
    read(h, "hyper", "dropout", c.hyper.dropout);
    read(h, "hyper", "evaluator_width", c.hyper.evaluator_width);
  }
  if (j.contains("search")) {
    const json& s = j["search"];
    require_keys(s, "search", {"top_k", "eta", "n_steps", "max_decode_len",
                               "use_mean_latent", "safeguard"});
    read(s, "search", "top_k", c.search.top_k);
    read(s, "search", "eta", c.search.eta);
    read(s, "search", "n_steps", c.search.n_steps);
    read(s, "search", "max_decode_len", c.search.max_decode_len);
    read(s, "search", "use_mean_latent", c.search.use_mean_latent);
    read(s, "search", "safeguard", c.search.safeguard);
  }
  return c;
}

std::string config_echo(const RunConfig& cfg) { return full_json(cfg).dump(2); }

std::uint64_t config_hash(const RunConfig& cfg) {
  json j = full_json(cfg);
  j["seed"] = 0;
  j["out_dir"] = "";
  return fnv1a64(j.dump());
}

std::uint64_t collect_config_hash(const RunConfig& cfg) {
  json j = full_json(cfg);
  j["seed"] = 0;
  j["out_dir"] = "";
  j.erase("hyper");
  j.erase("search");
  return fnv1a64(j.dump());
}

std::uint64_t train_config_hash(const RunConfig& cfg) {
  json j = full_json(cfg);
  j["seed"] = 0;
  j["out_dir"] = "";
  j.erase("search");
  return fnv1a64(j.dump());
}

}  // namespace fsgen
