#include "advexp/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace advexp {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>> kKeys = {
    {"attack",
     {"K", "S", "Z", "alpha", "gamma", "mode", "seed", "query_budget", "learning_rate", "baseline_decay", "dedup",
      "workers", "timing"}},
    {"model",
     {"embed_dim", "hidden", "latent", "type_dim", "max_decode_len", "min_freq", "init_scale", "steps", "batch_size",
      "learning_rate", "kl_anneal_steps", "free_bits", "seed"}},
    {"data", {"matched_labels", "rules"}},
    {"scorer", {"kind", "path", "endpoint"}},
};

template <typename T>
void get(const pt::ptree& section, const std::string& name, const char* key, T& out) {
  if (auto v = section.get_optional<std::string>(key)) {
    try {
      out = section.get<T>(key);
    } catch (const pt::ptree_error&) {
      throw FormatError("config [" + name + "] " + key + ": bad value '" + *v + "'");
    }
  }
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

AppConfig parse_config(const std::string& ini_text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  for (const auto& [name, section] : tree) {
    auto it = kKeys.find(name);
    if (it == kKeys.end()) throw FormatError("config: unknown section [" + name + "]");
    if (section.empty() && !section.data().empty()) throw FormatError("config: key '" + name + "' outside a section");
    for (const auto& [key, _] : section)
      if (!it->second.count(key)) throw FormatError("config [" + name + "]: unknown key '" + key + "'");
  }
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base_dir / q;
  };

  AppConfig c;
  const pt::ptree empty;
  const auto& a = tree.get_child("attack", empty);
  get(a, "attack", "K", c.attack.K);
  get(a, "attack", "S", c.attack.search.steps);
  get(a, "attack", "Z", c.attack.Z);
  get(a, "attack", "alpha", c.attack.search.alpha);
  get(a, "attack", "gamma", c.attack.search.gamma);
  get(a, "attack", "learning_rate", c.attack.search.learning_rate);
  get(a, "attack", "baseline_decay", c.attack.search.baseline_decay);
  get(a, "attack", "dedup", c.attack.search.dedup);
  get(a, "attack", "seed", c.attack.seed);
  get(a, "attack", "workers", c.workers);
  get(a, "attack", "timing", c.timing);
  if (auto m = a.get_optional<std::string>("mode")) {
    auto mode = parse_search_mode(trim(*m));
    if (!mode) throw FormatError("config [attack] mode: expected random or reinforce, got '" + *m + "'");
    c.attack.search.mode = *mode;
  }
  if (auto q = a.get_optional<std::string>("query_budget"); q && !trim(*q).empty() && trim(*q) != "none") {
    long v = 0;
    get(a, "attack", "query_budget", v);
    c.attack.query_budget = v;
  }

  const auto& m = tree.get_child("model", empty);
  get(m, "model", "embed_dim", c.model.embed_dim);
  get(m, "model", "hidden", c.model.hidden);
  get(m, "model", "latent", c.model.latent);
  get(m, "model", "type_dim", c.model.type_dim);
  get(m, "model", "max_decode_len", c.model.max_decode_len);
  get(m, "model", "min_freq", c.model.min_freq);
  get(m, "model", "init_scale", c.model.init_scale);
  get(m, "model", "steps", c.pretrain.steps);
  get(m, "model", "batch_size", c.pretrain.batch_size);
  get(m, "model", "learning_rate", c.pretrain.learning_rate);
  get(m, "model", "kl_anneal_steps", c.pretrain.kl_anneal_steps);
  get(m, "model", "free_bits", c.pretrain.free_bits);
  get(m, "model", "seed", c.pretrain.seed);

  const auto& d = tree.get_child("data", empty);
  if (auto ml = d.get_optional<std::string>("matched_labels")) {
    std::stringstream ss(*ml);
    std::string item;
    while (std::getline(ss, item, ','))
      if (auto t = trim(item); !t.empty()) c.mapping.matched_labels.insert(t);
  }
  if (auto r = d.get_optional<std::string>("rules")) c.rules_path = resolve(trim(*r));

  const auto& s = tree.get_child("scorer", empty);
  if (auto k = s.get_optional<std::string>("kind")) c.scorer_kind = trim(*k);
  if (c.scorer_kind != "ngram" && c.scorer_kind != "external")
    throw FormatError("config [scorer] kind: expected ngram or external");
  if (auto p = s.get_optional<std::string>("path")) c.scorer_path = resolve(trim(*p));
  if (auto e = s.get_optional<std::string>("endpoint")) c.scorer_endpoint = trim(*e);

  c.attack.validate();
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace advexp
