#include "coalign/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "coalign/rng.hpp"

namespace coalign {

const char* const kVersion = "coalign 0.1.0";

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out;
  if (!(is >> out))
    throw InputError("config key '" + key + "': cannot parse '" + value + "'");
  std::string rest;
  if (is >> rest)
    throw InputError("config key '" + key + "': trailing data in '" + value +
                     "'");
  return out;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    auto str = [&f](const std::string& key, std::string RunConfig::*member) {
      f[key] = {[member](RunConfig& c, const std::string& v) { c.*member = v; },
                [member](const RunConfig& c) { return c.*member; }};
    };
    auto num = [&f](const std::string& key, auto member_ptr) {
      f[key] = {
          [member_ptr, key](RunConfig& c, const std::string& v) {
            c.*member_ptr = parse_number<
                std::remove_reference_t<decltype(c.*member_ptr)>>(key, v);
          },
          [member_ptr](const RunConfig& c) {
            std::ostringstream os;
            os.precision(17);
            os << c.*member_ptr;
            return os.str();
          }};
    };

    str("lang_i", &RunConfig::lang_i);
    str("lang_j", &RunConfig::lang_j);
    str("triples_i", &RunConfig::triples_i);
    str("triples_j", &RunConfig::triples_j);
    str("ills", &RunConfig::ills);
    str("ills_train", &RunConfig::ills_train);
    str("ills_valid", &RunConfig::ills_valid);
    str("ills_test", &RunConfig::ills_test);
    str("zero_shot", &RunConfig::zero_shot);
    str("descriptions_i", &RunConfig::descriptions_i);
    str("descriptions_j", &RunConfig::descriptions_j);
    str("word_vectors", &RunConfig::word_vectors);
    str("stopwords", &RunConfig::stopwords);

    f["ratio_train"] = {[](RunConfig& c, const std::string& v) {
                          c.ratios.train = parse_number<double>("ratio_train", v);
                        },
                        [](const RunConfig& c) {
                          std::ostringstream os;
                          os.precision(17);
                          os << c.ratios.train;
                          return os.str();
                        }};
    f["ratio_valid"] = {[](RunConfig& c, const std::string& v) {
                          c.ratios.valid = parse_number<double>("ratio_valid", v);
                        },
                        [](const RunConfig& c) {
                          std::ostringstream os;
                          os.precision(17);
                          os << c.ratios.valid;
                          return os.str();
                        }};
    f["ratio_test"] = {[](RunConfig& c, const std::string& v) {
                         c.ratios.test = parse_number<double>("ratio_test", v);
                       },
                       [](const RunConfig& c) {
                         std::ostringstream os;
                         os.precision(17);
                         os << c.ratios.test;
                         return os.str();
                       }};

    num("desc_len", &RunConfig::desc_len);
    num("word_dim", &RunConfig::word_dim);
    num("max_iterations", &RunConfig::max_iterations);
    num("seed", &RunConfig::seed);
    num("threads", &RunConfig::threads);

    auto sub = [&f](const std::string& key, auto outer, auto inner) {
      f[key] = {
          [outer, inner, key](RunConfig& c, const std::string& v) {
            (c.*outer).*inner = parse_number<
                std::remove_reference_t<decltype((c.*outer).*inner)>>(key, v);
          },
          [outer, inner](const RunConfig& c) {
            std::ostringstream os;
            os.precision(17);
            os << (c.*outer).*inner;
            return os.str();
          }};
    };
    sub("kgem_k1", &RunConfig::kgem, &KgemConfig::k1);
    sub("kgem_gamma", &RunConfig::kgem, &KgemConfig::gamma);
    sub("kgem_alpha", &RunConfig::kgem, &KgemConfig::alpha);
    sub("kgem_lr", &RunConfig::kgem, &KgemConfig::lr);
    sub("kgem_batch", &RunConfig::kgem, &KgemConfig::batch);
    sub("kgem_epochs_max", &RunConfig::kgem, &KgemConfig::epochs_max);
    sub("kgem_patience", &RunConfig::kgem, &KgemConfig::patience);
    sub("dem_k2", &RunConfig::dem, &DemConfig::k2);
    sub("dem_lr", &RunConfig::dem, &DemConfig::lr);
    sub("dem_batch", &RunConfig::dem, &DemConfig::batch);
    sub("dem_epochs_max", &RunConfig::dem, &DemConfig::epochs_max);
    sub("dem_patience", &RunConfig::dem, &DemConfig::patience);
    sub("tau", &RunConfig::policy, &ProposalPolicy::tau);
    sub("min_new_fraction", &RunConfig::policy, &ProposalPolicy::min_new_fraction);
    return f;
  }();
  return table;
}

void set_key(RunConfig& config, const std::string& key,
             const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw InputError("unknown config key '" + key + "'");
  it->second.set(config, value);
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config file: " + path);
  RunConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected 'key = value'");
    set_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

void apply_override(RunConfig& config, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos)
    throw InputError("override must be key=value: " + key_value);
  set_key(config, trim(key_value.substr(0, eq)),
          trim(key_value.substr(eq + 1)));
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream os;
  for (const auto& [key, field] : fields())
    os << key << " = " << field.get(config) << "\n";
  return os.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  const std::string s = serialize_config(config);
  return fnv1a(s.data(), s.size());
}

MultilingualKB prepare_kb(const RunConfig& config) {
  MultilingualKB kb;
  kb.languages = {config.lang_i, config.lang_j};
  kb.desc_len = config.desc_len;
  kb.seed = config.seed;

  KnowledgeGraph gi = ingest_triples(config.triples_i, config.lang_i);
  KnowledgeGraph gj = ingest_triples(config.triples_j, config.lang_j);

  if (!config.ills.empty()) {
    kb.ills = ingest_ills(config.ills, config.ratios, config.seed, gi, gj);
    if (!config.zero_shot.empty()) {
      IllStore zs = ingest_ill_splits("", "", "", config.zero_shot, gi, gj);
      kb.ills.zero_shot = std::move(zs.zero_shot);
      kb.ills.validate();
    }
  } else {
    kb.ills = ingest_ill_splits(config.ills_train, config.ills_valid,
                                config.ills_test, config.zero_shot, gi, gj);
  }

  kb.words = load_word_vectors(config.word_vectors, config.word_dim);
  const auto stop = load_stopwords(config.stopwords);
  kb.descriptions.emplace(
      config.lang_i,
      ingest_descriptions(config.descriptions_i, config.lang_i, stop,
                          config.desc_len, gi, kb.words));
  kb.descriptions.emplace(
      config.lang_j,
      ingest_descriptions(config.descriptions_j, config.lang_j, stop,
                          config.desc_len, gj, kb.words));

  kb.graphs.emplace(config.lang_i, std::move(gi));
  kb.graphs.emplace(config.lang_j, std::move(gj));
  kb.validate();
  return kb;
}

}  // namespace coalign
