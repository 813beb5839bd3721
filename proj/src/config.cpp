#include "tabdl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "tabdl/errors.hpp"

namespace tabdl {

std::string to_string(Configuration c) {
  switch (c) {
  case Configuration::mlp: return "mlp";
  case Configuration::sae_mlp: return "sae_mlp";
  case Configuration::sae_cnn: return "sae_cnn";
  case Configuration::sae_with_mlp: return "sae_with_mlp";
  case Configuration::sae_with_cnn: return "sae_with_cnn";
  }
  return "unknown";
}

Configuration parse_configuration(std::string_view text) {
  for (auto c : kAllConfigurations)
    if (to_string(c) == text) return c;
  throw config_error("unknown configuration '" + std::string(text) +
                     "' (expected mlp, sae_mlp, sae_cnn, sae_with_mlp or sae_with_cnn)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(std::string_view v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) throw config_error("'" + std::string(v) + "' is not a valid number");
  return out;
}

std::size_t parse_count(std::string_view v) { return parse_number<std::size_t>(v); }

std::vector<std::size_t> parse_list(std::string_view v) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (item.empty()) throw config_error("empty entry in list");
    out.push_back(parse_count(item));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::pair<std::size_t, std::size_t> parse_pair(std::string_view v) {
  const auto list = parse_list(v);
  if (list.size() != 2) throw config_error("expected two comma-separated values, got '" + std::string(v) + "'");
  return {list[0], list[1]};
}

using Setter = std::function<void(std::string_view)>;

void classifier_keys(std::map<std::string, Setter>& keys, const std::string& section, ClassifierConfig& c) {
  keys[section + ".hidden"] = [&c](auto v) { c.hidden = parse_list(v); };
  keys[section + ".dropout"] = [&c](auto v) { c.dropout = parse_number<double>(v); };
  keys[section + ".epochs"] = [&c](auto v) { c.epochs = parse_count(v); };
  keys[section + ".batch"] = [&c](auto v) { c.batch = parse_count(v); };
  keys[section + ".lr"] = [&c](auto v) { c.lr = parse_number<double>(v); };
  keys[section + ".threshold"] = [&c](auto v) { c.threshold = parse_number<double>(v); };
}

} // namespace

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const std::string& source) {
  PipelineConfig cfg;
  std::string input_text;
  std::string output_text = "out";

  std::map<std::string, Setter> keys;
  keys["pipeline.input"] = [&](auto v) { input_text = std::string(v); };
  keys["pipeline.output"] = [&](auto v) { output_text = std::string(v); };
  keys["pipeline.seed"] = [&](auto v) { cfg.seed = parse_number<std::uint64_t>(v); };
  keys["pipeline.split_seed"] = [&](auto v) { cfg.split_seed = parse_number<std::uint64_t>(v); };
  keys["pipeline.train_ratio"] = [&](auto v) { cfg.train_ratio = parse_number<double>(v); };
  keys["pipeline.normalizer"] = [&](auto v) { cfg.normalizer = data::parse_normalizer_kind(v); };
  keys["pipeline.configuration"] = [&](auto v) { cfg.configuration = parse_configuration(v); };
  keys["pipeline.balance"] = [&](auto v) { cfg.balance = parse_balance_policy(v); };

  keys["vae.latent_dim"] = [&](auto v) { cfg.vae.latent_dim = parse_count(v); };
  keys["vae.hidden"] = [&](auto v) { cfg.vae.hidden = parse_list(v); };
  keys["vae.epochs"] = [&](auto v) { cfg.vae.epochs = parse_count(v); };
  keys["vae.batch"] = [&](auto v) { cfg.vae.batch = parse_count(v); };
  keys["vae.lr"] = [&](auto v) { cfg.vae.lr = parse_number<double>(v); };
  keys["vae.kl_weight"] = [&](auto v) { cfg.vae.kl_weight = parse_number<double>(v); };

  keys["sae.lambda"] = [&](auto v) { cfg.sae.lambda = parse_number<double>(v); };
  keys["sae.hidden"] = [&](auto v) { cfg.sae.hidden = parse_list(v); };
  keys["sae.latent"] = [&](auto v) { cfg.sae.latent = parse_count(v); };
  keys["sae.epochs"] = [&](auto v) { cfg.sae.epochs = parse_count(v); };
  keys["sae.batch"] = [&](auto v) { cfg.sae.batch = parse_count(v); };
  keys["sae.lr"] = [&](auto v) { cfg.sae.lr = parse_number<double>(v); };
  keys["sae.sparsity"] = [&](auto v) {
    if (v == "activations") cfg.sae.target = SparsityTarget::activations;
    else if (v == "weights") cfg.sae.target = SparsityTarget::weights;
    else throw config_error("sparsity must be 'activations' or 'weights'");
  };

  classifier_keys(keys, "mlp", cfg.mlp);
  classifier_keys(keys, "cnn", cfg.cnn);
  keys["cnn.filters"] = [&](auto v) { cfg.cnn.filters = parse_count(v); };
  keys["cnn.kernel"] = [&](auto v) { std::tie(cfg.cnn.kernel_h, cfg.cnn.kernel_w) = parse_pair(v); };
  keys["cnn.pool"] = [&](auto v) { std::tie(cfg.cnn.pool_h, cfg.cnn.pool_w) = parse_pair(v); };

  keys["joint.alpha"] = [&](auto v) { cfg.joint.alpha = parse_number<double>(v); };
  keys["joint.beta"] = [&](auto v) { cfg.joint.beta = parse_number<double>(v); };
  keys["joint.lambda"] = [&](auto v) { cfg.joint.lambda = parse_number<double>(v); };
  keys["joint.mlp_epochs"] = [&](auto v) { cfg.joint.mlp_epochs = parse_count(v); };
  keys["joint.cnn_epochs"] = [&](auto v) { cfg.joint.cnn_epochs = parse_count(v); };
  keys["joint.batch"] = [&](auto v) { cfg.joint.batch = parse_count(v); };
  keys["joint.lr"] = [&](auto v) { cfg.joint.lr = parse_number<double>(v); };

  for (std::size_t i = 0; i < kAllConfigurations.size(); ++i)
    keys["experiment." + to_string(kAllConfigurations[i])] = [&cfg, i](auto v) { cfg.runs[i] = parse_count(v); };

  std::set<std::string> sections;
  for (const auto& [k, _] : keys) sections.insert(k.substr(0, k.find('.')));

  std::set<std::string> seen;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw config_error(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!sections.contains(section)) throw config_error(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw config_error(where + "expected key = value");
    if (section.empty()) throw config_error(where + "key outside of any section");
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) throw config_error(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw config_error(where + "duplicate key '" + key + "'");
    if (value.empty()) throw config_error(where + "empty value for '" + key + "'");
    try {
      it->second(value);
    } catch (const config_error& e) {
      throw config_error(where + key + ": " + e.what());
    }
  }

  if (input_text.empty()) throw config_error(source + ": [pipeline] input is required");
  cfg.input = std::filesystem::path(input_text).is_absolute() ? std::filesystem::path(input_text) : base_dir / input_text;
  cfg.output_dir =
      std::filesystem::path(output_text).is_absolute() ? std::filesystem::path(output_text) : base_dir / output_text;
  if (!(cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0)) throw config_error(source + ": train_ratio must be in (0, 1)");

  cfg.cnn.kind = ClassifierKind::cnn;
  cfg.mlp.kind = ClassifierKind::mlp;
  try {
    validate(cfg.vae);
    validate(cfg.sae);
    validate(cfg.mlp);
    validate(cfg.cnn);
    if (cfg.joint.alpha < 0 || cfg.joint.beta < 0 || cfg.joint.lambda < 0 || cfg.joint.alpha + cfg.joint.beta <= 0)
      throw argument_error("joint: weights must be non-negative and alpha + beta > 0");
  } catch (const argument_error& e) {
    throw config_error(source + ": " + e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path.string());
  auto cfg = parse_config(in, path.parent_path(), path.string());
  if (!std::filesystem::is_regular_file(cfg.input)) throw data_error("cannot open " + cfg.input.string());
  return cfg;
}

} // namespace tabdl
