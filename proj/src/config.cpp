#include "sset/config.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace sset {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw std::invalid_argument("config: bad value for '" + key + "': " + value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw std::invalid_argument("config: bad boolean for '" + key + "': " + value);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  if (out.empty()) throw std::invalid_argument("config: empty list for '" + key + "'");
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (temps.empty()) throw std::invalid_argument("at least one CSRA temperature is required");
  for (double t : temps) {
    if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("temperatures must be finite and >= 0");
  }
  if (hops < 1) throw std::invalid_argument("K (hops) must be >= 1");
  if (sample_triples + sample_types < 1) throw std::invalid_argument("m + n must be >= 1");
  if (struct_dim == 0 || dim == 0) throw std::invalid_argument("embedding dimensions must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(sem_prob_floor >= 0.0f && sem_prob_floor <= 1.0f)) {
    throw std::invalid_argument("sem_prob_floor must lie in [0, 1]");
  }
}

TrainConfig TrainConfig::fb15ket() {
  TrainConfig c;
  c.lambda = 0.75;
  c.hops = 2;
  c.sample_triples = 7;
  c.sample_types = 8;
  c.text_dim = 768;
  c.struct_dim = 100;
  c.learning_rate = 1e-3;
  c.decay_interval = 0;
  c.batch_size = 32;
  return c;
}

TrainConfig TrainConfig::yago43ket() {
  TrainConfig c;
  c.lambda = 0.8;
  c.hops = 3;
  c.sample_triples = 3;
  c.sample_types = 3;
  c.text_dim = 768;
  c.struct_dim = 100;
  c.learning_rate = 2e-3;
  c.decay_interval = 0;
  c.batch_size = 32;
  return c;
}

void RerankConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (k < 1) throw std::invalid_argument("candidate pool size k must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.decay_interval == 0) return cfg.learning_rate;
  double lr = cfg.learning_rate;
  std::size_t boundary = cfg.decay_interval;
  std::size_t interval = cfg.decay_interval;
  while (epoch >= boundary) {
    lr *= 0.5;
    interval *= 2;
    boundary += interval;
  }
  return lr;
}

ConfigFile parse_config(const std::string& text, const ConfigFile& defaults) {
  ConfigFile cfg = defaults;
  auto& t = cfg.train;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> heads;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "lambda") t.lambda = parse_number<double>(key, value);
    else if (key == "alpha") cfg.rerank.alpha = parse_number<double>(key, value);
    else if (key == "topk") cfg.rerank.k = parse_number<std::size_t>(key, value);
    else if (key == "H") heads = parse_number<std::size_t>(key, value);
    else if (key == "temps") t.temps = parse_list(key, value);
    else if (key == "m") t.sample_triples = parse_number<std::size_t>(key, value);
    else if (key == "n") t.sample_types = parse_number<std::size_t>(key, value);
    else if (key == "K") t.hops = parse_number<int>(key, value);
    else if (key == "text_dim") t.text_dim = parse_number<std::size_t>(key, value);
    else if (key == "struct_dim") t.struct_dim = parse_number<std::size_t>(key, value);
    else if (key == "dim") t.dim = parse_number<std::size_t>(key, value);
    else if (key == "lr") t.learning_rate = parse_number<double>(key, value);
    else if (key == "decay_interval") t.decay_interval = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "epochs") t.epochs = parse_number<std::size_t>(key, value);
    else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "kd") t.kd_enabled = parse_bool(key, value);
    else if (key == "sem_prob_floor") t.sem_prob_floor = parse_number<float>(key, value);
    else if (key == "negative_sign") {
      if (value == "nll") t.negative_sign = NegativeTermSign::nll;
      else if (value == "as_printed") t.negative_sign = NegativeTermSign::as_printed;
      else throw std::invalid_argument("config: negative_sign must be nll or as_printed");
    } else if (key == "csra_mean") {
      if (value == "per_head") t.csra_mean = num::CsraMeanMode::per_head;
      else if (value == "once") t.csra_mean = num::CsraMeanMode::once;
      else throw std::invalid_argument("config: csra_mean must be per_head or once");
    } else {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (heads && *heads != t.temps.size()) {
    throw std::invalid_argument("config: H = " + std::to_string(*heads) + " but " +
                                std::to_string(t.temps.size()) + " temperatures given");
  }
  t.validate();
  cfg.rerank.validate();
  return cfg;
}

ConfigFile load_config(const std::filesystem::path& path, const ConfigFile& defaults) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), defaults);
}

std::string format_config(const ConfigFile& config) {
  const auto& t = config.train;
  std::ostringstream out;
  out.precision(17);
  out << "lambda = " << t.lambda << "\n";
  out << "alpha = " << config.rerank.alpha << "\n";
  out << "topk = " << config.rerank.k << "\n";
  out << "H = " << t.temps.size() << "\n";
  out << "temps = ";
  for (std::size_t i = 0; i < t.temps.size(); ++i) out << (i ? "," : "") << t.temps[i];
  out << "\n";
  out << "m = " << t.sample_triples << "\n";
  out << "n = " << t.sample_types << "\n";
  out << "K = " << t.hops << "\n";
  out << "text_dim = " << t.text_dim << "\n";
  out << "struct_dim = " << t.struct_dim << "\n";
  out << "dim = " << t.dim << "\n";
  out << "lr = " << t.learning_rate << "\n";
  out << "decay_interval = " << t.decay_interval << "\n";
  out << "batch_size = " << t.batch_size << "\n";
  out << "epochs = " << t.epochs << "\n";
  out << "seed = " << t.seed << "\n";
  out << "kd = " << (t.kd_enabled ? "true" : "false") << "\n";
  out << "sem_prob_floor = " << t.sem_prob_floor << "\n";
  out << "negative_sign = " << (t.negative_sign == NegativeTermSign::nll ? "nll" : "as_printed") << "\n";
  out << "csra_mean = " << (t.csra_mean == num::CsraMeanMode::per_head ? "per_head" : "once") << "\n";
  return out.str();
}

}  // namespace sset
