#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sset/numerics.hpp"

namespace sset {

// Orientation of the negative-sample terms in the SFNA and KD losses.
//   nll:        L = -sum f(p) log(1-p) - sum log p   (default)
//   as_printed: L = +sum f(p) log(1-p) - sum log p
enum class NegativeTermSign { nll, as_printed };

struct TrainConfig {
  double lambda = 0.75;                       // SFNA weight; 1 - lambda goes to KD
  std::vector<double> temps = {1, 2, 3, 4, 5};  // CSRA temperatures, H = temps.size()
  int hops = 2;                               // K
  std::size_t sample_triples = 7;             // m
  std::size_t sample_types = 8;               // n
  std::size_t text_dim = 0;                   // 0: taken from the embedding files
  std::size_t struct_dim = 100;               // d_s
  std::size_t dim = 100;                      // d
  double learning_rate = 1e-3;
  std::size_t decay_interval = 50;            // epochs; 0 keeps the rate constant
  std::size_t batch_size = 32;
  std::size_t epochs = 400;
  std::uint64_t seed = 42;
  bool kd_enabled = true;
  float sem_prob_floor = 0.0f;                // teacher value for entries missing from sparse files
  NegativeTermSign negative_sign = NegativeTermSign::nll;
  num::CsraMeanMode csra_mean = num::CsraMeanMode::per_head;
  double norm_eps = 1e-12;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  static TrainConfig fb15ket();
  static TrainConfig yago43ket();
};

struct RerankConfig {
  double alpha = 0.5;
  std::size_t k = 100;

  void validate() const;
};

// Learning rate for a 0-based epoch: constant for the first decay_interval
// epochs, then halved while the interval doubles (I, 2I, 4I, ...).
double learning_rate_at(const TrainConfig& cfg, std::size_t epoch);

// Flat `key = value` text, '#' starts a comment. Recognized keys:
//   lambda alpha H temps m n K text_dim struct_dim dim lr decay_interval
//   batch_size epochs seed kd sem_prob_floor negative_sign csra_mean topk
// `H` is only checked against the length of `temps` when both are given.
struct ConfigFile {
  TrainConfig train;
  RerankConfig rerank;
};

ConfigFile parse_config(const std::string& text, const ConfigFile& defaults = {});
ConfigFile load_config(const std::filesystem::path& path, const ConfigFile& defaults = {});
std::string format_config(const ConfigFile& config);

}  // namespace sset
