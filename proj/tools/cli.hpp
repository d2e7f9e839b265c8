#pragma once

// Scenario configuration and the `eskin` command verbs.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "eskin/duplex/gateway.hpp"
#include "eskin/interference.hpp"
#include "eskin/nn/classifier.hpp"
#include "eskin/sensing.hpp"
#include "eskin/skin_model.hpp"
#include "eskin/weighing.hpp"

namespace eskin::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ScenarioConfig {
  std::uint64_t seed = 42;
  std::string out = ".";
  skin::SkinGeometry geometry = skin::SkinGeometry::standard();
  sensing::NoiseModel noise{};
  std::size_t per_class = 200;
  double train_fraction = 0.7;
  nn::TrainConfig train{};
  std::size_t tsne_points = 450;
  double perplexity = 30.0;
  std::size_t tsne_iterations = 1000;
  std::size_t weigh_seeds = 20;
  std::string resolution_material = "flour";
  std::vector<std::string> combo_materials{"sugar", "sesame"};
  std::map<std::string, weighing::Material> materials;  // name -> effective parameters
  skin::InterferenceConfig interference{};
  duplex::GatewayConfig gateway{};
  double serve_duration_s = 0.0;  // 0 = until interrupted
  double tolerance_g = 0.05;

  weighing::Material material(const std::string& name) const;
};

// Parses a JSON config on top of the defaults. Unknown keys, wrong types and
// invalid values throw ConfigError.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);

// Full command line (argv[0] included). Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eskin::cli
