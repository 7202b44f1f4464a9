#include "json_util.hpp"

#include <stdexcept>

namespace ltnas {

nlohmann::json space_to_json(const space::SearchSpace& s) {
  nlohmann::json ops = nlohmann::json::array();
  for (space::OpKind kind : s.candidate_ops) ops.push_back(space::op_name(kind));
  return nlohmann::json{{"num_cells", s.num_cells},
                        {"nodes_per_cell", s.nodes_per_cell},
                        {"candidate_ops", ops},
                        {"channel_width", s.channel_width},
                        {"num_classes", s.num_classes},
                        {"input_channels", s.input_channels},
                        {"input_height", s.input_height},
                        {"input_width", s.input_width}};
}

space::SearchSpace space_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"num_cells", "nodes_per_cell", "candidate_ops",
                "channel_width", "num_classes", "input_channels",
                "input_height", "input_width"},
               "space");
  space::SpaceConfig cfg;
  cfg.num_cells = j.at("num_cells").get<int>();
  cfg.nodes_per_cell = j.at("nodes_per_cell").get<int>();
  cfg.candidate_ops = j.at("candidate_ops").get<std::vector<std::string>>();
  cfg.channel_width = j.at("channel_width").get<int>();
  cfg.num_classes = j.at("num_classes").get<int>();
  if (j.contains("input_channels"))
    cfg.input_channels = j.at("input_channels").get<int>();
  if (j.contains("input_height"))
    cfg.input_height = j.at("input_height").get<int>();
  if (j.contains("input_width"))
    cfg.input_width = j.at("input_width").get<int>();
  return space::build_search_space(cfg);
}

void require_keys(const nlohmann::json& obj,
                  const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!obj.is_object())
    throw std::invalid_argument("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& key : allowed)
      if (it.key() == key) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in " + where);
  }
}

}  // namespace ltnas
