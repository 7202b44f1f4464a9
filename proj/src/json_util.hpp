#pragma once

// Shared JSON helpers for checkpoints, configs and manifests.  Not installed.

#include <string>
#include <vector>

#include <json.hpp>

#include "ltnas/space.hpp"

namespace ltnas {

nlohmann::json space_to_json(const space::SearchSpace& s);
space::SearchSpace space_from_json(const nlohmann::json& j);

// Rejects keys not in `allowed`; `where` names the object in the error.
void require_keys(const nlohmann::json& obj,
                  const std::vector<std::string>& allowed,
                  const std::string& where);

}  // namespace ltnas
