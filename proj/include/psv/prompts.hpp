#pragma once

#include <map>
#include <string>
#include <string_view>

#include "psv/common.hpp"

/// Versioned prompt templates compiled in from assets/prompts.
namespace psv::prompts {

struct Template {
  std::string system;  // may be empty
  std::string user;
};

/// Splits an asset on its "=== system ===" / "=== user ===" markers.
Template parse_template(std::string_view asset);

const Template& proposer();
const Template& solver();
std::string_view solver_exemplar();

/// Asset name -> sha256 of its raw text, logged into every run directory.
json asset_hashes();

/// Replaces each `{name}` for the given names in one pass; other braces are
/// left untouched and substituted values are not rescanned.
std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars);

}  // namespace psv::prompts
