#pragma once

#include "qlinksim/harness.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace qlinksim
{

/// Flat `key = value` settings; keys mirror RunConfig field names. Lines
/// starting with '#' are comments.
using ConfigMap = std::map<std::string, std::string>;

/// Every accepted key, in a stable order.
const std::vector<std::string>& config_keys();

ConfigMap parse_config(std::istream& in);
ConfigMap read_config_file(const std::string& path);

/// Build a run configuration. `experiment` selects a preset (exp1, exp2,
/// exp3) or `custom`, which reads a comma-separated `links` list of kinds.
/// Unknown keys are rejected.
RunConfig build_config(const ConfigMap& settings);

} // namespace qlinksim
