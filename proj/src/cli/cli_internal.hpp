#pragma once

#include <functional>
#include <string>

#include "qsdsim/cli.hpp"

namespace qsdsim::cli {

using Runner = std::function<Results(const Context&)>;

/// Throws Error(invalid_config) for unknown names.
Runner find_runner(const std::string& name);
std::string default_arithmetic(const std::string& name);

/// Custom runs: catalog model, optional penalty override, one estimator.
Results run_custom(const Context& ctx, const Json& custom);
void validate_custom(const Json& custom);

}  // namespace qsdsim::cli
