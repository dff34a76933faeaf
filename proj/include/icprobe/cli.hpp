#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icprobe {

/// Entry point of the `icprobe` tool; `args` excludes the program name.
/// Returns 0 on success, 1 on a runtime failure and 2 on a usage error.
int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace icprobe
