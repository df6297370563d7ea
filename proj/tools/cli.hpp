#pragma once

#include "dider/abi.hpp"

#include <iosfwd>

namespace dider {
inline namespace DIDER_ABI {

/// Entry point of the `dider` tool. Exit codes: 0 success, 1 runtime
/// failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace DIDER_ABI
}  // namespace dider
