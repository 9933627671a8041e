#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace symrl {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a path of labels.
///
/// Every random stream in the project is obtained by splitting the master seed
/// through this function, e.g. derive_seed(master, "run", {target, run}).
/// The result depends only on the arguments, never on call order.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::initializer_list<std::uint64_t> path = {});

} // namespace symrl
