#pragma once

#include <string>

#include "nmrl/config.hpp"
#include "nmrl/layers.hpp"

namespace nmrl {

// Self-contained run snapshot: the resolved config travels with the weights
// so test/analyze/compare need no other inputs. Byte-stable: identical
// content encodes to identical bytes.
struct Checkpoint {
    RunConfig cfg;
    std::string tag; // "best", "iter150", "final", ...
    std::size_t iteration = 0;
    PolicyParams params;
};

std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

} // namespace nmrl
