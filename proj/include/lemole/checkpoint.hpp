#ifndef LEMOLE_CHECKPOINT_HPP
#define LEMOLE_CHECKPOINT_HPP

#include <string>

#include "lemole/conditioning.hpp"

namespace lemole {

/// Versioned JSON checkpoint: domain, conditioning mode, hyper block, window
/// lengths, and every parameter tensor as a flat row-major array with its
/// declared shape. Doubles are serialized with shortest round-trip encoding,
/// so write-then-read is bit-exact.
void save_checkpoint(const std::string& path, const LemoleModel& model);
LemoleModel load_checkpoint(const std::string& path);

std::string checkpoint_to_json(const LemoleModel& model);
LemoleModel checkpoint_from_json(const std::string& text);

} // namespace lemole

#endif // LEMOLE_CHECKPOINT_HPP
