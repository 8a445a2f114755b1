#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "dtnet/network.hpp"

namespace dtnet {

// Checkpoint directory layout:
//   config.txt  - network configuration, key=value text
//   params.bin  - named arrays with explicit shape/dtype headers
//   step.txt    - training step counter
void save_checkpoint(const std::string& dir, const Network& net, int64_t step);

NetworkConfig read_checkpoint_config(const std::string& dir);

// Loads parameter arrays into an already-built network; every array must
// match the network's shapes by name. Returns the saved step counter.
int64_t load_checkpoint_params(const std::string& dir, Network& net);

// Convenience: rebuild the network from the stored config and restore it.
std::unique_ptr<Network> load_checkpoint(const std::string& dir, int64_t* step = nullptr);

}  // namespace dtnet
