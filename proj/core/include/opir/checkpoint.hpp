// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_CHECKPOINT_HPP
#define OPIR_CHECKPOINT_HPP

#include "opir/kpn_net.hpp"

#include <map>
#include <string>
#include <vector>

namespace opir::ckpt {

/// Checkpoint directory layout:
///   index.txt  -- "config k v" lines (model shape), "param name file dims..."
///                 lines, "extra name file" lines, "scalar k v" lines
///   *.tnsr     -- one raw tensor file per named parameter / extra tensor
/// Parameters are float32 in memory and on disk, so a round trip is
/// bit-exact.
struct CheckpointExtras {
    std::map<std::string, std::vector<float>> tensors; // optimizer moments
    std::map<std::string, std::string> scalars;        // step, rng state, ...
};

void save_checkpoint(const std::string& dir, net::TwoStageModel& model,
                     const CheckpointExtras* extras = nullptr);

struct LoadedCheckpoint {
    net::TwoStageModel model;
    CheckpointExtras extras;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

bool is_checkpoint_dir(const std::string& dir);

} // namespace opir::ckpt

#endif
