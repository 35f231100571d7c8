// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_TEXTURE_HPP
#define OPIR_TEXTURE_HPP

#include "opir/image.hpp"
#include "opir/rng.hpp"

namespace opir {

/// Procedural clean image: smooth color gradients plus a handful of
/// anti-aliased shapes and edges, so synthetic datasets have structure
/// for the metrics and losses to bite on. Deterministic in rng.
Image procedural_texture(int height, int width, int channels, Rng& rng);

} // namespace opir

#endif
