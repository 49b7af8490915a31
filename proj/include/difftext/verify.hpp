// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace difftext {

struct VerifyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Fast invariant suite over the deterministic core (no training involved):
// schedule laws, inversion identities, rasterization oracles, crop arithmetic,
// filter laws and the matcher example.
std::vector<VerifyResult> run_verification();

}  // namespace difftext
