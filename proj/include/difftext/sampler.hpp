// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "difftext/bundle.hpp"
#include "difftext/crops.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

struct SamplerParams {
    int steps = 50;
    bool deterministic = true;
    int threads = 1;
};

// Text-conditional latent inpainting: starts from Gaussian noise, denoises
// along a strided schedule conditioned on the masked background and the text,
// then composites so that mask==0 pixels are bit-identical to the input crop.
Image inpaint(const Image& crop, const Mask& mask, const std::string& text, ModelBundle& bundle,
              int steps, uint64_t seed, bool deterministic);

// Runs the jobs against their source backgrounds; results keep job order and
// equal the per-job inpaint outputs. Errors are rethrown naming the job.
std::vector<std::pair<CropJob, Image>> batch_inpaint(const std::vector<CropJob>& jobs,
                                                     const std::map<std::string, Image>& backgrounds,
                                                     ModelBundle& bundle,
                                                     const SamplerParams& params);

}  // namespace difftext
