// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "difftext/config.hpp"
#include "difftext/dataset.hpp"

namespace difftext {

struct GenerateResult {
    std::filesystem::path manifest_path;
    int images = 0;
    int kept_instances = 0;
    int discarded_instances = 0;
};

// Full generation flow: placement -> crop jobs -> batch inpaint -> recognizer
// filter -> paste-back/revert -> manifest emission. Backgrounds are PNG files;
// maps_dir holds <stem>.seg.png and <stem>.depth.png per background.
GenerateResult generate(const PipelineConfig& config,
                        const std::filesystem::path& backgrounds_dir,
                        const std::filesystem::path& maps_dir,
                        const std::filesystem::path& words_file,
                        const std::filesystem::path& bundle_checkpoint,
                        const std::filesystem::path& recognizer_checkpoint,
                        const std::filesystem::path& out_dir);

}  // namespace difftext
