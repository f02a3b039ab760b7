#pragma once

#include <string>
#include <vector>

#include "basepose/evaluate.hpp"
#include "basepose/kinematics.hpp"
#include "basepose/nn.hpp"
#include "basepose/scene.hpp"

namespace basepose {

// Thrown on magic/version mismatches and truncations; the message names the
// file offset where parsing stopped.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// All binary formats are little-endian, versioned and magic-checked; writes
// go through a temp file + rename so readers never see partial files.
void atomic_write(const std::string& path, const std::string& bytes);

// ---- scenes: one JSON object per line, schema version "v": 1 ----
std::string scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const std::string& line);
void save_scenes_jsonl(const std::string& path, const std::vector<SceneSpec>& scenes);
std::vector<SceneSpec> load_scenes_jsonl(const std::string& path);

// ---- IRM dataset: magic "IRMD", version 1 ----
void save_irm_dataset(const std::string& path, const std::vector<IrmSample>& samples);
// Projections are re-rasterized from the stored scenes (rasterization is
// deterministic, so nothing is lost by not storing them).
std::vector<IrmSample> load_irm_dataset(const std::string& path);

// ---- weights: magic "WTSB", version 1, named float32 tensors ----
void save_weights(const std::string& path, const ParamStore& params);
ParamStore load_weights(const std::string& path);

// ---- evaluation report ----
std::string eval_report_to_json(const EvalReport& report);
void save_eval_report(const std::string& path, const EvalReport& report);

}  // namespace basepose
