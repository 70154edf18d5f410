/* Copyright 2026 The FuseMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fusemt/fusion.hpp"
#include "fusemt/language_model.hpp"
#include "fusemt/tensor.hpp"
#include "fusemt/training.hpp"

namespace fusemt {

// Binary layout, all integers little-endian u32:
//   "FUSEMT1\n"
//   variant tag        (length, bytes)  lm|baseline|cold|postnorm|prenorm|dynamic
//   config echo        (length, bytes)  "key=value" lines
//   tensor count, then per tensor: name (length, bytes), rank, dims..., f32 data
//   section count, then per section: name, text (length, bytes each)
// Sections carry vocabularies and BPE merges.
inline constexpr std::string_view kCheckpointMagic = "FUSEMT1\n";

struct Checkpoint {
  std::string variant;
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
  std::map<std::string, std::string> sections;

  const Tensor<float>& tensor(std::string_view name) const;
  const std::string& section(std::string_view name) const;
  const std::string& setting(std::string_view key) const;
};

// Valid variant tags.
bool known_checkpoint_variant(std::string_view tag);

std::string serialize_checkpoint(const Checkpoint& ck);
// DataError naming the byte offset of the first malformed field.
Checkpoint deserialize_checkpoint(std::string_view bytes);

// Writes to a temporary sibling and renames, so a failed save leaves no file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// A language model with its vocabulary and optional BPE merges.
struct LmBundle {
  std::shared_ptr<const LanguageModel<float>> lm;
  std::optional<BpeModel> bpe;
};

Checkpoint lm_checkpoint(const LanguageModel<float>& lm, const std::optional<BpeModel>& bpe,
                         const std::map<std::string, std::string>& echo = {});
LmBundle lm_from_checkpoint(const Checkpoint& ck);

// A trained translation model. Fusion checkpoints embed their LM.
struct ModelBundle {
  std::unique_ptr<FusedModel<float>> model;
  TextPipeline text;
};

Checkpoint model_checkpoint(const FusedModel<float>& model, const TextPipeline& text,
                            const std::map<std::string, std::string>& echo = {});
ModelBundle model_from_checkpoint(const Checkpoint& ck);

}  // namespace fusemt
