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

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fusemt/fusion.hpp"
#include "fusemt/training.hpp"

namespace fusemt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Training hyper-parameters, data paths and the variant, read from
// "key=value" lines. Blank lines and lines starting with '#' are skipped.
struct RunConfig {
  TrainConfig train;
  Variant variant = Variant::Baseline;
  std::filesystem::path train_source, train_target;
  std::filesystem::path dev_source, dev_target;
  std::filesystem::path test_source, test_target;
  std::filesystem::path monolingual;
  std::filesystem::path source_vocab, target_vocab, lm_vocab;
  std::filesystem::path source_bpe, target_bpe, lm_bpe;

  // ConfigError on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  // Every key with its current value, sorted by key; parse(to_text()) is
  // the identity.
  std::map<std::string, std::string> entries() const;
  std::string to_text() const;
};

// Names accepted by RunConfig::set.
const std::vector<std::string>& run_config_keys();

// Runs one subcommand and returns its exit code. Diagnostics go to `err`,
// reports to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fusemt::cli
