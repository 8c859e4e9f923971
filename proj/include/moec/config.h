// Copyright 2026 The MoEC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON experiment documents. The schema is described in docs/config.md.
// Every failure is a ConfigError whose key() is the dotted path of the
// offending entry, e.g. "train.dropout_rate".

#ifndef MOEC_CONFIG_H_
#define MOEC_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "moec/experiment.h"

namespace moec {

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully expanded document for `cfg` (all keys, resolved values).
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace moec

#endif  // MOEC_CONFIG_H_
