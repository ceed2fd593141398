/*
 * Copyright 2026 The mlcas Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace mlcas {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidConfig,
  kMissingFile,
  kMalformedManifest,
  kMalformedCsv,
  kLabelColumnNotFound,
  kNonBinaryLabelValue,
  kUnknownMetric,
  kDuplicateKey,
  kNonFiniteValue,
  kMissingPerformance,
  kDisjointCorpora,
  kDegenerateLabels,
  kLengthMismatch,
  kAllColumnsDropped,
  kEmptyTrainingSet,
  kDimensionMismatch,
  kTooFewSamplesForFolds,
  kMalformedModel,
  kEmptyPortfolio,
  kModelNotFound,
  kMissingNodeStatistics,
  kTooManyFeatures,
  kMetricSetMismatch,
  kIoError,
};

const char* to_string(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mlcas
