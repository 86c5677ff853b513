// Copyright 2026 The bsum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace bsum {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BSUM_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

BSUM_DEFINE_ERROR(SpecError);
BSUM_DEFINE_ERROR(ShapeError);
BSUM_DEFINE_ERROR(DomainError);
BSUM_DEFINE_ERROR(NonSmoothError);
BSUM_DEFINE_ERROR(OverflowError);
BSUM_DEFINE_ERROR(CurvatureError);
BSUM_DEFINE_ERROR(SizeError);
BSUM_DEFINE_ERROR(SingularError);
BSUM_DEFINE_ERROR(IngestError);
BSUM_DEFINE_ERROR(ConfigError);

#undef BSUM_DEFINE_ERROR

}  // namespace bsum
