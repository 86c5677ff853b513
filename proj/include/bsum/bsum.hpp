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

// Umbrella header for the core library. The harness headers (datasets,
// baselines, curve files, experiment configs) are included separately.

#pragma once

#include "bsum/errors.hpp"
#include "bsum/functions.hpp"
#include "bsum/gradients.hpp"
#include "bsum/matrix.hpp"
#include "bsum/network.hpp"
#include "bsum/schedules.hpp"
#include "bsum/trainer.hpp"
#include "bsum/upperbounds.hpp"
