// Copyright 2026 The bostop Authors. All Rights Reserved.
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
// =============================================================================

// Umbrella header.

#pragma once

#include "bostop/acquisition.hpp"
#include "bostop/commands.hpp"
#include "bostop/cv.hpp"
#include "bostop/engine.hpp"
#include "bostop/error.hpp"
#include "bostop/gp.hpp"
#include "bostop/metrics.hpp"
#include "bostop/objective.hpp"
#include "bostop/observation.hpp"
#include "bostop/random.hpp"
#include "bostop/space.hpp"
#include "bostop/stopping.hpp"
