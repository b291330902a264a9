// Copyright 2026 The biasmom Authors. All Rights Reserved.
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

#pragma once

#include "biasmom/audit.hpp"
#include "biasmom/composite.hpp"
#include "biasmom/config.hpp"
#include "biasmom/engine.hpp"
#include "biasmom/error.hpp"
#include "biasmom/estimators.hpp"
#include "biasmom/io.hpp"
#include "biasmom/pipeline.hpp"
#include "biasmom/problems.hpp"
#include "biasmom/rng.hpp"
#include "biasmom/theory.hpp"
#include "biasmom/vector.hpp"
