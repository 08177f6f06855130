// Copyright 2026 The qtomo Authors
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

#include "qtomo/ascent.hpp"
#include "qtomo/channels.hpp"
#include "qtomo/data_sim.hpp"
#include "qtomo/errors.hpp"
#include "qtomo/operator_core.hpp"
#include "qtomo/pom.hpp"
#include "qtomo/process_estimators.hpp"
#include "qtomo/rng.hpp"
#include "qtomo/state_estimators.hpp"
#include "qtomo/states.hpp"
