// Copyright 2026-present the trisampler project
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

#include "trisampler/core_data.hpp"
#include "trisampler/error.hpp"
#include "trisampler/evaluation.hpp"
#include "trisampler/geometry.hpp"
#include "trisampler/random.hpp"
#include "trisampler/sampler.hpp"
#include "trisampler/synthetic.hpp"
#include "trisampler/trainer.hpp"
#include "trisampler/vector_index.hpp"
