// Copyright 2026 The gmtc Authors
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

#include "gmtc/adam.hpp"
#include "gmtc/analysis.hpp"
#include "gmtc/audio.hpp"
#include "gmtc/baseline.hpp"
#include "gmtc/checkpoint.hpp"
#include "gmtc/config_text.hpp"
#include "gmtc/corpus.hpp"
#include "gmtc/feature_cache.hpp"
#include "gmtc/metrics.hpp"
#include "gmtc/mfcc.hpp"
#include "gmtc/model.hpp"
#include "gmtc/ops.hpp"
#include "gmtc/pipeline.hpp"
#include "gmtc/tensor.hpp"
#include "gmtc/trainer.hpp"
