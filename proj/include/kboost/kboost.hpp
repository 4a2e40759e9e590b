// include/kboost/kboost.hpp

// Copyright 2026 The kboost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "kboost/binning.hpp"
#include "kboost/common.hpp"
#include "kboost/corpus.hpp"
#include "kboost/kfit.hpp"
#include "kboost/noise.hpp"
#include "kboost/parallel.hpp"
#include "kboost/quickk.hpp"
#include "kboost/report.hpp"
#include "kboost/rng.hpp"
#include "kboost/scoring.hpp"
#include "kboost/simrec.hpp"
#include "kboost/textmodel.hpp"
