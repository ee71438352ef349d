// Copyright 2026 The MixAttn Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mixattn/analysis.hpp"
#include "mixattn/bench.hpp"
#include "mixattn/config.hpp"
#include "mixattn/engine.hpp"
#include "mixattn/error.hpp"
#include "mixattn/kernels.hpp"
#include "mixattn/kvcache.hpp"
#include "mixattn/presets.hpp"
#include "mixattn/report.hpp"
#include "mixattn/rng.hpp"
#include "mixattn/taskgen.hpp"
#include "mixattn/weights.hpp"
