/*
 * Copyright 2026 The XplainBench Authors.
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

// Umbrella header for the library (the CLI lives in cli.hpp).
#pragma once

#include "xplainbench/common.hpp"
#include "xplainbench/dataset.hpp"
#include "xplainbench/forest.hpp"
#include "xplainbench/gbt.hpp"
#include "xplainbench/llm_client.hpp"
#include "xplainbench/metrics.hpp"
#include "xplainbench/mlp.hpp"
#include "xplainbench/model.hpp"
#include "xplainbench/pipeline.hpp"
#include "xplainbench/shap.hpp"
#include "xplainbench/tree.hpp"
