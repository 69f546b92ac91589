/* Copyright 2026 The racdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include "racdet/config.hpp"
#include "racdet/error.hpp"
#include "racdet/eval.hpp"
#include "racdet/fixtures.hpp"
#include "racdet/io.hpp"
#include "racdet/kmeans.hpp"
#include "racdet/memory_bank.hpp"
#include "racdet/pipeline.hpp"
#include "racdet/rac.hpp"
#include "racdet/random.hpp"
#include "racdet/seed_select.hpp"
#include "racdet/types.hpp"
