// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

#include "medmeta/adapters.hpp"
#include "medmeta/corpus.hpp"
#include "medmeta/error.hpp"
#include "medmeta/labeler.hpp"
#include "medmeta/metaeval.hpp"
#include "medmeta/metrics.hpp"
#include "medmeta/perturb.hpp"
#include "medmeta/random.hpp"
#include "medmeta/textops.hpp"
