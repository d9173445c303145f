// Copyright 2026 The latentvar Authors
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

#ifndef LATENTVAR_LATENTVAR_HPP
#define LATENTVAR_LATENTVAR_HPP

#include "latentvar/commands.hpp"
#include "latentvar/config.hpp"
#include "latentvar/em.hpp"
#include "latentvar/errors.hpp"
#include "latentvar/estimators.hpp"
#include "latentvar/fisher.hpp"
#include "latentvar/gauss_hermite.hpp"
#include "latentvar/laplace.hpp"
#include "latentvar/linalg.hpp"
#include "latentvar/model.hpp"
#include "latentvar/montecarlo.hpp"
#include "latentvar/posterior.hpp"
#include "latentvar/prior.hpp"
#include "latentvar/random.hpp"

#endif  // LATENTVAR_LATENTVAR_HPP
