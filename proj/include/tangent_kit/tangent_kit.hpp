#pragma once

#include "tangent_kit/artifacts.hpp"
#include "tangent_kit/batch.hpp"
#include "tangent_kit/burgers_exact.hpp"
#include "tangent_kit/config.hpp"
#include "tangent_kit/harness.hpp"
#include "tangent_kit/jets.hpp"
#include "tangent_kit/kernel.hpp"
#include "tangent_kit/linalg.hpp"
#include "tangent_kit/net.hpp"
#include "tangent_kit/optim.hpp"
#include "tangent_kit/pde.hpp"
#include "tangent_kit/problem.hpp"
#include "tangent_kit/rng.hpp"
#include "tangent_kit/scalar.hpp"
#include "tangent_kit/studies.hpp"
