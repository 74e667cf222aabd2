#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "scene.hpp"
#include "likelihood.hpp"
#include "qp.hpp"
#include "harness.hpp"
#include "config.hpp"
#include "csv.hpp"
