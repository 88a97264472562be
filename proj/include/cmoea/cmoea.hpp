#ifndef CMOEA_CMOEA_HPP
#define CMOEA_CMOEA_HPP

#include "bins.hpp"
#include "core.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "maze.hpp"
#include "moea.hpp"
#include "neuro.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

#endif
