#pragma once

#include "reshuffle/coupling.hpp"
#include "reshuffle/geometry.hpp"
#include "reshuffle/harness.hpp"
#include "reshuffle/io.hpp"
#include "reshuffle/optimizer.hpp"
#include "reshuffle/permutation.hpp"
#include "reshuffle/problems.hpp"
#include "reshuffle/random.hpp"
