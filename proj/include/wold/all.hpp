#pragma once

#include "wold/error.hpp"
#include "wold/linalg.hpp"
#include "wold/check_report.hpp"
#include "wold/repn.hpp"
#include "wold/generators.hpp"
#include "wold/hypotheses.hpp"
#include "wold/structure.hpp"
#include "wold/decomposition.hpp"
#include "wold/io.hpp"
#include "wold/cli.hpp"
