#ifndef ATTNLAB_ATTNLAB_HPP
#define ATTNLAB_ATTNLAB_HPP

#include "attnlab/checkpoint.hpp"
#include "attnlab/constructions.hpp"
#include "attnlab/dependence.hpp"
#include "attnlab/experiments.hpp"
#include "attnlab/harness.hpp"
#include "attnlab/linalg.hpp"
#include "attnlab/model.hpp"
#include "attnlab/tasks.hpp"
#include "attnlab/training.hpp"

#endif  // ATTNLAB_ATTNLAB_HPP
