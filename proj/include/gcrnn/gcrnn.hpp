#pragma once

#include "gcrnn/autodiff.hpp"
#include "gcrnn/commands.hpp"
#include "gcrnn/config.hpp"
#include "gcrnn/errors.hpp"
#include "gcrnn/filter_bank.hpp"
#include "gcrnn/graph.hpp"
#include "gcrnn/model.hpp"
#include "gcrnn/processgen.hpp"
#include "gcrnn/serialize.hpp"
#include "gcrnn/tensor.hpp"
#include "gcrnn/training.hpp"
