#pragma once

#include "dkt/tensor.hpp"
#include "dkt/ops.hpp"
#include "dkt/rng.hpp"
#include "dkt/tokenizer.hpp"
#include "dkt/attention.hpp"
#include "dkt/model.hpp"
#include "dkt/losses.hpp"
#include "dkt/synth.hpp"
#include "dkt/io.hpp"
#include "dkt/optim.hpp"
#include "dkt/training.hpp"
#include "dkt/config.hpp"
#include "dkt/gradcheck.hpp"
#include "dkt/experiment.hpp"
