#pragma once

// Umbrella header for the emoe library.

#include "emoe/errors.hpp"
#include "emoe/log.hpp"
#include "emoe/tensor.hpp"
#include "emoe/autodiff.hpp"
#include "emoe/optim.hpp"
#include "emoe/gradcheck.hpp"
#include "emoe/ffn.hpp"
#include "emoe/label_format.hpp"
#include "emoe/mapper.hpp"
#include "emoe/content_encoder.hpp"
#include "emoe/data_io.hpp"
#include "emoe/serialization.hpp"
#include "emoe/evaluation.hpp"
#include "emoe/analysis.hpp"
