#pragma once

#include "girnet/adam.hpp"
#include "girnet/attention.hpp"
#include "girnet/autodiff.hpp"
#include "girnet/bicubic.hpp"
#include "girnet/checkpoint.hpp"
#include "girnet/config_json.hpp"
#include "girnet/conv.hpp"
#include "girnet/convlstm.hpp"
#include "girnet/data.hpp"
#include "girnet/deformable.hpp"
#include "girnet/errors.hpp"
#include "girnet/gradcheck.hpp"
#include "girnet/metrics.hpp"
#include "girnet/model.hpp"
#include "girnet/pixel_shuffle.hpp"
#include "girnet/pooling.hpp"
#include "girnet/ppm.hpp"
#include "girnet/rng.hpp"
#include "girnet/tensor.hpp"
#include "girnet/trainer.hpp"
