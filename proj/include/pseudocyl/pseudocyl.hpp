#pragma once

#include "pseudocyl/codec.hpp"
#include "pseudocyl/entropy.hpp"
#include "pseudocyl/geometry.hpp"
#include "pseudocyl/image.hpp"
#include "pseudocyl/image_io.hpp"
#include "pseudocyl/metrics.hpp"
#include "pseudocyl/optimizer.hpp"
#include "pseudocyl/parallel.hpp"
#include "pseudocyl/pconv.hpp"
#include "pseudocyl/representation.hpp"
#include "pseudocyl/tiled_io.hpp"
#include "pseudocyl/viewport.hpp"
