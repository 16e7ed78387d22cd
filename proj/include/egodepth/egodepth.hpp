#pragma once

#include "egodepth/error.hpp"
#include "egodepth/se3.hpp"
#include "egodepth/camera.hpp"
#include "egodepth/image.hpp"
#include "egodepth/warping.hpp"
#include "egodepth/losses.hpp"
#include "egodepth/attention.hpp"
#include "egodepth/metrics.hpp"
#include "egodepth/synthetic.hpp"
#include "egodepth/align.hpp"
#include "egodepth/gradcheck.hpp"
#include "egodepth/io.hpp"
