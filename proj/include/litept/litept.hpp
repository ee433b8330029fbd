#pragma once

// Umbrella header for the LitePT engine.

#include "litept/blocks.hpp"
#include "litept/curves.hpp"
#include "litept/gradcheck.hpp"
#include "litept/io.hpp"
#include "litept/matrix.hpp"
#include "litept/network.hpp"
#include "litept/ops.hpp"
#include "litept/pointbatch.hpp"
#include "litept/profiler.hpp"
#include "litept/rope.hpp"
#include "litept/sparse_conv.hpp"
#include "litept/tape.hpp"
#include "litept/train.hpp"
#include "litept/voxelize.hpp"
