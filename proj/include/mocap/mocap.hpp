#pragma once

#include "mocap/byte_io.hpp"
#include "mocap/codec.hpp"
#include "mocap/error.hpp"
#include "mocap/huffman.hpp"
#include "mocap/lsdt.hpp"
#include "mocap/metrics.hpp"
#include "mocap/motion.hpp"
#include "mocap/quantizer.hpp"
#include "mocap/stream.hpp"
#include "mocap/transforms.hpp"
