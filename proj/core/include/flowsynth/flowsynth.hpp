#pragma once

#include "flowsynth/augment.hpp"
#include "flowsynth/dataset_io.hpp"
#include "flowsynth/error.hpp"
#include "flowsynth/image.hpp"
#include "flowsynth/metrics.hpp"
#include "flowsynth/random.hpp"
#include "flowsynth/scene.hpp"
#include "flowsynth/segmentation.hpp"
#include "flowsynth/texture.hpp"
#include "flowsynth/tps.hpp"
