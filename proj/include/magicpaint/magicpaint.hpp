#pragma once

#include "magicpaint/core/components.hpp"
#include "magicpaint/core/png_io.hpp"
#include "magicpaint/core/recording.hpp"
#include "magicpaint/core/types.hpp"
#include "magicpaint/embed/field.hpp"
#include "magicpaint/embed/histogram.hpp"
#include "magicpaint/embed/network.hpp"
#include "magicpaint/embed/provider.hpp"
#include "magicpaint/embed/similarity.hpp"
#include "magicpaint/embed/slic.hpp"
#include "magicpaint/embed/train.hpp"
#include "magicpaint/embed/weights_io.hpp"
#include "magicpaint/eval/metrics.hpp"
#include "magicpaint/eval/timeline.hpp"
#include "magicpaint/paint/raster.hpp"
#include "magicpaint/paint/state.hpp"
#include "magicpaint/propagate/assistant.hpp"
#include "magicpaint/propagate/densecrf.hpp"
#include "magicpaint/propagate/distance_maps.hpp"
#include "magicpaint/propagate/gauss_tree.hpp"
#include "magicpaint/propagate/gaussian_filter.hpp"
#include "magicpaint/propagate/permutohedral.hpp"
#include "magicpaint/service/session.hpp"
#include "magicpaint/sim/simulate.hpp"
#include "magicpaint/synth/synthetic.hpp"
