#ifndef BIMCC_BIMCC_HPP
#define BIMCC_BIMCC_HPP

// Umbrella header: robust rigid point-cloud registration (classic and
// bidirectional maximum-correntropy ICP), gradient-based stereo disparity
// with occlusion filling, synthetic benchmark generators, and file I/O.

#include "bimcc/error.hpp"
#include "bimcc/icp.hpp"
#include "bimcc/image.hpp"
#include "bimcc/io.hpp"
#include "bimcc/kdtree.hpp"
#include "bimcc/point_cloud.hpp"
#include "bimcc/rigid_fit.hpp"
#include "bimcc/stereo.hpp"
#include "bimcc/synth.hpp"

#endif  // BIMCC_BIMCC_HPP
