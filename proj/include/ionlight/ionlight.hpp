#pragma once

// Convenience header for the whole library.

#include "ionlight/atomic_model.hpp"
#include "ionlight/collection_geometry.hpp"
#include "ionlight/constants.hpp"
#include "ionlight/correlator.hpp"
#include "ionlight/error.hpp"
#include "ionlight/keyvalue.hpp"
#include "ionlight/least_squares.hpp"
#include "ionlight/master_equation.hpp"
#include "ionlight/micromotion.hpp"
#include "ionlight/photostream.hpp"
#include "ionlight/pipelines.hpp"
#include "ionlight/presets.hpp"
#include "ionlight/random.hpp"
#include "ionlight/spectroscopy.hpp"
#include "ionlight/timetag_io.hpp"
#include "ionlight/trap_analysis.hpp"
#include "ionlight/trap_field.hpp"
