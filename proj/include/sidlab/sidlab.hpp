#pragma once

#include "sidlab/action.hpp"
#include "sidlab/bvp.hpp"
#include "sidlab/campaign.hpp"
#include "sidlab/dynamics.hpp"
#include "sidlab/excursions.hpp"
#include "sidlab/geometry.hpp"
#include "sidlab/io.hpp"
#include "sidlab/landscape.hpp"
#include "sidlab/measures.hpp"
#include "sidlab/path.hpp"
#include "sidlab/rng.hpp"
#include "sidlab/vec.hpp"
