#pragma once

#include "orbcorr/fock.hpp"
#include "orbcorr/linalg.hpp"
#include "orbcorr/models.hpp"
#include "orbcorr/groundstate.hpp"
#include "orbcorr/rdm.hpp"
#include "orbcorr/ssr.hpp"
#include "orbcorr/entropy.hpp"
#include "orbcorr/separable.hpp"
#include "orbcorr/correlation.hpp"
#include "orbcorr/report.hpp"
