#pragma once

#include "ringtrace/units.hpp"
#include "ringtrace/errors.hpp"
#include "ringtrace/numeric.hpp"
#include "ringtrace/dispersion.hpp"
#include "ringtrace/indicatrix.hpp"
#include "ringtrace/phasematch.hpp"
#include "ringtrace/smallangle.hpp"
#include "ringtrace/walkoff.hpp"
#include "ringtrace/spectra.hpp"
#include "ringtrace/imagefit.hpp"
#include "ringtrace/report.hpp"
