#pragma once

// Everything in one include.
#include "qlsacd/errors.hpp"
#include "qlsacd/lsdist.hpp"
#include "qlsacd/quadrature.hpp"
#include "qlsacd/acd.hpp"
#include "qlsacd/estimate.hpp"
#include "qlsacd/diagnostics.hpp"
#include "qlsacd/ingest.hpp"
#include "qlsacd/risk.hpp"
#include "qlsacd/io.hpp"
#include "qlsacd/version.hpp"
