#pragma once

#include "lebdec/psd_core.hpp"
#include "lebdec/parallel_sum.hpp"
#include "lebdec/lebesgue.hpp"
#include "lebdec/forms.hpp"
#include "lebdec/functionals.hpp"
