#pragma once

#include "flashexp/commands.hpp"
#include "flashexp/expmul.hpp"
#include "flashexp/fixedlog.hpp"
#include "flashexp/floatbits.hpp"
#include "flashexp/generator.hpp"
#include "flashexp/kernels.hpp"
#include "flashexp/refmodel.hpp"
#include "flashexp/tensor.hpp"
#include "flashexp/tensor_file.hpp"
