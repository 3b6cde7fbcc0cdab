#pragma once

#include "touchless/dataset.hpp"
#include "touchless/fileio.hpp"
#include "touchless/image.hpp"
#include "touchless/image_io.hpp"
#include "touchless/imaging.hpp"
#include "touchless/metrics.hpp"
#include "touchless/pipeline.hpp"
#include "touchless/sift.hpp"
