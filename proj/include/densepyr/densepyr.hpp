#ifndef DENSEPYR_DENSEPYR_HPP
#define DENSEPYR_DENSEPYR_HPP

#include "densepyr/convnet.hpp"
#include "densepyr/costmodel.hpp"
#include "densepyr/error.hpp"
#include "densepyr/geometry.hpp"
#include "densepyr/imaging.hpp"
#include "densepyr/packing.hpp"
#include "densepyr/pyramid.hpp"

#endif  // DENSEPYR_DENSEPYR_HPP
