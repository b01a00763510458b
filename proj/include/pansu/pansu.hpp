#pragma once

#include "pansu/version.hpp"
#include "pansu/space_form.hpp"
#include "pansu/geodesics.hpp"
#include "pansu/jacobi.hpp"
#include "pansu/spheres.hpp"
#include "pansu/stability.hpp"
#include "pansu/isoperimetry.hpp"
#include "pansu/mesh.hpp"
