#pragma once

#include <string>

#include "aronsson/grid.hpp"

namespace aronsson {

// Fields serialize to CSV with 17 significant digits, row-major.
// Scalar header: x,y,value   Vector header: x,y,v1,v2
// The reader reconstructs the grid from the coordinate columns.

void write_csv(const ScalarField& f, const std::string& path);
void write_csv(const VectorField& f, const std::string& path);

ScalarField read_scalar_csv(const std::string& path);
VectorField read_vector_csv(const std::string& path);

}  // namespace aronsson
