#pragma once

#include "covspde/core.hpp"

#include <string>
#include <utility>
#include <vector>

namespace covspde {

/// Rotation planes (i, j), i < j, in lexicographic order.
int plane_count(int d);
std::pair<int, int> plane_axes(int d, int plane);
int plane_index(int d, int i, int j);

/// Defining-representation generator of a plane: (S)_{ij} = -1, (S)_{ji} = +1.
MatR defining_generator(int d, int plane);

/// Real orthogonal representation of SO(d) through its skew generators.
class Representation {
 public:
  Representation(int d, std::vector<MatR> generators, std::string name);

  int d() const { return d_; }
  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  const std::vector<MatR>& generators() const { return gens_; }
  const MatR& generator(int plane) const;

  /// Block-diagonal direct sum; generators concatenate exactly.
  Representation operator+(const Representation& other) const;

 private:
  int d_;
  int dim_;
  std::vector<MatR> gens_;
  std::string name_;
};

/// "trivial", "vector", "skew2" and "+"-joined direct sums, e.g. "vector+vector".
Representation builtin_representation(const std::string& name, int d);

/// exp(angle * S_plane).
MatR rotation_matrix(const Representation& rep, int plane, double angle);

/// Structure-constant check: max residual of [S_a, S_b] against the defining-rep
/// commutator expanded in the plane basis.
double commutation_residual(const Representation& rep);

/// Composes plane rotations with the given angles (one per plane, in order).
MatR compose_rotations(const Representation& rep, const std::vector<double>& angles);

}  // namespace covspde
