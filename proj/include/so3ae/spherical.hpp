#pragma once

#include <vector>

#include <Eigen/Dense>

namespace so3ae {

// Real spherical harmonics, orthonormal on the unit sphere:
//   integral over S^2 of Y_{lm} Y_{l'm'} dOmega = delta_{ll'} delta_{mm'}.
//
// They are assembled from the complex harmonics with the Condon-Shortley
// phase, Y^C_{lm} = (-1)^m sqrt[(2l+1)/(4pi) (l-m)!/(l+m)!] P_l^m(cos th)
// e^{i m phi}, via the standard real combination
//
//   Y_{l0}    = Y^C_{l0}
//   Y_{lm}    = sqrt2 (-1)^m Re Y^C_{lm}
//             = sqrt2 N_{lm} P_l^m(cos th) cos(m phi),          m > 0
//   Y_{l,-m}  = sqrt2 (-1)^m Im Y^C_{lm}
//             = sqrt2 N_{lm} P_l^m(cos th) sin(m phi),          m > 0
//
// where N_{lm} = sqrt[(2l+1)/(4pi) (l-m)!/(l+m)!] and the associated
// Legendre P_l^m here carries no Condon-Shortley factor (it is pulled out
// explicitly above). In particular for l=1 the m = (-1, 0, +1) components
// are sqrt(3/4pi) times (y, z, x).
//
// theta is the polar angle measured from +z, phi the azimuth from +x.

// Evaluates all real harmonics with l <= l_max at (theta, phi), packed as a
// flat vector of length (l_max+1)^2 with index l*(l+1)+m, m = -l..l.
std::vector<double> real_spherical_harmonics(int l_max, double theta,
                                             double phi);

// Same evaluation from a (not necessarily unit) direction vector.
std::vector<double> real_spherical_harmonics_dir(int l_max,
                                                 const Eigen::Vector3d& dir);

// Associated Legendre values P_l^m(x) for 0 <= m <= l <= l_max, *without*
// the Condon-Shortley phase, packed at index l*(l+1)/2 + m. Evaluated by the
// standard stable recurrences (diagonal seed, then upward in l).
std::vector<double> associated_legendre(int l_max, double x);

}  // namespace so3ae
