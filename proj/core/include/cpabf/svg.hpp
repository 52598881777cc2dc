#pragma once

#include <string>
#include <vector>

#include "cpabf/cpa.hpp"

namespace cpabf {

/// Mesh wireframe with the zero-level-set segments drawn on top in blue.
void write_safe_set_svg(const std::string& path, const Triangulation& tri,
                        const std::vector<Segment>& boundary);

/// Per-simplex classifier heatmap, linear black (min) to yellow (max).
void write_gamma_heatmap_svg(const std::string& path, const Triangulation& tri,
                             const Eigen::VectorXd& gamma);

}  // namespace cpabf
