#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace daedalus {

/// Mean over points of the share of each point's k nearest 2-D neighbours
/// (self excluded, ties by row) that carry the same class.
/// `coords` is rows x 2.
double knn_purity(std::span<const float> coords, std::span<const std::string> classes, std::size_t k);

/// Per-point purities, same convention.
std::vector<double> knn_purity_per_point(std::span<const float> coords, std::span<const std::string> classes,
                                         std::size_t k);

}  // namespace daedalus
