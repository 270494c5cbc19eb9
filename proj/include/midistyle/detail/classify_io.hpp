#pragma once

#include <string>

#include "midistyle/classify.hpp"

namespace midistyle::detail {

// Shared by the per-algorithm translation units: the archive metadata
// record holding the classifier spec and feature layout.
std::string classifier_meta(const ClassifierSpec& spec, int n_features);
ClassifierSpec spec_from_meta(const std::string& meta, int& n_features);

}  // namespace midistyle::detail
