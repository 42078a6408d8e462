// Copyright 2026 The rotdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "rotdet/geometry.hpp"

namespace rotdet {

struct Annotation {
  RotatedBox box;
  int class_id = 0;
  bool difficult = false;
  // Cut by a tile border; set by the tiler.
  bool truncated = false;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotationSet {
  std::string image_id;
  double image_w = 0.0;
  double image_h = 0.0;
  std::vector<Annotation> objects;

  std::vector<RotatedBox> boxes() const {
    std::vector<RotatedBox> out;
    out.reserve(objects.size());
    for (const auto& o : objects) out.push_back(o.box);
    return out;
  }

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

}  // namespace rotdet
