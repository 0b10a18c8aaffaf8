#ifndef TUBENAV_OBJ_IO_HPP
#define TUBENAV_OBJ_IO_HPP

#include <array>
#include <string>
#include <vector>

#include "tubenav/vec3.hpp"

namespace tubenav {

struct ObjData {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles; // 0-based; polygons fan-triangulated
    std::vector<std::vector<int>> polylines;   // 0-based 'l' records
};

// Minimal ASCII OBJ reader: v, f, l records; texture/normal references after
// '/' are ignored. Negative (relative) indices are resolved.
ObjData parse_obj(const std::string& text);
ObjData load_obj_file(const std::string& path);

} // namespace tubenav

#endif
