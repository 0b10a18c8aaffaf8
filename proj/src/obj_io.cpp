#include "tubenav/obj_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tubenav {

namespace {

int resolve_index(const std::string& token, std::size_t n_vertices) {
    const auto slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    const int raw = std::stoi(head);
    if (raw == 0) throw std::runtime_error("obj: vertex index 0 is invalid");
    const int idx = raw > 0 ? raw - 1 : static_cast<int>(n_vertices) + raw;
    if (idx < 0 || idx >= static_cast<int>(n_vertices))
        throw std::runtime_error("obj: vertex index out of range");
    return idx;
}

} // namespace

ObjData parse_obj(const std::string& text) {
    ObjData data;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z)) throw std::runtime_error("obj: malformed vertex line");
            data.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) idx.push_back(resolve_index(tok, data.vertices.size()));
            if (idx.size() < 3) throw std::runtime_error("obj: face with fewer than 3 vertices");
            for (std::size_t i = 1; i + 1 < idx.size(); ++i)
                data.triangles.push_back({idx[0], idx[i], idx[i + 1]});
        } else if (tag == "l") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) idx.push_back(resolve_index(tok, data.vertices.size()));
            if (idx.size() < 2) throw std::runtime_error("obj: polyline with fewer than 2 vertices");
            data.polylines.push_back(std::move(idx));
        }
    }
    return data;
}

ObjData load_obj_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open OBJ file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_obj(ss.str());
}

} // namespace tubenav
