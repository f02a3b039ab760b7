#include "basepose/persist.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace basepose {

using nlohmann::json;

void atomic_write(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for write: " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

namespace {

json rect_to_json(const OrientedRect& r) {
    return {{"cx_m", r.center.x},
            {"cy_m", r.center.y},
            {"half_w_m", r.half_w},
            {"half_h_m", r.half_h},
            {"theta_rad", r.theta}};
}

OrientedRect rect_from_json(const json& j) {
    OrientedRect r;
    r.center = {j.at("cx_m").get<double>(), j.at("cy_m").get<double>()};
    r.half_w = j.at("half_w_m").get<double>();
    r.half_h = j.at("half_h_m").get<double>();
    r.theta = j.at("theta_rad").get<double>();
    return r;
}

// LE encoding helpers; bit-exact round trips are part of the format contract.
void put_u16(std::string& s, uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u8(std::string& s, uint8_t v) { s.push_back(static_cast<char>(v)); }

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string name;

    void need(size_t n, const char* what) {
        if (pos + n > buf.size())
            throw FormatError(name + ": truncated " + what + " at offset " +
                              std::to_string(pos));
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint8_t>(buf[pos]) |
                     (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string bytes(size_t n, const char* what) {
        need(n, what);
        std::string out = buf.substr(pos, n);
        pos += n;
        return out;
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string scene_to_json(const SceneSpec& s) {
    json j;
    j["v"] = 1;
    j["world_half_extent_m"] = s.world_half_extent;
    j["resolution_m_per_px"] = s.resolution;
    j["table"] = rect_to_json(s.table);
    j["table_height_m"] = s.table_height;
    json obs = json::array();
    for (const auto& o : s.obstacles) {
        json e = rect_to_json(o.rect);
        e["full_height"] = o.full_height;
        e["height_m"] = o.height;
        obs.push_back(e);
    }
    j["obstacles"] = obs;
    j["object"] = {{"x_m", s.object_pos.x},
                   {"y_m", s.object_pos.y},
                   {"yaw_rad", s.object_yaw},
                   {"size_m", s.object_size}};
    j["robot_start"] = {
        {"x_m", s.robot_start.x}, {"y_m", s.robot_start.y}, {"theta_rad", s.robot_start.theta}};
    j["robot_draw"] = {{"len_m", s.robot_draw_len},
                       {"wid_m", s.robot_draw_wid},
                       {"height_m", s.robot_draw_height}};
    j["seed"] = s.seed;
    return j.dump();
}

SceneSpec scene_from_json(const std::string& line) {
    const json j = json::parse(line);
    if (j.at("v").get<int>() != 1)
        throw FormatError("scene json: unsupported schema version " +
                          std::to_string(j.at("v").get<int>()));
    SceneSpec s;
    s.world_half_extent = j.at("world_half_extent_m").get<double>();
    s.resolution = j.at("resolution_m_per_px").get<double>();
    s.table = rect_from_json(j.at("table"));
    s.table_height = j.at("table_height_m").get<double>();
    for (const auto& e : j.at("obstacles")) {
        ObstacleSpec o;
        o.rect = rect_from_json(e);
        o.full_height = e.at("full_height").get<bool>();
        o.height = e.at("height_m").get<double>();
        s.obstacles.push_back(o);
    }
    const auto& ob = j.at("object");
    s.object_pos = {ob.at("x_m").get<double>(), ob.at("y_m").get<double>()};
    s.object_yaw = ob.at("yaw_rad").get<double>();
    s.object_size = ob.at("size_m").get<double>();
    const auto& rs = j.at("robot_start");
    s.robot_start =
        Pose2(rs.at("x_m").get<double>(), rs.at("y_m").get<double>(), rs.at("theta_rad").get<double>());
    const auto& rd = j.at("robot_draw");
    s.robot_draw_len = rd.at("len_m").get<double>();
    s.robot_draw_wid = rd.at("wid_m").get<double>();
    s.robot_draw_height = rd.at("height_m").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    return s;
}

void save_scenes_jsonl(const std::string& path, const std::vector<SceneSpec>& scenes) {
    std::string out;
    for (const auto& s : scenes) {
        out += scene_to_json(s);
        out += '\n';
    }
    atomic_write(path, out);
}

std::vector<SceneSpec> load_scenes_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<SceneSpec> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(scene_from_json(line));
    }
    return out;
}

void save_irm_dataset(const std::string& path, const std::vector<IrmSample>& samples) {
    std::string out = "IRMD";
    put_u32(out, 1);
    put_u32(out, static_cast<uint32_t>(samples.size()));
    for (const auto& s : samples) {
        const std::string scene = scene_to_json(s.scene);
        put_u32(out, static_cast<uint32_t>(scene.size()));
        out += scene;
        put_u32(out, static_cast<uint32_t>(s.label.k));
        put_u32(out, static_cast<uint32_t>(s.label.hw));
        put_u32(out, static_cast<uint32_t>(s.label.hw));
        out.append(reinterpret_cast<const char*>(s.label.cells.data()), s.label.cells.size());
    }
    atomic_write(path, out);
}

std::vector<IrmSample> load_irm_dataset(const std::string& path) {
    const std::string buf = slurp(path);
    Reader r{buf, 0, path};
    if (r.bytes(4, "magic") != "IRMD") throw FormatError(path + ": bad magic, expected IRMD");
    const uint32_t version = r.u32("version");
    if (version != 1)
        throw FormatError(path + ": unsupported IRMD version " + std::to_string(version));
    const uint32_t count = r.u32("sample count");
    std::vector<IrmSample> out(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t slen = r.u32("scene length");
        out[i].scene = scene_from_json(r.bytes(slen, "scene json"));
        const uint32_t k = r.u32("K");
        const uint32_t h = r.u32("H");
        const uint32_t w = r.u32("W");
        if (h != w) throw FormatError(path + ": non-square label");
        out[i].label.k = static_cast<int>(k);
        out[i].label.hw = static_cast<int>(h);
        const std::string cells =
            r.bytes(static_cast<size_t>(k) * h * w, "label cells");
        out[i].label.cells.assign(cells.begin(), cells.end());
        out[i].proj = rasterize(out[i].scene, static_cast<int>(h));
    }
    return out;
}

void save_weights(const std::string& path, const ParamStore& params) {
    std::string out = "WTSB";
    put_u32(out, 1);
    put_u32(out, static_cast<uint32_t>(params.entries.size()));
    for (const auto& [name, e] : params.entries) {
        put_u16(out, static_cast<uint16_t>(name.size()));
        out += name;
        put_u8(out, 0);  // dtype 0 = float32
        put_u8(out, static_cast<uint8_t>(e.value.ndim()));
        for (int d = 0; d < e.value.ndim(); ++d)
            put_u32(out, static_cast<uint32_t>(e.value.dim(d)));
        // x86 is little-endian; serialize explicitly anyway
        for (float v : e.value.data) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        }
    }
    atomic_write(path, out);
}

ParamStore load_weights(const std::string& path) {
    const std::string buf = slurp(path);
    Reader r{buf, 0, path};
    if (r.bytes(4, "magic") != "WTSB") throw FormatError(path + ": bad magic, expected WTSB");
    const uint32_t version = r.u32("version");
    if (version != 1)
        throw FormatError(path + ": unsupported WTSB version " + std::to_string(version));
    const uint32_t count = r.u32("entry count");
    ParamStore p;
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t nlen = r.u16("name length");
        const std::string name = r.bytes(nlen, "name");
        const uint8_t dtype = r.u8("dtype");
        if (dtype != 0) throw FormatError(path + ": unsupported dtype " + std::to_string(dtype));
        const uint8_t ndim = r.u8("ndim");
        std::vector<int> shape(ndim);
        for (int d = 0; d < ndim; ++d) shape[static_cast<size_t>(d)] = static_cast<int>(r.u32("dim"));
        TensorF t(shape);
        for (int64_t e = 0; e < t.numel(); ++e) {
            const uint32_t bits = r.u32("tensor data");
            float v;
            std::memcpy(&v, &bits, 4);
            t[e] = v;
        }
        p.add(name, std::move(t));
    }
    return p;
}

std::string eval_report_to_json(const EvalReport& report) {
    json j;
    j["v"] = 1;
    j["n_scenes"] = report.n_scenes;
    j["seed"] = report.seed;
    json methods;
    for (const auto& [name, m] : report.methods) {
        methods[name] = {{"time_mean_s", m.time_mean},
                         {"time_std_s", m.time_std},
                         {"path_mean_m", m.path_mean},
                         {"path_std_m", m.path_std},
                         {"success_min_cost", m.success_min_cost},
                         {"success_feasible", m.success_feasible},
                         {"abstained", m.abstained},
                         {"failed", m.failed},
                         {"n", m.n}};
    }
    j["methods"] = methods;
    json rows = json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"scene", r.scene_id},
                        {"method", method_name(r.method)},
                        {"time_s", r.time_s},
                        {"path_m", r.path_m},
                        {"success_min_cost", r.success_min_cost},
                        {"success_feasible", r.success_feasible},
                        {"abstained", r.abstained}});
    j["rows"] = rows;
    return j.dump(2);
}

void save_eval_report(const std::string& path, const EvalReport& report) {
    atomic_write(path, eval_report_to_json(report) + "\n");
}

}  // namespace basepose
