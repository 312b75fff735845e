#include "gridppo/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridppo {

using nlohmann::json;

Normalization normalization_of(const Case& c) {
    Normalization n;
    n.base_mva = c.baseMVA;
    const auto ng = static_cast<Eigen::Index>(c.gen_count());
    n.pg_min.resize(ng);
    n.pg_max.resize(ng);
    n.vg_min.resize(ng);
    n.vg_max.resize(ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
        const auto& gen = c.generators[static_cast<std::size_t>(g)];
        const auto& bus = c.buses[c.bus_index(gen.bus)];
        n.pg_min(g) = gen.Pmin;
        n.pg_max(g) = gen.Pmax;
        n.vg_min(g) = bus.Vmin;
        n.vg_max(g) = bus.Vmax;
    }
    return n;
}

bool operator==(const Normalization& a, const Normalization& b) {
    return a.base_mva == b.base_mva && a.pg_min == b.pg_min && a.pg_max == b.pg_max && a.vg_min == b.vg_min &&
           a.vg_max == b.vg_max;
}

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mlp_json(const nn::Mlp<double>& m) {
    json layers = json::array();
    for (const auto& l : m.layers) {
        // W row-major: row r holds the weights into output unit r.
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.W;
        layers.push_back({{"rows", l.W.rows()},
                          {"cols", l.W.cols()},
                          {"activation", nn::to_string(l.act)},
                          {"W", std::vector<double>(w.data(), w.data() + w.size())},
                          {"b", vec_json(l.b)}});
    }
    return layers;
}

nn::Mlp<double> mlp_from(const json& j) {
    nn::Mlp<double> m;
    for (const auto& l : j) {
        const auto rows = l.at("rows").get<Eigen::Index>(), cols = l.at("cols").get<Eigen::Index>();
        const auto w = l.at("W").get<std::vector<double>>();
        if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(w.size()) != rows * cols)
            throw CheckpointError("layer weight count does not match its shape");
        nn::Layer<double> layer;
        layer.W = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), rows, cols);
        layer.b = vec_from(l.at("b"));
        if (layer.b.size() != rows) throw CheckpointError("bias length does not match layer width");
        layer.act = nn::activation_from_string(l.at("activation").get<std::string>());
        if (!m.layers.empty() && m.layers.back().W.rows() != cols) throw CheckpointError("layer widths do not chain");
        m.layers.push_back(std::move(layer));
    }
    if (m.layers.empty()) throw CheckpointError("network has no layers");
    return m;
}

json arch_json(const nn::Mlp<double>& m) {
    std::vector<Eigen::Index> widths{m.in_width()};
    std::vector<std::string> acts;
    for (const auto& l : m.layers) {
        widths.push_back(l.W.rows());
        acts.emplace_back(nn::to_string(l.act));
    }
    return {{"widths", widths}, {"activations", acts}};
}

json adam_json(const nn::AdamState<double>& s) {
    return {{"t", s.t}, {"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps}, {"m", vec_json(s.m)}, {"v", vec_json(s.v)}};
}

nn::AdamState<double> adam_from(const json& j) {
    nn::AdamState<double> s;
    s.t = j.at("t").get<long>();
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.eps = j.at("eps").get<double>();
    s.m = vec_from(j.at("m"));
    s.v = vec_from(j.at("v"));
    return s;
}

}  // namespace

std::string checkpoint_json(const Checkpoint& ck) {
    json j;
    j["format"] = "gridppo-checkpoint";
    j["version"] = ck.version;
    j["stage"] = ck.stage;
    j["update"] = ck.update;
    j["case_fingerprint"] = ck.case_fingerprint;
    j["architecture"] = {{"actor", arch_json(ck.policy.actor)}, {"critic", arch_json(ck.critic)}};
    j["normalization"] = {{"base_mva", ck.normalization.base_mva},
                          {"pg_min", vec_json(ck.normalization.pg_min)},
                          {"pg_max", vec_json(ck.normalization.pg_max)},
                          {"vg_min", vec_json(ck.normalization.vg_min)},
                          {"vg_max", vec_json(ck.normalization.vg_max)}};
    j["calibration"] = {{"defined", ck.calibration.defined}, {"k", ck.calibration.k}, {"b", ck.calibration.b},
                        {"c_min", ck.calibration.c_min}, {"c_max", ck.calibration.c_max}};
    j["actor"] = mlp_json(ck.policy.actor);
    j["log_std"] = vec_json(ck.policy.log_std);
    j["critic"] = mlp_json(ck.critic);
    j["optimizer"] = {{"actor", adam_json(ck.optimizers.actor)}, {"critic", adam_json(ck.optimizers.critic)}};
    j["config"] = ck.config_text;
    return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    Checkpoint ck;
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "gridppo-checkpoint") throw CheckpointError("not a gridppo checkpoint");
        ck.version = j.at("version").get<int>();
        if (ck.version != kCheckpointVersion)
            throw CheckpointError("checkpoint version " + std::to_string(ck.version) + " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
        ck.stage = j.at("stage").get<std::string>();
        ck.update = j.at("update").get<int>();
        ck.case_fingerprint = j.at("case_fingerprint").get<std::string>();
        const auto& n = j.at("normalization");
        ck.normalization.base_mva = n.at("base_mva").get<double>();
        ck.normalization.pg_min = vec_from(n.at("pg_min"));
        ck.normalization.pg_max = vec_from(n.at("pg_max"));
        ck.normalization.vg_min = vec_from(n.at("vg_min"));
        ck.normalization.vg_max = vec_from(n.at("vg_max"));
        const auto& c = j.at("calibration");
        ck.calibration = {c.at("defined").get<bool>(), c.at("k").get<double>(), c.at("b").get<double>(),
                          c.at("c_min").get<double>(), c.at("c_max").get<double>()};
        ck.policy.actor = mlp_from(j.at("actor"));
        ck.policy.log_std = vec_from(j.at("log_std"));
        if (ck.policy.log_std.size() != ck.policy.actor.out_width())
            throw CheckpointError("log_std length does not match the actor output");
        ck.critic = mlp_from(j.at("critic"));
        ck.optimizers.actor = adam_from(j.at("optimizer").at("actor"));
        ck.optimizers.critic = adam_from(j.at("optimizer").at("critic"));
        ck.config_text = j.at("config").get<std::string>();
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw CheckpointError("cannot write " + tmp);
        out << checkpoint_json(ck) << '\n';
        out.flush();
        if (!out) throw CheckpointError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<std::string>& expected_fingerprint) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot read checkpoint " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    Checkpoint ck = checkpoint_from_json(ss.str());
    if (expected_fingerprint && *expected_fingerprint != ck.case_fingerprint)
        throw CheckpointError("case fingerprint mismatch: checkpoint " + path + " was trained on " +
                              ck.case_fingerprint + ", current case is " + *expected_fingerprint);
    return ck;
}

}  // namespace gridppo
