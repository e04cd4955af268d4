// Parameter checkpoints: one line of JSON text describing the networks,
// followed by every parameter as a little-endian IEEE-754 binary64.
#pragma once

#include "acerac/mlp.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

namespace acerac {

struct Checkpoint {
    std::string env;
    Mlp actor;
    Mlp critic;
    long long optimizer_steps = 0;
    long long timestep = 0;
};

namespace detail {

inline nlohmann::json spec_to_json(const MlpSpec& spec) {
    return {{"input_dim", spec.input_dim},
            {"hidden", spec.hidden},
            {"output_dim", spec.output_dim},
            {"num_params", spec.num_params()}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
    MlpSpec spec{j.at("input_dim").get<int>(), j.at("hidden").get<std::vector<int>>(),
                 j.at("output_dim").get<int>()};
    spec.validate();
    require(j.at("num_params").get<Eigen::Index>() == spec.num_params(),
            "checkpoint: num_params does not match layer widths");
    return spec;
}

inline void write_f64_le(std::ostream& out, const Vector& values) {
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        const auto bits = std::bit_cast<std::uint64_t>(values[k]);
        char bytes[8];
        for (int b = 0; b < 8; ++b) {
            bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
        out.write(bytes, 8);
    }
}

inline Vector read_f64_le(std::istream& in, Eigen::Index count) {
    Vector values(count);
    for (Eigen::Index k = 0; k < count; ++k) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        require(static_cast<bool>(in), "checkpoint: truncated parameter payload");
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        }
        values[k] = std::bit_cast<double>(bits);
    }
    return values;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json header = {{"format", "acerac-checkpoint"},
                             {"version", 1},
                             {"env", ckpt.env},
                             {"actor", detail::spec_to_json(ckpt.actor.spec())},
                             {"critic", detail::spec_to_json(ckpt.critic.spec())},
                             {"optimizer_steps", ckpt.optimizer_steps},
                             {"timestep", ckpt.timestep}};
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open checkpoint for writing: " + path);
    }
    out << header.dump() << '\n';
    detail::write_f64_le(out, ckpt.actor.params());
    detail::write_f64_le(out, ckpt.critic.params());
    if (!out) {
        throw std::runtime_error("failed writing checkpoint: " + path);
    }
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint: " + path);
    }
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line);
    detail::require(header.at("format") == "acerac-checkpoint", "checkpoint: unrecognized format");
    detail::require(header.at("version") == 1, "checkpoint: unsupported version");

    Checkpoint ckpt;
    ckpt.env = header.at("env").get<std::string>();
    ckpt.optimizer_steps = header.at("optimizer_steps").get<long long>();
    ckpt.timestep = header.at("timestep").get<long long>();
    const MlpSpec actor_spec = detail::spec_from_json(header.at("actor"));
    const MlpSpec critic_spec = detail::spec_from_json(header.at("critic"));
    Vector actor_params = detail::read_f64_le(in, actor_spec.num_params());
    Vector critic_params = detail::read_f64_le(in, critic_spec.num_params());
    ckpt.actor = Mlp(actor_spec, std::move(actor_params));
    ckpt.critic = Mlp(critic_spec, std::move(critic_params));
    in.peek();
    detail::require(in.eof(), "checkpoint: trailing bytes after parameter payload");
    return ckpt;
}

} // namespace acerac
