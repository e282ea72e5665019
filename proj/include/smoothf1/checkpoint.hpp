#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "smoothf1/losses.hpp"
#include "smoothf1/model.hpp"

namespace smoothf1 {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t hash = 14695981039346656037ULL) {
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

namespace detail {

inline void write_array(std::ostream& out, const char* name, const double* values,
                        std::size_t count) {
    out << name;
    char buffer[48];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(buffer, sizeof(buffer), "%a", values[i]);
        out << " " << buffer;
    }
    out << "\n";
}

inline void read_array(std::istream& in, const std::string& name, double* values,
                       std::size_t count) {
    std::string tag;
    in >> tag;
    if (tag != name)
        throw CheckpointError("checkpoint: expected array '" + name + "', found '" + tag + "'");
    for (std::size_t i = 0; i < count; ++i) {
        std::string token;
        if (!(in >> token))
            throw CheckpointError("checkpoint: array '" + name + "' truncated");
        char* end = nullptr;
        values[i] = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0')
            throw CheckpointError("checkpoint: bad value in array '" + name + "'");
    }
}

}  // namespace detail

/// Model checkpoint: plain text with a header (dims, seed, loss spec),
/// row-major parameter arrays in hexfloat (exact round trip), and a trailing
/// FNV-1a 64 checksum over everything above it.
inline void save_checkpoint(const std::string& path, const HeadModel& model,
                            const LossSpec& loss, Seed run_seed) {
    std::ostringstream body;
    body << "smoothf1-checkpoint v1\n";
    body << "dims " << model.d_in << " " << model.d_hidden << " " << model.n_classes << "\n";
    body << "init_seed " << model.init_seed << "\n";
    body << "run_seed " << run_seed << "\n";
    body << "loss " << loss_spec_to_string(loss) << "\n";
    detail::write_array(body, "w1", model.w1.data(), model.w1.size());
    detail::write_array(body, "b1", model.b1.data(), model.b1.size());
    detail::write_array(body, "w2", model.w2.data(), model.w2.size());
    detail::write_array(body, "b2", model.b2.data(), model.b2.size());
    const std::string payload = body.str();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw CheckpointError("cannot write checkpoint: " + path);
    char checksum[32];
    std::snprintf(checksum, sizeof(checksum), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    out << payload << "checksum " << checksum << "\n";
    if (!out)
        throw CheckpointError("checkpoint write failed: " + path);
}

struct Checkpoint {
    HeadModel model;
    LossSpec loss;
    Seed run_seed = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CheckpointError("cannot open checkpoint: " + path);
    std::stringstream whole;
    whole << in.rdbuf();
    std::string content = whole.str();
    const std::string marker = "checksum ";
    const std::size_t pos = content.rfind(marker);
    if (pos == std::string::npos)
        throw CheckpointError("checkpoint missing checksum: " + path);
    const std::string payload = content.substr(0, pos);
    std::istringstream tail(content.substr(pos + marker.size()));
    std::string stored;
    tail >> stored;
    char expected[32];
    std::snprintf(expected, sizeof(expected), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    if (stored != expected)
        throw CheckpointError("checkpoint checksum failure: " + path + " (stored " + stored +
                              ", computed " + expected + ")");

    std::istringstream body(payload);
    std::string line;
    std::getline(body, line);
    if (line != "smoothf1-checkpoint v1")
        throw CheckpointError("unrecognized checkpoint header: " + line);
    Checkpoint ckpt;
    std::string tag;
    std::size_t d_in = 0, d_hidden = 0, classes = 0;
    body >> tag >> d_in >> d_hidden >> classes;
    if (tag != "dims" || body.fail())
        throw CheckpointError("checkpoint: malformed dims line");
    Seed init_seed = 0;
    body >> tag >> init_seed;
    if (tag != "init_seed" || body.fail())
        throw CheckpointError("checkpoint: malformed init_seed line");
    body >> tag >> ckpt.run_seed;
    if (tag != "run_seed" || body.fail())
        throw CheckpointError("checkpoint: malformed run_seed line");
    body >> tag;
    if (tag != "loss")
        throw CheckpointError("checkpoint: malformed loss line");
    std::getline(body, line);
    ckpt.loss = loss_spec_from_string(line);

    HeadModel& m = ckpt.model;
    m.d_in = d_in;
    m.d_hidden = d_hidden;
    m.n_classes = classes;
    m.init_seed = init_seed;
    m.w1 = Matrix(d_in, d_hidden);
    m.b1.assign(d_hidden, 0.0);
    m.w2 = Matrix(d_hidden, classes);
    m.b2.assign(classes, 0.0);
    detail::read_array(body, "w1", m.w1.data(), m.w1.size());
    detail::read_array(body, "b1", m.b1.data(), m.b1.size());
    detail::read_array(body, "w2", m.w2.data(), m.w2.size());
    detail::read_array(body, "b2", m.b2.data(), m.b2.size());
    return ckpt;
}

}  // namespace smoothf1
