#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ino/encoder/vit.hpp"
#include "ino/harness/config.hpp"
#include "ino/numerics/record.hpp"
#include "ino/objectives/teacher.hpp"
#include "ino/optimizer/adamw.hpp"

// Checkpoint file:
//   "INOC" | version u8 | step u64 | optimizer step u64 | skip streak u32
//   | config text (u32 length + bytes) | entry count u32
//   | entries: name (u32 length + bytes), offset u64, length u64
//   | blob of concatenated tensor records (offsets relative to blob start)
// Entry names: student.<param>, teacher.<param>, teacher.center_cls,
// teacher.center_patch, opt.m.<param>, opt.v.<param>.

namespace ino {

inline constexpr char kCheckpointMagic[4] = {'I', 'N', 'O', 'C'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Everything the training loop mutates.
struct TrainState {
    EncoderParams<float> student;
    TeacherState<float> teacher;
    OptState<float> opt;
    std::uint64_t step = 0;
    std::uint32_t skip_streak = 0;  // consecutive non-finite steps
};

struct Checkpoint {
    RunConfig config;
    TrainState state;
};

inline std::vector<ParamRef<float>> param_refs(const EncoderParams<float>& p) {
    std::vector<ParamRef<float>> out;
    p.visit([&](const std::string& n, const Tensor<float>& t) { out.push_back({n, t}); });
    return out;
}

/// Fresh state: seeded student, teacher copied from it, zero centers and moments.
inline TrainState init_train_state(const RunConfig& cfg) {
    TrainState s;
    s.student = init_params<float>(cfg.model, Rng(cfg.seed).split("init"), true);
    s.teacher = TeacherState<float>::from_student(s.student, cfg.model.proj_dim);
    s.teacher.ema_momentum = cfg.ema_momentum;
    s.teacher.center_momentum = cfg.center_momentum;
    s.opt = OptState<float>::for_params(param_refs(s.student));
    return s;
}

inline void write_checkpoint(std::ostream& os, const RunConfig& cfg, const TrainState& s) {
    std::vector<std::pair<std::string, Tensor<float>>> entries;
    s.student.visit([&](const std::string& n, const Tensor<float>& t) { entries.emplace_back("student." + n, t); });
    s.teacher.params.visit([&](const std::string& n, const Tensor<float>& t) { entries.emplace_back("teacher." + n, t); });
    entries.emplace_back("teacher.center_cls", Tensor<float>({s.teacher.center_cls.size()}, s.teacher.center_cls));
    entries.emplace_back("teacher.center_patch", Tensor<float>({s.teacher.center_patch.size()}, s.teacher.center_patch));
    const auto refs = param_refs(s.student);
    if (s.opt.first_moment.size() != refs.size() || s.opt.second_moment.size() != refs.size()) {
        throw ShapeError("write_checkpoint: optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        entries.emplace_back("opt.m." + refs[i].name, Tensor<float>(refs[i].tensor.shape(), s.opt.first_moment[i]));
        entries.emplace_back("opt.v." + refs[i].name, Tensor<float>(refs[i].tensor.shape(), s.opt.second_moment[i]));
    }

    std::ostringstream blob;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (const auto& [name, t] : entries) {
        const auto begin = static_cast<std::uint64_t>(blob.tellp());
        write_record(blob, t);
        spans.emplace_back(begin, static_cast<std::uint64_t>(blob.tellp()) - begin);
    }

    os.write(kCheckpointMagic, 4);
    io::put_le<std::uint8_t>(os, kCheckpointVersion);
    io::put_le<std::uint64_t>(os, s.step);
    io::put_le<std::uint64_t>(os, s.opt.step);
    io::put_le<std::uint32_t>(os, s.skip_streak);
    io::put_string(os, to_text(cfg));
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        io::put_string(os, entries[i].first);
        io::put_le<std::uint64_t>(os, spans[i].first);
        io::put_le<std::uint64_t>(os, spans[i].second);
    }
    const std::string bytes = blob.str();
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write_checkpoint: stream write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
    const auto version = io::get_le<std::uint8_t>(is);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.state.step = io::get_le<std::uint64_t>(is);
    const auto opt_step = io::get_le<std::uint64_t>(is);
    ck.state.skip_streak = io::get_le<std::uint32_t>(is);
    ck.config = parse_config(io::get_string(is));
    const auto count = io::get_le<std::uint32_t>(is);
    std::vector<std::tuple<std::string, std::uint64_t, std::uint64_t>> index;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name = io::get_string(is);
        const auto off = io::get_le<std::uint64_t>(is);
        const auto len = io::get_le<std::uint64_t>(is);
        index.emplace_back(std::move(name), off, len);
    }
    std::string blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::map<std::string, Tensor<float>> tensors;
    for (const auto& [name, off, len] : index) {
        if (off + len > blob.size()) throw FormatError("checkpoint entry '" + name + "' runs past end of file");
        std::istringstream rec(blob.substr(off, len));
        tensors.emplace(name, read_record<float>(rec));
    }
    auto take = [&](const std::string& name, const Shape& shape) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw FormatError("checkpoint is missing '" + name + "'");
        if (it->second.shape() != shape) {
            throw FormatError("checkpoint entry '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " + shape_str(shape));
        }
        auto d = it->second.data();
        return std::vector<float>(d.begin(), d.end());
    };
    auto fill = [&](EncoderParams<float>& p, const std::string& prefix) {
        p.visit([&](const std::string& n, Tensor<float>& t) {
            auto v = take(prefix + n, t.shape());
            auto dst = t.mutable_data();
            std::copy(v.begin(), v.end(), dst.begin());
        });
    };

    ck.state = [&] {
        TrainState s = init_train_state(ck.config);
        s.step = ck.state.step;
        s.skip_streak = ck.state.skip_streak;
        return s;
    }();
    fill(ck.state.student, "student.");
    fill(ck.state.teacher.params, "teacher.");
    const std::size_t k = ck.config.model.proj_dim;
    ck.state.teacher.center_cls = take("teacher.center_cls", {k});
    ck.state.teacher.center_patch = take("teacher.center_patch", {k});
    const auto refs = param_refs(ck.state.student);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        ck.state.opt.first_moment[i] = take("opt.m." + refs[i].name, refs[i].tensor.shape());
        ck.state.opt.second_moment[i] = take("opt.v." + refs[i].name, refs[i].tensor.shape());
    }
    ck.state.opt.step = opt_step;
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const TrainState& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_checkpoint(os, cfg, s);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());
    try {
        return read_checkpoint(is);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace ino
