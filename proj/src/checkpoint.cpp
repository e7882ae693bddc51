#include "driftcast/nn/checkpoint.hpp"

#include "driftcast/errors.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace driftcast::nn {

namespace {

[[noreturn]] void corrupt(const std::string& why) {
    throw Error(ErrorClass::Data, "corrupt checkpoint: " + why);
}

std::string next_line(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) corrupt("unexpected end of file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::size_t expect_count(std::istream& in, const std::string& keyword) {
    std::istringstream ls(next_line(in));
    std::string word;
    std::size_t n = 0;
    if (!(ls >> word >> n) || word != keyword) corrupt("expected '" + keyword + " <count>'");
    return n;
}

bool has_space(const std::string& s) {
    return s.find_first_of(" \t\r\n") != std::string::npos || s.empty();
}

}  // namespace

const std::string* CheckpointSection::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

const CheckpointSection* Checkpoint::find(const std::string& tag) const {
    for (const auto& s : sections)
        if (s.tag == tag) return &s;
    return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out << kCheckpointVersion << '\n';
    out << "sections " << ckpt.sections.size() << '\n';
    char buf[64];
    for (const auto& section : ckpt.sections) {
        if (has_space(section.tag)) throw WiringMismatch("section tag must be a single token");
        out << "section " << section.tag << '\n';
        out << "meta " << section.meta.size() << '\n';
        for (const auto& [k, v] : section.meta) {
            if (has_space(k) || k.find('=') != std::string::npos || v.find('\n') != std::string::npos)
                throw WiringMismatch("bad checkpoint meta key '" + k + "'");
            out << k << '=' << v << '\n';
        }
        out << "tensors " << section.params.size() << '\n';
        for (const auto& t : section.params.tensors()) {
            if (has_space(t.name)) throw WiringMismatch("tensor name must be a single token");
            out << "tensor " << t.name << ' ' << to_string(t.shape.kind) << ' ' << t.layer_type_id << ' '
                << t.shape.d_in << ' ' << t.shape.d_out << ' ' << t.shape.d_k << ' ' << t.values.size()
                << '\n';
            for (Eigen::Index i = 0; i < t.values.size(); ++i) {
                const auto res = std::to_chars(buf, buf + sizeof(buf), t.values(i));
                if (i > 0) out << ' ';
                out.write(buf, res.ptr - buf);
            }
            out << '\n';
        }
        out << "end\n";
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    if (next_line(in) != kCheckpointVersion) corrupt("missing version tag");
    Checkpoint ckpt;
    const std::size_t n_sections = expect_count(in, "sections");
    for (std::size_t s = 0; s < n_sections; ++s) {
        CheckpointSection section;
        {
            std::istringstream ls(next_line(in));
            std::string word;
            if (!(ls >> word >> section.tag) || word != "section") corrupt("expected 'section <tag>'");
        }
        const std::size_t n_meta = expect_count(in, "meta");
        for (std::size_t m = 0; m < n_meta; ++m) {
            const std::string line = next_line(in);
            const auto eq = line.find('=');
            if (eq == std::string::npos) corrupt("meta line without '='");
            section.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        }
        const std::size_t n_tensors = expect_count(in, "tensors");
        for (std::size_t t = 0; t < n_tensors; ++t) {
            std::istringstream ls(next_line(in));
            std::string word, name, kind;
            int type_id = 0;
            ParamShape shape;
            std::int64_t n = 0;
            if (!(ls >> word >> name >> kind >> type_id >> shape.d_in >> shape.d_out >> shape.d_k >> n) ||
                word != "tensor")
                corrupt("bad tensor header");
            shape.kind = param_kind_from_string(kind);
            ParamTensor tensor(name, shape, type_id);
            if (n != shape.size()) corrupt("value count does not match shape for " + name);
            const std::string values = next_line(in);
            const char* p = values.data();
            const char* end = values.data() + values.size();
            for (std::int64_t i = 0; i < n; ++i) {
                while (p < end && *p == ' ') ++p;
                double v = 0.0;
                const auto res = std::from_chars(p, end, v);
                if (res.ec != std::errc{}) corrupt("bad value in " + name);
                tensor.values(i) = v;
                p = res.ptr;
            }
            section.params.add(std::move(tensor));
        }
        if (next_line(in) != "end") corrupt("missing section end");
        ckpt.sections.push_back(std::move(section));
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorClass::Data, "cannot write checkpoint " + path.string());
    write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingCheckpoint(path.string());
    return read_checkpoint(in);
}

void restore_values(ParamStore& into, const ParamStore& from) {
    if (!into.same_layout(from)) throw WiringMismatch("parameter layouts differ");
    for (std::size_t i = 0; i < into.size(); ++i) into.mutate(i).values = from[i].values;
}

}  // namespace driftcast::nn
