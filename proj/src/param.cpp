#include "driftcast/nn/param.hpp"

#include "driftcast/errors.hpp"

#include <cstring>

namespace driftcast::nn {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

}  // namespace

const char* to_string(ParamKind kind) noexcept {
    switch (kind) {
        case ParamKind::Linear: return "linear";
        case ParamKind::Bias: return "bias";
        case ParamKind::ConvFilter: return "conv_filter";
    }
    return "?";
}

ParamKind param_kind_from_string(const std::string& s) {
    if (s == "linear") return ParamKind::Linear;
    if (s == "bias") return ParamKind::Bias;
    if (s == "conv_filter") return ParamKind::ConvFilter;
    throw DimMismatch("unknown parameter kind '" + s + "'");
}

std::int64_t ParamShape::size() const noexcept {
    switch (kind) {
        case ParamKind::Linear: return static_cast<std::int64_t>(d_in) * d_out;
        case ParamKind::Bias: return d_out;
        case ParamKind::ConvFilter: return static_cast<std::int64_t>(d_in) * d_out * d_k;
    }
    return 0;
}

ParamTensor::ParamTensor(std::string name_, ParamShape shape_, int layer_type_id_)
    : name(std::move(name_)), shape(shape_), layer_type_id(layer_type_id_),
      values(Vector::Zero(shape_.size())), grad(Vector::Zero(shape_.size())) {
    if (shape.d_out < 1 || (shape.kind != ParamKind::Bias && shape.d_in < 1) || shape.d_k < 1)
        throw ShapeMismatch(name);
}

Eigen::Map<const Matrix> ParamTensor::matrix(int k) const {
    const int rows = shape.kind == ParamKind::Bias ? 1 : shape.d_in;
    return {values.data() + static_cast<std::int64_t>(k) * rows * shape.d_out, rows, shape.d_out};
}

Eigen::Map<Matrix> ParamTensor::matrix(int k) {
    const int rows = shape.kind == ParamKind::Bias ? 1 : shape.d_in;
    return {values.data() + static_cast<std::int64_t>(k) * rows * shape.d_out, rows, shape.d_out};
}

int ParamStore::add(ParamTensor tensor) {
    if (tensor.values.size() != tensor.shape.size() || tensor.grad.size() != tensor.shape.size())
        throw ShapeMismatch(tensor.name);
    if (index_of(tensor.name) >= 0) throw WiringMismatch("duplicate parameter " + tensor.name);
    tensors_.push_back(std::move(tensor));
    ++generation_;
    return static_cast<int>(tensors_.size() - 1);
}

int ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].name == name) return static_cast<int>(i);
    return -1;
}

ParamTensor& ParamStore::mutate(std::size_t i) {
    ++generation_;
    return tensors_.at(i);
}

void ParamStore::zero_grad() {
    for (auto& t : tensors_) t.grad.setZero();
}

std::int64_t ParamStore::parameter_count() const noexcept {
    std::int64_t n = 0;
    for (const auto& t : tensors_) n += t.shape.size();
    return n;
}

std::uint64_t ParamStore::checksum() const noexcept {
    std::uint64_t h = kFnvOffset;
    for (const auto& t : tensors_) {
        fnv_mix(h, t.name.data(), t.name.size());
        const int dims[4] = {static_cast<int>(t.shape.kind), t.shape.d_in, t.shape.d_out, t.shape.d_k};
        fnv_mix(h, dims, sizeof(dims));
        fnv_mix(h, t.values.data(), sizeof(double) * static_cast<std::size_t>(t.values.size()));
    }
    return h;
}

bool ParamStore::same_layout(const ParamStore& other) const noexcept {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].name != other.tensors_[i].name) return false;
        if (!(tensors_[i].shape == other.tensors_[i].shape)) return false;
        if (tensors_[i].layer_type_id != other.tensors_[i].layer_type_id) return false;
    }
    return true;
}

}  // namespace driftcast::nn
