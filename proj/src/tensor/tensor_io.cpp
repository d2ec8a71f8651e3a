#include "affect/tensor/tensor_io.hpp"

#include "affect/util/bytes.hpp"

namespace affect {

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    ByteWriter w;
    w.put_tag("TNSR");
    w.put_u32(kTensorFormatVersion);
    w.put_u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put_u64(d);
    for (double v : t.data()) w.put_f64(v);
    return std::move(w.bytes());
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin) {
    ByteReader r(bytes, origin);
    r.expect_tag("TNSR");
    const std::uint32_t version = r.u32();
    if (version != kTensorFormatVersion) r.fail("unsupported TNSR version " + std::to_string(version));
    const std::uint32_t rank = r.u32();
    if (rank > 16) r.fail("implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
        d = r.u64();
        numel *= d;
    }
    if (numel * 8 != r.remaining()) {
        r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, shape " + shape_string(shape) + " needs " +
               std::to_string(numel * 8));
    }
    std::vector<double> data(numel);
    for (double& v : data) v = r.f64();
    return Tensor::from(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file_atomic(path, encode_tensor(t)); }

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path), path.string()); }

}  // namespace affect
