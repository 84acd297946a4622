#include "harmokit/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "harmokit/error.hpp"

namespace harmokit::nifti {

namespace {

// Header field byte offsets (NIfTI-1).
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffRegular = 38;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffSrowY = 296;
constexpr std::size_t kOffSrowZ = 312;
constexpr std::size_t kOffMagic = 344;

template <typename T>
T byteswap_value(T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(std::begin(b), std::end(b));
    std::memcpy(&v, b, sizeof(T));
    return v;
}

class Reader {
public:
    Reader(const std::vector<char>& bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        T v;
        std::memcpy(&v, bytes_.data() + offset, sizeof(T));
        return swap_ ? byteswap_value(v) : v;
    }

private:
    const std::vector<char>& bytes_;
    bool swap_;
};

// Writes little-endian regardless of host order.
template <typename T>
void put_le(std::vector<char>& buf, std::size_t offset, T v) {
    if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
    std::memcpy(buf.data() + offset, &v, sizeof(T));
}

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

int bytes_per_voxel(std::int16_t code) {
    switch (static_cast<Datatype>(code)) {
        case Datatype::UInt8: return 1;
        case Datatype::Int16: return 2;
        case Datatype::Int32: return 4;
        case Datatype::Float32: return 4;
        case Datatype::Float64: return 8;
    }
    return 0;
}

template <typename T>
void decode_payload(const char* src, std::size_t n, bool swap, std::vector<float>& out) {
    for (std::size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, src + i * sizeof(T), sizeof(T));
        if (swap && sizeof(T) > 1) v = byteswap_value(v);
        out[i] = static_cast<float>(v);
    }
}

std::vector<char> make_header(const Dims& d, const Spacing& sp, Datatype type, int bitpix) {
    std::vector<char> h(static_cast<std::size_t>(kVoxOffset), 0);
    put_le<std::int32_t>(h, kOffSizeofHdr, kHeaderSize);
    h[kOffRegular] = 'r';
    const std::int16_t dim[8] = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                                 static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
    for (std::size_t i = 0; i < 8; ++i) put_le<std::int16_t>(h, kOffDim + 2 * i, dim[i]);
    put_le<std::int16_t>(h, kOffDatatype, static_cast<std::int16_t>(type));
    put_le<std::int16_t>(h, kOffBitpix, static_cast<std::int16_t>(bitpix));
    const float pixdim[8] = {1.0f, static_cast<float>(sp[0]), static_cast<float>(sp[1]), static_cast<float>(sp[2]),
                             1.0f, 1.0f, 1.0f, 1.0f};
    for (std::size_t i = 0; i < 8; ++i) put_le<float>(h, kOffPixdim + 4 * i, pixdim[i]);
    put_le<float>(h, kOffVoxOffset, static_cast<float>(kVoxOffset));
    put_le<float>(h, kOffSclSlope, 1.0f);
    put_le<float>(h, kOffSclInter, 0.0f);
    h[kOffXyztUnits] = 2;  // millimetres
    const char descrip[] = "harmokit synthetic";
    std::memcpy(h.data() + kOffDescrip, descrip, sizeof(descrip) - 1);
    // Diagonal sform so viewers place voxels at their spacing; no reorientation.
    put_le<std::int16_t>(h, kOffQformCode, 0);
    put_le<std::int16_t>(h, kOffSformCode, 1);
    put_le<float>(h, kOffSrowX, static_cast<float>(sp[0]));
    put_le<float>(h, kOffSrowY + 4, static_cast<float>(sp[1]));
    put_le<float>(h, kOffSrowZ + 8, static_cast<float>(sp[2]));
    std::memcpy(h.data() + kOffMagic, "n+1\0", 4);
    return h;
}

void write_file(const std::filesystem::path& path, const std::vector<char>& header, const char* payload,
                std::size_t payload_bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload, static_cast<std::streamsize>(payload_bytes));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void check_writable_dims(const Dims& d) {
    constexpr int kMax = 32767;
    if (d.nx > kMax || d.ny > kMax || d.nz > kMax) throw std::invalid_argument("NIfTI-1 dims are limited to 32767");
}

}  // namespace

Volume3D load(const std::filesystem::path& path) {
    const std::vector<char> bytes = read_file(path);
    const std::string where = "'" + path.string() + "'";
    if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
        throw TruncationError(where + ": file shorter than the 348-byte header");
    }

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    // `swap` means file byte order differs from host order.
    bool swap = false;
    if (sizeof_hdr != kHeaderSize) {
        if (byteswap_value(sizeof_hdr) != kHeaderSize) throw FormatError(where + ": sizeof_hdr is not 348");
        swap = true;
    }
    const Reader r(bytes, swap);

    const char* magic = bytes.data() + kOffMagic;
    const bool single_file = std::memcmp(magic, "n+1\0", 4) == 0;
    const bool pair_file = std::memcmp(magic, "ni1\0", 4) == 0;
    if (!single_file && !pair_file) throw FormatError(where + ": bad magic (expected \"n+1\" or \"ni1\")");

    std::int16_t dim[8];
    for (std::size_t i = 0; i < 8; ++i) dim[i] = r.get<std::int16_t>(kOffDim + 2 * i);
    if (dim[0] < 1 || dim[0] > 7) throw FormatError(where + ": dim[0] = " + std::to_string(dim[0]) + " out of range");
    int extent[7] = {1, 1, 1, 1, 1, 1, 1};
    for (int i = 1; i <= dim[0]; ++i) {
        if (dim[i] < 1) throw FormatError(where + ": dim[" + std::to_string(i) + "] < 1");
        extent[i - 1] = dim[i];
    }
    for (int i = 3; i < 7; ++i) {
        if (extent[i] != 1) throw UnsupportedError(where + ": only 3D volumes are supported");
    }
    const Dims dims{extent[0], extent[1], extent[2]};

    const std::int16_t datatype = r.get<std::int16_t>(kOffDatatype);
    const int bpv = bytes_per_voxel(datatype);
    if (bpv == 0) throw UnsupportedError(where + ": unsupported datatype code " + std::to_string(datatype));

    Spacing spacing{1.0, 1.0, 1.0};
    for (std::size_t i = 0; i < 3; ++i) {
        const float p = std::fabs(r.get<float>(kOffPixdim + 4 * (i + 1)));
        if (std::isfinite(p) && p > 0.0f) spacing[i] = p;
    }

    const float vox_offset_f = r.get<float>(kOffVoxOffset);
    if (!std::isfinite(vox_offset_f) || vox_offset_f < 0.0f) throw FormatError(where + ": invalid vox_offset");
    auto offset = static_cast<std::size_t>(vox_offset_f);

    std::vector<char> pair_payload;
    const std::vector<char>* payload_src = &bytes;
    if (single_file) {
        if (offset < static_cast<std::size_t>(kVoxOffset)) offset = static_cast<std::size_t>(kVoxOffset);
    } else {
        auto img = path;
        img.replace_extension(".img");
        if (img != path && std::filesystem::exists(img)) {
            pair_payload = read_file(img);
            payload_src = &pair_payload;
        } else if (offset < static_cast<std::size_t>(kHeaderSize)) {
            offset = static_cast<std::size_t>(kHeaderSize);
        }
    }

    const std::size_t n = dims.voxel_count();
    const std::size_t need = n * static_cast<std::size_t>(bpv);
    if (payload_src->size() < offset || payload_src->size() - offset < need) {
        throw TruncationError(where + ": payload holds " +
                              std::to_string(payload_src->size() > offset ? payload_src->size() - offset : 0) +
                              " bytes, dims require " + std::to_string(need));
    }

    std::vector<float> data(n);
    const char* src = payload_src->data() + offset;
    switch (static_cast<Datatype>(datatype)) {
        case Datatype::UInt8: decode_payload<std::uint8_t>(src, n, swap, data); break;
        case Datatype::Int16: decode_payload<std::int16_t>(src, n, swap, data); break;
        case Datatype::Int32: decode_payload<std::int32_t>(src, n, swap, data); break;
        case Datatype::Float32: decode_payload<float>(src, n, swap, data); break;
        case Datatype::Float64: decode_payload<double>(src, n, swap, data); break;
    }

    const float slope = r.get<float>(kOffSclSlope);
    const float inter = r.get<float>(kOffSclInter);
    if (std::isfinite(slope) && std::isfinite(inter) && slope != 0.0f && !(slope == 1.0f && inter == 0.0f)) {
        for (auto& v : data) v = static_cast<float>(static_cast<double>(v) * slope + inter);
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(data[i])) throw FormatError(where + ": non-finite voxel at index " + std::to_string(i));
    }
    return Volume3D(dims, spacing, std::move(data));
}

void save(const Volume3D& vol, const std::filesystem::path& path) {
    check_writable_dims(vol.dims());
    const auto header = make_header(vol.dims(), vol.spacing(), Datatype::Float32, 32);
    const auto data = vol.data();
    if constexpr (std::endian::native == std::endian::little) {
        write_file(path, header, reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
    } else {
        std::vector<float> swapped(data.begin(), data.end());
        for (auto& v : swapped) v = byteswap_value(v);
        write_file(path, header, reinterpret_cast<const char*>(swapped.data()), swapped.size() * sizeof(float));
    }
}

void save_labels(const LabelMap& labels, const std::filesystem::path& path) {
    if (labels.data.size() != labels.dims.voxel_count()) throw std::invalid_argument("label map size mismatch");
    check_writable_dims(labels.dims);
    const auto header = make_header(labels.dims, labels.spacing, Datatype::UInt8, 8);
    write_file(path, header, reinterpret_cast<const char*>(labels.data.data()), labels.data.size());
}

}  // namespace harmokit::nifti
