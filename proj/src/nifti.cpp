#include "cmb/nifti.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

namespace cmb::nifti {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;     // must be 348
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code;
    int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t DT_UINT8 = 2;
constexpr int16_t DT_INT16 = 4;
constexpr int16_t DT_INT32 = 8;
constexpr int16_t DT_FLOAT32 = 16;
constexpr int16_t DT_FLOAT64 = 64;

bool has_gz_suffix(const std::filesystem::path& p) {
    return p.extension() == ".gz";
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFile(path.string());
    f.seekg(0, std::ios::end);
    std::streamoff n = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(buf.data()), n);
    if (!f) throw IoError("short read: " + path.string());
    return buf;
}

bool is_gzip(const std::vector<uint8_t>& b) {
    return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b;
}

std::vector<uint8_t> gunzip(const std::vector<uint8_t>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("inflateInit2 failed");
    std::vector<uint8_t> out;
    out.reserve(in.size() * 4);
    std::vector<uint8_t> chunk(1 << 16);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int ret = Z_OK;
    do {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw IoError("gzip decompression failed (code " + std::to_string(ret) + ")");
        }
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    } while (ret != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

// zlib's default gzip header carries mtime=0, so identical inputs give
// identical bytes (prediction files are compared byte-wise across runs).
std::vector<uint8_t> gzip(const uint8_t* data, size_t n) {
    z_stream zs{};
    if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit2 failed");
    std::vector<uint8_t> out(deflateBound(&zs, static_cast<uLong>(n)));
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(n);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int ret = deflate(&zs, Z_FINISH);
    if (ret != Z_STREAM_END) {
        deflateEnd(&zs);
        throw IoError("gzip compression failed");
    }
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

template <class T>
void convert_voxels(const uint8_t* raw, size_t n, float slope, float inter, std::vector<float>& out) {
    const T* src = reinterpret_cast<const T*>(raw);
    for (size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>(src[i]) * slope + inter;
}

} // namespace

bool exists(const std::filesystem::path& path) {
    std::error_code ec;
    return std::filesystem::exists(path, ec);
}

Volume read_volume(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    if (is_gzip(bytes)) bytes = gunzip(bytes);
    if (bytes.size() < sizeof(Nifti1Header))
        throw IoError("not a NIfTI-1 file (too small): " + path.string());

    Nifti1Header hdr;
    std::memcpy(&hdr, bytes.data(), sizeof(hdr));
    if (hdr.sizeof_hdr != 348)
        throw IoError("unsupported NIfTI header (sizeof_hdr=" + std::to_string(hdr.sizeof_hdr) +
                      ", byte-swapped files are not supported): " + path.string());
    if (std::strncmp(hdr.magic, "n+1", 3) != 0 && std::strncmp(hdr.magic, "ni1", 3) != 0)
        throw IoError("bad NIfTI magic: " + path.string());

    int ndim = hdr.dim[0];
    if (ndim < 2 || ndim > 4)
        throw IoError("unsupported dim[0]=" + std::to_string(ndim) + ": " + path.string());
    int nx = hdr.dim[1], ny = hdr.dim[2];
    int nz = ndim >= 3 ? hdr.dim[3] : 1;
    if (ndim == 4 && hdr.dim[4] > 1)
        throw IoError("4D volumes are not supported: " + path.string());
    if (nx < 1 || ny < 1 || nz < 1)
        throw ShapeMismatch("degenerate NIfTI dims in " + path.string());

    Volume v;
    v.shape = {nz, ny, nx};
    v.spacing.dx = hdr.pixdim[1] > 0 ? hdr.pixdim[1] : 1.0f;
    v.spacing.dy = hdr.pixdim[2] > 0 ? hdr.pixdim[2] : 1.0f;
    v.spacing.dz = hdr.pixdim[3] > 0 ? hdr.pixdim[3] : 1.0f;
    v.data.resize(v.shape.size());

    size_t offset = static_cast<size_t>(hdr.vox_offset);
    if (offset < 348) offset = 352;
    size_t n = v.shape.size();
    size_t bytes_per = static_cast<size_t>(hdr.bitpix) / 8;
    if (bytes.size() < offset + n * bytes_per)
        throw IoError("truncated NIfTI payload: " + path.string());
    const uint8_t* raw = bytes.data() + offset;

    float slope = hdr.scl_slope;
    float inter = hdr.scl_inter;
    if (slope == 0.0f) { slope = 1.0f; inter = 0.0f; }

    switch (hdr.datatype) {
        case DT_UINT8:   convert_voxels<uint8_t>(raw, n, slope, inter, v.data); break;
        case DT_INT16:   convert_voxels<int16_t>(raw, n, slope, inter, v.data); break;
        case DT_INT32:   convert_voxels<int32_t>(raw, n, slope, inter, v.data); break;
        case DT_FLOAT32: convert_voxels<float>(raw, n, slope, inter, v.data); break;
        case DT_FLOAT64: convert_voxels<double>(raw, n, slope, inter, v.data); break;
        default:
            throw IoError("unsupported NIfTI datatype " + std::to_string(hdr.datatype) + ": " + path.string());
    }

    if (!v.all_finite())
        throw NonFiniteVoxel("non-finite voxel in " + path.string());
    v.require_valid(path.string());
    return v;
}

void write_volume(const std::filesystem::path& path, const Volume& v, ScalarKind kind) {
    v.require_valid("write_volume(" + path.string() + ")");

    Nifti1Header hdr{};
    hdr.sizeof_hdr = 348;
    hdr.regular = 'r';
    hdr.dim[0] = 3;
    hdr.dim[1] = static_cast<int16_t>(v.shape.nc);
    hdr.dim[2] = static_cast<int16_t>(v.shape.nr);
    hdr.dim[3] = static_cast<int16_t>(v.shape.ns);
    for (int i = 4; i < 8; ++i) hdr.dim[i] = 1;
    hdr.datatype = kind == ScalarKind::float32 ? DT_FLOAT32 : DT_UINT8;
    hdr.bitpix = kind == ScalarKind::float32 ? 32 : 8;
    hdr.pixdim[0] = 1.0f;
    hdr.pixdim[1] = v.spacing.dx;
    hdr.pixdim[2] = v.spacing.dy;
    hdr.pixdim[3] = v.spacing.dz;
    hdr.vox_offset = 352.0f;
    hdr.scl_slope = 1.0f;
    hdr.scl_inter = 0.0f;
    hdr.xyzt_units = 2; // NIFTI_UNITS_MM
    hdr.sform_code = 1;
    hdr.srow_x[0] = v.spacing.dx;
    hdr.srow_y[1] = v.spacing.dy;
    hdr.srow_z[2] = v.spacing.dz;
    std::memcpy(hdr.magic, "n+1", 4);

    size_t n = v.shape.size();
    size_t bytes_per = kind == ScalarKind::float32 ? 4 : 1;
    std::vector<uint8_t> payload(352 + n * bytes_per, 0);
    std::memcpy(payload.data(), &hdr, sizeof(hdr));
    if (kind == ScalarKind::float32) {
        std::memcpy(payload.data() + 352, v.data.data(), n * 4);
    } else {
        uint8_t* dst = payload.data() + 352;
        for (size_t i = 0; i < n; ++i)
            dst[i] = v.data[i] != 0.0f ? 1 : 0;
    }

    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    if (has_gz_suffix(path)) {
        std::vector<uint8_t> gz = gzip(payload.data(), payload.size());
        f.write(reinterpret_cast<const char*>(gz.data()), static_cast<std::streamsize>(gz.size()));
    } else {
        f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    }
    if (!f) throw IoError("write failed: " + path.string());
}

} // namespace cmb::nifti
