#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <zlib.h>

#include "fetseg/volume.hpp"

namespace fetseg {

// Minimal NIfTI-1 support: .nii and .nii.gz, 3-D scalar volumes plus 4-D
// probability stacks. sform preferred over qform; qform rotations limited to
// what the quaternion encodes (good enough for the datasets handled here).

namespace nifti_detail {

#pragma pack(push, 1)
struct Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope, scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Header) == 348, "nifti-1 header must be 348 bytes");

enum DataType : std::int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
    DT_UINT32 = 768,
};

struct GzFile {
    gzFile f = nullptr;
    explicit GzFile(const std::string& path, const char* mode) {
        f = gzopen(path.c_str(), mode);
    }
    ~GzFile() {
        if (f) gzclose(f);
    }
    GzFile(const GzFile&) = delete;
    GzFile& operator=(const GzFile&) = delete;
};

struct RawVolume {
    Header hdr{};
    std::vector<double> data;  // already slope/inter scaled
    Shape3 shape{};
    std::size_t nvols = 1;  // dim[4] when 4-D
    Affine affine;
};

inline Affine affine_from_header(const Header& h) {
    Affine a;
    if (h.sform_code > 0) {
        for (int c = 0; c < 4; ++c) {
            a.m[c] = h.srow_x[c];
            a.m[4 + c] = h.srow_y[c];
            a.m[8 + c] = h.srow_z[c];
        }
    } else if (h.qform_code > 0) {
        double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        double aa = 1.0 - b * b - c * c - d * d;
        aa = aa < 0 ? 0 : std::sqrt(aa);
        double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
        double R[3][3] = {
            {aa * aa + b * b - c * c - d * d, 2 * b * c - 2 * aa * d, 2 * b * d + 2 * aa * c},
            {2 * b * c + 2 * aa * d, aa * aa + c * c - b * b - d * d, 2 * c * d - 2 * aa * b},
            {2 * b * d - 2 * aa * c, 2 * c * d + 2 * aa * b, aa * aa + d * d - c * c - b * b}};
        double sp[3] = {h.pixdim[1], h.pixdim[2], h.pixdim[3] * qfac};
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col) a.m[4 * r + col] = R[r][col] * sp[col];
        a.m[3] = h.qoffset_x;
        a.m[7] = h.qoffset_y;
        a.m[11] = h.qoffset_z;
    } else {
        a = Affine::scaling(h.pixdim[1] ? h.pixdim[1] : 1.f,
                            h.pixdim[2] ? h.pixdim[2] : 1.f,
                            h.pixdim[3] ? h.pixdim[3] : 1.f);
    }
    return a;
}

template <typename T>
inline void decode(const std::vector<char>& raw, std::vector<double>& out) {
    const T* p = reinterpret_cast<const T*>(raw.data());
    std::size_t n = raw.size() / sizeof(T);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(p[i]);
}

inline RawVolume read_raw(const std::string& path, bool allow_4d) {
    GzFile gz(path, "rb");  // gzread also handles uncompressed files
    if (!gz.f) throw VolumeError("nifti: cannot open '" + path + "'");
    RawVolume rv;
    if (gzread(gz.f, &rv.hdr, sizeof(Header)) != (int)sizeof(Header))
        throw VolumeError("nifti: short header in '" + path + "'");
    Header& h = rv.hdr;
    if (h.sizeof_hdr != 348)
        throw VolumeError("nifti: corrupt header (sizeof_hdr) in '" + path + "'");
    if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
        throw VolumeError("nifti: bad magic in '" + path + "'");
    int nd = h.dim[0];
    if (nd < 3 || nd > 7)
        throw VolumeError("nifti: unsupported dimensionality in '" + path + "'");
    std::size_t extra = 1;
    for (int d = 4; d <= nd; ++d) extra *= h.dim[d] > 0 ? h.dim[d] : 1;
    if (extra > 1 && !allow_4d)
        throw VolumeError("nifti: volume is not 3-D in '" + path + "'");
    rv.shape = {(std::size_t)h.dim[1], (std::size_t)h.dim[2], (std::size_t)h.dim[3]};
    rv.nvols = extra;
    if (rv.shape[0] == 0 || rv.shape[1] == 0 || rv.shape[2] == 0)
        throw VolumeError("nifti: zero-sized dimension in '" + path + "'");

    std::size_t bpp = h.bitpix / 8;
    std::size_t count = shape_size(rv.shape) * extra;
    long offset = (long)h.vox_offset;
    if (offset < (long)sizeof(Header)) offset = sizeof(Header);
    if (gzseek(gz.f, offset, SEEK_SET) < 0)
        throw VolumeError("nifti: seek failed in '" + path + "'");
    std::vector<char> raw(count * bpp);
    std::size_t got = 0;
    while (got < raw.size()) {
        int r = gzread(gz.f, raw.data() + got, (unsigned)(raw.size() - got));
        if (r <= 0) throw VolumeError("nifti: truncated data in '" + path + "'");
        got += (std::size_t)r;
    }
    switch (h.datatype) {
        case DT_UINT8: decode<std::uint8_t>(raw, rv.data); break;
        case DT_INT8: decode<std::int8_t>(raw, rv.data); break;
        case DT_INT16: decode<std::int16_t>(raw, rv.data); break;
        case DT_UINT16: decode<std::uint16_t>(raw, rv.data); break;
        case DT_INT32: decode<std::int32_t>(raw, rv.data); break;
        case DT_UINT32: decode<std::uint32_t>(raw, rv.data); break;
        case DT_FLOAT32: decode<float>(raw, rv.data); break;
        case DT_FLOAT64: decode<double>(raw, rv.data); break;
        default:
            throw VolumeError("nifti: unsupported datatype " +
                              std::to_string(h.datatype) + " in '" + path + "'");
    }
    if (h.scl_slope != 0.f && !(h.scl_slope == 1.f && h.scl_inter == 0.f))
        for (auto& v : rv.data) v = v * h.scl_slope + h.scl_inter;
    rv.affine = affine_from_header(h);
    return rv;
}

inline bool is_integer_type(std::int16_t dt) {
    return dt == DT_UINT8 || dt == DT_INT8 || dt == DT_INT16 || dt == DT_UINT16 ||
           dt == DT_INT32 || dt == DT_UINT32;
}

inline Header make_header(const Shape3& shape, std::size_t nvols, const Affine& a,
                          std::int16_t datatype, std::int16_t bitpix) {
    Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = nvols > 1 ? 4 : 3;
    h.dim[1] = (std::int16_t)shape[0];
    h.dim[2] = (std::int16_t)shape[1];
    h.dim[3] = (std::int16_t)shape[2];
    h.dim[4] = (std::int16_t)(nvols > 1 ? nvols : 1);
    for (int d = 5; d < 8; ++d) h.dim[d] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    auto sp = a.voxel_spacing();
    h.pixdim[0] = 1.f;
    h.pixdim[1] = (float)sp[0];
    h.pixdim[2] = (float)sp[1];
    h.pixdim[3] = (float)sp[2];
    h.vox_offset = 352.f;
    h.scl_slope = 1.f;
    h.xyzt_units = 2;  // mm
    h.qform_code = 0;
    h.sform_code = 1;
    for (int c = 0; c < 4; ++c) {
        h.srow_x[c] = (float)a.m[c];
        h.srow_y[c] = (float)a.m[4 + c];
        h.srow_z[c] = (float)a.m[8 + c];
    }
    std::memcpy(h.magic, "n+1\0", 4);
    return h;
}

inline void write_blob(const std::string& path, const Header& h, const void* data,
                       std::size_t nbytes) {
    bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    const char pad[4] = {0, 0, 0, 0};
    if (gz) {
        GzFile f(path, "wb");
        if (!f.f) throw VolumeError("nifti: cannot write '" + path + "'");
        if (gzwrite(f.f, &h, sizeof(Header)) != (int)sizeof(Header) ||
            gzwrite(f.f, pad, 4) != 4 ||
            gzwrite(f.f, data, (unsigned)nbytes) != (int)nbytes)
            throw VolumeError("nifti: write failed for '" + path + "'");
    } else {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw VolumeError("nifti: cannot write '" + path + "'");
        bool ok = std::fwrite(&h, sizeof(Header), 1, f) == 1 &&
                  std::fwrite(pad, 1, 4, f) == 4 &&
                  std::fwrite(data, 1, nbytes, f) == nbytes;
        std::fclose(f);
        if (!ok) throw VolumeError("nifti: write failed for '" + path + "'");
    }
}

}  // namespace nifti_detail

inline LabelVolume load_label_volume(const std::string& path,
                                     Nomenclature nomenclature = Nomenclature::feta()) {
    using namespace nifti_detail;
    RawVolume rv = read_raw(path, false);
    if (!is_integer_type(rv.hdr.datatype)) {
        // float files are accepted only if every voxel is integral
        for (double v : rv.data)
            if (v != std::floor(v) || !std::isfinite(v))
                throw VolumeError("nifti: non-integer label data in '" + path + "'");
    }
    LabelVolume out;
    out.shape = rv.shape;
    out.affine = rv.affine;
    out.labels.resize(rv.data.size());
    std::vector<int> unknown;
    for (std::size_t i = 0; i < rv.data.size(); ++i) {
        double v = rv.data[i];
        if (v < 0 || v > 65535)
            throw VolumeError("nifti: label out of range in '" + path + "'");
        int id = (int)v;
        if (!nomenclature.contains(id)) {
            if (std::find(unknown.begin(), unknown.end(), id) == unknown.end())
                unknown.push_back(id);
        }
        out.labels[i] = (std::uint16_t)id;
    }
    if (!unknown.empty()) {
        std::sort(unknown.begin(), unknown.end());
        std::ostringstream oss;
        oss << "unknown label in '" << path << "':";
        for (int id : unknown) oss << ' ' << id;
        throw VolumeError(oss.str());
    }
    out.nomenclature = std::move(nomenclature);
    return out;
}

inline IntensityVolume load_intensity_volume(const std::string& path) {
    using namespace nifti_detail;
    RawVolume rv = read_raw(path, false);
    IntensityVolume out;
    out.shape = rv.shape;
    out.affine = rv.affine;
    out.values.resize(rv.data.size());
    for (std::size_t i = 0; i < rv.data.size(); ++i) {
        if (!std::isfinite(rv.data[i]))
            throw VolumeError("non-finite intensity in '" + path + "'");
        out.values[i] = (float)rv.data[i];
    }
    return out;
}

// 4-D posterior stack laid out as nvols contiguous 3-D volumes (class-major).
struct RawProbabilityStack {
    Shape3 shape{};
    std::size_t class_count = 0;
    std::vector<double> data;  // class-major: [c][k][j][i]
    Affine affine;
};

inline RawProbabilityStack load_probability_stack(const std::string& path) {
    using namespace nifti_detail;
    RawVolume rv = read_raw(path, true);
    if (rv.nvols < 2)
        throw VolumeError("nifti: posterior stack needs a 4th dimension in '" + path + "'");
    RawProbabilityStack out;
    out.shape = rv.shape;
    out.class_count = rv.nvols;
    out.affine = rv.affine;
    out.data = std::move(rv.data);
    return out;
}

inline void save_label_volume(const LabelVolume& vol, const std::string& path) {
    using namespace nifti_detail;
    Header h = make_header(vol.shape, 1, vol.affine, DT_UINT16, 16);
    write_blob(path, h, vol.labels.data(), vol.labels.size() * sizeof(std::uint16_t));
}

inline void save_intensity_volume(const IntensityVolume& vol, const std::string& path) {
    using namespace nifti_detail;
    Header h = make_header(vol.shape, 1, vol.affine, DT_FLOAT32, 32);
    write_blob(path, h, vol.values.data(), vol.values.size() * sizeof(float));
}

inline void save_probability_stack(const RawProbabilityStack& s, const std::string& path) {
    using namespace nifti_detail;
    std::vector<float> buf(s.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = (float)s.data[i];
    Header h = make_header(s.shape, s.class_count, s.affine, DT_FLOAT32, 32);
    write_blob(path, h, buf.data(), buf.size() * sizeof(float));
}

}  // namespace fetseg
