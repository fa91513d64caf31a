#ifndef CMB_NIFTI_HPP
#define CMB_NIFTI_HPP

#include <filesystem>
#include <string>

#include "cmb/volume.hpp"

namespace cmb::nifti {

enum class ScalarKind {
    float32, // images, score maps
    uint8,   // binary masks
};

// Single-file NIfTI-1 (.nii / .nii.gz), little-endian. Reads uint8/int16/
// int32/float32/float64 with scl_slope applied; writes float32 or uint8.
// Ingested volumes must be finite everywhere (NonFiniteVoxel otherwise).
Volume read_volume(const std::filesystem::path& path);

void write_volume(const std::filesystem::path& path, const Volume& v,
                  ScalarKind kind = ScalarKind::float32);

bool exists(const std::filesystem::path& path);

} // namespace cmb::nifti

#endif
