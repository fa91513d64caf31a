#ifndef CMB_CATALOG_HPP
#define CMB_CATALOG_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmb/rng.hpp"
#include "cmb/volume.hpp"

namespace cmb {

// The two trained pipelines, split by slice thickness. Cohorts 1 and 3
// (3.0 mm slices) share GroupA; cohort 2 (0.8 mm slices) is GroupB.
enum class ModelGroup { A, B };

std::string to_string(ModelGroup g);
ModelGroup model_group_from_string(const std::string& s);

// First character of the subject id selects the cohort ('1'|'3' -> A,
// '2' -> B). Anything else is UnknownCohort.
ModelGroup route_cohort(const std::string& id);

// One patient: three co-registered modalities plus (optionally, at
// inference time) the manual lesion annotation.
struct SubjectRecord {
    std::string id;
    Volume t1;
    Volume t2;
    Volume t2s;
    std::optional<Volume> annotation;
    float slice_thickness_mm = 0.0f;

    void validate() const; // shared shape, cohort digit, binary annotation
};

// Expected files under <root>: <id>_T1.nii.gz, <id>_T2.nii.gz,
// <id>_T2S.nii.gz and (when required) <id>_seg.nii.gz. Uncompressed .nii
// files are accepted as a fallback.
SubjectRecord load_subject(const std::filesystem::path& root, const std::string& id,
                           bool require_annotation = true);

void save_subject(const std::filesystem::path& root, const SubjectRecord& subject);

// Scans a data root for <id>_T2S.nii[.gz] files.
std::vector<std::string> list_subject_ids(const std::filesystem::path& root);

// One line per subject: id, group label, shape, spacing. Group is "?" for
// ids outside the enumerated cohorts (phantom ids).
std::string catalog_line(const SubjectRecord& subject);
void write_catalog(const std::filesystem::path& path, const std::vector<SubjectRecord>& subjects);

// Deterministic stratified split: round(fraction*N) subjects in train,
// cohort proportions preserved by largest remainder, and every cohort
// with >= 2 members keeps at least one subject on each side when the
// totals allow it.
std::pair<std::vector<std::string>, std::vector<std::string>>
split_train_val_ids(const std::vector<std::string>& ids, double fraction, uint64_t seed);

std::pair<std::vector<SubjectRecord>, std::vector<SubjectRecord>>
split_train_val(std::vector<SubjectRecord> subjects, double fraction, uint64_t seed);

} // namespace cmb

#endif
