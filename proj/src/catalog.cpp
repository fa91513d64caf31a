#include "cmb/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cmb/nifti.hpp"

namespace cmb {

namespace fs = std::filesystem;

std::string to_string(ModelGroup g) {
    return g == ModelGroup::A ? "A" : "B";
}

ModelGroup model_group_from_string(const std::string& s) {
    if (s == "A" || s == "a") return ModelGroup::A;
    if (s == "B" || s == "b") return ModelGroup::B;
    throw ConfigError("unknown model group '" + s + "' (expected A or B)");
}

ModelGroup route_cohort(const std::string& id) {
    if (id.empty()) throw UnknownCohort("empty subject id");
    switch (id[0]) {
        case '1':
        case '3': return ModelGroup::A;
        case '2': return ModelGroup::B;
        default:
            throw UnknownCohort("subject '" + id + "' has cohort digit '" + id.substr(0, 1) + "'");
    }
}

void SubjectRecord::validate() const {
    t1.require_valid("subject " + id + " T1");
    t2.require_valid("subject " + id + " T2");
    t2s.require_valid("subject " + id + " T2S");
    if (!(t1.shape == t2s.shape))
        throw ShapeMismatch("subject " + id + ": T1 " + t1.shape.str() + " vs T2S " + t2s.shape.str());
    if (!(t2.shape == t2s.shape))
        throw ShapeMismatch("subject " + id + ": T2 " + t2.shape.str() + " vs T2S " + t2s.shape.str());
    if (annotation) {
        if (!(annotation->shape == t2s.shape))
            throw ShapeMismatch("subject " + id + ": annotation " + annotation->shape.str() +
                                " vs T2S " + t2s.shape.str());
        if (!annotation->is_binary())
            throw Error("subject " + id + ": annotation must contain only 0/1 values");
    }
    if (!(slice_thickness_mm > 0))
        throw Error("subject " + id + ": slice thickness must be positive");
}

namespace {

fs::path find_modality(const fs::path& root, const std::string& id, const std::string& modality) {
    fs::path gz = root / (id + "_" + modality + ".nii.gz");
    if (nifti::exists(gz)) return gz;
    fs::path plain = root / (id + "_" + modality + ".nii");
    if (nifti::exists(plain)) return plain;
    throw MissingFile((root / (id + "_" + modality + ".nii.gz")).string());
}

} // namespace

SubjectRecord load_subject(const fs::path& root, const std::string& id, bool require_annotation) {
    SubjectRecord s;
    s.id = id;
    s.t1 = nifti::read_volume(find_modality(root, id, "T1"));
    s.t2 = nifti::read_volume(find_modality(root, id, "T2"));
    s.t2s = nifti::read_volume(find_modality(root, id, "T2S"));
    if (require_annotation) {
        s.annotation = nifti::read_volume(find_modality(root, id, "seg"));
    } else {
        fs::path gz = root / (id + "_seg.nii.gz");
        fs::path plain = root / (id + "_seg.nii");
        if (nifti::exists(gz)) s.annotation = nifti::read_volume(gz);
        else if (nifti::exists(plain)) s.annotation = nifti::read_volume(plain);
    }
    s.slice_thickness_mm = s.t2s.spacing.dz;
    s.validate();
    return s;
}

void save_subject(const fs::path& root, const SubjectRecord& subject) {
    subject.validate();
    fs::create_directories(root);
    nifti::write_volume(root / (subject.id + "_T1.nii.gz"), subject.t1);
    nifti::write_volume(root / (subject.id + "_T2.nii.gz"), subject.t2);
    nifti::write_volume(root / (subject.id + "_T2S.nii.gz"), subject.t2s);
    if (subject.annotation)
        nifti::write_volume(root / (subject.id + "_seg.nii.gz"), *subject.annotation,
                            nifti::ScalarKind::uint8);
}

std::vector<std::string> list_subject_ids(const fs::path& root) {
    std::vector<std::string> ids;
    if (!fs::exists(root)) throw MissingFile("data root " + root.string());
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        for (const char* suffix : {"_T2S.nii.gz", "_T2S.nii"}) {
            size_t len = std::string(suffix).size();
            if (name.size() > len && name.compare(name.size() - len, len, suffix) == 0) {
                ids.push_back(name.substr(0, name.size() - len));
                break;
            }
        }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::string catalog_line(const SubjectRecord& subject) {
    std::string group = "?";
    try {
        group = to_string(route_cohort(subject.id));
    } catch (const UnknownCohort&) {
    }
    std::ostringstream os;
    os << subject.id << "\t" << group << "\t" << subject.t2s.shape.str() << "\t"
       << subject.t2s.spacing.dz << "," << subject.t2s.spacing.dy << "," << subject.t2s.spacing.dx;
    return os.str();
}

void write_catalog(const fs::path& path, const std::vector<SubjectRecord>& subjects) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write catalog " + path.string());
    for (const auto& s : subjects) f << catalog_line(s) << "\n";
}

std::pair<std::vector<std::string>, std::vector<std::string>>
split_train_val_ids(const std::vector<std::string>& ids, double fraction, uint64_t seed) {
    if (ids.empty()) throw Error("split_train_val: empty subject list");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw Error("split_train_val: fraction must lie strictly between 0 and 1");

    // bucket by cohort digit, keeping input order within each bucket
    std::map<char, std::vector<std::string>> by_cohort;
    for (const auto& id : ids) {
        if (id.empty()) throw UnknownCohort("empty subject id");
        by_cohort[id[0]].push_back(id);
    }

    const size_t total = ids.size();
    const size_t train_total =
        static_cast<size_t>(std::lround(fraction * static_cast<double>(total)));

    struct Bucket {
        char digit;
        std::vector<std::string> members;
        size_t take = 0;
        double remainder = 0.0;
    };
    std::vector<Bucket> buckets;
    for (auto& [digit, members] : by_cohort)
        buckets.push_back({digit, std::move(members), 0, 0.0});

    size_t assigned = 0;
    for (auto& b : buckets) {
        double quota = fraction * static_cast<double>(b.members.size());
        b.take = static_cast<size_t>(std::floor(quota));
        b.remainder = quota - static_cast<double>(b.take);
        assigned += b.take;
    }
    // largest remainder, ties broken by cohort digit
    std::vector<size_t> order(buckets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return buckets[a].remainder > buckets[b].remainder;
    });
    for (size_t k = 0; assigned < train_total; k = (k + 1) % order.size()) {
        Bucket& b = buckets[order[k]];
        if (b.take < b.members.size()) {
            ++b.take;
            ++assigned;
        }
    }

    // keep every cohort with >= 2 members represented on both sides when
    // a swap with another cohort does not break that cohort's coverage
    for (auto& b : buckets) {
        if (b.members.size() < 2) continue;
        if (b.take == b.members.size()) {
            for (auto& other : buckets) {
                if (&other == &b || other.take >= other.members.size()) continue;
                bool other_stays_covered =
                    other.members.size() == 1 || other.take + 1 < other.members.size();
                if (other_stays_covered) {
                    --b.take;
                    ++other.take;
                    break;
                }
            }
        } else if (b.take == 0) {
            for (auto& other : buckets) {
                if (&other == &b || other.take == 0) continue;
                bool other_stays_covered = other.members.size() == 1 || other.take >= 2;
                if (other_stays_covered) {
                    ++b.take;
                    --other.take;
                    break;
                }
            }
        }
    }

    Rng rng(seed);
    std::pair<std::vector<std::string>, std::vector<std::string>> out;
    for (auto& b : buckets) {
        rng.shuffle(b.members);
        for (size_t i = 0; i < b.members.size(); ++i)
            (i < b.take ? out.first : out.second).push_back(b.members[i]);
    }
    return out;
}

std::pair<std::vector<SubjectRecord>, std::vector<SubjectRecord>>
split_train_val(std::vector<SubjectRecord> subjects, double fraction, uint64_t seed) {
    std::vector<std::string> ids;
    ids.reserve(subjects.size());
    for (const auto& s : subjects) ids.push_back(s.id);
    auto [train_ids, val_ids] = split_train_val_ids(ids, fraction, seed);

    auto take = [&](const std::vector<std::string>& wanted) {
        std::vector<SubjectRecord> out;
        for (const auto& id : wanted) {
            auto it = std::find_if(subjects.begin(), subjects.end(),
                                   [&](const SubjectRecord& s) { return s.id == id; });
            out.push_back(std::move(*it));
            subjects.erase(it);
        }
        return out;
    };
    auto train = take(train_ids);
    auto val = take(val_ids);
    return {std::move(train), std::move(val)};
}

} // namespace cmb
