#pragma once

#include <string>
#include <vector>

#include "pairvc/common.hpp"

namespace pairvc::cli {

// One line-delimited record. role is "src", "tgt" or "real"; src/tgt rows are
// tied together by pair_id. wav_path is resolved relative to the manifest.
struct ManifestRow {
    std::string id;
    std::string role;
    std::string wav_path;
    std::string ref_path;       // optional; reference audio for conversion rows
    std::string speaker_id;     // optional
    std::vector<int> text_ids;  // optional
    std::string pair_id;        // optional
    int64_t seed = -1;          // optional; -1 means absent
};

struct Manifest {
    std::vector<ManifestRow> rows;
    std::string dir;  // directory the manifest was read from

    std::string resolve_wav(const ManifestRow& row) const;
    std::string resolve(const std::string& p) const;  // relative to the manifest dir
};

// Parse errors carry the 1-based line number. Unknown fields are an error.
Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& m, const std::string& path);

std::string row_to_json(const ManifestRow& row);

// Human-readable violations, one per finding, empty when well-formed. Checks:
// ids unique, roles valid, wav paths exist, every pair_id used by exactly one
// src row and one tgt row.
std::vector<std::string> validate_manifest(const Manifest& m);

// Hash over the canonical serialization of every row; identifies the eval
// input set in reports.
uint64_t manifest_hash(const Manifest& m);

}  // namespace pairvc::cli
