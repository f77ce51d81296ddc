#include "pairvc/cli/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace pairvc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Manifest::resolve(const std::string& p) const {
    fs::path fp(p);
    if (fp.is_absolute() || dir.empty()) return p;
    return (fs::path(dir) / fp).string();
}

std::string Manifest::resolve_wav(const ManifestRow& row) const { return resolve(row.wav_path); }

static ManifestRow parse_row(const json& j, size_t line_no) {
    static const std::set<std::string> known = {"id",         "role",     "wav_path", "ref_path",
                                                "speaker_id", "text_ids", "pair_id",  "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            fail("manifest row " + std::to_string(line_no) + ": unknown field '" + it.key() + "'");
    ManifestRow r;
    r.id = j.value("id", "");
    r.role = j.value("role", "");
    r.wav_path = j.value("wav_path", "");
    r.ref_path = j.value("ref_path", "");
    r.speaker_id = j.value("speaker_id", "");
    if (j.contains("text_ids")) r.text_ids = j.at("text_ids").get<std::vector<int>>();
    r.pair_id = j.value("pair_id", "");
    r.seed = j.value("seed", int64_t(-1));
    return r;
}

Manifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail("manifest not found: " + path);
    Manifest m;
    m.dir = fs::path(path).parent_path().string();
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail("manifest row " + std::to_string(line_no) + ": parse error: " + e.what());
        }
        if (!j.is_object())
            fail("manifest row " + std::to_string(line_no) + ": expected a JSON object");
        m.rows.push_back(parse_row(j, line_no));
    }
    return m;
}

std::string row_to_json(const ManifestRow& row) {
    json j;
    j["id"] = row.id;
    j["role"] = row.role;
    j["wav_path"] = row.wav_path;
    if (!row.ref_path.empty()) j["ref_path"] = row.ref_path;
    if (!row.speaker_id.empty()) j["speaker_id"] = row.speaker_id;
    if (!row.text_ids.empty()) j["text_ids"] = row.text_ids;
    if (!row.pair_id.empty()) j["pair_id"] = row.pair_id;
    if (row.seed >= 0) j["seed"] = row.seed;
    return j.dump();
}

void write_manifest(const Manifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail("cannot write manifest: " + path);
    for (const auto& r : m.rows) f << row_to_json(r) << "\n";
    if (!f) fail("failed writing manifest: " + path);
}

std::vector<std::string> validate_manifest(const Manifest& m) {
    std::vector<std::string> out;
    std::map<std::string, size_t> seen_ids;
    struct PairUse {
        int n_src = 0, n_tgt = 0, n_other = 0, total = 0;
    };
    std::map<std::string, PairUse> pairs;
    for (size_t i = 0; i < m.rows.size(); ++i) {
        const auto& r = m.rows[i];
        std::string where = "row " + std::to_string(i + 1) + " (id '" + r.id + "')";
        if (r.id.empty()) out.push_back("row " + std::to_string(i + 1) + ": empty id");
        else {
            auto it = seen_ids.find(r.id);
            if (it != seen_ids.end())
                out.push_back(where + ": duplicate id, first used on row " +
                              std::to_string(it->second + 1));
            else
                seen_ids[r.id] = i;
        }
        if (r.role != "src" && r.role != "tgt" && r.role != "real")
            out.push_back(where + ": invalid role '" + r.role + "'");
        if (r.wav_path.empty())
            out.push_back(where + ": missing wav_path");
        else if (!std::filesystem::exists(m.resolve_wav(r)))
            out.push_back(where + ": wav file does not exist: " + m.resolve_wav(r));
        if (!r.pair_id.empty()) {
            auto& u = pairs[r.pair_id];
            u.total += 1;
            if (r.role == "src") u.n_src += 1;
            else if (r.role == "tgt") u.n_tgt += 1;
            else u.n_other += 1;
        } else if (r.role == "src" || r.role == "tgt") {
            out.push_back(where + ": role '" + r.role + "' requires a pair_id");
        }
    }
    for (const auto& [pid, u] : pairs) {
        if (u.total != 2)
            out.push_back("pair '" + pid + "': used by " + std::to_string(u.total) +
                          " rows, expected exactly 2");
        else if (u.n_src != 1 || u.n_tgt != 1)
            out.push_back("pair '" + pid + "': needs one src row and one tgt row");
    }
    return out;
}

uint64_t manifest_hash(const Manifest& m) {
    uint64_t h = 14695981039346656037ull;
    for (const auto& r : m.rows) h = fnv1a(row_to_json(r) + "\n", h);
    return h;
}

}  // namespace pairvc::cli
