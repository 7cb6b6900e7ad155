#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aedf/common.hpp"
#include "aedf/rng.hpp"

namespace aedf {

struct ManifestEntry {
    std::string itemid;
    std::string wav_path;
    int label = 0;  // hasbird
};

struct Manifest {
    std::string dataset_name;
    std::vector<ManifestEntry> entries;

    const ManifestEntry& find(const std::string& itemid) const {
        for (const auto& e : entries)
            if (e.itemid == itemid) return e;
        throw InputError(cat("itemid '", itemid, "' not in manifest '", dataset_name, "'"));
    }

    std::size_t positives() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += static_cast<std::size_t>(e.label);
        return n;
    }
};

namespace data_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

}  // namespace data_detail

/// Loads a labeled clip list from CSV. The header must name `itemid` and
/// `hasbird` columns; extra columns (the public DCASE metadata carries a
/// `datasetid`) are ignored. Audio paths resolve as
/// <audio_root>/<itemid>.wav, defaulting audio_root to the CSV's directory.
inline Manifest load_manifest(const std::string& csv_path, std::string audio_root = "") {
    namespace fs = std::filesystem;
    std::ifstream is(csv_path);
    if (!is) throw IoError(cat("cannot open manifest '", csv_path, "'"));
    if (audio_root.empty()) audio_root = fs::path(csv_path).parent_path().string();

    Manifest m;
    m.dataset_name = fs::path(csv_path).stem().string();

    std::string line;
    if (!std::getline(is, line)) throw FormatError(cat("'", csv_path, "': empty file"));
    const auto header = data_detail::split_csv_line(line);
    int id_col = -1, label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "itemid") id_col = static_cast<int>(i);
        if (header[i] == "hasbird") label_col = static_cast<int>(i);
    }
    if (id_col < 0 || label_col < 0)
        throw FormatError(cat("'", csv_path, "' line 1: header must name itemid and hasbird"));

    std::set<std::string> seen;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = data_detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw FormatError(cat("'", csv_path, "' line ", line_no, ": expected ", header.size(),
                                  " fields, got ", fields.size()));
        const std::string& id = fields[static_cast<std::size_t>(id_col)];
        const std::string& label = fields[static_cast<std::size_t>(label_col)];
        if (id.empty())
            throw FormatError(cat("'", csv_path, "' line ", line_no, ": empty itemid"));
        if (label != "0" && label != "1")
            throw FormatError(cat("'", csv_path, "' line ", line_no, ": non-binary label '", label,
                                  "'"));
        if (!seen.insert(id).second)
            throw FormatError(cat("'", csv_path, "' line ", line_no, ": duplicate itemid '", id,
                                  "'"));
        ManifestEntry e;
        e.itemid = id;
        e.label = label == "1" ? 1 : 0;
        e.wav_path = (fs::path(audio_root) / (id + ".wav")).string();
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline void save_manifest(const Manifest& m, const std::string& csv_path) {
    std::ofstream os(csv_path, std::ios::trunc);
    if (!os) throw IoError(cat("cannot open '", csv_path, "' for writing"));
    os << "itemid,hasbird\n";
    for (const auto& e : m.entries) os << e.itemid << "," << e.label << "\n";
    if (!os) throw IoError(cat("write failed for '", csv_path, "'"));
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct DatasetSplit {
    std::vector<std::string> train, val, test;
    std::uint64_t seed = 0;
};

namespace split_detail {

inline std::vector<std::size_t> largest_remainder(std::size_t n, const double* fractions,
                                                  std::size_t k) {
    std::vector<std::size_t> counts(k);
    std::vector<double> remainders(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double exact = static_cast<double>(n) * fractions[i];
        counts[i] = static_cast<std::size_t>(exact);
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < k; ++i)
            if (remainders[i] > remainders[best]) best = i;
        counts[best] += 1;
        remainders[best] = -1.0;
        assigned += 1;
    }
    return counts;
}

}  // namespace split_detail

/// Deterministic stratified 60/20/20 partition. Role sizes come from a
/// largest-remainder rounding of the exact shares (so each is within one
/// clip); each role's positive count is then the rounded stratified share,
/// which keeps every role's positive rate as close to the manifest's as the
/// integer arithmetic allows.
inline DatasetSplit split_dataset(const Manifest& m, std::uint64_t seed) {
    if (m.entries.size() < 5)
        throw InputError(cat("manifest '", m.dataset_name, "' has only ", m.entries.size(),
                             " clips; need at least 5 to split"));
    static const double kFractions[3] = {0.6, 0.2, 0.2};

    std::vector<std::string> by_class[2];
    for (const auto& e : m.entries) by_class[e.label].push_back(e.itemid);
    for (int c = 0; c < 2; ++c) {
        Rng rng(seed_mix(seed, 0x517a + static_cast<std::uint64_t>(c)));
        rng.shuffle(by_class[c]);
    }

    const std::size_t n = m.entries.size();
    const std::size_t n_pos = by_class[1].size();
    const auto sizes = split_detail::largest_remainder(n, kFractions, 3);

    // Positives per role: largest remainder over the stratified shares.
    const double pos_rate = static_cast<double>(n_pos) / static_cast<double>(n);
    double shares[3];
    for (int r = 0; r < 3; ++r) shares[r] = pos_rate * static_cast<double>(sizes[r]);
    std::size_t pos[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int r = 0; r < 3; ++r) {
        pos[r] = static_cast<std::size_t>(shares[r]);
        rem[r] = shares[r] - static_cast<double>(pos[r]);
        assigned += pos[r];
    }
    while (assigned < n_pos) {
        int best = -1;
        for (int r = 0; r < 3; ++r)
            if (pos[r] < sizes[r] && (best < 0 || rem[r] > rem[best])) best = r;
        pos[best] += 1;
        rem[best] = -1.0;
        assigned += 1;
    }
    while (assigned > n_pos) {
        int best = -1;
        for (int r = 0; r < 3; ++r)
            if (pos[r] > 0 && (best < 0 || rem[r] < rem[best])) best = r;
        pos[best] -= 1;
        rem[best] = 2.0;
        assigned -= 1;
    }

    DatasetSplit split;
    split.seed = seed;
    std::vector<std::string>* roles[3] = {&split.train, &split.val, &split.test};
    std::size_t pos_idx = 0, neg_idx = 0;
    for (int r = 0; r < 3; ++r) {
        for (std::size_t i = 0; i < pos[r]; ++i) roles[r]->push_back(by_class[1][pos_idx++]);
        const std::size_t negs = sizes[r] - pos[r];
        for (std::size_t i = 0; i < negs; ++i) roles[r]->push_back(by_class[0][neg_idx++]);
    }
    return split;
}

inline nlohmann::json split_to_json(const DatasetSplit& s) {
    return {{"seed", s.seed}, {"train", s.train}, {"val", s.val}, {"test", s.test}};
}

inline DatasetSplit split_from_json(const nlohmann::json& j) {
    DatasetSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct LabeledItem {
    std::string itemid;
    int label = 0;
};

inline std::vector<LabeledItem> labeled_items(const Manifest& m,
                                              const std::vector<std::string>& ids) {
    std::vector<LabeledItem> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back({id, m.find(id).label});
    return out;
}

/// Deterministic epoch batching: the order is a pure function of
/// (seed, epoch); the final short batch is kept.
inline std::vector<std::vector<LabeledItem>> make_batches(const std::vector<LabeledItem>& items,
                                                          int batch_size, int epoch,
                                                          std::uint64_t seed) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    std::vector<LabeledItem> order = items;
    Rng rng(seed_mix(seed, 0xba7c, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    std::vector<std::vector<LabeledItem>> batches;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace aedf
