// Copyright 2026-present the trisampler project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Data model and file ingestion: embedding matrices, relevance judgments
// and TREC run files.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trisampler/error.hpp"

namespace trisampler {

/// Dense row index into an EmbeddingMatrix.
using RowId = std::uint32_t;

/// Row-major count x dim float matrix with one unique string id per row.
/// Immutable after construction, so it can be shared across threads.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;

    EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<float> data)
        : ids_(std::move(ids)), dim_(dim), data_(std::move(data)) {
        TRISAMPLER_EXPECT(dim_ > 0, "embedding dim must be positive");
        TRISAMPLER_EXPECT(data_.size() == ids_.size() * dim_,
                          "embedding data length must equal count * dim");
        TRISAMPLER_EXPECT(ids_.size() <= UINT32_MAX, "too many rows for RowId");
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i])) {
                throw DataError("non-finite embedding value in row '" + ids_[i / dim_] +
                                "' column " + std::to_string(i % dim_));
            }
        }
        row_of_.reserve(ids_.size());
        for (std::size_t r = 0; r < ids_.size(); ++r) {
            if (!row_of_.emplace(ids_[r], static_cast<RowId>(r)).second) {
                throw DataError("duplicate embedding id '" + ids_[r] + "'");
            }
        }
        std::vector<RowId> order(ids_.size());
        std::iota(order.begin(), order.end(), RowId{0});
        std::sort(order.begin(), order.end(),
                  [this](RowId a, RowId b) { return ids_[a] < ids_[b]; });
        id_rank_.resize(ids_.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            id_rank_[order[i]] = static_cast<std::uint32_t>(i);
        }
    }

    std::size_t
    count() const {
        return ids_.size();
    }

    std::size_t
    dim() const {
        return dim_;
    }

    bool
    empty() const {
        return ids_.empty();
    }

    std::span<const float>
    row(RowId r) const {
        return {data_.data() + static_cast<std::size_t>(r) * dim_, dim_};
    }

    const std::string&
    id(RowId r) const {
        return ids_[r];
    }

    /// Position of row r's id in ascending lexicographic id order. Comparing
    /// ranks is equivalent to comparing ids, which is what tie-breaks use.
    std::uint32_t
    id_rank(RowId r) const {
        return id_rank_[r];
    }

    std::optional<RowId>
    find(std::string_view id) const {
        auto it = row_of_.find(std::string(id));
        if (it == row_of_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    const std::vector<std::string>&
    ids() const {
        return ids_;
    }

    const std::vector<float>&
    data() const {
        return data_;
    }

    friend bool
    operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
        return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
    }

private:
    std::vector<std::string> ids_;
    std::size_t dim_ = 1;
    std::vector<float> data_;
    std::unordered_map<std::string, RowId> row_of_;
    std::vector<std::uint32_t> id_rank_;
};

namespace detail {

inline constexpr std::string_view kEmbeddingMagic = "TRIV1";

inline std::vector<char>
read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failure on '" + path + "'");
    }
    return bytes;
}

inline std::uint64_t
load_u64_le(const char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | static_cast<unsigned char>(p[i]);
    }
    return v;
}

inline void
store_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

inline float
load_f32_le(const char* p) {
    std::uint32_t bits = 0;
    for (int i = 3; i >= 0; --i) {
        bits = (bits << 8) | static_cast<unsigned char>(p[i]);
    }
    return std::bit_cast<float>(bits);
}

inline void
store_f32_le(std::string& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
}

inline void
write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw IoError("write failure on '" + path + "'");
    }
}

inline std::vector<std::string_view>
split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            fields.push_back(line.substr(start, i - start));
        }
    }
    return fields;
}

template <typename T>
std::optional<T>
parse_number(std::string_view s) {
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

// Shortest decimal form that parses back to the same double.
inline std::string
format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Reads the binary embedding format: "TRIV1", u64 count, u64 dim (both
/// little-endian), count newline-terminated UTF-8 ids, then count*dim
/// little-endian f32 values.
inline EmbeddingMatrix
load_embeddings(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    const std::size_t header = detail::kEmbeddingMagic.size() + 16;
    if (bytes.size() < header) {
        throw FormatError("'" + path + "': truncated or empty embedding header");
    }
    if (std::string_view(bytes.data(), detail::kEmbeddingMagic.size()) != detail::kEmbeddingMagic) {
        throw FormatError("'" + path + "': bad magic, expected TRIV1");
    }
    const std::uint64_t count = detail::load_u64_le(bytes.data() + 5);
    const std::uint64_t dim = detail::load_u64_le(bytes.data() + 13);
    if (dim == 0) {
        throw FormatError("'" + path + "': dim must be positive");
    }
    if (count > UINT32_MAX || dim > (1ULL << 32) || count * dim > (1ULL << 40)) {
        throw FormatError("'" + path + "': implausible count/dim in header");
    }

    std::vector<std::string> ids;
    ids.reserve(count);
    std::size_t pos = header;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto* begin = bytes.data() + pos;
        const auto* end = bytes.data() + bytes.size();
        const auto* nl = std::find(begin, end, '\n');
        if (nl == end) {
            throw FormatError("'" + path + "': id block ends after " + std::to_string(i) +
                              " of " + std::to_string(count) + " ids");
        }
        if (nl == begin) {
            throw FormatError("'" + path + "': empty id at row " + std::to_string(i));
        }
        ids.emplace_back(begin, nl);
        pos += static_cast<std::size_t>(nl - begin) + 1;
    }

    const std::uint64_t payload = count * dim * 4;
    if (bytes.size() - pos != payload) {
        throw FormatError("'" + path + "': declared " + std::to_string(count) + "x" +
                          std::to_string(dim) + " floats (" + std::to_string(payload) +
                          " bytes) but payload has " + std::to_string(bytes.size() - pos) +
                          " bytes");
    }
    std::vector<float> data(count * dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = detail::load_f32_le(bytes.data() + pos + 4 * i);
    }
    return EmbeddingMatrix(std::move(ids), static_cast<std::size_t>(dim), std::move(data));
}

inline void
write_embeddings(const EmbeddingMatrix& m, const std::string& path) {
    std::string out;
    out.reserve(21 + m.count() * (8 + 4 * m.dim()));
    out.append(detail::kEmbeddingMagic);
    detail::store_u64_le(out, m.count());
    detail::store_u64_le(out, m.dim());
    for (const auto& id : m.ids()) {
        TRISAMPLER_EXPECT(!id.empty() && id.find('\n') == std::string::npos,
                          "embedding ids must be non-empty and newline-free");
        out.append(id);
        out.push_back('\n');
    }
    for (float v : m.data()) {
        detail::store_f32_le(out, v);
    }
    detail::write_file_bytes(path, out);
}

/// Binary relevance judgments: query id -> non-empty set of positive doc ids.
class Qrels {
public:
    using Map = std::map<std::string, std::set<std::string>>;

    Qrels() = default;

    explicit Qrels(Map entries) : entries_(std::move(entries)) {
        for (const auto& [q, docs] : entries_) {
            TRISAMPLER_EXPECT(!docs.empty(), "query '" + q + "' has an empty positive set");
        }
    }

    void
    add(const std::string& query, const std::string& doc) {
        entries_[query].insert(doc);
    }

    const Map&
    entries() const {
        return entries_;
    }

    bool
    contains(const std::string& query) const {
        return entries_.count(query) != 0;
    }

    const std::set<std::string>&
    positives(const std::string& query) const {
        auto it = entries_.find(query);
        TRISAMPLER_EXPECT(it != entries_.end(), "query '" + query + "' not in qrels");
        return it->second;
    }

    std::size_t
    size() const {
        return entries_.size();
    }

    bool
    empty() const {
        return entries_.empty();
    }

    friend bool
    operator==(const Qrels&, const Qrels&) = default;

private:
    Map entries_;
};

/// Parses TREC-style qrels. Accepts "q d rel" and "q 0 d rel"; any grade
/// >= 1 counts as relevant. Queries left without positives are dropped and
/// reported through `warnings`.
inline Qrels
load_qrels(const std::string& path, std::vector<std::string>* warnings = nullptr) {
    const auto bytes = detail::read_file_bytes(path);
    std::string_view text(bytes.data(), bytes.size());
    Qrels::Map entries;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const auto fields = detail::split_fields(line);
        if (fields.empty()) {
            continue;
        }
        if (fields.size() < 3 || fields.size() > 4) {
            throw FormatError("'" + path + "' line " + std::to_string(line_no) + ": expected 3 or 4 fields, got " +
                              std::to_string(fields.size()));
        }
        const auto doc = fields.size() == 3 ? fields[1] : fields[2];
        const auto rel = detail::parse_number<long>(fields.back());
        if (!rel) {
            throw FormatError("'" + path + "' line " + std::to_string(line_no) + ": relevance '" +
                              std::string(fields.back()) + "' is not an integer");
        }
        const std::string query(fields[0]);
        seen.insert(query);
        if (*rel >= 1) {
            entries[query].insert(std::string(doc));
        }
    }
    for (const auto& q : seen) {
        if (!entries.count(q) && warnings != nullptr) {
            warnings->push_back("query '" + q + "' has no relevant judgments; dropped");
        }
    }
    return Qrels(std::move(entries));
}

inline void
write_qrels(const Qrels& qrels, const std::string& path) {
    std::string out;
    for (const auto& [q, docs] : qrels.entries()) {
        for (const auto& d : docs) {
            out += q;
            out += '\t';
            out += d;
            out += "\t1\n";
        }
    }
    detail::write_file_bytes(path, out);
}

/// Qrels mapped onto matrix rows. Positives are sorted ascending so they
/// can serve directly as an exclusion list.
struct ResolvedQrels {
    struct Entry {
        RowId query;
        std::vector<RowId> positives;
    };

    std::vector<Entry> entries;  // ordered by query id

    const Entry*
    find(RowId query) const {
        for (const auto& e : entries) {
            if (e.query == query) {
                return &e;
            }
        }
        return nullptr;
    }

    std::size_t
    pair_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) {
            n += e.positives.size();
        }
        return n;
    }
};

inline ResolvedQrels
resolve_qrels(const Qrels& qrels, const EmbeddingMatrix& queries, const EmbeddingMatrix& corpus) {
    ResolvedQrels out;
    out.entries.reserve(qrels.size());
    for (const auto& [q, docs] : qrels.entries()) {
        auto qrow = queries.find(q);
        if (!qrow) {
            throw DataError("qrels query '" + q + "' not present in query embeddings");
        }
        ResolvedQrels::Entry e{*qrow, {}};
        for (const auto& d : docs) {
            auto drow = corpus.find(d);
            if (!drow) {
                throw DataError("qrels document '" + d + "' (query '" + q + "') not present in corpus");
            }
            e.positives.push_back(*drow);
        }
        std::sort(e.positives.begin(), e.positives.end());
        out.entries.push_back(std::move(e));
    }
    return out;
}

struct RunEntry {
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;

    friend bool
    operator==(const RunEntry&, const RunEntry&) = default;
};

/// Ranked retrieval results per query. Rankings are kept sorted by score
/// descending with ties broken by ascending doc id; ranks start at 1.
class RunFile {
public:
    using Map = std::map<std::string, std::vector<RunEntry>>;

    /// Replaces the ranking for `query`, sorting and assigning ranks.
    void
    set_ranking(const std::string& query, std::vector<std::pair<std::string, double>> scored) {
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) {
                return a.second > b.second;
            }
            return a.first < b.first;
        });
        auto& list = entries_[query];
        list.clear();
        list.reserve(scored.size());
        for (std::size_t i = 0; i < scored.size(); ++i) {
            list.push_back({std::move(scored[i].first), scored[i].second, i + 1});
        }
    }

    const Map&
    entries() const {
        return entries_;
    }

    std::size_t
    size() const {
        return entries_.size();
    }

    /// Throws FormatError naming the first violated invariant.
    void
    validate() const {
        for (const auto& [q, list] : entries_) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (list[i].rank != i + 1) {
                    throw FormatError("run query '" + q + "': ranks must be 1..n ascending");
                }
                if (i > 0) {
                    const auto& prev = list[i - 1];
                    const bool ordered = prev.score > list[i].score ||
                                         (prev.score == list[i].score && prev.doc_id < list[i].doc_id);
                    if (!ordered) {
                        throw FormatError("run query '" + q + "': scores not in non-increasing order at rank " +
                                          std::to_string(i + 1));
                    }
                }
            }
        }
    }

    friend bool
    operator==(const RunFile&, const RunFile&) = default;

private:
    friend RunFile load_run(const std::string& path);
    Map entries_;
};

/// Writes "query Q0 doc rank score tag" lines grouped by query id.
inline void
write_run(const RunFile& run, const std::string& path, std::string_view tag = "trisampler") {
    run.validate();
    std::string out;
    for (const auto& [q, list] : run.entries()) {
        for (const auto& e : list) {
            out += q;
            out += " Q0 ";
            out += e.doc_id;
            out += ' ';
            out += std::to_string(e.rank);
            out += ' ';
            out += detail::format_double(e.score);
            out += ' ';
            out += tag;
            out += '\n';
        }
    }
    detail::write_file_bytes(path, out);
}

inline RunFile
load_run(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    std::string_view text(bytes.data(), bytes.size());
    RunFile run;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const auto f = detail::split_fields(line);
        if (f.empty()) {
            continue;
        }
        const auto where = "'" + path + "' line " + std::to_string(line_no);
        if (f.size() != 6) {
            throw FormatError(where + ": expected 6 fields");
        }
        const auto rank = detail::parse_number<std::size_t>(f[3]);
        const auto score = detail::parse_number<double>(f[4]);
        if (!rank || !score) {
            throw FormatError(where + ": bad rank or score");
        }
        run.entries_[std::string(f[0])].push_back({std::string(f[2]), *score, *rank});
    }
    for (auto& [q, list] : run.entries_) {
        std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    }
    run.validate();
    return run;
}

}  // namespace trisampler
