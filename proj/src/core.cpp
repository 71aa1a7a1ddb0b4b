#include "sasv/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sasv {

namespace {

std::string at_line(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line) + ": ";
}

// Splits `text` into lines, strips a trailing CR, skips blanks and '#' comments.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        fn(line, line_no);
    }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

}  // namespace

// ---------------------------------------------------------------------------

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    while (true) {
        const std::uint64_t r = engine_();
        if (r >= threshold) return r % n;
    }
}

// ---------------------------------------------------------------------------

EmbeddingStore::EmbeddingStore(StoreKind kind, std::size_t dimension)
    : kind_(kind), dimension_(dimension) {
    if (dimension == 0) throw std::invalid_argument("embedding dimension must be positive");
}

void EmbeddingStore::add(Embedding e) {
    if (e.dim() != dimension_) {
        throw DataError("embedding '" + e.id + "' has dimension " + std::to_string(e.dim()) +
                        ", store expects " + std::to_string(dimension_));
    }
    for (double v : e.values) {
        if (!std::isfinite(v)) throw DataError("embedding '" + e.id + "' has a non-finite value");
    }
    if (index_.contains(e.id)) throw DataError("duplicate embedding id '" + e.id + "'");
    index_.emplace(e.id, entries_.size());
    entries_.push_back(std::move(e));
}

bool EmbeddingStore::contains(std::string_view id) const {
    return find(id) != nullptr;
}

const Embedding* EmbeddingStore::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const Embedding& EmbeddingStore::at(std::string_view id) const {
    const Embedding* e = find(id);
    if (e == nullptr) throw DataError("unknown embedding id '" + std::string(id) + "'");
    return *e;
}

EmbeddingStore EmbeddingStore::normalized() const {
    EmbeddingStore out(kind_, dimension_);
    for (const auto& e : entries_) {
        try {
            out.add(length_normalize(e));
        } catch (const std::domain_error&) {
            throw DataError("embedding '" + e.id + "' has zero norm and cannot be length-normalized");
        }
    }
    return out;
}

EmbeddingStore parse_embeddings(std::string_view text, StoreKind kind,
                                std::optional<std::size_t> expected_dim, std::string_view source) {
    std::optional<EmbeddingStore> store;
    if (expected_dim) store.emplace(kind, *expected_dim);

    for_each_record(text, [&](std::string_view line, std::size_t line_no) {
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0 || tab + 1 >= line.size()) {
            throw DataError(at_line(source, line_no) + "expected 'ID<TAB>v1 v2 ...'");
        }
        Embedding e;
        e.id = std::string(line.substr(0, tab));
        for (std::string_view tok : split(line.substr(tab + 1), ' ')) {
            const auto v = parse_double(tok);
            if (!v) throw DataError(at_line(source, line_no) + "bad value '" + std::string(tok) + "'");
            if (!std::isfinite(*v)) throw DataError(at_line(source, line_no) + "non-finite value");
            e.values.push_back(*v);
        }
        if (!store) store.emplace(kind, e.dim());
        if (e.dim() != store->dimension()) {
            throw DataError(at_line(source, line_no) + "dimension mismatch: got " + std::to_string(e.dim()) +
                            ", expected " + std::to_string(store->dimension()));
        }
        if (store->contains(e.id)) {
            throw DataError(at_line(source, line_no) + "duplicate id '" + e.id + "'");
        }
        store->add(std::move(e));
    });

    if (!store) throw DataError(std::string(source) + ": no embeddings found");
    return std::move(*store);
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, StoreKind kind,
                               std::optional<std::size_t> expected_dim) {
    return parse_embeddings(read_file(path), kind, expected_dim, path.string());
}

std::string format_embeddings(const EmbeddingStore& store) {
    std::string out;
    for (const auto& e : store.entries()) {
        out += e.id;
        out += '\t';
        for (std::size_t i = 0; i < e.values.size(); ++i) {
            if (i) out += ' ';
            out += format_double(e.values[i]);
        }
        out += '\n';
    }
    return out;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
    write_file(path, format_embeddings(store));
}

// ---------------------------------------------------------------------------

std::string_view to_string(TrialLabel label) {
    switch (label) {
        case TrialLabel::Target: return "target";
        case TrialLabel::NonTarget: return "nontarget";
        case TrialLabel::Spoof: return "spoof";
    }
    return "?";
}

std::optional<TrialLabel> parse_label(std::string_view token) {
    std::string lower(token);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "target") return TrialLabel::Target;
    if (lower == "nontarget") return TrialLabel::NonTarget;
    if (lower == "spoof") return TrialLabel::Spoof;
    return std::nullopt;
}

std::size_t Protocol::count(TrialLabel label) const {
    return static_cast<std::size_t>(
        std::count_if(trials.begin(), trials.end(), [label](const Trial& t) { return t.label == label; }));
}

Protocol parse_protocol(std::string_view text, std::string name) {
    Protocol protocol;
    protocol.name = std::move(name);
    for_each_record(text, [&](std::string_view line, std::size_t line_no) {
        const auto fields = split(line, '\t');
        if (fields.size() != 3) {
            throw DataError(at_line(protocol.name, line_no) + "expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw DataError(at_line(protocol.name, line_no) + "empty id");
        }
        const auto label = parse_label(fields[2]);
        if (!label) {
            throw DataError(at_line(protocol.name, line_no) + "unknown label '" + std::string(fields[2]) + "'");
        }
        protocol.trials.push_back(Trial{std::string(fields[0]), std::string(fields[1]), *label});
    });
    return protocol;
}

Protocol load_protocol(const std::filesystem::path& path) {
    return parse_protocol(read_file(path), path.string());
}

std::string format_protocol(const Protocol& protocol) {
    std::string out;
    for (const auto& t : protocol.trials) {
        out += t.enroll_id;
        out += '\t';
        out += t.test_id;
        out += '\t';
        out += to_string(t.label);
        out += '\n';
    }
    return out;
}

void save_protocol(const Protocol& protocol, const std::filesystem::path& path) {
    write_file(path, format_protocol(protocol));
}

void check_resolvable(const Protocol& protocol, const EmbeddingStores& stores) {
    for (std::size_t i = 0; i < protocol.trials.size(); ++i) {
        const Trial& t = protocol.trials[i];
        const char* missing = nullptr;
        std::string_view id;
        if (!stores.sv.contains(t.enroll_id)) {
            missing = "enrollment id not in SV store";
            id = t.enroll_id;
        } else if (!stores.sv.contains(t.test_id)) {
            missing = "test id not in SV store";
            id = t.test_id;
        } else if (!stores.cm.contains(t.test_id)) {
            missing = "test id not in CM store";
            id = t.test_id;
        }
        if (missing) {
            throw DataError(protocol.name + ": trial " + std::to_string(i) + " (" + t.enroll_id + ", " +
                            t.test_id + "): " + missing + ": '" + std::string(id) + "'");
        }
    }
}

// ---------------------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

std::vector<double> length_normalize(std::span<const double> v) {
    const double n = norm(v);
    if (!(n > 0.0)) throw std::domain_error("cannot length-normalize a zero-norm vector");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

Embedding length_normalize(const Embedding& e) {
    return Embedding{e.id, length_normalize(e.values)};
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    const double na = norm(a);
    const double nb = norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw std::domain_error("cosine: zero-norm input");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view token) {
    if (token.empty()) return std::nullopt;
    if (token.front() == '+') token.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) return std::nullopt;
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace sasv
