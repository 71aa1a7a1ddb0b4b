#pragma once

// Shared domain types: embeddings, trial protocols, errors and the seeded RNG.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sasv {

// Bad invocation or invalid configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files, unresolvable ids, degenerate protocols (exit code 2).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient, or another numerical breakdown (exit code 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

// All randomness in the toolkit comes from one of these. The engine is
// mt19937_64, whose output sequence is fixed by the C++ standard; the
// transforms below are written out here instead of using <random>
// distributions, which are implementation-defined.
//
//   uniform()   top 53 bits of one draw, scaled to [0, 1)
//   gaussian()  Box-Muller, consuming two uniforms per call and returning
//               the cosine branch only (no cached second value)
//   below(n)    rejection sampling on the raw 64-bit draw
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double gaussian();
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

struct Embedding {
    std::string id;
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

enum class StoreKind { Sv, Cm };

// Insertion-ordered id -> embedding map with a fixed dimension.
class EmbeddingStore {
public:
    EmbeddingStore(StoreKind kind, std::size_t dimension);

    StoreKind kind() const { return kind_; }
    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // Throws DataError on duplicate id, wrong dimension or non-finite values.
    void add(Embedding e);

    bool contains(std::string_view id) const;
    const Embedding* find(std::string_view id) const;
    const Embedding& at(std::string_view id) const;

    const std::vector<Embedding>& entries() const { return entries_; }

    // Copy with every entry scaled to unit norm.
    EmbeddingStore normalized() const;

private:
    StoreKind kind_;
    std::size_t dimension_;
    std::vector<Embedding> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingStore parse_embeddings(std::string_view text, StoreKind kind,
                                std::optional<std::size_t> expected_dim = std::nullopt,
                                std::string_view source = "<memory>");
EmbeddingStore load_embeddings(const std::filesystem::path& path, StoreKind kind,
                               std::optional<std::size_t> expected_dim = std::nullopt);
std::string format_embeddings(const EmbeddingStore& store);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Trials and protocols
// ---------------------------------------------------------------------------

enum class TrialLabel { Target, NonTarget, Spoof };

// Loss class index: 0 for target, 1 for everything else.
inline int class_index(TrialLabel label) { return label == TrialLabel::Target ? 0 : 1; }

std::string_view to_string(TrialLabel label);
std::optional<TrialLabel> parse_label(std::string_view token);

struct Trial {
    std::string enroll_id;
    std::string test_id;
    TrialLabel label = TrialLabel::Target;

    bool operator==(const Trial&) const = default;
};

struct Protocol {
    std::string name;
    std::vector<Trial> trials;

    std::size_t count(TrialLabel label) const;
};

Protocol parse_protocol(std::string_view text, std::string name);
Protocol load_protocol(const std::filesystem::path& path);
std::string format_protocol(const Protocol& protocol);
void save_protocol(const Protocol& protocol, const std::filesystem::path& path);

// Scores for one trial. For the integration model s_sasv = alpha * s_sv + s_spf;
// baselines put their CM score in s_spf and their fused score in s_sasv.
struct ScoreRecord {
    Trial trial;
    double s_sv = 0.0;
    double s_spf = 0.0;
    double s_sasv = 0.0;

    bool operator==(const ScoreRecord&) const = default;
};

// The SV and CM stores every trial is resolved against.
struct EmbeddingStores {
    EmbeddingStore sv;
    EmbeddingStore cm;
};

// Checks that every enroll id is in the SV store and every test id is in
// both stores. The error names the first offending trial index.
void check_resolvable(const Protocol& protocol, const EmbeddingStores& stores);

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

double norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

// Throws std::domain_error for a zero vector.
std::vector<double> length_normalize(std::span<const double> v);
Embedding length_normalize(const Embedding& e);

// Cosine similarity clamped to [-1, 1]. Throws std::invalid_argument on a
// dimension mismatch and std::domain_error on a zero-norm input.
double cosine(std::span<const double> a, std::span<const double> b);
inline double cosine(const Embedding& a, const Embedding& b) { return cosine(a.values, b.values); }

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
std::optional<double> parse_double(std::string_view token);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace sasv
