#pragma once

#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace debtlens {

// ---------------------------------------------------------------------------
// Errors. Every module error derives from Error and carries a short kind tag
// used by the CLI for its single-line error output.

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& m) : Error("argument", m) {}
};
struct StreamError : Error {
  explicit StreamError(const std::string& m) : Error("stream", m) {}
};
struct CurationError : Error {
  explicit CurationError(const std::string& m) : Error("curation", m) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& m) : Error("training", m) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& m) : Error("metric", m) {}
};
struct LoadError : Error {
  explicit LoadError(const std::string& m) : Error("load", m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

// ---------------------------------------------------------------------------
// Time. All instants are UTC with second resolution.

using UtcTime = std::chrono::sys_seconds;

/// Parses RFC 3339 / ISO 8601 date-times ("2015-01-01T00:00:00Z",
/// "2015-01-01T03:00:00+02:00", "2015-01-01 00:00:00", "2015-01-01").
/// A missing offset means UTC. Fractional seconds are truncated.
std::optional<UtcTime> parse_utc(std::string_view text);

/// Like parse_utc but throws ArgumentError naming the bad value.
UtcTime parse_utc_or_throw(std::string_view text);

/// Canonical "YYYY-MM-DDTHH:MM:SSZ".
std::string format_utc(UtcTime t);

// ---------------------------------------------------------------------------
// TD type ontology.

enum class Category : std::uint8_t {
  Architecture,
  Automation,
  Build,
  Code,
  Defect,
  Design,
  Documentation,
  Infrastructure,
  People,
  Process,
  Requirement,
  Service,
  Test,
};

inline constexpr std::size_t kCategoryCount = 13;

inline constexpr std::array<Category, kCategoryCount> kAllCategories = {
    Category::Architecture,   Category::Automation, Category::Build,
    Category::Code,           Category::Defect,     Category::Design,
    Category::Documentation,  Category::Infrastructure,
    Category::People,         Category::Process,    Category::Requirement,
    Category::Service,        Category::Test,
};

std::string_view category_name(Category c);
std::optional<Category> category_from_name(std::string_view name);
inline std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

/// Small value-type set of categories, iterated in enumeration order.
class CategorySet {
 public:
  CategorySet() = default;
  CategorySet(std::initializer_list<Category> cs) {
    for (auto c : cs) insert(c);
  }

  void insert(Category c) { bits_ |= mask(c); }
  void erase(Category c) { bits_ &= static_cast<std::uint16_t>(~mask(c)); }
  bool contains(Category c) const { return (bits_ & mask(c)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  void merge(CategorySet other) { bits_ |= other.bits_; }

  std::vector<Category> to_vector() const {
    std::vector<Category> out;
    for (auto c : kAllCategories)
      if (contains(c)) out.push_back(c);
    return out;
  }

  friend bool operator==(CategorySet, CategorySet) = default;

 private:
  static std::uint16_t mask(Category c) {
    return static_cast<std::uint16_t>(1u << index_of(c));
  }
  std::uint16_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Seeded randomness. Built only on std::mt19937_64 raw output so that a seed
// selects the same samples with any standard library.

/// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Sub-seed for a named pipeline step under a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// `count` distinct indices from [0, n), in selection order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count);

 private:
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace debtlens
