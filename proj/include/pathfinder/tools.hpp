// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pathfinder/structured.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace pathfinder
{

struct ToolResult
{
    bool ok = true;
    std::string text;

    static ToolResult success(std::string text) { return { true, std::move(text) }; }
    static ToolResult failure(std::string text) { return { false, std::move(text) }; }

    bool operator==(const ToolResult&) const = default;
};

// {{{ calculator

/// Exact rational evaluation of + - * / with parentheses, unary minus and the
/// postfix percent literal (x% == x/100). Returns the value rendered with at
/// most 10 significant digits, or an error such as "division by zero" or
/// "syntax error at position N: ...".
[[nodiscard]] ToolResult calculate(std::string_view expression);

// }}}

// {{{ corpus

inline constexpr std::size_t ChunkTokens = 300;
inline constexpr std::size_t ChunkOverlap = 60;

struct Document
{
    std::string id;
    std::string title;
    std::string text;
};

struct Chunk
{
    std::string docId;
    std::size_t ordinal = 0;
    std::string text;
};

struct SearchHit
{
    std::string docId;
    std::size_t ordinal = 0;
    double score = 0.0;
    std::string text;
};

/// Read-only after construction; safe for concurrent searches.
class Corpus
{
  public:
    Corpus() = default;
    explicit Corpus(std::vector<Document> documents);

    /// A directory of plain-text files (doc id = file stem) or a JSONL file of
    /// {id, title, text} objects.
    static Corpus load(const std::filesystem::path& path);

    [[nodiscard]] const std::vector<Document>& documents() const noexcept { return _documents; }
    [[nodiscard]] const std::vector<Chunk>& chunks() const noexcept { return _chunks; }
    [[nodiscard]] bool empty() const noexcept { return _chunks.empty(); }

    /// Corpus restricted to the given document ids; an empty list keeps all.
    [[nodiscard]] Corpus subset(const std::vector<std::string>& docIds) const;

    /// TF-IDF ranking over lowercase, punctuation-stripped tokens; zero
    /// scores are dropped and ties ordered by (doc id, chunk ordinal).
    [[nodiscard]] std::vector<SearchHit> search(std::string_view query, std::size_t k) const;

  private:
    std::vector<Document> _documents;
    std::vector<Chunk> _chunks;
    std::vector<std::map<std::string, std::size_t>> _termCounts;
    std::map<std::string, std::size_t> _documentFrequency;
};

/// Fixed windows of ChunkTokens whitespace-delimited tokens, overlapping by
/// ChunkOverlap.
[[nodiscard]] std::vector<Chunk> chunkDocument(const Document& document);

/// Lowercased tokens with punctuation stripped; empty tokens dropped.
[[nodiscard]] std::vector<std::string> searchTokens(std::string_view text);

// }}}

// {{{ registry

struct ToolSpec
{
    std::string name;
    std::string description;
    Schema arguments;
};

using ToolFunction = std::function<ToolResult(const Json& arguments)>;

class ToolRegistry
{
  public:
    /// Throws ConfigError on a duplicate name.
    void add(ToolSpec spec, ToolFunction function);

    [[nodiscard]] bool contains(std::string_view name) const;
    [[nodiscard]] const ToolSpec* find(std::string_view name) const;
    [[nodiscard]] std::vector<ToolSpec> specs() const;

    /// Unknown tools and argument mismatches come back as error results.
    [[nodiscard]] ToolResult invoke(std::string_view name, const Json& arguments) const;

  private:
    struct Entry
    {
        ToolSpec spec;
        ToolFunction function;
    };
    std::map<std::string, Entry, std::less<>> _tools;
};

inline constexpr std::string_view CalculatorTool = "calculator";
inline constexpr std::string_view CorpusSearchTool = "corpus_search";

/// Registry with the calculator and, bound to the given corpus, corpus_search.
[[nodiscard]] ToolRegistry builtinTools(std::shared_ptr<const Corpus> corpus);

[[nodiscard]] std::string formatHits(const std::vector<SearchHit>& hits);

// }}}

} // namespace pathfinder
