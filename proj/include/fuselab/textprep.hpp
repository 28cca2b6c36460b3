#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fuselab {

// ---- lexicons ----

/// Word frequencies, emoticon names and a curated typo map.
///
/// Files are UTF-8, one tab-separated pair per line: "word<TAB>frequency",
/// "emoticon<TAB>name", "typo<TAB>correction". Blank lines and lines starting
/// with '#' are skipped.
class Lexicon {
public:
    Lexicon() = default;

    static Lexicon load(const std::filesystem::path& words, const std::filesystem::path& emoticons,
                        const std::filesystem::path& typos);
    // words.tsv, emoticons.tsv, typos.tsv inside dir.
    static Lexicon load_dir(const std::filesystem::path& dir);

    void add_word(const std::string& word, std::uint64_t count);
    void add_emoticon(const std::string& emoticon, const std::string& name);
    void add_typo(const std::string& typo, const std::string& correction);

    bool contains(std::string_view word) const;
    std::uint64_t count(std::string_view word) const;
    std::uint64_t total() const noexcept { return total_; }
    std::size_t size() const noexcept { return counts_.size(); }

    const std::string* emoticon_name(std::string_view emoticon) const;
    bool is_emoticon_name(std::string_view name) const;
    const std::string* typo_correction(std::string_view word) const;

private:
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
    std::unordered_map<std::string, std::string> emoticons_;
    std::set<std::string, std::less<>> emoticon_names_;
    std::unordered_map<std::string, std::string> typos_;
};

// FUSELAB_LEXICON_DIR when set, else the bundled data/lexicon directory.
std::filesystem::path lexicon_dir();

// ---- normalization ----

enum class TokenTag { word, user_open, user_close, hashtag_open, hashtag_close, emoticon, elongated, punct };

struct Token {
    std::string text;
    TokenTag tag = TokenTag::word;

    friend bool operator==(const Token&, const Token&) = default;
};

struct NormalizedText {
    std::vector<Token> tokens;
    std::string original;

    // Tokens joined by spaces; closing punctuation attaches to the previous
    // token and opening brackets to the next.
    std::string str() const;
    // Token surfaces in order (tags rendered as "[user]", "[wink]", ...).
    std::vector<std::string> surfaces() const;
};

/// Social-text normalization: mentions wrapped in [user] ... [/user],
/// hashtags segmented and wrapped in [hashtag] ... [/hashtag], emoticons
/// replaced by "[name]", elongations collapsed, typos repaired, lowercased.
/// Total: unknown constructs pass through as word tokens.
NormalizedText normalize(std::string_view raw, const Lexicon& lexicon);

/// Maximum-likelihood unigram segmentation of a hashtag body.
std::vector<std::string> segment_hashtag(std::string_view body, const Lexicon& lexicon);

/// Collapse of character runs of length >= 3. Returns the collapsed word and
/// whether it needed an elongation marker (no lexicon word matched).
std::pair<std::string, bool> collapse_elongation(const std::string& word, const Lexicon& lexicon);

/// Curated typo map, then the most frequent lexicon word at edit distance 1
/// (words of length >= 4). Returns nullopt when nothing applies.
std::optional<std::string> repair_typo(const std::string& word, const Lexicon& lexicon);

// ---- part of speech and entity tuples ----

enum class PosTag { noun, verb, aux, adj, adv, det, pron, adp, conj, intj, num, other };

std::string to_string(PosTag tag);

/// word<TAB>TAG with TAG in NOUN VERB AUX ADJ ADV DET PRON ADP CONJ INTJ NUM.
class PosLexicon {
public:
    PosLexicon() = default;
    static PosLexicon load(const std::filesystem::path& path);

    void add(const std::string& word, PosTag tag) { tags_[word] = tag; }
    std::optional<PosTag> lookup(std::string_view word) const;

private:
    std::map<std::string, PosTag, std::less<>> tags_;
};

struct TaggedWord {
    std::string text;
    PosTag tag;
    std::size_t token_index;  // position in NormalizedText::tokens
};

/// Lexicon lookup with suffix fallback (-ly adverb, -ed/-ing verb, -s after
/// a pronoun verb, adjective suffixes, default noun). Words inside a user span
/// are nouns. Tag, punctuation and emoticon tokens are skipped.
std::vector<TaggedWord> pos_tag(const NormalizedText& text, const PosLexicon& lexicon);

struct EntityTuple {
    std::optional<std::string> subject;
    std::optional<std::string> object;
    std::optional<std::string> verb;
    std::optional<std::string> modifier;

    friend bool operator==(const EntityTuple&, const EntityTuple&) = default;
    std::vector<std::string> present() const;
};

/// verb = first verb (first auxiliary when there is none); subject = first
/// noun before it; object = first noun after it; modifier = first adverb or
/// adjective after it.
EntityTuple extract_entity_tuple(const NormalizedText& text, const PosLexicon& lexicon);

// ---- TF-IDF ----

struct SparseVector {
    std::size_t dim = 0;
    std::vector<std::pair<std::size_t, double>> entries;  // sorted by index

    double at(std::size_t index) const;
};

/// tf(term, doc) * (ln((1 + N) / (1 + df(term))) + 1) over the corpus vocabulary.
class TfidfVectorizer {
public:
    using Document = std::vector<std::string>;

    void fit(const std::vector<Document>& corpus);
    SparseVector transform(const Document& doc) const;

    std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
    std::optional<std::size_t> index(const std::string& term) const;
    double idf(const std::string& term) const;

private:
    std::map<std::string, std::size_t, std::less<>> vocabulary_;
    std::vector<double> idf_;
};

SparseVector tfidf_features(const std::vector<TfidfVectorizer::Document>& corpus,
                            const TfidfVectorizer::Document& doc);

// Whitespace split.
std::vector<std::string> split_words(std::string_view text);

}  // namespace fuselab
