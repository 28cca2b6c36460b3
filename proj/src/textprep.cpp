#include "fuselab/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "fuselab/errors.hpp"

namespace fuselab {

// ---- lexicons ----

namespace {

template <class F>
void read_pairs(const std::filesystem::path& path, F&& on_pair) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon file " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw ParseError(line_no, path.string() + ": expected two tab-separated fields");
        on_pair(line.substr(0, tab), line.substr(tab + 1), line_no);
    }
}

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_high(char c) { return static_cast<unsigned char>(c) >= 0x80; }
bool is_alnum_like(char c) { return is_ascii_alpha(c) || is_ascii_digit(c) || is_high(c); }
bool is_word_char(char c) { return is_alnum_like(c) || c == '_'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

bool all_ascii_alpha(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return is_ascii_alpha(c); });
}

}  // namespace

Lexicon Lexicon::load(const std::filesystem::path& words, const std::filesystem::path& emoticons,
                      const std::filesystem::path& typos) {
    Lexicon lex;
    read_pairs(words, [&](const std::string& w, const std::string& f, std::size_t line) {
        char* end = nullptr;
        const unsigned long long n = std::strtoull(f.c_str(), &end, 10);
        if (end == f.c_str() || *end != '\0') throw ParseError(line, words.string() + ": frequency is not an integer");
        lex.add_word(lower(w), n);
    });
    read_pairs(emoticons, [&](const std::string& e, const std::string& name, std::size_t) { lex.add_emoticon(e, name); });
    read_pairs(typos, [&](const std::string& t, const std::string& c, std::size_t) { lex.add_typo(lower(t), lower(c)); });
    return lex;
}

Lexicon Lexicon::load_dir(const std::filesystem::path& dir) {
    return load(dir / "words.tsv", dir / "emoticons.tsv", dir / "typos.tsv");
}

void Lexicon::add_word(const std::string& word, std::uint64_t count) {
    auto& c = counts_[word];
    total_ += count;
    c += count;
}

void Lexicon::add_emoticon(const std::string& emoticon, const std::string& name) {
    for (char c : name)
        if (!((c >= 'a' && c <= 'z') || c == '_'))
            throw ConfigError("emoticon name '" + name + "' must be lowercase letters or '_'");
    emoticons_[emoticon] = name;
    emoticon_names_.insert(name);
}

void Lexicon::add_typo(const std::string& typo, const std::string& correction) { typos_[typo] = correction; }

bool Lexicon::contains(std::string_view word) const { return counts_.find(std::string(word)) != counts_.end(); }

std::uint64_t Lexicon::count(std::string_view word) const {
    auto it = counts_.find(std::string(word));
    return it == counts_.end() ? 0 : it->second;
}

const std::string* Lexicon::emoticon_name(std::string_view emoticon) const {
    auto it = emoticons_.find(std::string(emoticon));
    return it == emoticons_.end() ? nullptr : &it->second;
}

bool Lexicon::is_emoticon_name(std::string_view name) const { return emoticon_names_.find(name) != emoticon_names_.end(); }

const std::string* Lexicon::typo_correction(std::string_view word) const {
    auto it = typos_.find(std::string(word));
    return it == typos_.end() ? nullptr : &it->second;
}

std::filesystem::path lexicon_dir() {
    if (const char* env = std::getenv("FUSELAB_LEXICON_DIR"); env && *env) return env;
    return FUSELAB_DEFAULT_LEXICON_DIR;
}

// ---- word-level repairs ----

namespace {

struct Run {
    std::size_t begin, length;
};

std::vector<Run> long_runs(const std::string& w) {
    std::vector<Run> runs;
    for (std::size_t i = 0; i < w.size();) {
        std::size_t j = i;
        while (j < w.size() && w[j] == w[i]) ++j;
        if (j - i >= 3 && is_ascii_alpha(w[i])) runs.push_back({i, j - i});
        i = j;
    }
    return runs;
}

std::string collapse_runs(const std::string& w, const std::vector<Run>& runs, const std::vector<std::size_t>& keep) {
    std::string out;
    std::size_t pos = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        out.append(w, pos, runs[r].begin - pos);
        out.append(keep[r], w[runs[r].begin]);
        pos = runs[r].begin + runs[r].length;
    }
    out.append(w, pos, std::string::npos);
    return out;
}

// Higher count wins, then the shorter word, then lexicographic order.
bool better_candidate(const std::string& a, std::uint64_t ca, const std::string& b, std::uint64_t cb) {
    if (ca != cb) return ca > cb;
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

}  // namespace

std::pair<std::string, bool> collapse_elongation(const std::string& word, const Lexicon& lexicon) {
    const auto runs = long_runs(word);
    if (runs.empty()) return {word, false};
    // Each run collapses to 2 or 1 characters; bounded at 2^8 combinations.
    const std::size_t n = std::min<std::size_t>(runs.size(), 8);
    std::string best;
    std::uint64_t best_count = 0;
    bool found = false;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::vector<std::size_t> keep(runs.size(), 1);
        for (std::size_t r = 0; r < n; ++r) keep[r] = (mask >> r) & 1 ? 2 : 1;
        std::string cand = collapse_runs(word, runs, keep);
        const auto c = lexicon.count(cand);
        if (!lexicon.contains(cand)) continue;
        if (!found || better_candidate(cand, c, best, best_count)) {
            best = std::move(cand);
            best_count = c;
            found = true;
        }
    }
    if (found) return {best, false};
    return {collapse_runs(word, runs, std::vector<std::size_t>(runs.size(), 1)), true};
}

std::optional<std::string> repair_typo(const std::string& word, const Lexicon& lexicon) {
    if (const std::string* fix = lexicon.typo_correction(word)) return *fix;
    if (word.size() < 4 || !all_ascii_alpha(word)) return std::nullopt;
    std::string best;
    std::uint64_t best_count = 0;
    bool found = false;
    auto consider = [&](const std::string& cand) {
        if (cand == word || !lexicon.contains(cand)) return;
        const auto c = lexicon.count(cand);
        if (!found || better_candidate(cand, c, best, best_count)) {
            best = cand;
            best_count = c;
            found = true;
        }
    };
    for (std::size_t i = 0; i < word.size(); ++i) {
        std::string del = word;
        del.erase(i, 1);
        consider(del);
        if (i + 1 < word.size()) {
            std::string tr = word;
            std::swap(tr[i], tr[i + 1]);
            consider(tr);
        }
        for (char c = 'a'; c <= 'z'; ++c) {
            std::string rep = word;
            rep[i] = c;
            consider(rep);
        }
    }
    for (std::size_t i = 0; i <= word.size(); ++i)
        for (char c = 'a'; c <= 'z'; ++c) {
            std::string ins = word;
            ins.insert(ins.begin() + static_cast<std::ptrdiff_t>(i), c);
            consider(ins);
        }
    if (!found) return std::nullopt;
    return best;
}

std::vector<std::string> segment_hashtag(std::string_view body, const Lexicon& lexicon) {
    std::vector<std::string> out;
    const std::string text = lower(body);
    // Underscores separate words explicitly.
    std::vector<std::string> parts;
    {
        std::string cur;
        for (char c : text) {
            if (c == '_') {
                if (!cur.empty()) parts.push_back(std::move(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) parts.push_back(std::move(cur));
    }
    constexpr std::size_t max_word = 24;
    constexpr std::size_t max_len = 80;
    const double log_total = std::log(static_cast<double>(std::max<std::uint64_t>(lexicon.total(), 1)));
    auto score = [&](const std::string& w) {
        const auto c = lexicon.count(w);
        if (c > 0) return std::log(static_cast<double>(c)) - log_total;
        // Unknown chunks cost ten times less per extra character.
        return std::log(10.0) - log_total - static_cast<double>(w.size()) * std::log(10.0);
    };
    for (const std::string& part : parts) {
        if (lexicon.contains(part) || part.size() > max_len || !std::all_of(part.begin(), part.end(), is_alnum_like)) {
            out.push_back(part);
            continue;
        }
        const std::size_t n = part.size();
        std::vector<double> best(n + 1, -std::numeric_limits<double>::infinity());
        std::vector<std::size_t> from(n + 1, 0);
        best[0] = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = i > max_word ? i - max_word : 0; j < i; ++j) {
                const double s = best[j] + score(part.substr(j, i - j));
                if (s > best[i]) {
                    best[i] = s;
                    from[i] = j;
                }
            }
        std::vector<std::string> words;
        for (std::size_t i = n; i > 0; i = from[i]) words.push_back(part.substr(from[i], i - from[i]));
        out.insert(out.end(), words.rbegin(), words.rend());
    }
    return out;
}

// ---- normalization ----

namespace {

enum class RawKind { tag, mention, hashtag, word, punct };

struct RawToken {
    RawKind kind;
    std::string text;                 // name / body / surface
    TokenTag tag = TokenTag::word;    // for RawKind::tag
};

bool is_closing_punct(std::string_view s) {
    return !s.empty() && std::string_view(".,!?;:)]}%").find(s.front()) != std::string_view::npos;
}

bool is_opening_punct(std::string_view s) {
    return !s.empty() && !is_closing_punct(s) && (s.back() == '(' || s.back() == '{');
}

// Matches "[name]" or "[/name]" at pos for the known tag names.
std::optional<std::pair<TokenTag, std::size_t>> match_tag(std::string_view chunk, std::size_t pos,
                                                          const Lexicon& lexicon, std::string& name_out) {
    if (chunk[pos] != '[') return std::nullopt;
    std::size_t i = pos + 1;
    const bool closing = i < chunk.size() && chunk[i] == '/';
    if (closing) ++i;
    const std::size_t start = i;
    while (i < chunk.size() && ((chunk[i] >= 'a' && chunk[i] <= 'z') || chunk[i] == '_')) ++i;
    if (i == start || i >= chunk.size() || chunk[i] != ']') return std::nullopt;
    const std::string_view name = chunk.substr(start, i - start);
    const std::size_t len = i + 1 - pos;
    if (name == "user") return std::pair{closing ? TokenTag::user_close : TokenTag::user_open, len};
    if (name == "hashtag") return std::pair{closing ? TokenTag::hashtag_close : TokenTag::hashtag_open, len};
    if (closing) return std::nullopt;
    if (name == "elongated") return std::pair{TokenTag::elongated, len};
    if (lexicon.is_emoticon_name(name)) {
        name_out = std::string(name);
        return std::pair{TokenTag::emoticon, len};
    }
    return std::nullopt;
}

// Longest emoticon starting at pos inside a chunk. Emoticons opening with a
// word character ("xD") only count as whole chunks.
std::size_t match_emoticon(std::string_view chunk, std::size_t pos, const Lexicon& lexicon, std::string& name_out) {
    if (is_word_char(chunk[pos])) return 0;
    for (std::size_t len = std::min<std::size_t>(chunk.size() - pos, 4); len >= 2; --len) {
        const std::size_t end = pos + len;
        if (end < chunk.size() && is_word_char(chunk[end]) && is_word_char(chunk[end - 1])) continue;
        if (const std::string* name = lexicon.emoticon_name(chunk.substr(pos, len))) {
            name_out = *name;
            return len;
        }
    }
    return 0;
}

std::size_t read_word(std::string_view chunk, std::size_t pos) {
    std::size_t i = pos;
    while (i < chunk.size()) {
        if (is_word_char(chunk[i])) {
            ++i;
        } else if (chunk[i] == '\'' && i > pos && i + 1 < chunk.size() && is_alnum_like(chunk[i - 1]) &&
                   is_alnum_like(chunk[i + 1])) {
            ++i;
        } else {
            break;
        }
    }
    return i;
}

void lex_chunk(std::string_view chunk, const Lexicon& lexicon, std::vector<RawToken>& out) {
    if (const std::string* name = lexicon.emoticon_name(chunk)) {
        out.push_back({RawKind::tag, *name, TokenTag::emoticon});
        return;
    }
    std::size_t pos = 0;
    const std::size_t n = chunk.size();
    auto starts_special = [&](std::size_t i) {
        std::string ignored;
        if (chunk[i] == '[' && match_tag(chunk, i, lexicon, ignored)) return true;
        if ((chunk[i] == '@' || chunk[i] == '#') && i + 1 < n && is_word_char(chunk[i + 1])) return true;
        if (match_emoticon(chunk, i, lexicon, ignored)) return true;
        return is_word_char(chunk[i]);
    };
    while (pos < n) {
        const char c = chunk[pos];
        std::string emoticon;
        if (c == '[') {
            if (auto m = match_tag(chunk, pos, lexicon, emoticon)) {
                out.push_back({RawKind::tag, emoticon, m->first});
                pos += m->second;
                continue;
            }
        }
        if (const std::size_t len = match_emoticon(chunk, pos, lexicon, emoticon)) {
            out.push_back({RawKind::tag, emoticon, TokenTag::emoticon});
            pos += len;
            continue;
        }
        if ((c == '@' || c == '#') && pos + 1 < n && is_word_char(chunk[pos + 1])) {
            const std::size_t end = read_word(chunk, pos + 1);
            out.push_back({c == '@' ? RawKind::mention : RawKind::hashtag, std::string(chunk.substr(pos + 1, end - pos - 1))});
            pos = end;
            if (c == '@') {
                // Address separators directly after a mention are dropped.
                std::size_t j = pos;
                while (j < n && (chunk[j] == ',' || chunk[j] == ':')) ++j;
                if (j > pos && (j == n || starts_special(j))) pos = j;
            }
            continue;
        }
        if (is_word_char(c)) {
            const std::size_t end = read_word(chunk, pos);
            out.push_back({RawKind::word, std::string(chunk.substr(pos, end - pos))});
            pos = end;
            continue;
        }
        std::size_t end = pos + 1;
        while (end < n && !starts_special(end)) ++end;
        out.push_back({RawKind::punct, std::string(chunk.substr(pos, end - pos))});
        pos = end;
    }
}

std::string tag_surface(TokenTag tag, const std::string& text) {
    switch (tag) {
        case TokenTag::user_open: return "[user]";
        case TokenTag::user_close: return "[/user]";
        case TokenTag::hashtag_open: return "[hashtag]";
        case TokenTag::hashtag_close: return "[/hashtag]";
        case TokenTag::elongated: return "[elongated]";
        case TokenTag::emoticon: return "[" + text + "]";
        default: return text;
    }
}

void push_word(std::vector<Token>& out, const std::string& raw, const Lexicon& lexicon) {
    std::string w = lower(raw);
    if (!all_ascii_alpha(w)) {
        out.push_back({std::move(w), TokenTag::word});
        return;
    }
    // Runs of three or more letters are elongations even when the raw form
    // is itself a listed word ("soooo").
    if (long_runs(w).empty()) {
        if (lexicon.contains(w)) {
            out.push_back({std::move(w), TokenTag::word});
        } else if (auto fix = repair_typo(w, lexicon)) {
            out.push_back({std::move(*fix), TokenTag::word});
        } else {
            out.push_back({std::move(w), TokenTag::word});
        }
        return;
    }
    auto [collapsed, marker] = collapse_elongation(w, lexicon);
    if (!marker) {
        out.push_back({std::move(collapsed), TokenTag::word});
        return;
    }
    if (auto fix = repair_typo(collapsed, lexicon)) collapsed = std::move(*fix);
    out.push_back({std::move(collapsed), TokenTag::word});
    if (marker) out.push_back({"[elongated]", TokenTag::elongated});
}

}  // namespace

NormalizedText normalize(std::string_view raw, const Lexicon& lexicon) {
    std::vector<RawToken> toks;
    for (std::size_t i = 0; i < raw.size();) {
        while (i < raw.size() && is_space(raw[i])) ++i;
        std::size_t j = i;
        while (j < raw.size() && !is_space(raw[j])) ++j;
        if (j > i) lex_chunk(raw.substr(i, j - i), lexicon, toks);
        i = j;
    }

    // Pair span tags; spans do not nest and unmatched tags are dropped.
    std::vector<bool> keep(toks.size(), true);
    std::vector<int> span_role(toks.size(), 0);  // 1 = inside a matched span
    {
        constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
        std::size_t open = none;
        TokenTag open_tag = TokenTag::word;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            if (toks[i].kind != RawKind::tag) continue;
            const TokenTag t = toks[i].tag;
            if (t == TokenTag::user_open || t == TokenTag::hashtag_open) {
                if (open != none) keep[i] = false;
                else {
                    open = i;
                    open_tag = t;
                }
            } else if (t == TokenTag::user_close || t == TokenTag::hashtag_close) {
                const TokenTag want = t == TokenTag::user_close ? TokenTag::user_open : TokenTag::hashtag_open;
                if (open != none && open_tag == want) {
                    for (std::size_t k = open + 1; k < i; ++k) span_role[k] = 1;
                    open = none;
                } else {
                    keep[i] = false;
                }
            }
        }
        if (open != none) keep[open] = false;
    }

    NormalizedText result;
    result.original = std::string(raw);
    auto& out = result.tokens;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!keep[i]) continue;
        const RawToken& t = toks[i];
        if (span_role[i]) {
            switch (t.kind) {
                case RawKind::tag: out.push_back({tag_surface(t.tag, t.text), t.tag}); break;
                case RawKind::mention: out.push_back({"@" + lower(t.text), TokenTag::word}); break;
                case RawKind::hashtag: out.push_back({"#" + lower(t.text), TokenTag::word}); break;
                case RawKind::word: out.push_back({lower(t.text), TokenTag::word}); break;
                case RawKind::punct: out.push_back({t.text, TokenTag::punct}); break;
            }
            continue;
        }
        switch (t.kind) {
            case RawKind::tag: out.push_back({tag_surface(t.tag, t.text), t.tag}); break;
            case RawKind::mention:
                out.push_back({"[user]", TokenTag::user_open});
                out.push_back({lower(t.text), TokenTag::word});
                out.push_back({"[/user]", TokenTag::user_close});
                break;
            case RawKind::hashtag:
                out.push_back({"[hashtag]", TokenTag::hashtag_open});
                for (auto& w : segment_hashtag(t.text, lexicon)) out.push_back({std::move(w), TokenTag::word});
                out.push_back({"[/hashtag]", TokenTag::hashtag_close});
                break;
            case RawKind::word: push_word(out, t.text, lexicon); break;
            case RawKind::punct: out.push_back({t.text, TokenTag::punct}); break;
        }
    }
    return result;
}

std::string NormalizedText::str() const {
    // Punctuation never glues to punctuation, so rendering cannot form new
    // emoticons or tags.
    std::string out;
    bool glue_next = false;
    bool prev_punct = false;
    for (const Token& t : tokens) {
        const bool punct = t.tag == TokenTag::punct;
        const bool attach = punct && !prev_punct && is_closing_punct(t.text);
        if (!out.empty() && !(glue_next && !punct) && !attach) out += ' ';
        out += t.text;
        glue_next = punct && is_opening_punct(t.text);
        prev_punct = punct;
    }
    return out;
}

std::vector<std::string> NormalizedText::surfaces() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const Token& t : tokens) out.push_back(t.text);
    return out;
}

// ---- part of speech ----

std::string to_string(PosTag tag) {
    switch (tag) {
        case PosTag::noun: return "NOUN";
        case PosTag::verb: return "VERB";
        case PosTag::aux: return "AUX";
        case PosTag::adj: return "ADJ";
        case PosTag::adv: return "ADV";
        case PosTag::det: return "DET";
        case PosTag::pron: return "PRON";
        case PosTag::adp: return "ADP";
        case PosTag::conj: return "CONJ";
        case PosTag::intj: return "INTJ";
        case PosTag::num: return "NUM";
        case PosTag::other: return "X";
    }
    return "X";
}

namespace {

PosTag pos_from_string(const std::string& s, std::size_t line) {
    static const std::pair<const char*, PosTag> table[] = {
        {"NOUN", PosTag::noun}, {"VERB", PosTag::verb}, {"AUX", PosTag::aux},   {"ADJ", PosTag::adj},
        {"ADV", PosTag::adv},   {"DET", PosTag::det},   {"PRON", PosTag::pron}, {"ADP", PosTag::adp},
        {"CONJ", PosTag::conj}, {"INTJ", PosTag::intj}, {"NUM", PosTag::num},   {"X", PosTag::other}};
    for (const auto& [name, tag] : table)
        if (s == name) return tag;
    throw ParseError(line, "unknown part-of-speech tag '" + s + "'");
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
    PosLexicon lex;
    read_pairs(path, [&](const std::string& w, const std::string& t, std::size_t line) {
        lex.add(lower(w), pos_from_string(t, line));
    });
    return lex;
}

std::optional<PosTag> PosLexicon::lookup(std::string_view word) const {
    auto it = tags_.find(word);
    if (it == tags_.end()) return std::nullopt;
    return it->second;
}

std::vector<TaggedWord> pos_tag(const NormalizedText& text, const PosLexicon& lexicon) {
    std::vector<TaggedWord> out;
    bool in_user = false;
    for (std::size_t i = 0; i < text.tokens.size(); ++i) {
        const Token& tok = text.tokens[i];
        if (tok.tag == TokenTag::user_open) in_user = true;
        if (tok.tag == TokenTag::user_close) in_user = false;
        if (tok.tag != TokenTag::word) continue;
        const std::string& w = tok.text;
        PosTag tag;
        if (in_user) {
            tag = PosTag::noun;
        } else if (auto known = lexicon.lookup(w)) {
            tag = *known;
        } else if (std::all_of(w.begin(), w.end(), [](char c) { return is_ascii_digit(c) || c == '.' || c == ','; })) {
            tag = PosTag::num;
        } else if (ends_with(w, "ly")) {
            tag = PosTag::adv;
        } else if (ends_with(w, "ed") || ends_with(w, "ing")) {
            tag = PosTag::verb;
        } else if (ends_with(w, "s") && !out.empty() && out.back().tag == PosTag::pron) {
            tag = PosTag::verb;
        } else if (ends_with(w, "ous") || ends_with(w, "ful") || ends_with(w, "ive") || ends_with(w, "able") ||
                   ends_with(w, "ible") || ends_with(w, "less") || ends_with(w, "ic")) {
            tag = PosTag::adj;
        } else {
            tag = PosTag::noun;
        }
        out.push_back({w, tag, i});
    }
    return out;
}

std::vector<std::string> EntityTuple::present() const {
    std::vector<std::string> out;
    for (const auto* slot : {&subject, &object, &verb, &modifier})
        if (*slot) out.push_back(**slot);
    return out;
}

EntityTuple extract_entity_tuple(const NormalizedText& text, const PosLexicon& lexicon) {
    const auto words = pos_tag(text, lexicon);
    EntityTuple tuple;
    std::optional<std::size_t> verb_at;
    for (std::size_t i = 0; i < words.size() && !verb_at; ++i)
        if (words[i].tag == PosTag::verb) verb_at = i;
    for (std::size_t i = 0; i < words.size() && !verb_at; ++i)
        if (words[i].tag == PosTag::aux) verb_at = i;
    if (!verb_at) return tuple;
    tuple.verb = words[*verb_at].text;
    for (std::size_t i = 0; i < *verb_at; ++i)
        if (words[i].tag == PosTag::noun) {
            tuple.subject = words[i].text;
            break;
        }
    for (std::size_t i = *verb_at + 1; i < words.size(); ++i)
        if (words[i].tag == PosTag::noun) {
            tuple.object = words[i].text;
            break;
        }
    for (std::size_t i = *verb_at + 1; i < words.size(); ++i)
        if (words[i].tag == PosTag::adv || words[i].tag == PosTag::adj) {
            tuple.modifier = words[i].text;
            break;
        }
    return tuple;
}

// ---- TF-IDF ----

double SparseVector::at(std::size_t index) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const auto& e, std::size_t i) { return e.first < i; });
    return it != entries.end() && it->first == index ? it->second : 0.0;
}

void TfidfVectorizer::fit(const std::vector<Document>& corpus) {
    if (corpus.empty()) throw ConfigError("TF-IDF corpus is empty");
    std::map<std::string, std::size_t, std::less<>> df;
    for (const Document& doc : corpus) {
        std::set<std::string_view> seen(doc.begin(), doc.end());
        for (auto term : seen) ++df[std::string(term)];
    }
    if (df.empty()) throw ConfigError("TF-IDF vocabulary is empty");
    vocabulary_.clear();
    idf_.clear();
    const double n = static_cast<double>(corpus.size());
    for (const auto& [term, count] : df) {
        vocabulary_.emplace(term, vocabulary_.size());
        idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
}

SparseVector TfidfVectorizer::transform(const Document& doc) const {
    if (vocabulary_.empty()) throw ConfigError("TF-IDF vectorizer is not fitted");
    std::map<std::size_t, double> tf;
    for (const auto& term : doc)
        if (auto it = vocabulary_.find(term); it != vocabulary_.end()) tf[it->second] += 1.0;
    SparseVector v;
    v.dim = vocabulary_.size();
    for (const auto& [index, count] : tf) v.entries.emplace_back(index, count * idf_[index]);
    return v;
}

std::optional<std::size_t> TfidfVectorizer::index(const std::string& term) const {
    auto it = vocabulary_.find(term);
    if (it == vocabulary_.end()) return std::nullopt;
    return it->second;
}

double TfidfVectorizer::idf(const std::string& term) const {
    auto i = index(term);
    if (!i) throw InputError("term '" + term + "' is not in the TF-IDF vocabulary");
    return idf_[*i];
}

SparseVector tfidf_features(const std::vector<TfidfVectorizer::Document>& corpus, const TfidfVectorizer::Document& doc) {
    TfidfVectorizer v;
    v.fit(corpus);
    return v.transform(doc);
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

}  // namespace fuselab
