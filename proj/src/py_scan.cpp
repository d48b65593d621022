#include "py_scan.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace malscan::py {

namespace {

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_cont(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(const std::string& word) {
    if (word.empty() || word.size() > 2) return false;
    for (char c : word) {
        const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (l != 'r' && l != 'b' && l != 'u' && l != 'f') return false;
    }
    return true;
}

bool prefix_is_fstring(const std::string& word) {
    for (char c : word) {
        if (std::tolower(static_cast<unsigned char>(c)) == 'f') return true;
    }
    return false;
}

}  // namespace

bool is_python_keyword(const std::string& word) {
    static const std::unordered_set<std::string> kKeywords = {
        "False", "None",   "True",  "and",    "as",     "assert", "async",  "await",
        "break", "class",  "continue", "def", "del",    "elif",   "else",   "except",
        "finally", "for",  "from",  "global", "if",     "import", "in",     "is",
        "lambda", "nonlocal", "not", "or",    "pass",   "raise",  "return", "try",
        "while", "with",   "yield"};
    return kKeywords.contains(word);
}

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> tokens;
    std::vector<char> bracket_stack;
    std::size_t i = 0;
    int line = 1;
    int col = 0;

    auto advance = [&](std::size_t count) {
        for (std::size_t k = 0; k < count && i < text.size(); ++k) {
            if (text[i] == '\n') {
                ++line;
                col = 0;
            } else if (text[i] == '\t') {
                col = (col / 8 + 1) * 8;
            } else {
                ++col;
            }
            ++i;
        }
    };

    auto push = [&](TokenKind kind, std::string tok_text, int tok_line, int tok_col,
                    std::size_t tok_offset) {
        Token t;
        t.kind = kind;
        t.text = std::move(tok_text);
        t.line = tok_line;
        t.col = tok_col;
        t.offset = tok_offset;
        tokens.push_back(std::move(t));
    };

    // Consumes one string literal starting at the current quote. The prefix
    // has already been consumed by the caller.
    auto lex_string = [&](bool raw, bool fstring, int start_line) {
        const char quote = text[i];
        bool triple = i + 2 < text.size() && text[i + 1] == quote && text[i + 2] == quote;
        advance(triple ? 3 : 1);
        const std::size_t body_begin = i;
        while (i < text.size()) {
            const char c = text[i];
            if (c == '\\' && i + 1 < text.size()) {
                advance(2);  // raw strings still cannot end on an escaped quote
                continue;
            }
            if (!triple && c == '\n') break;  // unterminated single-quote string
            if (c == quote) {
                if (!triple) {
                    const std::size_t body_end = i;
                    advance(1);
                    return std::pair<std::size_t, std::size_t>{body_begin, body_end};
                }
                if (i + 2 < text.size() && text[i + 1] == quote && text[i + 2] == quote) {
                    const std::size_t body_end = i;
                    advance(3);
                    return std::pair<std::size_t, std::size_t>{body_begin, body_end};
                }
                // Lone quote inside a triple-quoted body.
            }
            advance(1);
        }
        (void)raw;
        (void)fstring;
        throw PySyntaxError{start_line, "unterminated string literal"};
    };

    while (i < text.size()) {
        const char c = text[i];

        if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < text.size() && text[i] != '\n') advance(1);
            continue;
        }
        if (c == '\\' && i + 1 < text.size() && (text[i + 1] == '\n' || text[i + 1] == '\r')) {
            advance(text[i + 1] == '\r' && i + 2 < text.size() && text[i + 2] == '\n' ? 3 : 2);
            continue;
        }
        if (c == '\n') {
            if (bracket_stack.empty()) {
                if (!tokens.empty() && tokens.back().kind != TokenKind::Newline) {
                    push(TokenKind::Newline, "\n", line, col, i);
                }
            }
            advance(1);
            continue;
        }

        const int tok_line = line;
        const int tok_col = col;
        const std::size_t tok_offset = i;

        if (ident_start(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < text.size() && ident_cont(static_cast<unsigned char>(text[j]))) ++j;
            std::string word = text.substr(i, j - i);
            if (is_string_prefix(word) && j < text.size() && (text[j] == '"' || text[j] == '\'')) {
                advance(word.size());
                const bool fstring = prefix_is_fstring(word);
                bool raw = false;
                for (char pc : word) {
                    if (std::tolower(static_cast<unsigned char>(pc)) == 'r') raw = true;
                }
                const auto [begin, end] = lex_string(raw, fstring, tok_line);
                Token t;
                t.kind = TokenKind::String;
                t.line = tok_line;
                t.col = tok_col;
                t.offset = tok_offset;
                t.is_fstring = fstring;
                t.body_begin = begin;
                t.body_end = end;
                tokens.push_back(std::move(t));
                continue;
            }
            advance(word.size());
            const TokenKind kind =
                is_python_keyword(word) ? TokenKind::Keyword : TokenKind::Ident;
            push(kind, std::move(word), tok_line, tok_col, tok_offset);
            continue;
        }

        if (c == '"' || c == '\'') {
            const auto [begin, end] = lex_string(false, false, tok_line);
            Token t;
            t.kind = TokenKind::String;
            t.line = tok_line;
            t.col = tok_col;
            t.offset = tok_offset;
            t.body_begin = begin;
            t.body_end = end;
            tokens.push_back(std::move(t));
            continue;
        }

        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            std::size_t j = i;
            bool seen_exp = false;
            while (j < text.size()) {
                const char d = text[j];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
                    seen_exp = std::tolower(static_cast<unsigned char>(d)) == 'e';
                    ++j;
                    continue;
                }
                if ((d == '+' || d == '-') && seen_exp) {  // exponent sign
                    seen_exp = false;
                    ++j;
                    continue;
                }
                break;
            }
            std::string num = text.substr(i, j - i);
            advance(num.size());
            push(TokenKind::Number, std::move(num), tok_line, tok_col, tok_offset);
            continue;
        }

        // Operator / punctuation, one byte at a time.
        if (c == '(' || c == '[' || c == '{') {
            bracket_stack.push_back(c);
        } else if (c == ')' || c == ']' || c == '}') {
            const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
            if (bracket_stack.empty() || bracket_stack.back() != open) {
                throw PySyntaxError{line, std::string("unmatched '") + c + "'"};
            }
            bracket_stack.pop_back();
        }
        push(TokenKind::Op, std::string(1, c), tok_line, tok_col, tok_offset);
        advance(1);
    }

    if (!bracket_stack.empty()) {
        throw PySyntaxError{line, "unclosed bracket at end of file"};
    }
    if (!tokens.empty() && tokens.back().kind != TokenKind::Newline) {
        push(TokenKind::Newline, "\n", line, col, i);
    }
    return tokens;
}

}  // namespace malscan::py
