#pragma once

// Internal lexical scanner for Python source. Produces the token stream the
// call-site extractor walks; not part of the public library surface.

#include <cstddef>
#include <string>
#include <vector>

namespace malscan::py {

enum class TokenKind { Ident, Keyword, Number, String, Op, Newline };

struct Token {
    TokenKind kind;
    std::string text;   // ident/keyword/op text; empty for strings
    int line = 1;       // 1-based
    int col = 0;        // 0-based, tab stops of 8
    std::size_t offset = 0;

    // String extras
    bool is_fstring = false;
    std::size_t body_begin = 0;  // byte range of the quoted body
    std::size_t body_end = 0;
};

struct PySyntaxError {
    int line;
    std::string message;
};

// Throws PySyntaxError on unterminated strings and unbalanced brackets.
// Newline tokens are emitted only at bracket depth zero; comments, blank
// lines and explicit '\' continuations never produce tokens.
std::vector<Token> tokenize(const std::string& text);

bool is_python_keyword(const std::string& word);

}  // namespace malscan::py
