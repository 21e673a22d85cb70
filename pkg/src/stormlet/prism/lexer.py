"""Hand-written lexer shared by the program and property parsers."""

from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = {
    "dtmc", "ctmc", "mdp",
    "const", "int", "double", "bool",
    "module", "endmodule", "init",
    "label", "formula",
    "rewards", "endrewards",
    "true", "false",
    "min", "max", "floor", "ceil", "pow", "mod",
}

# longest first so multi-character symbols win
SYMBOLS = [
    "->", "..", "||", "!=", "<=", ">=",
    "[", "]", "(", ")", "{", "}", ";", ":", "'", "=", "<", ">",
    "+", "-", "*", "/", "&", "|", "!", ",", "?",
]


@dataclass
class Token:
    kind: str  # keyword/symbol text, or IDENT / INT / DOUBLE / STRING / EOF
    value: object
    line: int
    column: int

    def __repr__(self):
        return f"Token({self.kind!r}, {self.value!r}, {self.line}:{self.column})"


def tokenize(text):
    """Tokenize source text; `//` comments run to end of line."""
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            is_double = False
            if j < n and text[j] == "." and not text.startswith("..", j):
                is_double = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_double = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            word = text[i:j]
            if is_double:
                tokens.append(Token("DOUBLE", word, start_line, start_col))
            else:
                tokens.append(Token("INT", int(word), start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                raise ParseError("unterminated string literal", line=start_line, column=start_col)
            tokens.append(Token("STRING", text[i + 1 : j], start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, start_line, start_col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unknown character {ch!r}", line=start_line, column=start_col)
    tokens.append(Token("EOF", None, line, col))
    return tokens
