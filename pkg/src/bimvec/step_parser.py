"""Parser for the ISO 10303-21 clear-text encoding that carries IFC models.

The parser is schema-agnostic: any entity type token is accepted and no
EXPRESS validation is attempted. It covers the full value grammar (integers,
reals, strings with ``''`` escapes, enumeration tokens, entity references,
typed values, nested aggregates, ``$`` and ``*`` markers) and reports
positioned errors for anything it cannot read. ``\\X\\``/``\\S\\`` control
directives inside strings are passed through verbatim.

Complex entity instances (``#id=(A(...) B(...));``) are not supported and
raise a positioned :class:`~bimvec.errors.StepSyntaxError`.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .errors import (
    DuplicateIdError,
    MalformedFileError,
    StepSyntaxError,
)

logger = logging.getLogger(__name__)

_TYPE_NAME_RE = re.compile(r"[A-Z0-9_]+")


# ---------------------------------------------------------------------------
# Value model
# ---------------------------------------------------------------------------

class Marker(enum.Enum):
    """Non-value attribute markers: ``*`` (derived in a subtype)."""

    DERIVED = "*"


DERIVED = Marker.DERIVED


@dataclass(frozen=True)
class EntityRef:
    """Reference to another entity instance (``#123``)."""

    entity_id: int

    def __post_init__(self):
        if self.entity_id <= 0:
            raise ValueError(f"entity id must be positive, got {self.entity_id}")


@dataclass(frozen=True)
class EnumToken:
    """Enumeration literal, the text between dots (``.T.`` -> ``T``)."""

    name: str


@dataclass(frozen=True)
class TypedValue:
    """A value wrapped in a defined-type constructor, e.g. ``IFCBOOLEAN(.T.)``."""

    type_name: str
    value: "StepValue"


# A parsed attribute value. ``None`` is the unset marker ``$``; aggregates
# are plain lists and may nest arbitrarily.
StepValue = Union[
    int, float, str, EntityRef, EnumToken, TypedValue, None, Marker, list
]


@dataclass(frozen=True)
class StepEntity:
    """One ``#id=TYPE(...)`` record from the DATA section."""

    id: int
    type_name: str
    attributes: list

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"entity id must be positive, got {self.id}")
        if not _TYPE_NAME_RE.fullmatch(self.type_name):
            raise ValueError(f"invalid entity type name {self.type_name!r}")


@dataclass
class StepModel:
    """Parsed STEP file: header records plus an id-indexed entity table."""

    header: dict[str, list] = field(default_factory=dict)
    entities: dict[int, StepEntity] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entities)

    def __contains__(self, entity_id: int) -> bool:
        return entity_id in self.entities

    def entity(self, entity_id: int) -> StepEntity:
        return self.entities[entity_id]

    def in_id_order(self) -> Iterator[StepEntity]:
        """Iterate entities in ascending id order regardless of file order."""
        for entity_id in sorted(self.entities):
            yield self.entities[entity_id]


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_KIND_EOF = "eof"
_KIND_KEYWORD = "keyword"
_KIND_STRING = "string"
_KIND_ENUM = "enum"
_KIND_INT = "int"
_KIND_REAL = "real"
_KIND_REF = "ref"
_KIND_PUNCT = "punct"  # one of ( ) , ; = $ *


@dataclass(frozen=True)
class _Token:
    kind: str
    value: object
    line: int
    column: int


class _Lexer:
    """Single-pass tokenizer with 1-based line/column tracking."""

    def __init__(self, text: str):
        self._text = text
        self._pos = 0
        self._line = 1
        self._col = 1

    def _error(self, message: str, line: int | None = None, col: int | None = None):
        raise StepSyntaxError(
            message, line if line is not None else self._line,
            col if col is not None else self._col,
        )

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self._pos >= len(self._text):
                return
            if self._text[self._pos] == "\n":
                self._line += 1
                self._col = 1
            else:
                self._col += 1
            self._pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self._pos + offset
        return self._text[i] if i < len(self._text) else ""

    def _skip_filler(self) -> None:
        while self._pos < len(self._text):
            ch = self._text[self._pos]
            if ch in " \t\r\n":
                self._advance()
            elif ch == "/" and self._peek(1) == "*":
                start_line, start_col = self._line, self._col
                self._advance(2)
                while self._pos < len(self._text):
                    if self._text[self._pos] == "*" and self._peek(1) == "/":
                        self._advance(2)
                        break
                    self._advance()
                else:
                    self._error("unterminated comment", start_line, start_col)
            else:
                return

    def next_token(self) -> _Token:
        self._skip_filler()
        line, col = self._line, self._col
        if self._pos >= len(self._text):
            return _Token(_KIND_EOF, None, line, col)
        ch = self._text[self._pos]

        if ch in "(),;=$*":
            self._advance()
            return _Token(_KIND_PUNCT, ch, line, col)

        if ch == "'":
            return self._lex_string(line, col)

        if ch == "#":
            self._advance()
            digits = self._take_while(str.isdigit)
            if not digits:
                self._error("expected digits after '#'", line, col)
            entity_id = int(digits)
            if entity_id <= 0:
                self._error("entity id must be positive", line, col)
            return _Token(_KIND_REF, entity_id, line, col)

        if ch == ".":
            self._advance()
            name = self._take_while(lambda c: c.isalnum() or c == "_")
            if not name or self._peek() != ".":
                self._error("malformed enumeration token", line, col)
            self._advance()
            return _Token(_KIND_ENUM, name.upper(), line, col)

        if ch.isdigit() or (ch in "+-" and self._peek(1).isdigit()):
            return self._lex_number(line, col)

        if ch.isalpha() or ch == "_":
            word = self._take_while(lambda c: c.isalnum() or c in "_-")
            return _Token(_KIND_KEYWORD, word.upper(), line, col)

        self._error(f"unexpected character {ch!r}", line, col)
        raise AssertionError("unreachable")

    def _take_while(self, predicate) -> str:
        start = self._pos
        while self._pos < len(self._text) and predicate(self._text[self._pos]):
            self._advance()
        return self._text[start:self._pos]

    def _lex_string(self, line: int, col: int) -> _Token:
        # '' decodes to a single quote; backslash control directives pass
        # through verbatim.
        self._advance()
        parts: list[str] = []
        while True:
            if self._pos >= len(self._text):
                self._error("unterminated string", line, col)
            ch = self._text[self._pos]
            if ch == "'":
                if self._peek(1) == "'":
                    parts.append("'")
                    self._advance(2)
                    continue
                self._advance()
                return _Token(_KIND_STRING, "".join(parts), line, col)
            parts.append(ch)
            self._advance()

    def _lex_number(self, line: int, col: int) -> _Token:
        start = self._pos
        if self._peek() in "+-":
            self._advance()
        self._take_while(str.isdigit)
        is_real = False
        if self._peek() == ".":
            is_real = True
            self._advance()
            self._take_while(str.isdigit)
        if self._peek() in "eE":
            is_real = True
            self._advance()
            if self._peek() in "+-":
                self._advance()
            exponent = self._take_while(str.isdigit)
            if not exponent:
                self._error("malformed real exponent", line, col)
        text = self._text[start:self._pos]
        if is_real:
            return _Token(_KIND_REAL, float(text), line, col)
        return _Token(_KIND_INT, int(text), line, col)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self._lexer = _Lexer(text)
        self._current = self._lexer.next_token()

    def _advance(self) -> _Token:
        token = self._current
        self._current = self._lexer.next_token()
        return token

    def _expect_punct(self, char: str) -> _Token:
        token = self._current
        if token.kind != _KIND_PUNCT or token.value != char:
            raise StepSyntaxError(
                f"expected {char!r}, found {self._describe(token)}",
                token.line, token.column,
            )
        return self._advance()

    def _expect_keyword(self, word: str) -> _Token:
        token = self._current
        if token.kind != _KIND_KEYWORD or token.value != word:
            raise StepSyntaxError(
                f"expected {word}, found {self._describe(token)}",
                token.line, token.column,
            )
        return self._advance()

    @staticmethod
    def _describe(token: _Token) -> str:
        if token.kind == _KIND_EOF:
            return "end of input"
        return repr(token.value)

    def parse_file(self) -> StepModel:
        first = self._current
        if first.kind != _KIND_KEYWORD or first.value != "ISO-10303-21":
            raise MalformedFileError(
                "missing ISO-10303-21 sentinel at start of file"
            )
        self._advance()
        self._expect_punct(";")

        model = StepModel()
        saw_data = False
        while True:
            token = self._current
            if token.kind == _KIND_KEYWORD and token.value == "HEADER":
                self._advance()
                self._expect_punct(";")
                self._parse_header_section(model)
            elif token.kind == _KIND_KEYWORD and token.value == "DATA":
                self._advance()
                self._expect_punct(";")
                self._parse_data_section(model)
                saw_data = True
            elif token.kind == _KIND_KEYWORD and token.value == "END-ISO-10303-21":
                self._advance()
                self._expect_punct(";")
                break
            elif token.kind == _KIND_EOF:
                raise MalformedFileError("missing END-ISO-10303-21 sentinel")
            else:
                raise StepSyntaxError(
                    f"unexpected {self._describe(token)} at file level",
                    token.line, token.column,
                )
        if not saw_data:
            raise MalformedFileError("file has no DATA section")
        trailing = self._current
        if trailing.kind != _KIND_EOF:
            raise StepSyntaxError(
                f"unexpected {self._describe(trailing)} after end sentinel",
                trailing.line, trailing.column,
            )
        return model

    def _parse_header_section(self, model: StepModel) -> None:
        while True:
            token = self._current
            if token.kind == _KIND_KEYWORD and token.value == "ENDSEC":
                self._advance()
                self._expect_punct(";")
                return
            if token.kind != _KIND_KEYWORD:
                raise StepSyntaxError(
                    f"expected header record, found {self._describe(token)}",
                    token.line, token.column,
                )
            keyword = self._advance().value
            self._expect_punct("(")
            values = self._parse_value_list()
            self._expect_punct(")")
            self._expect_punct(";")
            model.header[str(keyword)] = values

    def _parse_data_section(self, model: StepModel) -> None:
        while True:
            token = self._current
            if token.kind == _KIND_KEYWORD and token.value == "ENDSEC":
                self._advance()
                self._expect_punct(";")
                return
            if token.kind != _KIND_REF:
                raise StepSyntaxError(
                    f"expected '#' instance record, found {self._describe(token)}",
                    token.line, token.column,
                )
            ref_token = self._advance()
            entity_id = int(ref_token.value)
            self._expect_punct("=")
            type_token = self._current
            if type_token.kind == _KIND_PUNCT and type_token.value == "(":
                raise StepSyntaxError(
                    "complex entity instances are not supported",
                    type_token.line, type_token.column,
                )
            if type_token.kind != _KIND_KEYWORD:
                raise StepSyntaxError(
                    f"expected entity type, found {self._describe(type_token)}",
                    type_token.line, type_token.column,
                )
            type_name = str(self._advance().value)
            if not _TYPE_NAME_RE.fullmatch(type_name):
                raise StepSyntaxError(
                    f"invalid entity type name {type_name!r}",
                    type_token.line, type_token.column,
                )
            self._expect_punct("(")
            attributes = self._parse_value_list()
            self._expect_punct(")")
            self._expect_punct(";")
            if entity_id in model.entities:
                raise DuplicateIdError(
                    f"duplicate entity id #{entity_id} "
                    f"(line {ref_token.line}, column {ref_token.column})"
                )
            model.entities[entity_id] = StepEntity(entity_id, type_name, attributes)

    def _parse_value_list(self) -> list:
        values: list = []
        token = self._current
        if token.kind == _KIND_PUNCT and token.value == ")":
            return values
        while True:
            values.append(self._parse_value())
            token = self._current
            if token.kind == _KIND_PUNCT and token.value == ",":
                self._advance()
                continue
            return values

    def _parse_value(self) -> StepValue:
        token = self._current
        if token.kind == _KIND_INT:
            self._advance()
            return int(token.value)
        if token.kind == _KIND_REAL:
            self._advance()
            return float(token.value)
        if token.kind == _KIND_STRING:
            self._advance()
            return str(token.value)
        if token.kind == _KIND_ENUM:
            self._advance()
            return EnumToken(str(token.value))
        if token.kind == _KIND_REF:
            self._advance()
            return EntityRef(int(token.value))
        if token.kind == _KIND_PUNCT and token.value == "$":
            self._advance()
            return None
        if token.kind == _KIND_PUNCT and token.value == "*":
            self._advance()
            return DERIVED
        if token.kind == _KIND_PUNCT and token.value == "(":
            self._advance()
            values = self._parse_value_list()
            self._expect_punct(")")
            return values
        if token.kind == _KIND_KEYWORD:
            type_name = str(self._advance().value)
            self._expect_punct("(")
            inner = self._parse_value()
            self._expect_punct(")")
            return TypedValue(type_name, inner)
        raise StepSyntaxError(
            f"expected a value, found {self._describe(token)}",
            token.line, token.column,
        )


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def parse_step(source: bytes | str) -> StepModel:
    """Parse a complete STEP file into a :class:`StepModel`.

    ``source`` is the file content as bytes (decoded as UTF-8) or text.
    Raises :class:`MalformedFileError` for missing sentinels or sections,
    :class:`StepSyntaxError` with a 1-based line/column for lexical and
    grammatical problems, and :class:`DuplicateIdError` when an id repeats.
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFileError(f"file is not valid UTF-8: {exc}") from None
    return _Parser(source).parse_file()


def parse_step_file(path) -> StepModel:
    """Read and parse a ``.ifc`` file from disk."""
    with open(path, "rb") as fp:
        return parse_step(fp.read())


def validate_references(model: StepModel) -> list[tuple[int, int]]:
    """Return every dangling (referencing id, missing id) pair.

    Pairs are unique and sorted ascending; an empty list means the model is
    reference-closed.
    """
    dangling: set[tuple[int, int]] = set()
    for entity in model.in_id_order():
        for ref_id in _iter_reference_ids(entity.attributes):
            if ref_id not in model.entities:
                dangling.add((entity.id, ref_id))
    return sorted(dangling)


def _iter_reference_ids(value: StepValue) -> Iterator[int]:
    if isinstance(value, EntityRef):
        yield value.entity_id
    elif isinstance(value, list):
        for item in value:
            yield from _iter_reference_ids(item)
    elif isinstance(value, TypedValue):
        yield from _iter_reference_ids(value.value)


def entities_of_type(model: StepModel, type_name: str) -> list[StepEntity]:
    """All entities whose type matches ``type_name`` (case-insensitive),
    in ascending id order. Unknown types yield an empty list."""
    wanted = type_name.upper()
    return [e for e in model.in_id_order() if e.type_name == wanted]


# ---------------------------------------------------------------------------
# Serialization (round-trip support)
# ---------------------------------------------------------------------------

def serialize_step(model: StepModel) -> str:
    """Render a model back to STEP text.

    Re-parsing the output yields an entity table equal field-for-field to
    the input model (strings compared after unescaping).
    """
    lines = ["ISO-10303-21;", "HEADER;"]
    for keyword, values in model.header.items():
        lines.append(f"{keyword}({_format_values(values)});")
    lines.append("ENDSEC;")
    lines.append("DATA;")
    for entity in model.in_id_order():
        lines.append(
            f"#{entity.id}={entity.type_name}({_format_values(entity.attributes)});"
        )
    lines.append("ENDSEC;")
    lines.append("END-ISO-10303-21;")
    return "\n".join(lines) + "\n"


def _format_values(values: list) -> str:
    return ",".join(_format_value(v) for v in values)


def _format_value(value: StepValue) -> str:
    if value is None:
        return "$"
    if value is DERIVED:
        return "*"
    if isinstance(value, bool):
        # bools never come out of the parser; guard against accidental input
        raise TypeError("boolean is not a STEP value; use EnumToken('T'/'F')")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _format_real(value)
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    if isinstance(value, EnumToken):
        return f".{value.name}."
    if isinstance(value, EntityRef):
        return f"#{value.entity_id}"
    if isinstance(value, TypedValue):
        return f"{value.type_name}({_format_value(value.value)})"
    if isinstance(value, list):
        return f"({_format_values(value)})"
    raise TypeError(f"cannot serialize {type(value).__name__} as a STEP value")


def _format_real(value: float) -> str:
    text = repr(value)
    # Guarantee the literal re-parses as a real, not an integer.
    if "." not in text and "e" not in text and "E" not in text:
        text += "."
    return text
