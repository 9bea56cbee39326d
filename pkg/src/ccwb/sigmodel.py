"""C function types at the granularity calling conventions care about, and
weighted corpora of them."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import CorpusError, SignatureSyntaxError, UnknownTypeError

KINDS = ("void", "integer", "pointer", "float", "bool")


@dataclass(frozen=True, order=True)
class TypeClass:
    width: int
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown type kind {self.kind!r}")
        expected = {"void": (0,), "float": (32,), "bool": (8,), "pointer": (16,), "integer": (8, 16, 32)}
        if self.width not in expected[self.kind]:
            raise ValueError(f"{self.kind} cannot have width {self.width}")

    @property
    def is_void(self) -> bool:
        return self.kind == "void"

    def __str__(self) -> str:
        return _CANONICAL_NAME[self]


VOID = TypeClass(0, "void")
BOOL = TypeClass(8, "bool")
INT8 = TypeClass(8, "integer")
INT16 = TypeClass(16, "integer")
INT32 = TypeClass(32, "integer")
FLOAT32 = TypeClass(32, "float")
PTR = TypeClass(16, "pointer")

_CANONICAL_NAME = {VOID: "void", BOOL: "bool", INT8: "i8", INT16: "i16", INT32: "i32", FLOAT32: "f32", PTR: "ptr"}

# Signedness does not change where a value is passed, so it is dropped here.
TYPE_NAMES = {
    "void": VOID,
    "bool": BOOL,
    "char": INT8,
    "signed char": INT8,
    "unsigned char": INT8,
    "i8": INT8,
    "u8": INT8,
    "i16": INT16,
    "u16": INT16,
    "i32": INT32,
    "u32": INT32,
    "f32": FLOAT32,
    "ptr": PTR,
}

_REJECTED = {
    "struct": "aggregates are not supported",
    "union": "aggregates are not supported",
    "i64": "64-bit types are not supported",
    "u64": "64-bit types are not supported",
    "f64": "64-bit types are not supported",
    "double": "64-bit types are not supported",
}


@dataclass(frozen=True)
class FunctionSignature:
    return_type: TypeClass
    params: tuple[TypeClass, ...] = ()
    varargs: bool = False

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if any(p.is_void for p in self.params):
            raise ValueError("parameters cannot be void")
        if self.varargs and not self.params:
            raise ValueError("a varargs signature needs at least one named parameter")

    def __str__(self) -> str:
        return format_signature(self)

    @property
    def sort_key(self) -> tuple:
        return (self.return_type, self.params, self.varargs)


def format_signature(sig: FunctionSignature, name: str = "f") -> str:
    if not sig.params:
        args = "void"
    else:
        args = ", ".join(str(p) for p in sig.params)
        if sig.varargs:
            args += ", ..."
    return f"{sig.return_type} {name}({args})"


_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<ellipsis>\.\.\.)|(?P<punct>[(),*]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise SignatureSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        start = m.start(m.lastgroup)
        toks.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value:
            shown = repr(val) if kind != "end" else "end of input"
            raise SignatureSyntaxError(f"expected {value!r}, found {shown}", pos, self.text)

    def type(self) -> TypeClass:
        kind, val, pos = self.next()
        if kind != "ident":
            shown = repr(val) if kind != "end" else "end of input"
            raise SignatureSyntaxError(f"expected a type, found {shown}", pos, self.text)
        if val in ("signed", "unsigned"):
            k2, v2, _ = self.peek()
            if k2 == "ident" and v2 == "char":
                self.next()
                val = f"{val} char"
        if val in _REJECTED:
            raise UnknownTypeError(f"type {val!r}: {_REJECTED[val]}", pos, self.text)
        if val not in TYPE_NAMES:
            raise UnknownTypeError(f"unknown type {val!r}", pos, self.text)
        k2, v2, p2 = self.peek()
        if v2 == "*":
            raise SignatureSyntaxError("write pointer types as 'ptr'", p2, self.text)
        return TYPE_NAMES[val]

    def signature(self) -> FunctionSignature:
        ret = self.type()
        kind, _, pos = self.next()
        if kind != "ident":
            raise SignatureSyntaxError("expected a function name", pos, self.text)
        self.expect("(")
        params: list[TypeClass] = []
        varargs = False
        k, v, pos = self.peek()
        if v == "void" and self.toks[self.i + 1][1] == ")":
            self.next()
        else:
            while True:
                k, v, pos = self.peek()
                if k == "ellipsis":
                    if not params:
                        raise SignatureSyntaxError("'...' needs a named parameter before it", pos, self.text)
                    self.next()
                    varargs = True
                    break
                t = self.type()
                if t.is_void:
                    raise SignatureSyntaxError("'void' must be the only parameter", pos, self.text)
                params.append(t)
                if self.peek()[1] != ",":
                    break
                self.next()
        self.expect(")")
        kind, val, pos = self.next()
        if kind != "end":
            raise SignatureSyntaxError(f"trailing input {val!r}", pos, self.text)
        return FunctionSignature(ret, tuple(params), varargs)


def parse_signature(text: str) -> FunctionSignature:
    """Parse e.g. ``"i16 f(ptr, ...)"`` into its canonical signature."""
    return _Parser(text).signature()


@dataclass(frozen=True)
class CorpusEntry:
    signature: FunctionSignature
    call_weight: int
    def_weight: int


@dataclass(frozen=True)
class Corpus:
    entries: tuple[CorpusEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not any(e.call_weight > 0 for e in self.entries):
            raise CorpusError("corpus has no entry with a positive call weight")
        seen = set()
        for e in self.entries:
            if e.call_weight < 0 or e.def_weight < 0:
                raise CorpusError(f"negative weight for {e.signature}")
            if e.signature in seen:
                raise CorpusError(f"duplicate signature {e.signature}")
            seen.add(e.signature)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def signatures(self) -> tuple[FunctionSignature, ...]:
        return tuple(e.signature for e in self.entries)

    def weights(self) -> dict[FunctionSignature, tuple[int, int]]:
        return {e.signature: (e.call_weight, e.def_weight) for e in self.entries}

    def entry(self, sig: FunctionSignature) -> CorpusEntry:
        for e in self.entries:
            if e.signature == sig:
                return e
        raise KeyError(str(sig))

    def scaled(self, k: int) -> Corpus:
        return Corpus(tuple(CorpusEntry(e.signature, e.call_weight * k, e.def_weight * k) for e in self.entries))


def make_corpus(records: Iterable[tuple[FunctionSignature, int, int]]) -> Corpus:
    """Build a corpus, merging repeated signatures by summing their weights."""
    merged: dict[FunctionSignature, list[int]] = {}
    for sig, cw, dw in records:
        if cw < 0 or dw < 0:
            raise CorpusError(f"negative weight for {sig}")
        slot = merged.setdefault(sig, [0, 0])
        slot[0] += cw
        slot[1] += dw
    return Corpus(tuple(CorpusEntry(s, cw, dw) for s, (cw, dw) in merged.items()))


def parse_corpus(text: str, source: str = "<corpus>") -> Corpus:
    """Parse ``<call_weight> <def_weight> <signature>`` records, one per line."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) < 3:
            raise CorpusError(f"{source}:{lineno}: expected '<call_weight> <def_weight> <signature>'")
        try:
            cw, dw = int(parts[0]), int(parts[1])
        except ValueError:
            raise CorpusError(f"{source}:{lineno}: weights must be integers") from None
        if cw < 0 or dw < 0:
            raise CorpusError(f"{source}:{lineno}: negative weight")
        try:
            sig = parse_signature(parts[2])
        except SignatureSyntaxError as exc:
            raise CorpusError(f"{source}:{lineno}: {exc}") from exc
        records.append((sig, cw, dw))
    try:
        return make_corpus(records)
    except CorpusError as exc:
        raise CorpusError(f"{source}: {exc}") from None


def format_corpus(corpus: Corpus) -> str:
    return "".join(f"{e.call_weight} {e.def_weight} {e.signature}\n" for e in corpus.entries)


def load_corpus(path: str | os.PathLike) -> Corpus:
    """Load a corpus file; the name ``default`` selects the embedded corpus."""
    if str(path) == "default":
        return default_corpus()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {p}: {exc.strerror}") from None
    return parse_corpus(text, source=str(p))


def default_corpus() -> Corpus:
    text = resources.files("ccwb").joinpath("data").joinpath("default_corpus.txt").read_text("utf-8")
    return parse_corpus(text, source="<default corpus>")
