"""Distributed words over per-process invocation/response alphabets.

A word is a finite sequence of position-tagged symbols, each belonging to one
process and classified as an invocation or a response.  This module provides
well-formedness validation, projections, invocation/response matching,
real-time precedence, and shuffle enumeration.  Finite words stand for
prefixes of infinite ones; the infinite-only clauses (reliability, fairness)
are handled by the analysis layer, never here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import CapExceededError, InvalidWordError, UnknownOperationError, WordFormatError

INV = "INV"
RESP = "RESP"

#: Default cap on total symbols for shuffle enumeration.
SHUFFLE_SYMBOL_CAP = 12

# Payload grammar, shared across all objects:
#   invocations:  write:<int>  read  inc  append:<rec>  get
#   responses:    ok  val:<int>  list:<rec>.<rec>...   (empty list -> "list:")
_INV_HEADS = ("write:", "append:")
_INV_EXACT = ("read", "inc", "get")
_RESP_HEADS = ("val:", "list:")
_RESP_EXACT = ("ok",)


def payload_class(payload: str) -> str | None:
    """Classify a payload string as INV or RESP, or None if it fits neither."""
    if payload in _INV_EXACT or payload.startswith(_INV_HEADS):
        return INV
    if payload in _RESP_EXACT or payload.startswith(_RESP_HEADS):
        return RESP
    return None


@dataclass(frozen=True)
class Symbol:
    """One invocation or response event.

    uid is a position tag, unique within a word and increasing with word
    position.  proc is 1-based.
    """

    uid: int
    proc: int
    kind: str  # INV or RESP
    payload: str

    def __str__(self) -> str:
        return f"{self.uid}\t{self.proc}\t{self.kind}\t{self.payload}"


@dataclass(frozen=True)
class Word:
    symbols: tuple[Symbol, ...]
    n: int

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self.symbols)

    def prefix(self, length: int) -> "Word":
        return Word(self.symbols[:length], self.n)


def make_word(entries: Iterable[tuple[int, str, str]], n: int) -> Word:
    """Build a word from (proc, kind, payload) entries, assigning uids by position."""
    symbols = tuple(
        Symbol(uid, proc, kind, payload) for uid, (proc, kind, payload) in enumerate(entries)
    )
    return Word(symbols, n)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    position: int | None = None  # word position (0-based) of the first violation
    reason: str | None = None
    #: clauses that cannot be established on a finite prefix
    unestablished: tuple[str, ...] = ("reliability", "fairness")


def validate_word(word: Word) -> ValidationReport:
    """Check per-process sequentiality: each projection alternates INV/RESP starting with INV.

    Reliability and fairness are infinite-word clauses and are only reported
    as not establishable on a finite prefix.
    """
    expect = {p: INV for p in range(1, word.n + 1)}
    for pos, sym in enumerate(word.symbols):
        if not 1 <= sym.proc <= word.n:
            return ValidationReport(False, pos, f"process {sym.proc} out of range 1..{word.n}")
        if sym.kind not in (INV, RESP):
            return ValidationReport(False, pos, f"unknown symbol kind {sym.kind!r}")
        cls = payload_class(sym.payload)
        if cls is None:
            return ValidationReport(False, pos, f"unparseable payload {sym.payload!r}")
        if cls != sym.kind:
            return ValidationReport(
                False, pos, f"{sym.kind} symbol carries a {cls} payload {sym.payload!r}"
            )
        if sym.kind != expect[sym.proc]:
            what = "invocations" if sym.kind == INV else "responses"
            return ValidationReport(
                False, pos, f"two consecutive {what} for process {sym.proc}"
            )
        expect[sym.proc] = RESP if sym.kind == INV else INV
    return ValidationReport(True)


def project(word: Word, proc: int) -> Word:
    """Subsequence of symbols belonging to proc, order preserved."""
    if not 1 <= proc <= word.n:
        raise InvalidWordError(f"process {proc} out of range 1..{word.n}")
    return Word(tuple(s for s in word.symbols if s.proc == proc), word.n)


def uniquify(word: Word) -> Word:
    """Reassign uids so that uid equals word position; payloads unchanged."""
    return Word(
        tuple(Symbol(i, s.proc, s.kind, s.payload) for i, s in enumerate(word.symbols)),
        word.n,
    )


PENDING = None


@dataclass(frozen=True)
class Operation:
    """A matched invocation/response pair; resp is None while pending.

    The operation id is the uid of its invocation symbol.
    """

    inv: int
    resp: int | None
    proc: int

    @property
    def op_id(self) -> int:
        return self.inv

    @property
    def complete(self) -> bool:
        return self.resp is not None


def match_operations(word: Word) -> list[Operation]:
    """Pair each invocation with the next response of the same process.

    Returns operations in invocation order, complete and pending mixed.
    Raises InvalidWordError if the word fails validation.
    """
    report = validate_word(word)
    if not report.ok:
        raise InvalidWordError(f"position {report.position}: {report.reason}")
    open_inv: dict[int, Symbol] = {}
    ops: list[Operation] = []
    by_inv: dict[int, int] = {}
    for sym in word.symbols:
        if sym.kind == INV:
            open_inv[sym.proc] = sym
            by_inv[sym.uid] = len(ops)
            ops.append(Operation(sym.uid, PENDING, sym.proc))
        else:
            inv = open_inv.pop(sym.proc)
            ops[by_inv[inv.uid]] = Operation(inv.uid, sym.uid, sym.proc)
    return ops


@dataclass(frozen=True)
class PrecedenceRelation:
    """Real-time precedence between complete operations of one word.

    op precedes op' iff op's response position is before op''s invocation
    position.  Pending operations never precede anything.
    """

    pairs: frozenset[tuple[int, int]]
    op_ids: frozenset[int]

    def _check(self, op_id: int) -> None:
        if op_id not in self.op_ids:
            raise UnknownOperationError(f"unknown operation id {op_id}")

    def precedes(self, a: int, b: int) -> bool:
        self._check(a)
        self._check(b)
        return (a, b) in self.pairs

    def concurrent(self, a: int, b: int) -> bool:
        self._check(a)
        self._check(b)
        return a != b and (a, b) not in self.pairs and (b, a) not in self.pairs


def precedence(word: Word, ops: Sequence[Operation] | None = None) -> PrecedenceRelation:
    """Precedence relation over the word's operations (uids double as positions
    only after uniquify; here positions are looked up explicitly)."""
    if ops is None:
        ops = match_operations(word)
    pos = {s.uid: i for i, s in enumerate(word.symbols)}
    pairs = set()
    for a in ops:
        if a.resp is None:
            continue
        for b in ops:
            if a is b:
                continue
            if pos[a.resp] < pos[b.inv]:
                pairs.add((a.op_id, b.op_id))
    return PrecedenceRelation(frozenset(pairs), frozenset(op.op_id for op in ops))


def shuffle_count(locals_: Sequence[Word]) -> int:
    total = sum(len(w) for w in locals_)
    count = math.factorial(total)
    for w in locals_:
        count //= math.factorial(len(w))
    return count


def shuffles(
    locals_: Sequence[Word],
    bound: int | None = None,
    max_symbols: int = SHUFFLE_SYMBOL_CAP,
) -> Iterator[Word]:
    """Enumerate interleavings of per-process words, preserving each local order.

    Enumeration is lexicographic by next-process choice, so output order is
    deterministic.  bound, when given, truncates the enumeration after that
    many interleavings.  Total length above max_symbols raises CapExceededError.
    """
    total = sum(len(w) for w in locals_)
    if total > max_symbols:
        raise CapExceededError(f"{total} symbols exceeds shuffle cap {max_symbols}")
    n = max((w.n for w in locals_), default=1)
    seqs = [w.symbols for w in locals_]

    emitted = 0

    def rec(cursors: list[int], acc: list[Symbol]) -> Iterator[Word]:
        nonlocal emitted
        if bound is not None and emitted >= bound:
            return
        if len(acc) == total:
            emitted += 1
            yield uniquify(Word(tuple(acc), n))
            return
        for k, seq in enumerate(seqs):
            if cursors[k] < len(seq):
                cursors[k] += 1
                acc.append(seq[cursors[k] - 1])
                yield from rec(cursors, acc)
                acc.pop()
                cursors[k] -= 1

    return rec([0] * len(seqs), [])


def serialize_by_positions(word: Word, ops: Sequence[Operation]) -> Word:
    """Rebuild a word by laying matched operations back at their symbol positions."""
    pos = {s.uid: s for s in word.symbols}
    placed: list[tuple[int, Symbol]] = []
    index = {s.uid: i for i, s in enumerate(word.symbols)}
    for op in ops:
        placed.append((index[op.inv], pos[op.inv]))
        if op.resp is not None:
            placed.append((index[op.resp], pos[op.resp]))
    placed.sort(key=lambda t: t[0])
    return Word(tuple(sym for _, sym in placed), word.n)


# Word text format: one symbol per line, `uid<TAB>proc<TAB>INV|RESP<TAB>payload`.

def format_word(word: Word) -> str:
    return "".join(f"{s}\n" for s in word.symbols)


def parse_word(text: str, n: int | None = None) -> Word:
    """Parse the tab-separated word format.  Raises WordFormatError with a line number."""
    symbols = []
    max_proc = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise WordFormatError(line_no, f"expected 4 tab-separated fields, got {len(parts)}")
        uid_s, proc_s, kind, payload = parts
        try:
            uid = int(uid_s)
            proc = int(proc_s)
        except ValueError:
            raise WordFormatError(line_no, f"uid and proc must be integers: {line!r}") from None
        if kind not in (INV, RESP):
            raise WordFormatError(line_no, f"kind must be INV or RESP, got {kind!r}")
        if payload_class(payload) is None:
            raise WordFormatError(line_no, f"unparseable payload {payload!r}")
        symbols.append(Symbol(uid, proc, kind, payload))
        max_proc = max(max_proc, proc)
    uids = [s.uid for s in symbols]
    if sorted(uids) != list(uids) or len(set(uids)) != len(uids):
        raise WordFormatError(len(symbols), "uids must be unique and increasing")
    return Word(tuple(symbols), n if n is not None else max(max_proc, 1))


def read_word_file(path: str, n: int | None = None) -> Word:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_word(fh.read(), n)


def write_word_file(path: str, word: Word) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_word(word))
