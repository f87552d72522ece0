"""Finite-prefix membership oracles for the seven distributed languages.

Verdicts are three-valued: OUT is final under extension for the prefix-closed
clauses (linearizability, per-prefix sequential consistency, the per-process
counter properties, the counter's real-time upper bound, and the ledger's
permutation property).  UNKNOWN is reserved for eventual clauses that cannot
be decided on a finite prefix; those are classified only at an explicit
horizon by membership_at_horizon, and only for scripted scenarios.

Linearization search branches on the minimal elements of the precedence
relation restricted to not-yet-linearized complete operations, memoizing on
(linearized set, object state).  Pending operations branch over drop or
complete-with-the-legal-response.  Tie-breaking is ascending process index,
then uid, for reproducible witnesses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CapExceededError, InvalidWordError, WrongAlphabetError
from .objects import SequentialSpec, is_mutator, parse_list_payload, parse_val_payload
from .words import INV, RESP, Operation, Word, match_operations, precedence, validate_word

IN = "IN"
OUT = "OUT"
UNKNOWN = "UNKNOWN"

#: Default cap on operations for the permutation searches.
OP_CAP = 10

LANGUAGE_IDS = ("LIN_REG", "SC_REG", "LIN_LED", "SC_LED", "EC_LED", "WEC_COUNT", "SEC_COUNT")


@dataclass(frozen=True)
class PrefixVerdict:
    status: str  # IN | OUT | UNKNOWN
    witness: dict = field(default_factory=dict)

    @property
    def is_out(self) -> bool:
        return self.status == OUT


def _payload_by_uid(word: Word) -> dict[int, str]:
    return {s.uid: s.payload for s in word.symbols}


def _positions(word: Word) -> dict[int, int]:
    return {s.uid: i for i, s in enumerate(word.symbols)}


def _realtime_preds(word: Word, ops: Sequence[Operation]) -> dict[int, frozenset[int]]:
    pos = _positions(word)
    preds: dict[int, frozenset[int]] = {}
    for b in ops:
        preds[b.op_id] = frozenset(
            a.op_id for a in ops if a.resp is not None and pos[a.resp] < pos[b.inv]
        )
    return preds


def _process_order_preds(word: Word, ops: Sequence[Operation]) -> dict[int, frozenset[int]]:
    pos = _positions(word)
    preds: dict[int, frozenset[int]] = {}
    for b in ops:
        preds[b.op_id] = frozenset(
            a.op_id for a in ops if a.proc == b.proc and pos[a.inv] < pos[b.inv]
        )
    return preds


def _no_preds(word: Word, ops: Sequence[Operation]) -> dict[int, frozenset[int]]:
    return {op.op_id: frozenset() for op in ops}


def _serializable(
    word: Word,
    spec: SequentialSpec,
    ops: Sequence[Operation],
    preds: dict[int, frozenset[int]],
) -> bool:
    """Is there a completion + permutation of ops, legal for spec, respecting preds?

    Complete operations must all be placed with their stated responses; pending
    operations branch over drop or complete (a dropped pending mutator simply
    never takes effect).
    """
    payload = _payload_by_uid(word)
    by_id = {op.op_id: op for op in ops}
    complete_ids = frozenset(op.op_id for op in ops if op.complete)
    order = sorted(by_id, key=lambda oid: (by_id[oid].proc, oid))

    seen: set[tuple[frozenset[int], object]] = set()

    def rec(done: frozenset[int], state: object) -> bool:
        if complete_ids <= done:
            return True
        key = (done, state)
        if key in seen:
            return False
        seen.add(key)
        for oid in order:
            if oid in done or not preds[oid] <= done:
                continue
            op = by_id[oid]
            resp, nxt = spec.step(state, payload[op.inv])
            if op.complete and payload[op.resp] != resp:
                continue
            if rec(done | {oid}, nxt):
                return True
        return False

    # Pending non-mutators constrain nothing; treat them as droppable by
    # letting the search succeed once every complete op is placed, and only
    # offering pending mutators as optional extra steps.
    return rec(frozenset(oid for oid in by_id if not by_id[oid].complete
                         and not is_mutator(payload[by_id[oid].inv])), spec.initial)


def _check_all_prefixes(
    word: Word,
    spec: SequentialSpec,
    preds_fn,
    cap: int,
    whole_word_final: bool,
) -> PrefixVerdict:
    """Shared driver for lin/sc/ec-prop1 verdicts with minimal violating prefix."""
    report = validate_word(word)
    if not report.ok:
        raise InvalidWordError(f"position {report.position}: {report.reason}")
    ops = match_operations(word)
    if len(ops) > cap:
        raise CapExceededError(f"{len(ops)} operations exceeds cap {cap}")

    def ok(prefix: Word) -> bool:
        pops = match_operations(prefix)
        return _serializable(prefix, spec, pops, preds_fn(prefix, pops))

    if whole_word_final:
        # Prefix-closed as a whole-word property: check once, locate minimum on failure.
        if ok(word):
            return PrefixVerdict(IN)
    resp_ends = [i + 1 for i, s in enumerate(word.symbols) if s.kind == RESP]
    for end in resp_ends:
        if not ok(word.prefix(end)):
            return PrefixVerdict(OUT, {"prefix_len": end})
    if not whole_word_final and ok(word):
        return PrefixVerdict(IN)
    if whole_word_final:
        # Whole word failed but no response-ending prefix did: the word itself
        # (ending in invocations) is the minimal violation.
        return PrefixVerdict(OUT, {"prefix_len": len(word)})
    return PrefixVerdict(OUT, {"prefix_len": len(word)})


def lin_check(word: Word, spec: SequentialSpec, cap: int = OP_CAP) -> PrefixVerdict:
    """Linearizability of the word (equivalently, of each of its prefixes)."""
    return _check_all_prefixes(word, spec, _realtime_preds, cap, whole_word_final=True)


def sc_check(word: Word, spec: SequentialSpec, cap: int = OP_CAP) -> PrefixVerdict:
    """Per-prefix sequential consistency.

    The language contains words all of whose prefixes are sequentially
    consistent, and unlike linearizability a whole-word check is not
    extension-final (a later write can retroactively explain an early read),
    so every prefix is checked.
    """
    return _check_all_prefixes(word, spec, _process_order_preds, cap, whole_word_final=False)


# Windowed linearizability for long words: split at quiescent cuts (positions
# no operation spans) and carry the set of reachable object states across
# chunks.  Exact for linearizability because real-time order across a cut is
# total.  Not applicable to sequential consistency.


def _lin_states(
    word: Word,
    spec: SequentialSpec,
    ops: Sequence[Operation],
    preds: dict[int, frozenset[int]],
    initial_states: frozenset,
) -> frozenset:
    payload = _payload_by_uid(word)
    by_id = {op.op_id: op for op in ops}
    complete_ids = frozenset(op.op_id for op in ops if op.complete)
    order = sorted(by_id, key=lambda oid: (by_id[oid].proc, oid))
    out: set = set()
    memo: set[tuple[frozenset[int], object]] = set()

    def rec(done: frozenset[int], state: object) -> None:
        key = (done, state)
        if key in memo:
            return
        memo.add(key)
        if complete_ids <= done:
            out.add(state)
            # keep exploring: pending mutators may still extend the state set
        for oid in order:
            if oid in done or not preds[oid] <= done:
                continue
            op = by_id[oid]
            resp, nxt = spec.step(state, payload[op.inv])
            if op.complete and payload[op.resp] != resp:
                continue
            rec(done | {oid}, nxt)

    start = frozenset(
        oid for oid in by_id
        if not by_id[oid].complete and not is_mutator(payload[by_id[oid].inv])
    )
    for s in initial_states:
        rec(start, s)
    return frozenset(out)


def quiescent_cuts(word: Word, ops: Sequence[Operation]) -> list[int]:
    """Positions q where no operation spans q (0 and len(word) included)."""
    pos = _positions(word)
    spans = [0] * (len(word) + 1)
    for op in ops:
        lo = pos[op.inv]
        hi = pos[op.resp] if op.resp is not None else len(word)
        for q in range(lo + 1, hi + 1):
            spans[q] += 1
    return [q for q in range(len(word) + 1) if spans[q] == 0]


def lin_check_windowed(
    word: Word,
    spec: SequentialSpec,
    cap: int = OP_CAP,
    state_cap: int = 64,
) -> PrefixVerdict:
    """Linearizability via chunked search between quiescent cuts.

    Handles arbitrarily long words as long as every chunk stays within the
    operation cap and the carried state set stays within state_cap; raises
    CapExceededError otherwise.
    """
    report = validate_word(word)
    if not report.ok:
        raise InvalidWordError(f"position {report.position}: {report.reason}")
    ops = match_operations(word)
    pos = _positions(word)
    cuts = quiescent_cuts(word, ops)
    states: frozenset = frozenset([spec.initial])
    prev = 0
    for cut in cuts[1:]:
        chunk_ops = [op for op in ops if prev <= pos[op.inv] < cut]
        if len(chunk_ops) > cap:
            raise CapExceededError(
                f"chunk of {len(chunk_ops)} operations exceeds cap {cap}; no quiescent cut inside"
            )
        sub = Word(word.symbols[prev:cut], word.n)
        sub_ops = match_operations(sub)
        nxt = _lin_states(sub, spec, sub_ops, _realtime_preds(sub, sub_ops), states)
        if not nxt:
            # minimal violating prefix lies in this chunk; scan its response ends
            for end in range(prev + 1, cut + 1):
                if word.symbols[end - 1].kind != RESP:
                    continue
                piece = Word(word.symbols[prev:end], word.n)
                piece_ops = match_operations(piece)
                res = _lin_states(piece, spec, piece_ops, _realtime_preds(piece, piece_ops), states)
                if not res:
                    return PrefixVerdict(OUT, {"prefix_len": end})
            return PrefixVerdict(OUT, {"prefix_len": cut})
        if len(nxt) > state_cap:
            raise CapExceededError(f"carried state set of {len(nxt)} exceeds cap {state_cap}")
        states = nxt
        prev = cut
    return PrefixVerdict(IN)


# Counter languages.

def _require_counter_word(word: Word) -> list[Operation]:
    report = validate_word(word)
    if not report.ok:
        raise InvalidWordError(f"position {report.position}: {report.reason}")
    payload = _payload_by_uid(word)
    ops = match_operations(word)
    for op in ops:
        inv = payload[op.inv]
        if inv not in ("inc", "read"):
            raise WrongAlphabetError(f"not a counter invocation: {inv!r}")
        if op.complete:
            resp = payload[op.resp]
            if inv == "inc" and resp != "ok":
                raise WrongAlphabetError(f"inc answered {resp!r}")
            if inv == "read" and not resp.startswith("val:"):
                raise WrongAlphabetError(f"read answered {resp!r}")
    return ops


def wec_count_check(word: Word) -> PrefixVerdict:
    """Weak eventual counter: per-process lower bound and read monotonicity.

    OUT on a violation of either per-process property; otherwise UNKNOWN with
    the stabilization data the horizon classifier needs.
    """
    ops = _require_counter_word(word)
    payload = _payload_by_uid(word)
    pos = _positions(word)
    last_read: dict[int, int] = {}
    own_incs: dict[int, int] = {}
    for op in sorted(ops, key=lambda o: pos[o.inv]):
        inv = payload[op.inv]
        if inv == "inc":
            if op.complete:
                own_incs[op.proc] = own_incs.get(op.proc, 0) + 1
            continue
        if not op.complete:
            continue
        value = parse_val_payload(payload[op.resp])
        if value < own_incs.get(op.proc, 0):
            return PrefixVerdict(
                OUT,
                {"property": 1, "op": op.op_id, "prefix_len": pos[op.resp] + 1,
                 "reason": f"read by p{op.proc} returned {value} < {own_incs.get(op.proc, 0)} own incs"},
            )
        if value < last_read.get(op.proc, 0):
            return PrefixVerdict(
                OUT,
                {"property": 2, "op": op.op_id, "prefix_len": pos[op.resp] + 1,
                 "reason": f"read by p{op.proc} returned {value} < previous read {last_read[op.proc]}"},
            )
        last_read[op.proc] = value
    incs = sum(1 for op in ops if payload[op.inv] == "inc")
    return PrefixVerdict(UNKNOWN, {"incs_so_far": incs, "last_reads": dict(last_read)})


def sec_count_check(word: Word) -> PrefixVerdict:
    """Strong eventual counter: the weak properties plus the real-time upper bound."""
    base = wec_count_check(word)
    if base.is_out:
        return base
    ops = match_operations(word)
    payload = _payload_by_uid(word)
    pos = _positions(word)
    rel = precedence(word, ops)
    inc_ids = [op.op_id for op in ops if payload[op.inv] == "inc"]
    for op in ops:
        if payload[op.inv] != "read" or not op.complete:
            continue
        value = parse_val_payload(payload[op.resp])
        bound = sum(
            1 for j in inc_ids
            if rel.precedes(j, op.op_id) or rel.concurrent(j, op.op_id)
        )
        if value > bound:
            return PrefixVerdict(
                OUT,
                {"property": 4, "op": op.op_id, "prefix_len": pos[op.resp] + 1,
                 "reason": f"read returned {value} > {bound} incs preceding or concurrent"},
            )
    return base


def _require_ledger_word(word: Word) -> list[Operation]:
    report = validate_word(word)
    if not report.ok:
        raise InvalidWordError(f"position {report.position}: {report.reason}")
    payload = _payload_by_uid(word)
    ops = match_operations(word)
    for op in ops:
        inv = payload[op.inv]
        if not (inv.startswith("append:") or inv == "get"):
            raise WrongAlphabetError(f"not a ledger invocation: {inv!r}")
        if op.complete:
            resp = payload[op.resp]
            if inv == "get" and not resp.startswith("list:"):
                raise WrongAlphabetError(f"get answered {resp!r}")
            if inv.startswith("append:") and resp != "ok":
                raise WrongAlphabetError(f"append answered {resp!r}")
    return ops


def ec_led_check(word: Word, cap: int = OP_CAP) -> PrefixVerdict:
    """Eventually consistent ledger, first property: each prefix admits a
    completion and an order-free permutation valid for the sequential ledger.

    OUT carries the minimal violating prefix; otherwise UNKNOWN with the
    obligation data (records appended vs. records seen by the latest gets).
    """
    from .objects import ledger_spec

    ops = _require_ledger_word(word)
    verdict = _check_all_prefixes(word, ledger_spec(), _no_preds, cap, whole_word_final=False)
    if verdict.is_out:
        return PrefixVerdict(OUT, dict(verdict.witness, property=1))
    payload = _payload_by_uid(word)
    pos = _positions(word)
    appended = [payload[op.inv][7:] for op in ops if payload[op.inv].startswith("append:")]
    latest_get: dict[int, tuple[str, ...]] = {}
    for op in ops:
        if payload[op.inv] == "get" and op.complete:
            latest_get[op.proc] = parse_list_payload(payload[op.resp])
    return PrefixVerdict(
        UNKNOWN,
        {"appended": tuple(appended), "latest_gets": {p: g for p, g in sorted(latest_get.items())}},
    )


# Horizon-bounded classification for scripted scenarios.

def membership_at_horizon(language_id: str, word: Word, window: int) -> PrefixVerdict:
    """Classify a full horizon-length scripted word as IN or OUT.

    Eventual clauses are rendered over the final `window` symbols: stabilized
    behavior must hold there, and any fresh mutation inside the window counts
    as never-stabilized.  Only meaningful for scenarios whose asymptotic
    behavior is scripted and known.
    """
    from .objects import ledger_spec, register_spec

    if window > len(word):
        raise CapExceededError(f"window {window} larger than word of {len(word)} symbols")
    if language_id not in LANGUAGE_IDS:
        raise ValueError(f"unknown language id {language_id!r}")

    if language_id in ("LIN_REG", "LIN_LED"):
        spec = register_spec() if language_id == "LIN_REG" else ledger_spec()
        v = lin_check_windowed(word, spec)
        return PrefixVerdict(v.status, v.witness)
    if language_id in ("SC_REG", "SC_LED"):
        spec = register_spec() if language_id == "SC_REG" else ledger_spec()
        v = sc_check(word, spec)
        return PrefixVerdict(v.status, v.witness)

    payload = _payload_by_uid(word)
    tail = word.symbols[len(word) - window:]
    if language_id in ("WEC_COUNT", "SEC_COUNT"):
        base = wec_count_check(word) if language_id == "WEC_COUNT" else sec_count_check(word)
        if base.is_out:
            return PrefixVerdict(OUT, base.witness)
        total = sum(1 for s in word.symbols if s.kind == INV and s.payload == "inc")
        for s in tail:
            if s.kind == INV and s.payload == "inc":
                return PrefixVerdict(OUT, {"property": 3, "reason": "inc inside final window"})
            if s.kind == RESP and s.payload.startswith("val:"):
                if parse_val_payload(s.payload) != total:
                    return PrefixVerdict(
                        OUT,
                        {"property": 3,
                         "reason": f"read returned {parse_val_payload(s.payload)} != {total} total incs",
                         "uid": s.uid},
                    )
        return PrefixVerdict(IN)

    # EC_LED
    base = ec_led_check(word)
    if base.is_out:
        return PrefixVerdict(OUT, base.witness)
    cutoff = len(word) - window
    must_contain = {
        s.payload[7:]
        for i, s in enumerate(word.symbols)
        if i < cutoff and s.kind == INV and s.payload.startswith("append:")
    }
    for s in tail:
        if s.kind == INV and s.payload.startswith("append:"):
            return PrefixVerdict(OUT, {"property": 2, "reason": "append inside final window"})
        if s.kind == RESP and s.payload.startswith("list:"):
            got = set(parse_list_payload(s.payload))
            missing = must_contain - got
            if missing:
                return PrefixVerdict(
                    OUT,
                    {"property": 2, "uid": s.uid,
                     "reason": f"get misses appended records {sorted(missing)}"},
                )
    return PrefixVerdict(IN)


def prefix_check(language_id: str, word: Word, cap: int = OP_CAP) -> PrefixVerdict:
    """Dispatch to the prefix checker for a language id."""
    from .objects import ledger_spec, register_spec

    if language_id == "LIN_REG":
        return lin_check(word, register_spec(), cap)
    if language_id == "SC_REG":
        return sc_check(word, register_spec(), cap)
    if language_id == "LIN_LED":
        return lin_check(word, ledger_spec(), cap)
    if language_id == "SC_LED":
        return sc_check(word, ledger_spec(), cap)
    if language_id == "EC_LED":
        return ec_led_check(word, cap)
    if language_id == "WEC_COUNT":
        return wec_count_check(word)
    if language_id == "SEC_COUNT":
        return sec_count_check(word)
    raise ValueError(f"unknown language id {language_id!r}")
