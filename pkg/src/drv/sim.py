"""Deterministic shared-memory simulator.

n process state machines run a monitor program in the generic
pick/exchange/send/receive/exchange/report loop, communicating through atomic
registers and atomic snapshots.  All asynchrony comes from the schedule: one
process advances by one micro-step per scheduled turn.  Runs are pure
functions of (monitor, adversary, schedule, horizon, seed); replaying with
equal inputs yields a step-identical execution.

Steps are the unit of time everywhere: horizons and analysis windows both
count micro-steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .errors import ConfigError, DrvError, MonitorFaultError
from .words import INV, RESP, Symbol, Word

LOCAL = "LOCAL"
WRITE = "WRITE"
READ = "READ"
SNAPSHOT = "SNAPSHOT"
SEND = "SEND"
RECEIVE = "RECEIVE"
REPORT = "REPORT"

YES = "YES"
NO = "NO"

#: shared array used by the timed wrapper to announce invocations
VIEWS_ARRAY = "VIEWS"


def ser(value) -> str:
    """Canonical, deterministic serialization for step details."""
    if isinstance(value, bool):
        return "T" if value else "F"
    if isinstance(value, (frozenset, set)):
        return "{" + ",".join(sorted(ser(v) for v in value)) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(ser(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ",".join(f"{ser(k)}:{ser(v)}" for k, v in sorted(value.items())) + "}"
    return str(value)


@dataclass(frozen=True)
class Step:
    index: int
    proc: int
    kind: str
    detail: str


@dataclass
class OpRecord:
    """One monitor-adversary interaction, keyed by (proc, per-process index)."""

    proc: int
    idx: int
    inv_payload: str
    send_step: int
    resp_payload: str | None = None
    recv_step: int | None = None
    view: tuple | None = None  # tuple of (proc, idx, payload) entries
    inv_uid: int | None = None
    resp_uid: int | None = None


@dataclass
class SharedMemory:
    registers: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)  # name -> list of per-process values

    def snapshot(self, name: str) -> tuple:
        return tuple(self.arrays[name])


@dataclass(frozen=True)
class Configuration:
    """Shared memory plus per-process progress at one point of an execution.

    Local states are observation records: the sequence of a process's own
    steps determines its state, so the configuration carries per-process step
    counts and the memory contents.
    """

    steps_taken: tuple[int, ...]
    registers: tuple
    arrays: tuple


class Execution:
    """A finished run: step sequence, operation records, and replay config."""

    def __init__(self, config: dict):
        self.config = config
        self.n: int = config["n"]
        self.seed: int = config.get("seed", 0)
        self.horizon: int = config["horizon"]
        self.monitor_id: str = config["monitor_id"]
        self.timed: bool = False
        self.steps: list[Step] = []
        self.ops: dict[tuple[int, int], OpRecord] = {}
        self.reports: dict[int, list[tuple[int, str]]] = {p: [] for p in range(1, self.n + 1)}
        self.schedule_desc: str = ""
        self.initial_memory: tuple = ()

    # -- derived views ---------------------------------------------------

    def input_word(self) -> Word:
        """Subsequence of SEND/RECEIVE payloads in step order, uids by position."""
        symbols = []
        for step in self.steps:
            if step.kind == SEND:
                symbols.append(Symbol(len(symbols), step.proc, INV, step.detail))
            elif step.kind == RECEIVE:
                payload = step.detail.split(" view=", 1)[0]
                symbols.append(Symbol(len(symbols), step.proc, RESP, payload))
        return Word(tuple(symbols), self.n)

    def local_trace(self, proc: int) -> tuple:
        """The process's observation record: its own steps' (kind, detail) pairs.

        Monitors are deterministic, so this sequence determines the sequence
        of local states; it contains no global position tags, making it
        stable across replays.
        """
        own = tuple((s.kind, s.detail) for s in self.steps if s.proc == proc)
        return (("INIT", self.monitor_id),) + own

    def verdicts(self, proc: int) -> list[str]:
        return [v for _, v in self.reports[proc]]

    def no_count(self, proc: int) -> int:
        return sum(1 for v in self.verdicts(proc) if v == NO)

    def yes_count(self, proc: int) -> int:
        return sum(1 for v in self.verdicts(proc) if v == YES)

    def op_views_by_uid(self) -> dict[int, frozenset[int]]:
        """Per-operation views as sets of invocation uids of the input word."""
        inv_uid = {(rec.proc, rec.idx): rec.inv_uid for rec in self.ops.values()}
        out = {}
        for rec in self.ops.values():
            if rec.view is None:
                continue
            out[rec.inv_uid] = frozenset(
                inv_uid[(p, i)] for (p, i, _payload) in rec.view
            )
        return out

    def config_at(self, step_count: int) -> Configuration:
        """Reconstruct the configuration reached after the first step_count steps.

        Register and array contents are kept in their canonical serialized
        form so configurations compare exactly.
        """
        regs = {k: ser(v) for k, v in self._init_regs.items()}
        arrays = {k: [ser(v) for v in vs] for k, vs in self._init_arrays.items()}
        taken = [0] * (self.n + 1)
        for step in self.steps[:step_count]:
            taken[step.proc] += 1
            if step.kind == WRITE:
                name, value = step.detail.split("=", 1)
                if "[" in name:
                    arr, idx = name[:-1].split("[")
                    arrays[arr][int(idx) - 1] = value
                else:
                    regs[name] = value
        return Configuration(
            tuple(taken[1:]),
            tuple(sorted(regs.items())),
            tuple(sorted((k, tuple(v)) for k, v in arrays.items())),
        )

    # -- trace file ------------------------------------------------------

    def trace_lines(self) -> list[str]:
        header = f"#drvtrace v1 n={self.n} seed={self.seed} horizon={self.horizon}"
        lines = [header]
        inv_uid = {(rec.proc, rec.idx): rec.inv_uid for rec in self.ops.values()}
        for step in self.steps:
            detail = step.detail
            if step.kind == RECEIVE and " view=" in detail:
                payload, viewpart = detail.split(" view=", 1)
                entries = _parse_view_detail(viewpart)
                uids = sorted(inv_uid[(p, i)] for (p, i) in entries)
                detail = f"{payload} view={{{','.join(str(u) for u in uids)}}}"
            lines.append(f"{step.index}\t{step.proc}\t{step.kind}\t{detail}")
        return lines

    def write_trace(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.trace_lines()) + "\n")


def _parse_view_detail(viewpart: str) -> list[tuple[int, int]]:
    body = viewpart.strip()[1:-1]
    entries = []
    if body:
        for item in body.split("),("):
            fields = item.strip("()").split(",", 2)
            entries.append((int(fields[0]), int(fields[1])))
    return entries


def _format_view(view: tuple) -> str:
    return "{" + ",".join(f"({p},{i},{payload})" for (p, i, payload) in view) + "}"


# -- schedules ----------------------------------------------------------


class SchedulePolicy:
    """Chooses which process takes the next micro-step."""

    desc = "policy"

    def next(self, sim: "_SimState") -> int | None:
        raise NotImplementedError


class RoundRobin(SchedulePolicy):
    desc = "round-robin"

    def __init__(self, n: int):
        self.n = n
        self.i = 0

    def next(self, sim) -> int:
        p = self.i % self.n + 1
        self.i += 1
        return p


class RandomChoice(SchedulePolicy):
    desc = "random"

    def __init__(self, n: int, rng):
        self.n = n
        self.rng = rng

    def next(self, sim) -> int:
        return self.rng.randrange(1, self.n + 1)


class Bursty(SchedulePolicy):
    """Random process, run for a random burst of steps."""

    desc = "bursty"

    def __init__(self, n: int, rng, max_burst: int = 6):
        self.n = n
        self.rng = rng
        self.max_burst = max_burst
        self.current: int | None = None
        self.left = 0

    def next(self, sim) -> int:
        if self.left == 0 or self.current is None:
            self.current = self.rng.randrange(1, self.n + 1)
            self.left = self.rng.randrange(1, self.max_burst + 1)
        self.left -= 1
        return self.current


class Explicit(SchedulePolicy):
    desc = "explicit"

    def __init__(self, seq: Sequence[int]):
        self.seq = list(seq)
        self.i = 0

    def next(self, sim) -> int | None:
        if self.i >= len(self.seq):
            return None
        p = self.seq[self.i]
        self.i += 1
        return p


class WordDriven(SchedulePolicy):
    """Drive whole blocks in the order of a target word's symbols.

    For each invocation symbol the owning process runs its entire send block
    atomically (pick through announce); for each response symbol it runs its
    receive block (delivery through report).  With the timed wrapper this
    produces tight executions, where the input word equals the sketch.
    """

    desc = "word-driven"

    def __init__(self, symbols: Iterator[tuple[int, str]]):
        self.symbols = iter(symbols)
        self.current: tuple[int, int] | None = None  # (proc, serial at block start)

    def next(self, sim) -> int | None:
        if self.current is not None:
            p, serial = self.current
            if sim.block_serial(p) == serial:
                return p
            self.current = None
        nxt = next(self.symbols, None)
        if nxt is None:
            return None
        proc, kind = nxt
        want = "send" if kind == INV else "recv"
        if sim.pending_block(proc) != want:
            raise ConfigError(
                f"word-driven schedule out of sync: p{proc} is at "
                f"{sim.pending_block(proc)!r} block, symbol wants {want!r}"
            )
        self.current = (proc, sim.block_serial(proc))
        return proc


class TightRoundRobin(SchedulePolicy):
    """Round-robin over whole blocks: p1 send .. pn send, p1 recv .. pn recv."""

    desc = "tight-rr"

    def __init__(self, n: int):
        self.n = n
        self.slot = 0
        self.current: tuple[int, int] | None = None

    def next(self, sim) -> int:
        if self.current is not None:
            p, serial = self.current
            if sim.block_serial(p) == serial:
                return p
            self.current = None
        p = self.slot % self.n + 1
        self.slot += 1
        self.current = (p, sim.block_serial(p))
        return p


def fairness(execution: Execution, c: int = 4) -> bool:
    """Every process takes at least floor(T / (c*n)) of the T steps."""
    total = len(execution.steps)
    quota = total // (c * execution.n)
    counts = {p: 0 for p in range(1, execution.n + 1)}
    for step in execution.steps:
        counts[step.proc] += 1
    return all(counts[p] >= quota for p in counts)


# -- the engine ----------------------------------------------------------


class _SimState:
    """Mutable run state handed to schedule policies for introspection."""

    def __init__(self, n: int):
        self.n = n
        self._pending_block = {p: "send" for p in range(1, n + 1)}
        self._block_serial = {p: 0 for p in range(1, n + 1)}
        self.steps_done = 0

    def pending_block(self, proc: int) -> str:
        return self._pending_block[proc]

    def block_serial(self, proc: int) -> int:
        return self._block_serial[proc]

    def at_boundary(self, proc: int) -> bool:
        return True  # overwritten per-process by the engine


def _process_loop(proc: int, monitor, timed: bool, state: dict):
    """Generator of micro-step requests for one process."""
    op_idx = 0
    while True:
        v = yield ("PICK",)
        yield from monitor.pre(state, proc, v)
        yield ("SEND", v, op_idx)
        if timed:
            entry = (proc, op_idx, v)
            state["_wrap"] = state.get("_wrap", ()) + (entry,)
            yield (WRITE, f"{VIEWS_ARRAY}[{proc}]", state["_wrap"])
            w = yield ("INNER",)
            snap = yield (SNAPSHOT, VIEWS_ARRAY)
            merged: set = set()
            for slot in snap:
                merged.update(slot)
            view = tuple(sorted(merged))
            w, view = yield ("RECEIVE", w, view, op_idx)
        else:
            w, view = yield ("RECEIVE", None, None, op_idx)
        yield from monitor.post(state, proc, v, w, view)
        verdict = yield from monitor.report(state, proc)
        yield ("REPORT", verdict)
        op_idx += 1


def _bounded(gen, bound: int, proc: int, block: str):
    """Enforce a monitor block's declared wait-free step bound."""
    count = 0
    result = None
    try:
        item = next(gen)
        while True:
            count += 1
            if count > bound:
                raise MonitorFaultError(
                    f"p{proc} {block} block exceeded its declared bound of {bound} steps"
                )
            got = yield item
            item = gen.send(got)
    except StopIteration as stop:
        result = stop.value
    return result


def run(
    monitor,
    adversary,
    policy: SchedulePolicy,
    horizon: int,
    config: dict,
    settle: bool = True,
) -> Execution:
    """Execute the monitor against the adversary under the schedule.

    Runs exactly `horizon` micro-steps (or until the schedule is exhausted),
    then, when settle is set, lets every process finish its current block so
    the execution ends on block boundaries.
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    n = config["n"]
    timed = bool(getattr(adversary, "timed", False))
    if getattr(monitor, "timed_required", False) and not timed:
        raise ConfigError(f"monitor {monitor.monitor_id!r} requires the timed adversary")

    execution = Execution(config)
    execution.timed = timed
    execution.schedule_desc = policy.desc
    memory = SharedMemory()
    for name, init in monitor.shared_registers(n).items():
        memory.registers[name] = init
    for name, init in monitor.shared_arrays(n).items():
        memory.arrays[name] = [init] * n
    if timed:
        memory.arrays[VIEWS_ARRAY] = [()] * n
    execution._init_regs = dict(memory.registers)
    execution._init_arrays = {k: list(v) for k, v in memory.arrays.items()}

    states = {p: monitor.init_state(p, n) for p in range(1, n + 1)}
    bounds = getattr(monitor, "block_bounds", {"pre": 32, "post": 32, "report": 32})

    class _GuardedMonitor:
        monitor_id = monitor.monitor_id

        def pre(self, st, proc, v):
            return (yield from _bounded(monitor.pre(st, proc, v), bounds["pre"], proc, "pre"))

        def post(self, st, proc, v, w, view):
            return (
                yield from _bounded(
                    monitor.post(st, proc, v, w, view), bounds["post"], proc, "post"
                )
            )

        def report(self, st, proc):
            return (
                yield from _bounded(monitor.report(st, proc), bounds["report"], proc, "report")
            )

    guarded = _GuardedMonitor()
    runners = {p: _process_loop(p, guarded, timed, states[p]) for p in states}
    pending = {p: runners[p].send(None) for p in runners}
    xevents = 0

    sim = _SimState(n)

    def block_of(request: tuple) -> str | None:
        if request[0] == "PICK":
            return "send"
        if request[0] == "INNER" or (request[0] == "RECEIVE" and not timed):
            return "recv"
        return None

    for p in pending:
        sim._pending_block[p] = "send"

    def step_one(p: int) -> None:
        nonlocal xevents
        request = pending[p]
        kind = request[0]
        idx = len(execution.steps)
        result = None
        if kind == "PICK":
            payload = adversary.next_invocation(p)
            execution.steps.append(Step(idx, p, LOCAL, f"pick {payload}"))
            result = payload
        elif kind == WRITE:
            _, reg, value = request
            _mem_write(memory, reg, value)
            execution.steps.append(Step(idx, p, WRITE, f"{reg}={_detail_value(value)}"))
        elif kind == READ:
            _, reg = request
            result = memory.registers[reg]
            execution.steps.append(Step(idx, p, READ, f"{reg} -> {_detail_value(result)}"))
        elif kind == SNAPSHOT:
            _, arr = request
            result = memory.snapshot(arr)
            execution.steps.append(
                Step(idx, p, SNAPSHOT, f"{arr}={_detail_value(result)}")
            )
        elif kind == "SEND":
            _, payload, op_idx = request
            adversary.on_send(p, payload)
            rec = OpRecord(p, op_idx, payload, idx)
            rec.inv_uid = xevents
            xevents += 1
            execution.ops[(p, op_idx)] = rec
            execution.steps.append(Step(idx, p, SEND, payload))
        elif kind == "INNER":
            result = adversary.respond(p)
            execution.steps.append(Step(idx, p, LOCAL, f"inner {result}"))
        elif kind == "RECEIVE":
            _, w, view, op_idx = request
            if not timed:
                w = adversary.respond(p)
                detail = w
            else:
                detail = f"{w} view={_format_view(view)}"
            rec = execution.ops[(p, op_idx)]
            rec.resp_payload = w
            rec.recv_step = idx
            rec.view = view
            rec.resp_uid = xevents
            xevents += 1
            execution.steps.append(Step(idx, p, RECEIVE, detail))
            result = (w, view)
        elif kind == "REPORT":
            _, verdict = request
            execution.steps.append(Step(idx, p, REPORT, verdict))
            execution.reports[p].append((idx, verdict))
        else:
            raise DrvError(f"unknown micro-step request {request!r}")
        sim.steps_done += 1
        nxt = runners[p].send(result)
        pending[p] = nxt
        blk = block_of(nxt)
        if blk is not None:
            sim._pending_block[p] = blk
            sim._block_serial[p] += 1

    while len(execution.steps) < horizon:
        p = policy.next(sim)
        if p is None:
            break
        step_one(p)
    if settle:
        for p in sorted(runners):
            while block_of(pending[p]) is None:
                step_one(p)
    return execution


def _mem_write(memory: SharedMemory, reg: str, value) -> None:
    if "[" in reg:
        arr, idx = reg[:-1].split("[")
        memory.arrays[arr][int(idx) - 1] = value
    else:
        memory.registers[reg] = value


def _detail_value(value) -> str:
    return ser(value)


# -- indistinguishability -------------------------------------------------


def indistinguishable(e1: Execution, e2: Execution, proc: int | None = None):
    """Per-process (or global) equality of local observation sequences."""
    if e1.monitor_id != e2.monitor_id or e1.n != e2.n:
        raise DrvError("executions of different algorithms are not comparable")
    if proc is not None:
        return e1.local_trace(proc) == e2.local_trace(proc)
    return all(e1.local_trace(p) == e2.local_trace(p) for p in range(1, e1.n + 1))


def local_trace(execution: Execution, proc: int) -> tuple:
    return execution.local_trace(proc)


def input_word(execution: Execution) -> Word:
    return execution.input_word()


# -- trace file parsing ----------------------------------------------------


@dataclass(frozen=True)
class TraceFile:
    n: int
    seed: int
    horizon: int
    entries: tuple[tuple[int, int, str, str], ...]


_TRACE_KINDS = {LOCAL, WRITE, READ, SNAPSHOT, SEND, RECEIVE, REPORT}


def parse_trace(text: str) -> TraceFile:
    from .errors import WordFormatError

    lines = text.splitlines()
    if not lines or not lines[0].startswith("#drvtrace v1 "):
        raise WordFormatError(1, "missing #drvtrace v1 header")
    fields = dict(kv.split("=") for kv in lines[0].split()[2:])
    try:
        n = int(fields["n"])
        seed = int(fields["seed"])
        horizon = int(fields["horizon"])
    except (KeyError, ValueError):
        raise WordFormatError(1, "header must carry n=, seed=, horizon=") from None
    entries = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise WordFormatError(line_no, f"expected 4 tab-separated fields, got {len(parts)}")
        try:
            idx, proc = int(parts[0]), int(parts[1])
        except ValueError:
            raise WordFormatError(line_no, "stepIndex and proc must be integers") from None
        kind = parts[2]
        if kind not in _TRACE_KINDS:
            raise WordFormatError(line_no, f"unknown step kind {kind!r}")
        if idx != len(entries):
            raise WordFormatError(line_no, f"stepIndex {idx} out of order")
        if not 1 <= proc <= n:
            raise WordFormatError(line_no, f"proc {proc} out of range 1..{n}")
        entries.append((idx, proc, kind, parts[3]))
    return TraceFile(n, seed, horizon, tuple(entries))


def trace_input_word(trace: TraceFile) -> Word:
    symbols = []
    for _, proc, kind, detail in trace.entries:
        if kind == SEND:
            symbols.append(Symbol(len(symbols), proc, INV, detail))
        elif kind == RECEIVE:
            symbols.append(Symbol(len(symbols), proc, RESP, detail.split(" view=", 1)[0]))
    return Word(tuple(symbols), trace.n)
