"""Sequential specifications for the register, ledger, and counter objects.

A spec is total and deterministic: every invocation is legal in every state
and determines exactly one (response, next state) pair.  States are hashable
values so search memoization can key on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

State = object
StepFn = Callable[[State, str], tuple[str, State]]

#: invocation payload heads that change object state
MUTATOR_HEADS = ("write:", "append:", "inc")


def is_mutator(inv_payload: str) -> bool:
    return inv_payload.startswith(("write:", "append:")) or inv_payload == "inc"


@dataclass(frozen=True)
class SequentialSpec:
    object_id: str  # register | ledger | counter
    initial: State
    step_fn: StepFn
    inv_payloads: tuple[str, ...]  # alphabet heads for validation

    def step(self, state: State, inv_payload: str) -> tuple[str, State]:
        """Return the unique legal (response payload, next state)."""
        return self.step_fn(state, inv_payload)


def _register_step(state: State, inv: str) -> tuple[str, State]:
    if inv.startswith("write:"):
        return "ok", int(inv[6:])
    if inv == "read":
        return f"val:{state}", state
    raise ValueError(f"register does not accept {inv!r}")


def _counter_step(state: State, inv: str) -> tuple[str, State]:
    if inv == "inc":
        return "ok", state + 1
    if inv == "read":
        return f"val:{state}", state
    raise ValueError(f"counter does not accept {inv!r}")


def _ledger_step(state: State, inv: str) -> tuple[str, State]:
    if inv.startswith("append:"):
        return "ok", state + (inv[7:],)
    if inv == "get":
        return "list:" + ".".join(state), state
    raise ValueError(f"ledger does not accept {inv!r}")


def register_spec() -> SequentialSpec:
    return SequentialSpec("register", 0, _register_step, ("write:", "read"))


def counter_spec() -> SequentialSpec:
    return SequentialSpec("counter", 0, _counter_step, ("inc", "read"))


def ledger_spec() -> SequentialSpec:
    return SequentialSpec("ledger", (), _ledger_step, ("append:", "get"))


def spec_by_id(object_id: str) -> SequentialSpec:
    try:
        return {"register": register_spec, "counter": counter_spec, "ledger": ledger_spec}[
            object_id
        ]()
    except KeyError:
        raise ValueError(f"unknown object id {object_id!r}") from None


def parse_list_payload(payload: str) -> tuple[str, ...]:
    """Records of a `list:` response; `list:` alone is the empty ledger."""
    body = payload[5:]
    return tuple(body.split(".")) if body else ()


def parse_val_payload(payload: str) -> int:
    return int(payload[4:])
