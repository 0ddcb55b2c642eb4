"""Metered in-process channel between the receiver R and the sender S."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

R_TO_S = "R->S"
S_TO_R = "S->R"


@dataclass(frozen=True)
class Message:
    index: int
    phase: str          # "setup" or "main"
    direction: str
    tag: str
    payload: bytes
    ciphertexts: int

    @property
    def nbytes(self) -> int:
        return len(self.payload)


@dataclass
class Transcript:
    messages: list[Message] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    flags: set = field(default_factory=set)

    def main_messages(self) -> list[Message]:
        return [m for m in self.messages if m.phase == "main"]

    @property
    def rounds(self) -> int:
        """Maximal runs of same-direction messages after setup."""
        runs, last = 0, None
        for m in self.main_messages():
            if m.direction != last:
                runs += 1
                last = m.direction
        return runs

    @property
    def setup_round_trips(self) -> int:
        dirs = [m.direction for m in self.messages if m.phase == "setup"]
        return sum(1 for a, b in zip(dirs, dirs[1:]) if a == R_TO_S and b == S_TO_R)

    @property
    def total_bytes(self) -> int:
        return sum(m.nbytes for m in self.messages)

    @property
    def total_ciphertexts(self) -> int:
        return sum(m.ciphertexts for m in self.messages)

    def tags(self) -> list[str]:
        return [m.tag for m in self.messages]

    def find(self, tag: str) -> Optional[Message]:
        return next((m for m in self.messages if m.tag == tag), None)

    def add(self, key: str, amount: int) -> None:
        self.counters[key] = self.counters.get(key, 0) + amount

    def to_bytes(self) -> bytes:
        out = bytearray()
        for m in self.messages:
            head = f"{m.index}|{m.phase}|{m.direction}|{m.tag}|{m.nbytes}|{m.ciphertexts}\n"
            out += head.encode() + m.payload
        return bytes(out)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


class Channel:
    """Records each message, then hands the same bytes to the peer."""

    def __init__(self, transcript: Optional[Transcript] = None):
        self.transcript = transcript if transcript is not None else Transcript()

    def send(self, direction: str, tag: str, payload: bytes, *,
             phase: str = "main", ciphertexts: int = 0) -> bytes:
        if direction not in (R_TO_S, S_TO_R):
            raise ValueError(f"unknown direction {direction!r}")
        payload = bytes(payload)
        self.transcript.messages.append(
            Message(len(self.transcript.messages), phase, direction, tag, payload, ciphertexts))
        return payload
