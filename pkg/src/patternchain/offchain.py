"""In-memory message bus between off-chain actors.

Nothing sent here ever touches the chain. Scenario traces record each
message so key exchanges and channel updates stay auditable.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Message:
    seq: int
    sender: str
    recipient: str
    kind: str
    payload: object


class Bus:
    def __init__(self):
        self.messages: list[Message] = []
        self.observers = []

    def send(self, sender: str, recipient: str, kind: str, payload) -> Message:
        msg = Message(len(self.messages), sender, recipient, kind, payload)
        self.messages.append(msg)
        for observer in self.observers:
            observer(msg)
        return msg

    def inbox(self, recipient: str, kind: str | None = None) -> list[Message]:
        return [m for m in self.messages
                if m.recipient == recipient and (kind is None or m.kind == kind)]

    def latest(self, recipient: str, kind: str) -> Message | None:
        box = self.inbox(recipient, kind)
        return box[-1] if box else None
