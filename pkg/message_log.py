from __future__ import annotations

import logging
import textwrap
from typing import Iterable, Sequence

from config import Config

logger = logging.getLogger(__name__)


class Message:
    def __init__(self, text: str, stage: str):
        self.plain_text = text
        self.stage = stage
        self.count = 1

    @property
    def full_text(self) -> str:
        """`[stage] text`, suffixed with `(xN)` once the message has repeated."""
        text = f"[{self.stage}] {self.plain_text}"
        if self.count > 1:
            return f"{text} (x{self.count})"
        return text


class RunLog:
    """Stage-tagged record of one pipeline run, kept for the run report and run_log.txt."""

    def __init__(self) -> None:
        self.messages: list[Message] = []

    def add_message(self, text: str, stage: str = "pipeline", *, stack: bool = True) -> None:
        """Record `text` under `stage` and forward it to the module logger.

        A message equal to the previous one from the same stage only bumps
        that message's count unless `stack` is False.
        """
        logger.info("[%s] %s", stage, text)
        last = self.messages[-1] if self.messages else None
        if stack and last is not None and text == last.plain_text and stage == last.stage:
            last.count += 1
        else:
            self.messages.append(Message(text, stage))

    def render(self, width: int = Config.log_width) -> list[str]:
        return self.render_messages(width, self.messages)

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(line + "\n" for line in self.render())

    @staticmethod
    def wrap(string: str, width: int) -> Iterable[str]:
        """Lines of at most `width` characters; continuation lines are indented."""
        for line in string.splitlines():
            yield from textwrap.wrap(line, width, expand_tabs=True, subsequent_indent="    ")

    @classmethod
    def render_messages(cls, width: int, messages: Sequence[Message]) -> list[str]:
        """Report lines for `messages` in the order the run produced them."""
        lines: list[str] = []
        for message in messages:
            lines.extend(cls.wrap(message.full_text, width))
        return lines
