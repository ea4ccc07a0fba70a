"""File helpers: atomic JSON writes and scenario documents with controller blocks."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import List

from .controller import ControllerSpec
from .scenario import Scenario


def dumps(obj) -> str:
    """Canonical JSON text (fixed key order, trailing newline)."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and an atomic rename.

    Readers see either the old file or the complete new one, never a prefix.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_json(path, obj) -> None:
    write_text(path, dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@dataclass
class ScenarioFile:
    """A scenario plus the optional blocks a scenario document may carry.

    ``controllers`` comes from ``"controllers"`` (a list) or ``"controller"``
    (a single block) and defaults to one noiseless straight-line controller.
    ``planner`` holds suggested build parameters such as ``n``.
    """

    scenario: Scenario
    controllers: List[ControllerSpec] = field(default_factory=lambda: [ControllerSpec()])
    planner: dict = field(default_factory=dict)

    @property
    def controller(self) -> ControllerSpec:
        return self.controllers[0]

    def to_dict(self) -> dict:
        d = self.scenario.to_dict()
        if len(self.controllers) == 1:
            d["controller"] = self.controllers[0].to_dict()
        else:
            d["controllers"] = [c.to_dict() for c in self.controllers]
        if self.planner:
            d["planner"] = dict(self.planner)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioFile":
        if not isinstance(d, dict):
            raise ValueError("a scenario document must be a JSON object")
        scenario = Scenario.from_dict(d)
        if "controllers" in d:
            controllers = [ControllerSpec.from_dict(c) for c in d["controllers"]]
            if not controllers:
                raise ValueError("'controllers' must not be empty")
        else:
            controllers = [ControllerSpec.from_dict(d.get("controller"))]
        return cls(scenario, controllers, dict(d.get("planner") or {}))


def load_scenario(path) -> ScenarioFile:
    """Parse and validate a scenario document.

    ``OSError`` propagates for unreadable files; malformed content raises
    ``ValueError`` (``KeyError``/``TypeError`` are converted).
    """
    d = read_json(path)
    try:
        return ScenarioFile.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scenario document: {exc!r}") from None
