"""Job configuration: a single JSON document validated against a JSON schema."""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .diagnostics import SearchConfig
from .errors import ConfigError
from .evaluation import TransformPolicy
from .grouping import AttributeSchema, GroupStructure
from .reconciliation import canonical_method

__all__ = ["JobConfig", "config_schema", "load_config", "parse_config"]


def config_schema() -> dict:
    """The JSON schema every job configuration must satisfy."""
    text = resources.files("groupcast").joinpath("data/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _date(text):
    if text is None:
        return None
    try:
        return _dt.date.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"invalid ISO date {text!r}") from None


@dataclass(frozen=True)
class JobConfig:
    """Everything one pipeline run needs apart from the data file."""

    schema: AttributeSchema
    levels: tuple
    season: int
    h: int
    methods: tuple
    calendar_start: _dt.date | None = None
    week_start: str = "sunday"
    weeks: int | None = None
    train_end: _dt.date | None = None
    train_length: int | None = None
    transform: TransformPolicy = field(default_factory=TransformPolicy)
    per_node: dict = field(default_factory=dict)
    search: SearchConfig = field(default_factory=SearchConfig)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.h < 1:
            raise ConfigError(f"horizon h must be >= 1, got {self.h}")
        if self.season < 1:
            raise ConfigError(f"season must be >= 1, got {self.season}")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.train_length is not None and self.train_length < 1:
            raise ConfigError("train_length must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        try:
            methods = tuple(dict.fromkeys(canonical_method(m) for m in self.methods))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "levels", tuple(tuple(lv) for lv in self.levels))
        for lv in self.levels:
            for name in lv:
                if name not in self.schema.names:
                    raise ConfigError(f"level {list(lv)} names unknown attribute {name!r}")

    def policy_for(self, label: str) -> TransformPolicy:
        return self.per_node.get(label, self.transform)

    def policies(self, structure: GroupStructure) -> list:
        labels = [k.label() for k in structure.nodes]
        unknown = sorted(set(self.per_node) - set(labels))
        if unknown:
            raise ConfigError(f"per-node transform given for unknown node(s) {unknown}")
        return [self.policy_for(lb) for lb in labels]

    def with_overrides(self, methods=None, shift=None, seed=None, jobs=None) -> "JobConfig":
        """Copy with command-line overrides applied (None leaves a field alone)."""
        out = self
        if methods:
            out = replace(out, methods=tuple(methods))
        if shift is not None:
            if shift < 0:
                raise ConfigError("shift must be >= 0")
            out = replace(out, transform=TransformPolicy(out.transform.kind, float(shift)))
        if seed is not None:
            out = replace(out, seed=int(seed))
        if jobs is not None:
            out = replace(out, jobs=int(jobs))
        return out

    def to_dict(self) -> dict:
        cal = {"week_start": self.week_start}
        if self.calendar_start is not None:
            cal["start"] = self.calendar_start.isoformat()
        if self.weeks is not None:
            cal["weeks"] = self.weeks
        split = {"h": self.h}
        if self.train_end is not None:
            split["train_end"] = self.train_end.isoformat()
        if self.train_length is not None:
            split["train_length"] = self.train_length
        transform = {"kind": self.transform.kind, "shift": self.transform.shift}
        if self.per_node:
            transform["per_node"] = {k: {"kind": p.kind, "shift": p.shift} for k, p in self.per_node.items()}
        sc = self.search
        return {
            "schema": self.schema.to_dict(),
            "levels": [list(lv) for lv in self.levels],
            "calendar": cal,
            "season": self.season,
            "split": split,
            "transform": transform,
            "search": {"max_p": sc.max_p, "max_q": sc.max_q, "max_P": sc.max_P, "max_Q": sc.max_Q,
                       "criterion": sc.criterion, "d": sc.d, "D": sc.D,
                       "include_intercept": sc.include_intercept},
            "methods": list(self.methods),
            "seed": self.seed,
            "jobs": self.jobs,
        }


def parse_config(data: dict) -> JobConfig:
    """Validate a decoded JSON document and build a :class:`JobConfig`.

    Raises
    ------
    ConfigError
        Schema violations (with the offending path) or inconsistent values.
    """
    try:
        jsonschema.validate(data, config_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    try:
        schema = AttributeSchema.from_dict(data["schema"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cal = data.get("calendar", {})
    split = data["split"]
    tr = data.get("transform", {})
    base = TransformPolicy(tr.get("kind", "none"), float(tr.get("shift", 0.0)))
    per_node = {
        label: TransformPolicy(p.get("kind", base.kind), float(p.get("shift", base.shift)))
        for label, p in tr.get("per_node", {}).items()
    }
    return JobConfig(
        schema=schema,
        levels=tuple(tuple(lv) for lv in data["levels"]),
        season=int(data["season"]),
        h=int(split["h"]),
        methods=tuple(data["methods"]),
        calendar_start=_date(cal.get("start")),
        week_start=cal.get("week_start", "sunday"),
        weeks=cal.get("weeks"),
        train_end=_date(split.get("train_end")),
        train_length=split.get("train_length"),
        transform=base,
        per_node=per_node,
        search=SearchConfig(**data.get("search", {})),
        seed=int(data.get("seed", 0)),
        jobs=int(data.get("jobs", 1)),
    )


def load_config(path) -> JobConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name}: not valid JSON ({exc})") from None
    return parse_config(data)
