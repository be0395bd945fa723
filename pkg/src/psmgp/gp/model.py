"""Model files: a ``#``-prefixed ``key: value`` header followed by the tree
as one s-expression line.

    # psmgp-model 1
    # seed: 7
    # population_size: 300
    ...
    # train_rss: 0.4213
    # test_rss: 0.4502
    (add (mul 2.0 f2) f1)

Floats are written with ``repr`` so files round-trip exactly.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from ..errors import ParseError
from .evolve import GPConfig, ScoringModel
from .tree import ExpressionTree

MAGIC = "psmgp-model 1"


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def format_model(model: ScoringModel, extra: dict | None = None) -> str:
    lines = [f"# {MAGIC}"]
    for f in fields(GPConfig):
        lines.append(f"# {f.name}: {_fmt(getattr(model.config, f.name))}")
    lines.append(f"# features: {' '.join(model.feature_schema)}")
    lines.append(f"# train_rss: {_fmt(model.train_rss)}")
    lines.append(f"# test_rss: {_fmt(model.test_rss)}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {_fmt(value)}")
    lines.append(model.tree.to_sexpr())
    return "\n".join(lines) + "\n"


def parse_model(text: str, source=None) -> ScoringModel:
    header = {}
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            content = line[1:].strip()
            if content == MAGIC:
                continue
            if ":" not in content:
                raise ParseError(f"bad header line {raw!r}", line=lineno, source=source)
            key, value = content.split(":", 1)
            header[key.strip()] = value.strip()
        else:
            body.append(line)
    if not body:
        raise ParseError("model file has no expression", source=source)
    try:
        tree = ExpressionTree.from_sexpr(" ".join(body))
    except ParseError as e:
        raise ParseError(f"bad expression: {e}", source=source) from None

    kwargs = {}
    for f in fields(GPConfig):
        if f.name not in header:
            continue
        raw = header[f.name]
        try:
            if f.name == "constant_range":
                kwargs[f.name] = tuple(float(x) for x in raw.split())
            elif isinstance(f.default, float):
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = int(raw)
        except ValueError:
            raise ParseError(f"bad value for {f.name}: {raw!r}", source=source) from None
    cfg = GPConfig(**kwargs)
    schema = tuple(header.get("features", " ".join(f"f{i}" for i in range(1, 12))).split())

    def num(key):
        v = header.get(key, "NA")
        return None if v == "NA" else float(v)

    return ScoringModel(tree, num("train_rss"), num("test_rss"), cfg, schema)


def write_model(model: ScoringModel, path, extra: dict | None = None) -> None:
    Path(path).write_text(format_model(model, extra), encoding="utf-8")


def read_model(path) -> ScoringModel:
    return parse_model(Path(path).read_text(encoding="utf-8"), source=str(path))
