"""YAML experiment configs: schema checking, line diagnostics, number expressions."""

from __future__ import annotations

import ast
import hashlib
import json
import math
import operator
from typing import Any

import yaml


class ConfigError(ValueError):
    """Invalid configuration; the message carries the key path and line."""


_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin,
          "cos": math.cos, "tan": math.tan, "abs": abs}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_expr(text: str) -> float:
    """Evaluate arithmetic such as ``"sqrt(2)"`` or ``"1/3 + pi"``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _CONSTS:
            return _CONSTS[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")
    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from None


# ---------------------------------------------------------------------------
# loading with line numbers

class _Doc:
    """Parsed YAML value plus the source line of every key path."""

    def __init__(self, data, lines: dict):
        self.data = data
        self.lines = lines

    def where(self, path: tuple) -> str:
        for cut in range(len(path), -1, -1):
            if path[:cut] in self.lines:
                return f" (line {self.lines[path[:cut]]})"
        return ""


def _to_python(node, path: tuple, lines: dict):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for knode, vnode in node.value:
            key = yaml.safe_load(yaml.serialize(knode))
            if key in out:
                raise ConfigError(f"duplicate key {'.'.join(map(str, path + (key,)))} "
                                  f"(line {knode.start_mark.line + 1})")
            out[key] = _to_python(vnode, path + (key,), lines)
            lines[path + (key,)] = knode.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, path + (i,), lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def load_config_text(text: str) -> _Doc:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML syntax error: {exc}") from None
    lines: dict = {}
    data = {} if node is None else _to_python(node, (), lines)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    return _Doc(data, lines)


def load_config(path) -> _Doc:
    try:
        with open(path) as fh:
            return load_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


# ---------------------------------------------------------------------------
# schema

ANY = object()


def check_schema(doc: _Doc, schema: dict) -> None:
    """Reject unknown keys.  ``schema`` maps keys to nested schemas or ``ANY``."""
    def walk(value, sch, path):
        if sch is ANY or not isinstance(value, dict):
            return
        for key, sub in value.items():
            if key not in sch:
                allowed = ", ".join(sorted(map(str, sch)))
                raise ConfigError(f"unknown key '{'.'.join(map(str, path + (key,)))}'"
                                  f"{doc.where(path + (key,))}; allowed here: {allowed}")
            walk(sub, sch[key], path + (key,))
    walk(doc.data, schema, ())


class Section:
    """Typed accessors that report the failing key path and line."""

    def __init__(self, doc: _Doc, path: tuple = ()):
        self.doc = doc
        self.path = path
        node = doc.data
        for p in path:
            node = node.get(p, {}) if isinstance(node, dict) else {}
        if not isinstance(node, dict):
            raise ConfigError(f"'{'.'.join(path)}' must be a mapping{doc.where(path)}")
        self.node = node

    def sub(self, key: str) -> "Section":
        return Section(self.doc, self.path + (key,))

    def __contains__(self, key) -> bool:
        return key in self.node

    def _fail(self, key, msg):
        p = self.path + (key,)
        raise ConfigError(f"'{'.'.join(map(str, p))}': {msg}{self.doc.where(p)}")

    def raw(self, key, default=None):
        return self.node.get(key, default)

    def number(self, key, default=None, positive=False):
        v = self.node.get(key, default)
        if v is None:
            self._fail(key, "required number missing")
        try:
            x = to_number(v)
        except ValueError as exc:
            self._fail(key, str(exc))
        if positive and not x > 0:
            self._fail(key, f"must be positive, got {x}")
        return x

    def integer(self, key, default=None, minimum=None):
        v = self.node.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            self._fail(key, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self._fail(key, f"must be >= {minimum}, got {v}")
        return v

    def numbers(self, key, default=None):
        v = self.node.get(key, default)
        if not isinstance(v, list) or not v:
            self._fail(key, f"expected a nonempty list, got {v!r}")
        try:
            return [to_number(x) for x in v]
        except ValueError as exc:
            self._fail(key, str(exc))

    def choice(self, key, options, default=None):
        v = self.node.get(key, default)
        if v not in options:
            self._fail(key, f"expected one of {list(options)}, got {v!r}")
        return v

    def string(self, key, default=None):
        v = self.node.get(key, default)
        if not isinstance(v, str):
            self._fail(key, f"expected a string, got {v!r}")
        return v


def to_number(v) -> float:
    if isinstance(v, bool):
        raise ValueError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        return eval_expr(v)
    raise ValueError(f"expected a number, got {v!r}")


def to_complex(v) -> complex:
    """A number, an expression string, or a ``[re, im]`` pair."""
    if isinstance(v, list):
        if len(v) != 2:
            raise ValueError(f"complex coefficient must be [re, im], got {v!r}")
        return complex(to_number(v[0]), to_number(v[1]))
    return complex(to_number(v))


def config_hash(resolved: Any) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()
