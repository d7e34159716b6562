"""Run configuration: schema, parsing of JSON or ``key = value`` text, and
canonical hashing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

EXPERIMENTS = ("density", "locallaw", "rigidity", "deloc", "identities", "decompose", "flow",
               "gaps", "correlations", "repulsion", "graphsum")
LAWS = ("bernoulli", "gaussian")

# per-experiment defaults; anything not listed falls back to the field default
PRESETS = {
    "density": {"n": 1000},
    "locallaw": {"n": 1000, "trials": 10},
    "rigidity": {"n": 1000, "trials": 20},
    "deloc": {"n": 1000, "trials": 20},
    "identities": {"n": 200, "trials": 50},
    "decompose": {"n": 100, "trials": 500},
    "flow": {"n": 100, "trials": 500},
    "gaps": {"n": 1000, "trials": 200},
    "correlations": {"n": 1000, "trials": 300},
    "repulsion": {"n": 500, "trials": 2000, "q_exp": 0.4},
    "graphsum": {"n": 60, "trials": 50},
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int
    n: int = 1000
    q_exp: float = 0.35
    law: str = "bernoulli"
    nu: float = 0.1
    trials: int = 10
    L: float = 5.0
    kappa: float = 0.1
    tau: float = 0.2
    epsilon: float = 0.3
    eta: float = 0.5
    half_width: float = 0.25
    e_center: float = 0.0
    cov_n: int = 5
    cov_samples: int = 200000
    graphs: int = 50
    output_dir: str = "laprmt-out"
    threads: int | str | None = None  # None: $LAPRMT_THREADS, else 1

    def canonical(self) -> dict:
        return asdict(self)

    def provenance(self) -> dict:
        """Fields that determine results; thread count and paths do not."""
        d = self.canonical()
        d.pop("threads")
        d.pop("output_dir")
        return d

    def digest(self) -> str:
        text = json.dumps(self.provenance(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def echo(self) -> str:
        return "\n".join(f"{k} = {json.dumps(v)}" for k, v in self.canonical().items() if v is not None)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT = {"seed", "n", "trials", "cov_n", "cov_samples", "graphs"}
_FLOAT = {"q_exp", "nu", "L", "kappa", "tau", "epsilon", "eta", "half_width", "e_center"}
_ALIASES = {"q-exp": "q_exp", "l": "L", "out": "output_dir", "half-width": "half_width",
            "e-center": "e_center", "cov-n": "cov_n", "cov-samples": "cov_samples", "output-dir": "output_dir"}


def _range_errors(key: str, v) -> str | None:
    if key == "seed" and not 0 <= v < 2 ** 64:
        return "seed must be an unsigned 64-bit integer"
    if key == "n" and v < 2:
        return "n must be >= 2"
    if key == "q_exp" and not 0 < v <= 0.5:
        return "q_exp must lie in (0, 1/2]: the model requires N^beta <= q <= N^(1/2)"
    if key == "nu" and not 0 < v < 0.5:
        return "nu must lie in (0, 1/2)"
    if key in ("trials", "cov_n", "cov_samples", "graphs") and v < 1:
        return f"{key} must be >= 1"
    if key == "L" and v <= 0:
        return "L must be positive"
    if key == "kappa" and not 0 < v < 0.5:
        return "kappa must lie in (0, 1/2)"
    if key in ("tau", "epsilon") and not 0 < v < 1:
        return f"{key} must lie in (0, 1)"
    if key in ("eta", "half_width") and v <= 0:
        return f"{key} must be positive"
    if key == "experiment" and v not in EXPERIMENTS:
        return f"unknown experiment {v!r}; expected one of {', '.join(EXPERIMENTS)}"
    if key == "law" and v not in LAWS:
        return f"law must be one of {', '.join(LAWS)}"
    if key == "threads" and not (v == "auto" or (isinstance(v, int) and v >= 1)):
        return "threads must be a positive integer or 'auto'"
    return None


def _coerce(key: str, v):
    if key in _INT:
        if isinstance(v, bool) or not isinstance(v, int):
            if isinstance(v, float) and v.is_integer():
                return int(v)
            raise TypeError(f"{key} must be an integer")
        return v
    if key in _FLOAT:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeError(f"{key} must be a number")
        return float(v)
    if key == "threads":
        if isinstance(v, str) and v.strip().lower() == "auto":
            return "auto"
        if isinstance(v, str) and v.strip().isdigit():
            return int(v)
        if isinstance(v, int) and not isinstance(v, bool):
            return v
        raise TypeError("threads must be a positive integer or 'auto'")
    if not isinstance(v, str):
        raise TypeError(f"{key} must be a string")
    return v


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip("'")


def _pairs(text: str) -> tuple[list[tuple[int, str, object]], list[str]]:
    """(line, key, value) triples plus syntax errors."""
    errors: list[str] = []
    out: list[tuple[int, str, object]] = []
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text, object_pairs_hook=list)
        except json.JSONDecodeError as exc:
            return [], [f"line {exc.lineno}: invalid JSON: {exc.msg}"]
        lines = text.splitlines()
        for key, val in obj:
            line = next((i + 1 for i, s in enumerate(lines) if f'"{key}"' in s), 0)
            out.append((line, key, val))
        return out, errors
    for no, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            errors.append(f"line {no}: expected 'key = value'")
            continue
        key, raw = s.split("=", 1)
        out.append((no, key.strip(), _parse_value(raw)))
    return out, errors


def build_config(pairs, base: dict | None = None) -> RunConfig:
    """Validate (line, key, value) triples; ``line`` may be None for flags."""
    errors: list[str] = []
    values: dict = dict(base or {})
    seen: dict[str, int | None] = {}
    for line, key, val in pairs:
        where = f"line {line}: " if line else ""
        key = _ALIASES.get(key, key)
        if key not in _FIELDS:
            errors.append(f"{where}unknown key {key!r}")
            continue
        if key in seen and line:
            errors.append(f"{where}duplicate key {key!r}")
        seen[key] = line
        try:
            v = _coerce(key, val)
        except TypeError as exc:
            errors.append(f"{where}{exc}")
            continue
        msg = _range_errors(key, v)
        if msg:
            errors.append(f"{where}{msg}")
            continue
        values[key] = v
    for req in ("experiment", "seed"):
        if req not in values and not any(req in e for e in errors):
            errors.append(f"missing required field {req!r}")
    if errors:
        raise ConfigError(errors)
    preset = PRESETS[values["experiment"]]
    merged = {**preset, **values}
    return RunConfig(**merged)


def validate_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse a config text; ``overrides`` (e.g. command-line flags) win."""
    pairs, errors = _pairs(text)
    extra = [(None, k, v) for k, v in (overrides or {}).items() if v is not None]
    if errors:
        raise ConfigError(errors)
    # overrides come last so they replace file values
    return build_config(pairs + extra)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read())
