"""Pipeline configuration files (YAML).

Example::

    dim: 2
    base:
      kind: euclidean          # or m_root with ``m: 4``
      matrix: [[1, 0], [0, 1]] # optional, identity by default
    deformations:
      - phi: "1+s1"            # expression, or a builtin name ("kropina:1")
        betas: [[0.5, 0]]
      - builtin: quadratic     # equivalent spelling with explicit params
        params: []
        betas: [[0, 0.2]]
    analysis:
      thresholds: {euclidean: 1.0e-9}
    sampling:
      resolution: 2048
      seed: 0
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import yaml

from . import phi as phis
from .errors import InputError, InvalidParam, PhiSyntaxError
from .norms import DeformationSpec, Deformed, Euclidean, MRoot
from .sampling import DEFAULT_SAMPLES


class ConfigError(InputError):
    """Malformed configuration; ``where`` names the offending key or file position."""

    def __init__(self, message, where=""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass
class DeformationEntry:
    phi: str
    betas: list
    params: Optional[list] = None

    def phi_text(self):
        if self.params is not None:
            return f"{self.phi}:" + ",".join(repr(float(p)) for p in self.params)
        return self.phi

    def build(self, where=""):
        p = len(self.betas)
        try:
            e = phis.from_text(self.phi_text(), p)
        except PhiSyntaxError as exc:
            raise ConfigError(str(exc), f"{where}.phi") from exc
        except (InputError, ValueError) as exc:
            raise ConfigError(str(exc), f"{where}.phi") from exc
        try:
            return DeformationSpec(np.array(self.betas, dtype=float), e)
        except (InputError, ValueError) as exc:
            raise ConfigError(str(exc), f"{where}.betas") from exc

    def to_dict(self):
        out = {"phi": self.phi} if self.params is None else {"builtin": self.phi, "params": list(self.params)}
        out["betas"] = [list(r) for r in self.betas]
        return out


@dataclass
class PipelineConfig:
    dim: int
    base_kind: str = "euclidean"
    matrix: Optional[list] = None
    m: Optional[int] = None
    deformations: List[DeformationEntry] = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)
    resolution: int = DEFAULT_SAMPLES
    seed: int = 0

    def base_norm(self):
        if self.base_kind == "euclidean":
            A = np.eye(self.dim) if self.matrix is None else np.array(self.matrix, dtype=float)
            if A.shape != (self.dim, self.dim):
                raise ConfigError(f"matrix must be {self.dim}x{self.dim}", "base.matrix")
            try:
                return Euclidean(A)
            except InvalidParam as exc:
                raise ConfigError(str(exc), "base.matrix") from exc
        return MRoot(self.m, self.dim)

    def specs(self):
        return [d.build(f"deformations[{i}]") for i, d in enumerate(self.deformations)]

    def chain(self):
        """The base norm followed by every intermediate deformed norm."""
        norms = [self.base_norm()]
        for i, spec in enumerate(self.specs()):
            if spec.dim != self.dim:
                raise ConfigError(f"1-forms must have {self.dim} components",
                                  f"deformations[{i}].betas")
            norms.append(Deformed(norms[-1], spec))
        return norms

    def norm(self):
        return self.chain()[-1]

    def to_dict(self):
        base = {"kind": self.base_kind}
        if self.base_kind == "euclidean" and self.matrix is not None:
            base["matrix"] = [list(r) for r in self.matrix]
        if self.base_kind == "m_root":
            base["m"] = self.m
        out = {"dim": self.dim, "base": base,
               "deformations": [d.to_dict() for d in self.deformations],
               "sampling": {"resolution": self.resolution, "seed": self.seed}}
        if self.thresholds:
            out["analysis"] = {"thresholds": dict(self.thresholds)}
        return out


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing key {key!r}", where or "<root>")
    return mapping[key]


def _number_rows(rows, where):
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError("expected a list of rows", where)
    try:
        return [[float(x) for x in r] for r in rows]
    except (TypeError, ValueError):
        raise ConfigError("entries must be numbers", where) from None


def from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", "<root>")
    unknown = set(data) - {"dim", "base", "deformations", "analysis", "sampling"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "<root>")
    dim = _require(data, "dim", "")
    if not isinstance(dim, int) or dim < 2:
        raise ConfigError("dim must be an integer >= 2", "dim")
    base = _require(data, "base", "")
    kind = _require(base, "kind", "base")
    cfg = PipelineConfig(dim=dim, base_kind=kind)
    if kind == "euclidean":
        if "matrix" in base:
            cfg.matrix = _number_rows(base["matrix"], "base.matrix")
    elif kind == "m_root":
        m = _require(base, "m", "base")
        if not isinstance(m, int) or m < 2:
            raise ConfigError("m must be an integer >= 2", "base.m")
        cfg.m = m
    else:
        raise ConfigError(f"unknown base kind {kind!r}", "base.kind")

    for i, entry in enumerate(data.get("deformations") or []):
        where = f"deformations[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError("expected a mapping", where)
        betas = _number_rows(_require(entry, "betas", where), f"{where}.betas")
        if "builtin" in entry:
            params = entry.get("params") or []
            if not isinstance(params, list):
                raise ConfigError("params must be a list", f"{where}.params")
            d = DeformationEntry(str(entry["builtin"]), betas, [float(p) for p in params])
        else:
            d = DeformationEntry(str(_require(entry, "phi", where)), betas)
        cfg.deformations.append(d)
    analysis = data.get("analysis") or {}
    cfg.thresholds = {str(k): float(v) for k, v in (analysis.get("thresholds") or {}).items()}
    sampling = data.get("sampling") or {}
    cfg.resolution = int(sampling.get("resolution", DEFAULT_SAMPLES))
    cfg.seed = int(sampling.get("seed", 0))
    if cfg.resolution < 1:
        raise ConfigError("resolution must be positive", "sampling.resolution")
    # build once so that bad phis and betas surface at load time
    cfg.chain()
    return cfg


def loads(text, source="<config>"):
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(exc.problem or str(exc), where) from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(exc), source) from None
    return from_dict(data)


def load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from None
    return loads(text, str(path))


def dumps(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
