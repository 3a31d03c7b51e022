"""Scalar observables on state space and named collections of them.

An observable maps an (m, d) block of states to m complex values.  The
built-in kinds cover what the decomposition modules need:

  constant          1
  coordinate        x[index]
  monomial          prod_i x_i**powers[i]   (negative/fractional powers ok
                    where defined; violations raise ObservableDomainError)
  fourier           exp(i*2*pi*(k . x))     unit-box convention
  phase             exp(i*(k . x))          coordinates already in radians
  sin, cos          sin/cos(2*pi*(k . x))

A "custom" kind wraps an arbitrary callable for in-memory use; it cannot
round-trip through JSON.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ObservableDomainError, UsageError

TWO_PI = 2.0 * np.pi

_JSON_KINDS = ("constant", "coordinate", "monomial", "fourier", "phase", "sin", "cos")


@dataclass(frozen=True)
class Observable:
    name: str
    kind: str
    k: tuple = None
    powers: tuple = None
    index: int = None
    fn: object = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise UsageError("observable needs a non-empty string name")
        if self.kind not in _JSON_KINDS + ("custom",):
            raise UsageError(f"{self.name}: unknown observable type {self.kind!r}")
        if self.kind in ("fourier", "phase", "sin", "cos"):
            if self.k is None or len(self.k) == 0:
                raise UsageError(f"{self.name}: {self.kind} needs a wave vector k")
            object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        elif self.kind == "monomial":
            if self.powers is None or len(self.powers) == 0:
                raise UsageError(f"{self.name}: monomial needs a powers vector")
            object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        elif self.kind == "coordinate":
            if self.index is None or int(self.index) < 0:
                raise UsageError(f"{self.name}: coordinate needs index >= 0")
            object.__setattr__(self, "index", int(self.index))
        elif self.kind == "custom":
            if not callable(self.fn):
                raise UsageError(f"{self.name}: custom observable needs a callable")

    def _check_dim(self, d: int):
        need = None
        if self.kind in ("fourier", "phase", "sin", "cos"):
            need = len(self.k)
        elif self.kind == "monomial":
            need = len(self.powers)
        elif self.kind == "coordinate":
            if self.index >= d:
                raise UsageError(
                    f"{self.name}: coordinate index {self.index} out of range for dim {d}"
                )
        if need is not None and need != d:
            raise UsageError(
                f"{self.name}: expects dimension {need}, states have dimension {d}"
            )

    def __call__(self, states) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        m, d = states.shape
        self._check_dim(d)
        if self.kind == "constant":
            return np.ones(m)
        if self.kind == "coordinate":
            return states[:, self.index].copy()
        if self.kind == "fourier":
            return np.exp(1j * TWO_PI * (states @ np.asarray(self.k)))
        if self.kind == "phase":
            return np.exp(1j * (states @ np.asarray(self.k)))
        if self.kind == "sin":
            return np.sin(TWO_PI * (states @ np.asarray(self.k)))
        if self.kind == "cos":
            return np.cos(TWO_PI * (states @ np.asarray(self.k)))
        if self.kind == "monomial":
            return self._monomial(states)
        values = np.asarray(self.fn(states))
        if values.shape != (m,):
            raise UsageError(
                f"{self.name}: custom observable returned shape {values.shape}, "
                f"expected ({m},)"
            )
        return values

    def _monomial(self, states) -> np.ndarray:
        out = np.ones(states.shape[0])
        for i, p in enumerate(self.powers):
            if p == 0.0:
                continue
            base = states[:, i]
            if p.is_integer():
                if p < 0:
                    bad = np.flatnonzero(base == 0.0)
                    if bad.size:
                        raise ObservableDomainError(self.name, int(bad[0]))
                out = out * base ** int(p)
            else:
                bad = np.flatnonzero(base <= 0.0 if p < 0 else base < 0.0)
                if bad.size:
                    raise ObservableDomainError(self.name, int(bad[0]))
                out = out * base ** p
        return out

    def to_json(self) -> dict:
        if self.kind == "custom":
            raise UsageError(f"{self.name}: custom observables are not JSON-serializable")
        obj = {"name": self.name, "type": self.kind}
        if self.k is not None:
            obj["k"] = list(self.k)
        if self.powers is not None:
            obj["powers"] = list(self.powers)
        if self.index is not None:
            obj["index"] = self.index
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Observable":
        if not isinstance(obj, dict) or "name" not in obj or "type" not in obj:
            raise UsageError("observable JSON needs 'name' and 'type' fields")
        return cls(
            name=obj["name"],
            kind=obj["type"],
            k=tuple(obj["k"]) if "k" in obj else None,
            powers=tuple(obj["powers"]) if "powers" in obj else None,
            index=obj.get("index"),
        )


@dataclass(frozen=True)
class ObservableDictionary:
    """Ordered collection of uniquely named observables."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise UsageError("observable dictionary must not be empty")
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise UsageError(f"duplicate observable names: {dup}")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, j) -> Observable:
        return self.entries[j]

    @property
    def names(self) -> tuple:
        return tuple(e.name for e in self.entries)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UsageError(f"no observable named {name!r}") from None

    def evaluate(self, states) -> np.ndarray:
        """Stack entry values into the m x N complex matrix F[l, j] = f_j(x_l)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        F = np.empty((states.shape[0], len(self.entries)), dtype=complex)
        for j, entry in enumerate(self.entries):
            F[:, j] = entry(states)
        return F

    def subset(self, indices) -> "ObservableDictionary":
        return ObservableDictionary(tuple(self.entries[i] for i in indices))

    def to_json(self) -> list:
        return [e.to_json() for e in self.entries]

    @classmethod
    def from_json(cls, obj) -> "ObservableDictionary":
        if not isinstance(obj, (list, tuple)):
            raise UsageError("dictionary JSON must be a list of observable objects")
        return cls(tuple(Observable.from_json(e) for e in obj))


def fourier_box(dim: int, kmax: int, kind: str = "fourier") -> ObservableDictionary:
    """All modes with integer wave vectors in [-kmax, kmax]^dim except k=0."""
    if dim < 1 or kmax < 1:
        raise UsageError("fourier_box needs dim >= 1 and kmax >= 1")
    grids = np.meshgrid(*[np.arange(-kmax, kmax + 1)] * dim, indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=1)
    entries = []
    for k in ks:
        if not np.any(k):
            continue
        tag = ",".join(str(int(v)) for v in k)
        entries.append(Observable(name=f"e[{tag}]", kind=kind, k=tuple(k)))
    return ObservableDictionary(tuple(entries))


def monomial_library(coord_names, max_degree: int) -> ObservableDictionary:
    """All monomials of total degree <= max_degree in graded order, 1 first."""
    names = tuple(coord_names)
    if not names or max_degree < 0:
        raise UsageError("monomial_library needs coordinates and max_degree >= 0")
    dim = len(names)
    all_powers = itertools.product(range(max_degree + 1), repeat=dim)
    graded = sorted(
        (p for p in all_powers if sum(p) <= max_degree),
        key=lambda p: (sum(p), tuple(-v for v in p)),
    )
    entries = []
    for p in graded:
        if sum(p) == 0:
            entries.append(Observable(name="1", kind="constant"))
            continue
        tag = "*".join(
            n if q == 1 else f"{n}^{q}" for n, q in zip(names, p) if q
        )
        entries.append(
            Observable(name=tag, kind="monomial", powers=tuple(float(v) for v in p))
        )
    return ObservableDictionary(tuple(entries))
