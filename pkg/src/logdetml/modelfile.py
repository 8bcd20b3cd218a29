"""Versioned plain-text model persistence.

One canonical serialization: fixed key order, floats as %.17g decimal
literals (lossless for float64), matrices row-major.  Files written from
the same model are byte-identical, which makes reproducibility checks a
straight byte comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import Constraint, ConstraintSet, Thresholds
from .errors import InvalidArgumentError
from .learned_kernel import LearnedKernelModel
from .linalg import KernelSpec, inv_sqrt, symmetrize
from .lowrank import COEFFICIENT, EXPLICIT

VERSION = 1

KINDS = ("linear", "kernel", "iplr")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass
class ModelFile:
    """Everything needed to rebuild a queryable model from disk."""

    kind: str
    kernel_spec: KernelSpec | None
    thresholds: Thresholds | None
    gamma: float
    seed: int
    converged: bool
    sweeps_used: int
    jitter_used: float = 0.0
    identity_coeff: float = 1.0
    version: int = VERSION
    # payload (presence depends on kind)
    W: np.ndarray | None = None
    X: np.ndarray | None = None
    K0: np.ndarray | None = None
    M: np.ndarray | None = None
    constraints: list[Constraint] = field(default_factory=list)
    lam: np.ndarray | None = None
    xi: np.ndarray | None = None
    basis_mode: str | None = None
    basis_matrix: np.ndarray | None = None
    F: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown model kind: {self.kind!r}")

    # -- query surface ----------------------------------------------------
    def to_learned_kernel(self) -> LearnedKernelModel:
        """Rebuild the out-of-sample model (kernel and iplr kinds)."""
        if self.kind == "kernel":
            return LearnedKernelModel(
                kernel_spec=self.kernel_spec,
                X=self.X,
                K0=self.K0,
                K=None if self.K0 is None else symmetrize(
                    self.identity_coeff * self.K0 + self.K0 @ self.M @ self.K0),
                M=self.M,
                identity_coeff=self.identity_coeff,
                jitter_used=self.jitter_used,
                converged=self.converged,
            )
        if self.kind == "iplr" and self.basis_mode == COEFFICIENT:
            J = self.basis_matrix
            T = inv_sqrt(symmetrize(J.T @ self.K0 @ J), jitter=1e-10)
            k = self.F.shape[0]
            return LearnedKernelModel(
                kernel_spec=self.kernel_spec,
                X=self.X,
                K0=self.K0,
                m_factor=J @ T,
                m_core=self.F - np.eye(k),
                converged=self.converged,
            )
        raise InvalidArgumentError(f"model kind {self.kind!r} has no kernel form")

    def to_mahalanobis(self) -> np.ndarray:
        """The d x d metric matrix (linear kind, or explicit-basis iplr)."""
        if self.kind == "linear":
            return self.W
        if self.kind == "iplr" and self.basis_mode == EXPLICIT:
            U = self.basis_matrix
            d, k = U.shape
            return symmetrize(np.eye(d) + U @ (self.F - np.eye(k)) @ U.T)
        raise InvalidArgumentError(f"model kind {self.kind!r} has no explicit metric")


def _write_matrix(lines: list[str], name: str, A: np.ndarray) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines.append(f"matrix {name} {A.shape[0]} {A.shape[1]}")
    for row in A:
        lines.append(" ".join(_fmt(v) for v in row))


def save_model(path, mf: ModelFile) -> None:
    lines = [f"version {mf.version}", f"kind {mf.kind}"]
    if mf.kernel_spec is None:
        lines.append("kernel none")
    elif mf.kernel_spec.kind == "gaussian":
        lines.append(f"kernel gaussian {_fmt(mf.kernel_spec.sigma)}")
    else:
        lines.append(f"kernel {mf.kernel_spec.kind}")
    lines.append(f"gamma {_fmt(mf.gamma)}")
    lines.append(f"seed {mf.seed}")
    lines.append(f"converged {int(mf.converged)}")
    lines.append(f"sweeps {mf.sweeps_used}")
    lines.append(f"jitter {_fmt(mf.jitter_used)}")
    lines.append(f"identity_coeff {_fmt(mf.identity_coeff)}")
    if mf.thresholds is None:
        lines.append("thresholds none")
    else:
        lines.append(f"thresholds {_fmt(mf.thresholds.u)} {_fmt(mf.thresholds.l)}")
    if mf.constraints:
        lines.append(f"constraints {len(mf.constraints)}")
        for t, con in enumerate(mf.constraints):
            lam = 0.0 if mf.lam is None else mf.lam[t]
            xi = 0.0 if mf.xi is None else mf.xi[t]
            lines.append(f"{con.kind} {con.i} {con.j} {_fmt(lam)} {_fmt(xi)}")
    else:
        lines.append("constraints 0")
    if mf.basis_mode is not None:
        lines.append(f"basis {mf.basis_mode} {mf.basis_matrix.shape[1]}")
    for name in ("W", "X", "K0", "M", "F"):
        A = getattr(mf, name)
        if A is not None:
            _write_matrix(lines, name, A)
    if mf.basis_matrix is not None:
        _write_matrix(lines, "B", mf.basis_matrix)
    lines.append("end")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> ModelFile:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise InvalidArgumentError(f"{path}: truncated model file")
        line = lines[pos]
        pos += 1
        return line

    def expect(key: str) -> list[str]:
        parts = take().split()
        if not parts or parts[0] != key:
            raise InvalidArgumentError(f"{path}: expected '{key}' entry, got {parts[:1]}")
        return parts[1:]

    version = int(expect("version")[0])
    if version != VERSION:
        raise InvalidArgumentError(f"{path}: unsupported model version {version}")
    kind = expect("kind")[0]
    kparts = expect("kernel")
    if kparts[0] == "none":
        spec = None
    elif kparts[0] == "gaussian":
        spec = KernelSpec.gaussian(float(kparts[1]))
    else:
        spec = KernelSpec(kparts[0])
    gamma = float(expect("gamma")[0])
    seed = int(expect("seed")[0])
    conv = bool(int(expect("converged")[0]))
    sweeps = int(expect("sweeps")[0])
    jitter = float(expect("jitter")[0])
    ic = float(expect("identity_coeff")[0])
    tparts = expect("thresholds")
    thresholds = None if tparts[0] == "none" else Thresholds(float(tparts[0]), float(tparts[1]))
    m = int(expect("constraints")[0])
    cons, lam, xi = [], [], []
    for _ in range(m):
        parts = take().split()
        cons.append(Constraint(int(parts[1]), int(parts[2]), parts[0]))
        lam.append(float(parts[3]))
        xi.append(float(parts[4]))

    basis_mode = None
    matrices: dict[str, np.ndarray] = {}
    while True:
        line = take()
        if line == "end":
            break
        parts = line.split()
        if parts[0] == "basis":
            basis_mode = parts[1]
            continue
        if parts[0] != "matrix":
            raise InvalidArgumentError(f"{path}: unexpected line {line!r}")
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        data = np.empty((rows, cols))
        for r in range(rows):
            vals = take().split()
            if len(vals) != cols:
                raise InvalidArgumentError(f"{path}: matrix {name} row {r} has wrong width")
            data[r] = [float(v) for v in vals]
        matrices[name] = data

    return ModelFile(
        kind=kind,
        kernel_spec=spec,
        thresholds=thresholds,
        gamma=gamma,
        seed=seed,
        converged=conv,
        sweeps_used=sweeps,
        jitter_used=jitter,
        identity_coeff=ic,
        W=matrices.get("W"),
        X=matrices.get("X"),
        K0=matrices.get("K0"),
        M=matrices.get("M"),
        constraints=cons,
        lam=np.array(lam) if cons else None,
        xi=np.array(xi) if cons else None,
        basis_mode=basis_mode,
        basis_matrix=matrices.get("B"),
        F=matrices.get("F"),
    )
