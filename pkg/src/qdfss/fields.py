"""Sampled scalar fields and their CSV export."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .device import Grid2D

__all__ = ["ScalarField2D", "field_to_csv"]

_KINDS = {
    "potential": "phi_V",
    "wavefunction": "psi_per_nm",
    "density": "psi2_per_nm2",
    "charge": "rho_e_per_nm3",
}


@dataclass(frozen=True, eq=False)
class ScalarField2D:
    """One real value per cell of ``grid``.

    ``kind`` is ``"potential"`` (V), ``"wavefunction"`` (nm^-1, normalised so
    that ``sum(psi**2) * h**2 == 1``), ``"density"`` (nm^-2) or ``"charge"``
    (elementary charges per nm^3).
    """

    grid: Grid2D
    values: np.ndarray
    kind: str = "potential"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        if self.kind == "wavefunction":
            norm = float(np.sum(self.values**2) * self.grid.spacing**2)
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"wavefunction not normalised (norm {norm!r})")

    def density(self) -> "ScalarField2D":
        if self.kind != "wavefunction":
            raise ValueError("density() needs a wavefunction field")
        return ScalarField2D(self.grid, self.values**2, "density")


def field_to_csv(field: ScalarField2D, path=None) -> str:
    """Write ``x_nm, y_nm, <value>`` rows (x-major order); returns the text."""
    X, Y = field.grid.mesh()
    buf = io.StringIO()
    buf.write(f"x_nm,y_nm,{_KINDS[field.kind]}\n")
    for x, y, v in zip(X.ravel(), Y.ravel(), field.values.ravel()):
        buf.write(f"{x:.6g},{y:.6g},{v:.9g}\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    return text
