"""Colour matching function table and spectral XYZ integration."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

# numpy 2 renamed trapz
_trapezoid = getattr(np, "trapezoid", None) or np.trapz

ROWS = 61
STEP_NM = 5.0
FIRST_NM, LAST_NM = 400.0, 700.0


class CmfParseError(ValueError):
    """Malformed colour matching function file."""


@dataclass(frozen=True, eq=False)
class CmfTable:
    """Tabulated (x, y, z) matching functions on a wavelength grid.

    Between table nodes the functions are interpolated linearly.
    """

    wavelengths: np.ndarray
    xbar: np.ndarray
    ybar: np.ndarray
    zbar: np.ndarray

    def __post_init__(self):
        for name in ("wavelengths", "xbar", "ybar", "zbar"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(np.diff(self.wavelengths) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if np.any(self.table < 0):
            raise ValueError("matching functions must be nonnegative")

    def __len__(self) -> int:
        return self.wavelengths.size

    @property
    def table(self) -> np.ndarray:
        return np.stack([self.xbar, self.ybar, self.zbar], axis=-1)

    @property
    def span(self) -> float:
        return float(self.wavelengths[-1] - self.wavelengths[0])

    def __call__(self, lam) -> np.ndarray:
        """(x, y, z) at ``lam``; output shape ``lam.shape + (3,)``."""
        lam = np.asarray(lam, dtype=float)
        wl = self.wavelengths
        if np.any((lam < wl[0]) | (lam > wl[-1])):
            raise ValueError(f"wavelength outside [{wl[0]}, {wl[-1]}] nm")
        return np.stack([np.interp(lam, wl, c) for c in (self.xbar, self.ybar, self.zbar)],
                        axis=-1)

    def integrals(self) -> np.ndarray:
        """Exact integrals of the interpolated (x, y, z) over the table range."""
        return _trapezoid(self.table, self.wavelengths, axis=0)

    def normalization(self) -> float:
        """``k = 100 / int y``, so a perfect reflector has ``Y = 100``."""
        return 100.0 / float(self.integrals()[1])

    def node_rule(self):
        """Trapezoid weights on the table nodes, summing to one.

        Integrates the interpolated functions (times any other piecewise
        linear spectrum) exactly after scaling by :attr:`span`.
        """
        h = np.diff(self.wavelengths)
        w = np.zeros(len(self))
        w[:-1] += h / 2
        w[1:] += h / 2
        return self.wavelengths.copy(), w / w.sum()


def load_cmf(path=None) -> CmfTable:
    """Read a ``wavelength_nm,xbar,ybar,zbar`` CSV (``#`` lines are comments).

    Without ``path`` the bundled CIE 1931 2-degree observer is loaded.
    Exactly 61 rows from 400 to 700 nm in 5 nm steps are required.
    """
    if path is None:
        text = resources.files("csg.color").joinpath(
            "data/cie1931_2deg_5nm.csv").read_text()
    else:
        text = Path(path).read_text()
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines())
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise CmfParseError("empty colour matching function file")
    header_line, header = lines[0]
    if [h.strip() for h in header.split(",")] != ["wavelength_nm", "xbar", "ybar", "zbar"]:
        raise CmfParseError(f"line {header_line}: unexpected header {header!r}")
    rows = []
    for (lineno, _), rec in zip(lines[1:], csv.reader(ln for _, ln in lines[1:])):
        if len(rec) != 4:
            raise CmfParseError(f"line {lineno}: expected 4 fields, got {len(rec)}")
        try:
            vals = [float(v) for v in rec]
        except ValueError as exc:
            raise CmfParseError(f"line {lineno}: {exc}") from None
        if not np.all(np.isfinite(vals)):
            raise CmfParseError(f"line {lineno}: non-finite value")
        if min(vals[1:]) < 0:
            raise CmfParseError(f"line {lineno}: negative matching function value")
        if rows and vals[0] <= rows[-1][0]:
            raise CmfParseError(f"line {lineno}: wavelengths must increase")
        rows.append(vals)
    if len(rows) != ROWS:
        raise CmfParseError(f"expected {ROWS} data rows, found {len(rows)}")
    arr = np.array(rows)
    expected = FIRST_NM + STEP_NM * np.arange(ROWS)
    bad = np.flatnonzero(np.abs(arr[:, 0] - expected) > 1e-9)
    if bad.size:
        raise CmfParseError(f"data row {bad[0] + 1}: wavelength {arr[bad[0], 0]} "
                            f"is off the 5 nm grid")
    return CmfTable(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


_DEFAULT: CmfTable | None = None


def default_cmf() -> CmfTable:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_cmf()
    return _DEFAULT


def xyz_from_spectrum(reflectance, wavelengths, weights, cmf: CmfTable | None = None):
    """Tristimulus values of a reflectance spectrum given as weighted samples.

    ``weights`` (summing to one) define a quadrature of the uniform
    measure on the wavelength range; the result is
    ``k * span * sum_i w_i * cmf(lam_i) * reflectance_i``.
    """
    cmf = cmf or default_cmf()
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("spectral weights must sum to 1")
    r = np.broadcast_to(np.asarray(reflectance, dtype=float), w.shape)
    return cmf.normalization() * cmf.span * np.einsum(
        "i,ij->j", w * r, cmf(wavelengths))
