"""Scale separation through a truncated SVD of the folded sample matrix.

Fine-grid samples of a function are folded into the (micro x macro) matrix
and factorized with a one-sided Jacobi SVD. Left singular vectors are the
micro profiles (shape of the function inside a generic macro element),
right singular vectors scaled by the singular values are the macro
amplitudes across elements. Mode count is selected by the smallest
truncation whose fine-grid reconstruction MSE falls below a threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericError
from .mesh import MultiscaleMesh, fold, unfold

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


@dataclass(frozen=True)
class SVDDecomposition:
    """Singular triplets, sorted by nonincreasing singular value.

    ``left`` is (n, r) with orthonormal columns, ``right`` is (m, r) with
    orthonormal columns, and ``reconstruct`` gives left @ diag(s) @ right.T.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return self.singular_values.shape[0]


def svd(matrix: np.ndarray) -> SVDDecomposition:
    """Full SVD of a dense matrix via one-sided Jacobi rotations.

    Columns of the working copy are rotated pairwise until every
    off-diagonal Gram entry is below ``JACOBI_TOL`` relative to the
    corresponding column norms. Deterministic; raises
    :class:`~mscale.errors.NumericError` if the sweep budget is exhausted.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or min(a.shape) < 1:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix contains non-finite entries")

    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T.copy()
    rows, cols = a.shape

    v = np.eye(cols)
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(cols - 1):
            for q in range(p + 1, cols):
                ap = a[:, p]
                aq = a[:, q]
                gamma = float(ap @ aq)
                alpha = float(ap @ ap)
                beta = float(aq @ aq)
                if abs(gamma) <= JACOBI_TOL * np.sqrt(alpha * beta):
                    continue
                rotated = True
                tau = (beta - alpha) / (2.0 * gamma)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau))
                if tau == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                a_p = c * ap - s * aq
                a_q = s * ap + c * aq
                a[:, p] = a_p
                a[:, q] = a_q
                v_p = c * v[:, p] - s * v[:, q]
                v_q = s * v[:, p] + c * v[:, q]
                v[:, p] = v_p
                v[:, q] = v_q
        if not rotated:
            break
    else:
        raise NumericError(
            f"Jacobi SVD did not converge within {JACOBI_MAX_SWEEPS} sweeps"
        )

    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]

    u = np.zeros_like(a)
    cutoff = sigma[0] * rows * np.finfo(float).eps if sigma[0] > 0 else 0.0
    degenerate = []
    for j in range(cols):
        if sigma[j] > cutoff:
            u[:, j] = a[:, j] / sigma[j]
        else:
            degenerate.append(j)
    _complete_basis(u, degenerate)

    _canonical_signs(u, v)
    if transposed:
        u, v = v, u
    return SVDDecomposition(u, sigma, v)


def _complete_basis(u: np.ndarray, degenerate: list[int]):
    """Fill near-null columns with orthonormal completions (deterministic
    Gram-Schmidt against canonical basis vectors)."""
    if not degenerate:
        return
    rows = u.shape[0]
    next_axis = 0
    for j in degenerate:
        while next_axis < rows:
            cand = np.zeros(rows)
            cand[next_axis] = 1.0
            next_axis += 1
            for k in range(u.shape[1]):
                if k in degenerate and k >= j:
                    continue
                cand -= (u[:, k] @ cand) * u[:, k]
            norm = np.linalg.norm(cand)
            if norm > 0.5:
                u[:, j] = cand / norm
                break
        else:  # pragma: no cover - cols <= rows guarantees completion
            raise NumericError("failed to complete an orthonormal basis")


def _canonical_signs(u: np.ndarray, v: np.ndarray):
    # make the first nonzero entry of each left vector nonnegative
    for j in range(u.shape[1]):
        col = u[:, j]
        nonzero = np.nonzero(col)[0]
        if nonzero.size and col[nonzero[0]] < 0.0:
            u[:, j] = -col
            v[:, j] = -v[:, j]


def truncate(dec: SVDDecomposition, T: int) -> SVDDecomposition:
    """Keep the first T singular triplets."""
    if not 1 <= T <= dec.rank:
        raise ValueError(f"T = {T} outside 1..{dec.rank}")
    return SVDDecomposition(
        dec.left[:, :T].copy(),
        dec.singular_values[:T].copy(),
        dec.right[:, :T].copy(),
    )


def reconstruct(dec: SVDDecomposition) -> np.ndarray:
    return (dec.left * dec.singular_values) @ dec.right.T


@dataclass(frozen=True)
class MultiscaleDecomposition:
    """Truncated decomposition of a folded fine-grid function."""

    decomposition: SVDDecomposition
    mode_count: int
    micro_profiles: np.ndarray  # (n, T): left singular vectors
    macro_profiles: np.ndarray  # (m, T): singular value * right singular vector
    mse: float
    threshold_met: bool
    mesh: MultiscaleMesh


def multiscale_decompose(
    fine_values: np.ndarray, mesh: MultiscaleMesh, mse_threshold: float
) -> MultiscaleDecomposition:
    """Fold, factorize, and truncate to the smallest mode count whose
    unfolded reconstruction MSE is below ``mse_threshold``.

    If even the full rank misses the threshold the full decomposition is
    returned with ``threshold_met`` False.
    """
    matrix = fold(fine_values, mesh)
    full = svd(matrix)
    values = np.asarray(fine_values, dtype=float)
    chosen_T = full.rank
    met = False
    err = float("inf")
    partial = np.zeros_like(matrix)
    for T in range(1, full.rank + 1):
        partial += full.singular_values[T - 1] * np.outer(
            full.left[:, T - 1], full.right[:, T - 1]
        )
        err = float(np.mean((unfold(partial, mesh) - values) ** 2))
        if err < mse_threshold:
            chosen_T, met = T, True
            break
    chosen_mse = err
    dec = truncate(full, chosen_T)
    return MultiscaleDecomposition(
        decomposition=dec,
        mode_count=chosen_T,
        micro_profiles=dec.left.copy(),
        macro_profiles=dec.right * dec.singular_values,
        mse=chosen_mse,
        threshold_met=met,
        mesh=mesh,
    )


def interpolate_to_grid(xs: np.ndarray, values: np.ndarray, mesh: MultiscaleMesh) -> np.ndarray:
    """Linearly interpolate scattered (x, value) samples onto the fine grid.

    Samples are sorted by x and exact duplicates averaged. Raises if any
    fine node falls outside the sample hull (no extrapolation).
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.shape != values.shape or xs.ndim != 1:
        raise ValueError("samples must be two equal-length 1-D arrays")
    if xs.size < 2:
        raise ValueError("need at least two samples to interpolate")
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    values = values[order]
    uniq, inverse, counts = np.unique(xs, return_inverse=True, return_counts=True)
    if uniq.size < xs.size:
        sums = np.bincount(inverse, weights=values, minlength=uniq.size)
        values = sums / counts
        xs = uniq
    if uniq.size < 2:
        raise ValueError("need at least two distinct sample locations")
    lo, hi = xs[0], xs[-1]
    grid = mesh.fine_nodes
    if grid[0] < lo or grid[-1] > hi:
        raise ValueError(
            f"fine grid [{grid[0]}, {grid[-1]}] extends beyond the sample hull "
            f"[{lo}, {hi}]; cannot extrapolate"
        )
    return np.interp(grid, xs, values)


# --- CSV export ---------------------------------------------------------------

def export_components(result: MultiscaleDecomposition, outdir: str | Path, stem: str = "mode"):
    """Write one (local_coordinate, micro_value) and one (macro_center,
    macro_value) CSV per retained mode, plus a singular-value summary.

    Returns the list of written paths.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    mesh = result.mesh
    h = mesh.h
    local = np.arange(mesh.n) * (h / mesh.n)
    centers = mesh.macro_nodes[:-1] + h / 2.0
    written = []
    for k in range(result.mode_count):
        micro_path = outdir / f"{stem}{k + 1}_micro.csv"
        _write_csv(micro_path, ["local_coordinate", "micro_value"],
                   zip(local, result.micro_profiles[:, k]))
        macro_path = outdir / f"{stem}{k + 1}_macro.csv"
        _write_csv(macro_path, ["macro_center", "macro_value"],
                   zip(centers, result.macro_profiles[:, k]))
        written += [micro_path, macro_path]
    summary = outdir / "singular_values.csv"
    _write_csv(summary, ["mode", "singular_value"],
               enumerate(result.decomposition.singular_values, start=1))
    written.append(summary)
    return written


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    # shortest round-trip decimal for floats keeps artifacts byte-stable
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))
