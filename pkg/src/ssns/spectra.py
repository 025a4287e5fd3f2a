"""Spectra of L - K(a): Ritz pairs from the time-T propagator, growth bounds,
eigencurves in sigma and crossing classification."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from .fields import SimilarityGrid, VectorField
from .heat import drift_operator
from .norms import inner, l2_factor, x_norm, y_norm
from .operators import Background, KOperator

log = logging.getLogger(__name__)

BAND_EDGE = -0.25


class SpectrumError(RuntimeError):
    pass


def assemble_K(a) -> KOperator:
    """K(a) phi = P(a.grad phi + phi.grad a) as a matrix-free operator."""
    if isinstance(a, VectorField):
        if not np.isfinite(y_norm(a)):
            raise ValueError("a has infinite Y-norm")
        a = Background.from_field(a)
    if not (np.all(np.isfinite(a.u)) and np.all(np.isfinite(a.ur)) and np.all(np.isfinite(a.ut))):
        raise ValueError("a has infinite Y-norm")
    return KOperator(a)


class LinearizedOperator:
    """Dense L - K(a) (or a planted matrix) on the flat coefficients of a grid."""

    def __init__(self, grid: SimilarityGrid, matrix: np.ndarray, label: str = "", background=None):
        self.grid = grid
        self.matrix = np.asarray(matrix)
        self.label = label
        self.background = background
        self._props: dict = {}

    @classmethod
    def from_background(cls, a, grid: SimilarityGrid | None = None, label: str = "L-K(a)"):
        if a is None:
            return cls(grid, drift_operator(grid).matrix(), "L")
        kop = assemble_K(a)
        mat = drift_operator(kop.grid).matrix() - kop.matrix()
        return cls(kop.grid, mat, label, kop.bg)

    @classmethod
    def drift(cls, grid: SimilarityGrid):
        return cls(grid, drift_operator(grid).matrix(), "L")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, vec):
        return self.matrix @ vec

    def __call__(self, phi: VectorField) -> VectorField:
        return VectorField.from_flat(self.grid, self.apply(phi.flat))

    def propagator(self, t: float) -> np.ndarray:
        key = round(float(t), 14)
        if key not in self._props:
            self._props[key] = sla.expm(self.matrix * t)
        return self._props[key]

    def gram(self):
        """(R, R^-1) with |R c| the L^2 norm of the field with coefficients c."""
        if not hasattr(self, "_gram"):
            r = l2_factor(self.grid)
            self._gram = (r, np.linalg.inv(r))
        return self._gram

    def adjoint(self) -> "LinearizedOperator":
        """Adjoint in the discrete L^2 pairing: G^-1 A^H G with G = R^T R."""
        r, ri = self.gram()
        mat = ri @ (r @ self.matrix @ ri).conj().T @ r
        return LinearizedOperator(self.grid, mat, self.label + "*", self.background)

    def coupling_class(self, seed=None, tol: float = 1e-12) -> np.ndarray:
        """Channels (component, degree) reachable from ``seed`` through the matrix.

        Returns a boolean mask over flat coefficients.  Without a seed the
        channels carrying the background are used, so the class is the set of
        fields sharing the symmetry of a.
        """
        g = self.grid
        nb = 2 * g.lmax
        blocks = np.abs(self.matrix).reshape(nb, g.nr, nb, g.nr).max(axis=(1, 3))
        link = blocks > tol * blocks.max()
        link = link | link.T
        if seed is None:
            if self.background is None or self.background.is_zero:
                return np.ones(self.size, dtype=bool)
            probe = np.abs(self.matrix).reshape(nb, g.nr, nb, g.nr)
            seed = [i for i in range(nb) if probe[i, :, i, :].max() > 0 and _carries(self.background, i, g)]
        reach = np.zeros(nb, dtype=bool)
        stack = list(np.atleast_1d(seed))
        while stack:
            i = stack.pop()
            if reach[i]:
                continue
            reach[i] = True
            stack.extend(np.nonzero(link[i] & ~reach)[0])
        return np.repeat(reach, g.nr)


def _carries(bg: Background, block: int, grid: SimilarityGrid) -> bool:
    """Whether the background has a component in flat block (comp * lmax + l - 1)."""
    from .fields import projector

    coeffs = projector(grid)(bg.u).coeffs
    comp, li = divmod(block, grid.lmax)
    return bool(np.abs(coeffs[comp, li]).max() > 1e-12 * max(np.abs(coeffs).max(), 1e-300))


def gaussian_mode(grid: SimilarityGrid, comp: int, l: int) -> tuple[np.ndarray, float]:
    """Flat coefficients of the exact L-eigenfield r^l e^{-r^2/4} in one channel, and its eigenvalue."""
    coeffs = np.zeros((2, grid.lmax, grid.nr))
    r = grid.radial.r
    coeffs[comp, l - 1] = r**l * np.exp(-r**2 / 4)
    vec = coeffs.ravel()
    return vec / np.linalg.norm(vec), -(l + 3 - comp) / 2


def planted_operator(grid: SimilarityGrid, block, channels=None) -> LinearizedOperator:
    """A = L + V (B - Lambda) W^T with V exact Gaussian eigenfields of L.

    V spans an L-invariant subspace with eigenvalues Lambda, and W^T V = I,
    so A keeps the rest of the spectrum of L and replaces Lambda by the
    eigenvalues of the planted block B.
    """
    block = np.atleast_2d(np.asarray(block, dtype=float))
    k = block.shape[0]
    channels = channels or [(1, 1), (0, 1), (1, 2), (0, 2)][:k]
    if len(channels) != k:
        raise ValueError("one channel per planted mode")
    modes = [gaussian_mode(grid, c, l) for c, l in channels]
    v = np.column_stack([m[0] for m in modes])
    lam = np.diag([m[1] for m in modes])
    r = l2_factor(grid)
    gv = r.T @ (r @ v)
    wt = np.linalg.solve(v.T @ gv, gv.T)
    lmat = drift_operator(grid).matrix()
    op = LinearizedOperator(grid, lmat + v @ (block - lam) @ wt, "planted")
    op.planted_vectors = v
    op.planted_left = wt
    op.planted_values = np.linalg.eigvals(block)
    return op


@dataclass
class RitzPair:
    value: complex
    field: VectorField
    residual: float  # ||A phi - lambda phi||_X / ||phi||_X
    band: bool  # Re lambda <= -1/4 + margin: not trusted


@dataclass
class SpectrumReport:
    ritz_pairs: list
    abscissa_s: float
    omega0_fit: float = np.nan
    essential_band_edge: float = BAND_EDGE
    gap_delta: float = np.nan
    refinement_stable: bool | None = None
    T: float = 1.0
    margin: float = 0.05
    symmetry: str = "full"

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.ritz_pairs])

    @property
    def trusted(self) -> list:
        return [p for p in self.ritz_pairs if not p.band]

    @property
    def leading(self) -> RitzPair:
        return self.ritz_pairs[0]

    def summary(self) -> dict:
        return {"abscissa_s": self.abscissa_s, "omega0_fit": self.omega0_fit, "gap_delta": self.gap_delta,
                "n_trusted": len(self.trusted), "leading_re": float(self.values[0].real),
                "leading_im": float(self.values[0].imag)}


def _as_operator(a, grid=None) -> LinearizedOperator:
    if isinstance(a, LinearizedOperator):
        return a
    if a is None and grid is None:
        raise ValueError("a = None needs a grid")
    return LinearizedOperator.from_background(a, grid)


def _symmetry_mask(op: LinearizedOperator, symmetry: str) -> np.ndarray:
    if symmetry == "full":
        return np.ones(op.size, dtype=bool)
    if symmetry in ("axi", "axisymmetric_only"):
        return op.coupling_class()
    raise ValueError(f"unknown symmetry {symmetry!r}")


def _x_residual(op, vec, lam):
    g = op.grid
    res = x_norm(VectorField.from_flat(g, op.apply(vec) - lam * vec))
    return res / x_norm(VectorField.from_flat(g, vec))


def _ritz(prop: np.ndarray, k: int, seed: int = 0):
    n = prop.shape[0]
    if k >= n - 1:
        return np.linalg.eig(prop)
    v0 = np.random.default_rng(seed).standard_normal(n)
    lin = LinearOperator((n, n), matvec=lambda x: prop @ x, dtype=prop.dtype)
    try:
        return eigs(lin, k=k, which="LM", v0=v0, ncv=min(n, max(2 * k + 1, 40)), tol=1e-13, maxiter=5000)
    except ArpackNoConvergence as exc:
        raise SpectrumError("Arnoldi iteration did not converge") from exc


def leading_spectrum(a, how_many: int = 8, symmetry: str = "full", T: float = 1.0, margin: float = 0.05,
                     grid: SimilarityGrid | None = None, polish: bool = True, rebuild=None,
                     seed: int = 0) -> SpectrumReport:
    """Leading eigenvalues of L - K(a) from Arnoldi on phi -> e^{(L - K(a)) T} phi.

    ``a`` is a Background, a VectorField, a LinearizedOperator, or None
    (pure drift on ``grid``).  ``rebuild(grid)`` returns the operator on
    another grid and enables the x1.5 refinement check.
    """
    if how_many > 20:
        raise ValueError("how_many must be <= 20")
    op = _as_operator(a, grid)
    mask = _symmetry_mask(op, symmetry)
    sub = op.matrix[np.ix_(mask, mask)]
    lam, vecs, T = propagator_eigs(sub, how_many + 2, T, seed)
    pairs = []
    for lam_j, v in zip(lam, vecs.T):
        full = np.zeros(op.size, dtype=complex)
        full[mask] = v
        if polish and np.isfinite(lam_j):
            try:
                x = np.linalg.solve(sub - (lam_j + 1e-10) * np.eye(sub.shape[0]), v)
                x /= np.linalg.norm(x)
                lam_j = np.vdot(x, sub @ x) / np.vdot(x, x)
                full[mask] = x
            except np.linalg.LinAlgError:
                pass
        if abs(lam_j.imag) < 1e-12:
            lam_j = complex(lam_j.real, 0.0)
            full = full * np.exp(-1j * np.angle(full[np.argmax(np.abs(full))]))
        pairs.append(RitzPair(complex(lam_j), VectorField.from_flat(op.grid, full),
                              float(_x_residual(op, full, lam_j)), bool(lam_j.real <= BAND_EDGE + margin)))
    pairs = _close_under_conjugation(pairs)
    pairs.sort(key=lambda p: (-p.value.real, -p.value.imag))
    keep = how_many
    if len(pairs) > keep and abs(pairs[keep - 1].value - np.conj(pairs[keep].value)) < 1e-8:
        keep += 1  # do not split a conjugate pair
    pairs = pairs[:keep]
    vals = np.array([p.value for p in pairs])
    report = SpectrumReport(pairs, float(vals.real.max()), T=T, margin=margin, symmetry=symmetry,
                            gap_delta=_gap(vals))
    if rebuild is not None:
        fine = leading_spectrum(rebuild(op.grid.refined(1.5)), how_many, symmetry, T, margin, polish=False)
        report.refinement_stable = _stable(report, fine)
    return report


def _close_under_conjugation(pairs, tol: float = 1e-8):
    out = list(pairs)
    for p in pairs:
        if abs(p.value.imag) > tol and not any(abs(q.value - np.conj(p.value)) < 1e-6 * max(1, abs(p.value)) for q in out):
            fld = VectorField(p.field.grid, np.conj(p.field.coeffs))
            out.append(RitzPair(np.conj(p.value), fld, p.residual, p.band))
    return out


def _gap(vals) -> float:
    """Distance in real part from the leading eigenvalue (or pair) to the rest."""
    if len(vals) < 2:
        return np.nan
    lead = vals[0]
    rest = [v for v in vals[1:] if abs(v - np.conj(lead)) > 1e-6 * max(1, abs(lead))]
    return float(lead.real - max(v.real for v in rest)) if rest else np.nan


def _stable(coarse: SpectrumReport, fine: SpectrumReport, tol: float = 1e-4) -> bool:
    fv = fine.values
    for p in coarse.trusted:
        if np.min(np.abs(fv - p.value)) > tol:
            return False
    return True


def propagator_norms(op: LinearizedOperator, times) -> np.ndarray:
    """||e^{A t}|| in the discrete L^2 norm at increasing, equally spaced ``times``.

    The propagator is built as a power of e^{A h}; each norm comes from
    power iteration on M^H M with M = R e^{A t} R^-1 over a few probes.
    """
    times = np.asarray(times, dtype=float)
    h = times[0] if len(times) == 1 else times[1] - times[0]
    if not np.allclose(np.diff(times), h) or times[0] <= 0:
        raise ValueError("times must be positive and equally spaced")
    first = int(round(times[0] / h))
    if abs(first * h - times[0]) > 1e-12 * times[0]:
        raise ValueError("times[0] must be a multiple of the spacing")
    r, ri = op.gram()
    step = r @ op.propagator(h) @ ri
    m = np.linalg.matrix_power(step, first)
    out = []
    for k in range(len(times)):
        if k:
            m = step @ m
        out.append(_power_norm(m))
    return np.array(out)


def _power_norm(m, probes: int = 4, iters: int = 60, seed: int = 0) -> float:
    x = np.random.default_rng(seed).standard_normal((m.shape[1], probes))
    for _ in range(iters):
        x = m.conj().T @ (m @ x)
        x = x / np.maximum(np.linalg.norm(x, axis=0), 1e-300)
    return float(np.max(np.linalg.norm(m @ x, axis=0)))


def growth_bound(a, horizon: float = 20.0, grid: SimilarityGrid | None = None, samples: int = 11,
                 raw: bool = False):
    """Fitted omega_0 of e^{(L - K(a)) t}: slope of log||e^{At}|| over [horizon/2, horizon].

    Returns max(fit, -1/4), or (that, fit) with ``raw``.
    """
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    op = _as_operator(a, grid)
    times = np.linspace(horizon / 2, horizon, samples)
    norms = propagator_norms(op, times)
    with np.errstate(divide="ignore"):
        logs = np.log(norms)
    ok = np.isfinite(logs)
    if ok.sum() < 3:
        raise SpectrumError("propagator norms underflowed or overflowed")
    fit = float(np.polyfit(times[ok], logs[ok], 1)[0])
    out = max(fit, BAND_EDGE)
    return (out, fit) if raw else out


def propagator_eigs(mat: np.ndarray, k: int, T: float = 1.0, seed: int = 0):
    """(lambda, vectors, T) from Arnoldi on e^{mat T}, halving T on log-branch ambiguity."""
    k = min(k, mat.shape[0] - 2)
    for _ in range(6):
        mu, vecs = _ritz(sla.expm(mat * T), k, seed)
        lam = np.log(mu.astype(complex)) / T
        if np.all(np.abs(lam.imag) < 0.9 * np.pi / T):
            order = np.argsort(-lam.real, kind="stable")
            return lam[order], vecs[:, order], T
        log.info("log-branch ambiguity at T=%g: halving T", T)
        T /= 2
    raise SpectrumError("log-branch ambiguity persists after halving T")


@dataclass
class EigenCurve:
    sigma: np.ndarray
    lambda1: np.ndarray  # complex
    dlambda: np.ndarray  # finite-difference d lambda1 / d(sample parameter sigma)
    gap: np.ndarray
    flags: list
    smin: np.ndarray | None = None
    fold: dict | None = None
    crossing: dict | None = None
    multiplicity: np.ndarray | None = None

    @classmethod
    def from_values(cls, sigma, lambda1, gap=None, smin=None, fold=None):
        """Curve from given samples (synthetic inputs and restarts)."""
        sigma = np.asarray(sigma, dtype=float)
        lam = np.asarray(lambda1, dtype=complex)
        gap = np.full(len(sigma), np.nan) if gap is None else np.asarray(gap, dtype=float)
        return cls(sigma, lam, _derivative(sigma, lam), gap, [""] * len(sigma),
                   None if smin is None else np.asarray(smin, dtype=float), fold,
                   multiplicity=np.ones(len(sigma), dtype=int))

    def rows(self):
        """Eigencurve CSV rows: sigma, re_lambda1, im_lambda1, dre_dsigma, gap_delta, flags."""
        return [(float(s), float(l.real), float(l.imag), float(d.real), float(g), f)
                for s, l, d, g, f in zip(self.sigma, self.lambda1, self.dlambda, self.gap, self.flags)]


CURVE_HEADER = ("sigma", "re_lambda1", "im_lambda1", "dre_dsigma", "gap_delta", "flags")


def _derivative(sigma, lam):
    if len(sigma) < 2:
        return np.full(len(sigma), np.nan, dtype=complex)
    ds = np.diff(sigma)
    if np.any(ds == 0):
        return np.full(len(sigma), np.nan, dtype=complex)
    return np.gradient(lam, sigma)


def _overlap(x, y, r=None):
    if r is not None:
        x, y = r @ x, r @ y
    return abs(np.vdot(x, y)) / (np.linalg.norm(x) * np.linalg.norm(y))


def track_eigencurve(branch, how_many: int = 4, problem=None, T: float = 1.0,
                     cluster: float = 1e-3) -> EigenCurve:
    """Leading eigenvalue along a branch, matched by eigenvector overlap.

    ``branch`` is a ContinuationState (with the ``problem`` whose Jacobian
    is L_sigma) or an iterable of (sigma, matrix or LinearizedOperator).
    """
    if hasattr(branch, "branch"):
        if problem is None:
            raise ValueError("a ContinuationState needs its problem")
        items = [(p.sigma, problem.jacobian(p.u, p.sigma)) for p in branch.branch]
        smin = np.array([p.smin for p in branch.branch])
        fold = branch.fold
    else:
        items = list(branch)
        smin, fold = None, None
    sig, lam1, gaps, flags, mult = [], [], [], [], []
    prev = None
    metric = None
    for s, op in items:
        if isinstance(op, LinearizedOperator):
            metric = op.gram()[0]
            mat = op.matrix
        else:
            mat = np.asarray(op)
        vals, vecs, _ = propagator_eigs(mat, how_many + 2, T)
        flag = ""
        if prev is None:
            j = 0
        else:
            ov = np.array([_overlap(prev, vecs[:, i], metric) for i in range(vecs.shape[1])])
            order = np.argsort(-ov)
            j = int(order[0])
            if ov[j] < 0.999 and ov[order[1]] > 0.9 * ov[j] and abs(vals[order[1]] - np.conj(vals[j])) > 1e-8:
                flag = "ambiguous"
        lead = vals[j]
        if lead.imag < -1e-12 and np.any(np.abs(vals - np.conj(lead)) < 1e-8):
            lead = np.conj(lead)  # report the upper member of a pair
        others = [v for i, v in enumerate(vals) if i != j and abs(v - np.conj(vals[j])) > 1e-8]
        gaps.append(float(lead.real - max(v.real for v in others)) if others else np.nan)
        mult.append(int(np.sum(np.abs(vals - vals[j]) < cluster)))
        prev = vecs[:, j]
        sig.append(float(s))
        lam1.append(complex(lead))
        flags.append(flag)
    sig = np.array(sig)
    lam1 = np.array(lam1)
    curve = EigenCurve(sig, lam1, _derivative(sig, lam1), np.array(gaps), flags, smin, fold,
                       multiplicity=np.array(mult))
    _flag_jumps(curve)
    return curve


def _flag_jumps(curve: EigenCurve, factor: float = 10.0):
    d = curve.dlambda
    for i in range(1, len(curve.sigma)):
        ds = abs(curve.sigma[i] - curve.sigma[i - 1])
        jump = abs(curve.lambda1[i] - curve.lambda1[i - 1])
        slope = max(abs(d[i]), abs(d[i - 1])) if np.all(np.isfinite([d[i], d[i - 1]])) else np.inf
        if jump > factor * slope * ds + 1e-12:
            curve.flags[i] = (curve.flags[i] + ";jump").lstrip(";")


@dataclass
class CrossingCertificate:
    kind: str  # "A", "B" or "none"
    sigma0: float
    lambda0: complex
    transversality: float
    gap_delta: float
    multiplicity: int
    smin: float
    diagnostics: str = ""


def classify_crossing(curve: EigenCurve, tol: float = 1e-4, sv_threshold: float = 1e-3) -> CrossingCertificate:
    """Scenario A (complex pair crossing transversally) or B (simple real eigenvalue at 0 with
    collapsing Jacobian singular value); otherwise "none" with diagnostics."""
    re = curve.lambda1.real
    fold = curve.fold
    idx = None
    for i in range(len(re) - 1):
        if re[i] == 0 or np.sign(re[i]) != np.sign(re[i + 1]):
            idx = i
            break
    if idx is None and fold is None:
        k = int(np.argmax(re))
        cert = CrossingCertificate("none", np.nan, curve.lambda1[k], np.nan, float(curve.gap[k]),
                                   int(_mult(curve, k)), np.nan, "no sign change of Re lambda1 and no fold marker")
        curve.crossing = None
        return cert
    if idx is not None:
        s_a, s_b = curve.sigma[idx], curve.sigma[idx + 1]
        w = re[idx] / (re[idx] - re[idx + 1]) if re[idx] != re[idx + 1] else 0.0
        lam0 = (1 - w) * curve.lambda1[idx] + w * curve.lambda1[idx + 1]
        sigma0 = float((1 - w) * s_a + w * s_b)
        dre = float((re[idx + 1] - re[idx]) / (s_b - s_a)) if s_b != s_a else np.inf
        gap0 = float(np.nanmin(curve.gap[idx: idx + 2])) if np.any(np.isfinite(curve.gap[idx: idx + 2])) else np.nan
        k = idx if abs(re[idx]) <= abs(re[idx + 1]) else idx + 1
        if fold is not None:
            sigma0 = float(fold["sigma"])
            if np.isfinite(complex(fold.get("lambda1", np.nan))):
                lam0 = complex(fold["lambda1"])
    else:
        k = int(np.argmin(np.abs(re)))
        sigma0 = float(fold["sigma"])
        lam0 = complex(fold.get("lambda1", curve.lambda1[k]))
        dre = np.inf
        gap0 = float(curve.gap[k])
    if fold is not None and np.isfinite(fold.get("smin", np.nan)):
        smin0 = float(fold["smin"])
    elif curve.smin is not None:
        smin0 = float(np.min(curve.smin[max(0, k - 1): k + 2]))
    else:
        smin0 = np.nan
    mult = int(_mult(curve, k))
    im = abs(lam0.imag)
    if im > tol and dre > 0:
        kind, why = "A", ""
    elif im <= tol and (fold is not None or smin0 < sv_threshold):
        kind, why = "B", ""
    else:
        kind = "none"
        why = f"|Im|={im:.2e}, dRe/dsigma={dre:.3g}, smin={smin0:.2e}, fold={'yes' if fold else 'no'}"
    if kind != "none" and mult != 1:
        why = f"eigenvalue cluster of size {mult} at the crossing"
        kind = "none"
    cert = CrossingCertificate(kind, sigma0, complex(lam0), dre, gap0, mult, smin0, why)
    curve.crossing = None if kind == "none" else {"sigma0": sigma0, "type": kind, "transversality": dre}
    return cert


def _mult(curve, k):
    return 1 if curve.multiplicity is None else curve.multiplicity[k]


@dataclass
class NondegeneracyResult:
    condition1: bool  # P(U_s0.grad U + U.grad U_s0) not in Range(L_s0)
    condition2: bool  # P(v.grad v) not in Range(L_s0)
    pairing1: complex
    pairing2: complex
    adjoint_mode: VectorField
    adjoint_value: complex


def adjoint_zero_mode(op: LinearizedOperator, T: float = 1.0, tol: float = 1e-4):
    """Kernel vector of the L^2-adjoint, from Arnoldi on its propagator."""
    adj = op.adjoint()
    vals, vecs, _ = propagator_eigs(adj.matrix, 4, T)
    j = int(np.argmin(np.abs(vals)))
    if abs(vals[j]) > tol:
        raise SpectrumError(f"adjoint zero mode not found (nearest eigenvalue {vals[j]:.3e})")
    w = vecs[:, j]
    w = w * np.exp(-1j * np.angle(w[np.argmax(np.abs(w))]))
    if np.abs(w.imag).max() < 1e-10 * np.abs(w).max():
        w = w.real
    return VectorField.from_flat(op.grid, w), complex(vals[j])


def range_pairing(w: VectorField, f: VectorField, threshold: float = 1e-6):
    """<w, f> and whether f lies outside the range (|<w, f>| > threshold |w| |f|)."""
    p = inner(w, f)
    scale = np.sqrt(abs(inner(w, w)) * abs(inner(f, f)))
    return complex(p), bool(abs(p) > threshold * scale)


def nondegeneracy_check(op: LinearizedOperator, v: VectorField, heat: Background, profile: Background,
                        threshold: float = 1e-6, w: VectorField | None = None) -> NondegeneracyResult:
    """Range conditions at a scenario-B point, decided by pairing with the adjoint kernel.

    ``heat`` is U = e^Delta u0 and ``profile`` is U_sigma0, both as Backgrounds.
    """
    from .fields import advect, projector
    from .operators import nonlinear

    lam = np.nan
    if w is None:
        w, lam = adjoint_zero_mode(op)
    g = op.grid
    h, u = heat, profile
    f1 = projector(g)(advect(g, u.u, u.ur, u.ut, h.u, h.ur, h.ut) + advect(g, h.u, h.ur, h.ut, u.u, u.ur, u.ut))
    f2 = nonlinear(v)
    p1, c1 = range_pairing(w, f1, threshold)
    p2, c2 = range_pairing(w, f2, threshold)
    return NondegeneracyResult(c1, c2, p1, p2, w, lam)
