"""Natural-parameter and pseudo-arclength continuation of F(u, sigma) = 0.

A problem exposes ``residual(u, s)``, ``jacobian(u, s)`` (dense),
``d_sigma(u, s)`` and ``norm(u)``; an optional ``scaled_jacobian(jac)``
supplies the well-scaled matrix whose smallest singular value is monitored.  Natural continuation is used while the
Jacobian is comfortably invertible; once its smallest singular value drops
below a threshold the solver switches to pseudo-arclength steps, which
pass through folds and return both branch segments.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class ContinuationError(RuntimeError):
    pass


@dataclass
class BranchPoint:
    sigma: float
    u: np.ndarray
    residual: float
    smin: float
    lambda1: complex = np.nan
    arclength: float = 0.0


@dataclass
class ContinuationState:
    branch: list = field(default_factory=list)
    sigma: float = 0.0
    step: float = 0.05
    mode: str = "natural"
    tangent: np.ndarray | None = None
    fold: dict | None = None
    segments: list = field(default_factory=list)

    @property
    def sigmas(self):
        return np.array([p.sigma for p in self.branch])


def smallest_singular_value(mat) -> float:
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def leading_eigenvalue(mat) -> complex:
    w = np.linalg.eigvals(mat)
    return complex(w[np.argmax(w.real)])


def _newton_fixed(problem, u, s, tol, maxit=25):
    hist = []
    for _ in range(maxit):
        res = problem.residual(u, s)
        rn = problem.norm(res)
        hist.append(rn)
        if rn <= tol:
            return u, rn, True
        if not np.isfinite(rn) or (len(hist) > 5 and rn > 0.5 * hist[-5]):
            break
        u = u + np.linalg.solve(problem.jacobian(u, s), -res)
    return u, hist[-1], False


def _tangent(problem, u, s, prev=None):
    jac = problem.jacobian(u, s)
    fs = problem.d_sigma(u, s)
    n = u.size
    big = np.zeros((n + 1, n + 1))
    big[:n, :n] = jac
    big[:n, n] = fs
    if prev is None:
        big[n, n] = 1.0
    else:
        big[n] = prev
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    t = np.linalg.solve(big, rhs)
    t /= np.linalg.norm(t)
    if prev is not None and np.dot(t, prev) < 0:
        t = -t
    return t


def _arclength_correct(problem, pred, t, tol, maxit=25):
    n = pred.size - 1
    x = pred.copy()
    for _ in range(maxit):
        u, s = x[:n], x[n]
        res = problem.residual(u, s)
        rn = problem.norm(res)
        cons = np.dot(t, x - pred)
        if rn <= tol and abs(cons) <= 1e-13:
            return x, rn, True
        big = np.zeros((n + 1, n + 1))
        big[:n, :n] = problem.jacobian(u, s)
        big[:n, n] = problem.d_sigma(u, s)
        big[n] = t
        x = x + np.linalg.solve(big, -np.concatenate([res, [cons]]))
        if not np.all(np.isfinite(x)):
            break
    u, s = x[:n], x[n]
    rn = problem.norm(problem.residual(u, s))
    return x, rn, rn <= tol


def _point(problem, u, s, rn, arc=0.0):
    jac = problem.jacobian(u, s)
    scaled = problem.scaled_jacobian(jac) if hasattr(problem, "scaled_jacobian") else jac
    return BranchPoint(float(s), u.copy(), float(rn), smallest_singular_value(scaled), leading_eigenvalue(jac), arc)


def _locate_fold(points):
    """Quadratic fit of sigma against arclength through the three points around the turn."""
    arcs = np.array([p.arclength for p in points])
    sig = np.array([p.sigma for p in points])
    c = np.polyfit(arcs - arcs[1], sig, 2)
    if c[0] == 0:
        return float(sig.max()), float(arcs[1])
    s_star = -c[1] / (2 * c[0])
    return float(np.polyval(c, s_star)), float(s_star + arcs[1])


def _refine_fold(problem, base, t_base, ds_max, tol):
    """Root of the sigma-component of the tangent along the arc from ``base``."""
    n = base.u.size
    x0 = np.concatenate([base.u, [base.sigma]])

    def comp(ds):
        x, _, ok = _arclength_correct(problem, x0 + ds * t_base, t_base, tol)
        if not ok:
            raise ContinuationError("corrector failed while refining fold")
        return _tangent(problem, x[:n], x[n], t_base)[n], x

    lo, hi = 0.0, ds_max
    flo = comp(lo)[0]
    x = x0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm, x = comp(mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    return float(x[n]), float(base.arclength + 0.5 * (lo + hi)), x[:n]


def continue_branch(problem, u0, sigma0: float, target: float, step: float = 0.05,
                    tol: float = 1e-10, sv_threshold: float = 1e-3, max_steps: int = 400,
                    min_step: float = 1e-8, arc_step: float | None = None,
                    state: ContinuationState | None = None) -> ContinuationState:
    """Continue from (u0, sigma0) toward sigma = target.

    Returns the state with the branch; if a fold is passed, ``fold`` holds
    its location and ``segments`` the two branch pieces meeting there.
    """
    direction = np.sign(target - sigma0) or 1.0
    u, rn, ok = _newton_fixed(problem, np.asarray(u0, dtype=float), sigma0, tol)
    if not ok:
        raise ContinuationError(f"starting point not converged (residual {rn:.3e})")
    st = state or ContinuationState(step=abs(step))
    st.branch.append(_point(problem, u, sigma0, rn))
    st.sigma = sigma0
    h = abs(step)
    n = u.size
    while len(st.branch) < max_steps:
        last = st.branch[-1]
        if st.mode == "natural":
            if direction * (target - last.sigma) <= 1e-14:
                break
            if last.smin < sv_threshold:
                log.info("smallest singular value %.2e below %.0e at sigma=%.6g: pseudo-arclength",
                         last.smin, sv_threshold, last.sigma)
                st.mode = "pseudo_arclength"
                st.tangent = _tangent(problem, last.u, last.sigma,
                                      np.concatenate([np.zeros(n), [direction]]))
                h = abs(step)  # natural-step halving near the fold says nothing about arclength
                continue
            s_new = last.sigma + direction * min(h, abs(target - last.sigma))
            if len(st.branch) > 1:
                prev = st.branch[-2]
                guess = last.u + (last.u - prev.u) * (s_new - last.sigma) / (last.sigma - prev.sigma)
            else:
                guess = last.u
            u, rn, ok = _newton_fixed(problem, guess, s_new, tol)
            if not ok:
                h /= 2
                if h < min_step:
                    # the natural parameterisation has failed: try arclength before giving up
                    if st.mode == "natural" and last.smin < 1e2 * sv_threshold:
                        st.mode = "pseudo_arclength"
                        st.tangent = _tangent(problem, last.u, last.sigma,
                                              np.concatenate([np.zeros(n), [direction]]))
                        h = abs(step)
                        continue
                    raise ContinuationError("step underflow without convergence")
                continue
            st.branch.append(_point(problem, u, s_new, rn, last.arclength + abs(s_new - last.sigma)))
            st.sigma = s_new
            continue
        # pseudo-arclength
        ds = arc_step or h
        x0 = np.concatenate([last.u, [last.sigma]])
        pred = x0 + ds * st.tangent
        x, rn, ok = _arclength_correct(problem, pred, st.tangent, tol)
        if not ok:
            h /= 2
            arc_step = None if arc_step is None else arc_step / 2
            if (arc_step or h) < min_step:
                raise ContinuationError("arclength step underflow without convergence")
            continue
        new_t = _tangent(problem, x[:n], x[n], st.tangent)
        pt = _point(problem, x[:n], x[n], rn, last.arclength + ds)
        st.branch.append(pt)
        st.sigma = pt.sigma
        if st.fold is None and np.sign(new_t[n]) != np.sign(st.tangent[n]) and st.tangent[n] != 0:
            k = len(st.branch) - 1
            try:
                s_fold, a_fold, u_fold = _refine_fold(problem, last, st.tangent, ds, tol)
                at = _point(problem, u_fold, s_fold, 0.0)
                extra = {"smin": at.smin, "lambda1": at.lambda1}
            except ContinuationError:
                s_fold, a_fold = _locate_fold(st.branch[-3:])
                extra = {"smin": float(min(p.smin for p in st.branch[-3:])), "lambda1": np.nan}
            st.fold = {"sigma": s_fold, "arclength": a_fold, "index": k, **extra}
            log.info("fold detected near sigma=%.8f", s_fold)
        st.tangent = new_t
        if st.fold is not None:
            # stop once the second branch is back at the starting sigma or beyond target
            if -direction * (pt.sigma - sigma0) >= 0 or direction * (pt.sigma - target) > 0:
                break
        elif direction * (pt.sigma - target) >= 0:
            break
    if st.fold is not None:
        k = st.fold["index"]
        st.segments = [st.branch[:k], st.branch[k:]]
    else:
        st.segments = [st.branch]
    return st


class PlantedFold:
    """F(u, s) = H u - lam1 x e1 + (s0 - s - x^2) e1 + c x^2 e2,  x = <e1*, u>.

    H is a stable matrix with simple leading eigenpair (lam1, e1) and left
    eigenvector e1*.  Solutions exist for s <= s0 with x = +-sqrt(s0 - s); at
    s = s0 the two branches meet in a quadratic fold.
    """

    def __init__(self, H, s0: float = 1.0, coupling: float = 0.1):
        H = np.asarray(H, dtype=float)
        w, vr = np.linalg.eig(H)
        wl, vl = np.linalg.eig(H.T)
        i = np.argmax(w.real)
        j = np.argmin(np.abs(wl - w[i]))
        self.lam1 = float(w[i].real)
        e1 = vr[:, i].real
        e1 /= np.linalg.norm(e1)
        left = vl[:, j].real
        left /= np.dot(left, e1)
        order = np.argsort(-w.real)
        e2 = vr[:, order[1]].real
        e2 /= np.linalg.norm(e2)
        self.lam2 = float(w[order[1]].real)
        self.H, self.e1, self.left, self.e2 = H, e1, left, e2
        self.s0 = float(s0)
        self.c = float(coupling)

    def x(self, u):
        return float(np.dot(self.left, u))

    def residual(self, u, s):
        x = self.x(u)
        return self.H @ u - self.lam1 * x * self.e1 + (self.s0 - s - x * x) * self.e1 + self.c * x * x * self.e2

    def jacobian(self, u, s):
        x = self.x(u)
        return (self.H - self.lam1 * np.outer(self.e1, self.left)
                - 2 * x * np.outer(self.e1, self.left) + 2 * self.c * x * np.outer(self.e2, self.left))

    def d_sigma(self, u, s):
        return -self.e1

    def norm(self, u):
        return float(np.linalg.norm(u))

    def solution(self, s, sign=1.0):
        """Exact branch point for s <= s0."""
        x = sign * np.sqrt(self.s0 - s)
        return x * self.e1 - self.c * x * x * self.e2 / self.lam2
