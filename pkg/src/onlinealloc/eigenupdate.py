"""Rank-one modification of a symmetric eigen-decomposition.

Given ``R = Q diag(pi) Q'`` the eigen-decomposition of ``R + s xi xi'`` is
obtained from the secular equation of ``diag(pi) + s z z'`` with
``z = Q' xi``.  Small components of ``z`` and clustered eigenvalues are
deflated first; the remaining roots are located in shifted coordinates and
the update vector is recomputed from them (Gu & Eisenstat), which keeps the
new eigenvectors numerically orthogonal.  Cost is ``O(d^2)`` for the
eigenvalues plus one ``d x k`` by ``k x k`` product for the eigenvectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_EPS = np.finfo(float).eps


class EigenUpdateError(ArithmeticError):
    """The updated decomposition does not reproduce the updated matrix."""


@dataclass
class EigenDecomp:
    Q: np.ndarray
    Pi: np.ndarray  # descending

    @classmethod
    def of(cls, M) -> "EigenDecomp":
        M = np.asarray(M, dtype=float)
        w, V = np.linalg.eigh(0.5 * (M + M.T))
        return cls(V[:, ::-1].copy(), w[::-1].copy())

    def matrix(self) -> np.ndarray:
        return (self.Q * self.Pi) @ self.Q.T

    def scaled(self, factor: float) -> "EigenDecomp":
        return EigenDecomp(self.Q, self.Pi * factor)

    def copy(self) -> "EigenDecomp":
        return EigenDecomp(self.Q.copy(), self.Pi.copy())


@numba.njit(cache=True)
def _secular_roots(dk, z2):
    """Roots of ``1 + sum z2_i / (dk_i - mu)`` for strictly increasing ``dk``.

    Root j is returned as ``dk[org[j]] + tau[j]`` so that differences
    ``dk_i - mu_j`` can be formed without cancellation.
    """
    k = dk.shape[0]
    org = np.empty(k, dtype=np.int64)
    tau = np.empty(k)
    znorm2 = 0.0
    for i in range(k):
        znorm2 += z2[i]
    eps = 2.220446049250313e-16
    delta = np.empty(k)
    for j in range(k):
        last = j == k - 1
        if last:
            o = j
            lo = 0.0
            hi = znorm2
        else:
            mid = 0.5 * (dk[j] + dk[j + 1])
            f = 1.0
            for i in range(k):
                f += z2[i] / (dk[i] - mid)
            if f >= 0.0:
                o = j
                lo = 0.0
                hi = mid - dk[j]
            else:
                o = j + 1
                lo = mid - dk[j + 1]
                hi = 0.0
        for i in range(k):
            delta[i] = dk[i] - dk[o]
        t = 0.5 * (lo + hi)
        for _ in range(200):
            psi = 0.0
            dpsi = 0.0
            phi = 0.0
            dphi = 0.0
            for i in range(k):
                r = delta[i] - t
                term = z2[i] / r
                if i <= j:
                    psi += term
                    dpsi += term / r
                else:
                    phi += term
                    dphi += term / r
            f = 1.0 + psi + phi
            if f == 0.0:
                break
            if f > 0.0:
                hi = t
            else:
                lo = t
            if abs(f) <= 8.0 * eps * k * (1.0 + abs(psi) + abs(phi)):
                break
            A = delta[j] - t
            if last:
                c = 1.0 + psi - dpsi * A
                eta = A + dpsi * A * A / c if c != 0.0 else np.nan
            else:
                B = delta[j + 1] - t
                q = dpsi * A * A
                s = dphi * B * B
                c = 1.0 + (psi - dpsi * A) + (phi - dphi * B)
                a1 = -(c * (A + B) + q + s)
                a0 = A * B * f
                if c == 0.0:
                    eta = -a0 / a1 if a1 != 0.0 else np.nan
                else:
                    disc = a1 * a1 - 4.0 * c * a0
                    if disc < 0.0:
                        disc = 0.0
                    sq = np.sqrt(disc)
                    e1 = (-a1 - sq) / (2.0 * c) if a1 >= 0.0 else (-a1 + sq) / (2.0 * c)
                    e2 = a0 / (c * e1) if e1 != 0.0 else np.nan
                    # pick the increment landing inside the bracket
                    if lo < t + e1 < hi:
                        eta = e1
                    else:
                        eta = e2
            t_new = t + eta
            if not (lo < t_new < hi):
                t_new = 0.5 * (lo + hi)
                if t_new <= lo or t_new >= hi:
                    break
            if abs(t_new - t) <= 4.0 * eps * abs(t_new):
                t = t_new
                break
            t = t_new
        org[j] = o
        tau[j] = t
    return org, tau


@numba.njit(cache=True)
def _secular_vectors(dk, z, org, tau):
    """Eigenvectors of ``diag(dk) + z z'`` from the computed roots."""
    k = dk.shape[0]
    zhat = np.empty(k)
    for i in range(k):
        # (mu_{k-1} - d_i) * prod_{j<i} (mu_j - d_i)/(d_j - d_i) * prod_{j>=i, j<k-1} (mu_j - d_i)/(d_{j+1} - d_i)
        prod = (dk[org[k - 1]] - dk[i]) + tau[k - 1]
        for j in range(k - 1):
            num = (dk[org[j]] - dk[i]) + tau[j]
            if j < i:
                prod *= num / (dk[j] - dk[i])
            else:
                prod *= num / (dk[j + 1] - dk[i])
        zhat[i] = np.sqrt(abs(prod))
        if z[i] < 0.0:
            zhat[i] = -zhat[i]
    U = np.empty((k, k))
    for j in range(k):
        nrm = 0.0
        for i in range(k):
            v = zhat[i] / ((dk[i] - dk[org[j]]) - tau[j])
            U[i, j] = v
            nrm += v * v
        nrm = np.sqrt(nrm)
        for i in range(k):
            U[i, j] /= nrm
    return U


def _update_ascending(dv, Q, z):
    """Decomposition of ``Q diag(dv) Q' + Q z z' Q'`` with ``dv`` ascending.

    Returns new eigenvalues (unsorted) and eigenvectors (columns).
    """
    d = dv.size
    z = z.copy()
    Q = Q.copy()
    znorm2 = float(z @ z)
    tol = 8.0 * _EPS * max(np.max(np.abs(dv)), znorm2)
    if znorm2 <= tol * tol:
        return dv.copy(), Q

    active = np.abs(z) > tol
    # clusters of (nearly) equal eigenvalues: one reflection per cluster folds
    # the cluster's share of z into its last member, deflating the others
    a = np.flatnonzero(active)
    if a.size > 1:
        breaks = np.flatnonzero(np.diff(dv[a]) > tol) + 1
        for g in np.split(a, breaks):
            if g.size < 2:
                continue
            zg = z[g]
            alpha = -np.copysign(np.linalg.norm(zg), zg[-1])
            v = zg.copy()
            v[-1] -= alpha
            vv = v @ v
            if vv > 0.0:
                Qg = Q[:, g]
                Q[:, g] = Qg - np.outer(Qg @ v, (2.0 / vv) * v)
            z[g[:-1]] = 0.0
            z[g[-1]] = alpha
            active[g[:-1]] = False

    idx = np.flatnonzero(active)
    lam = dv.copy()
    if idx.size == 0:
        return lam, Q
    dk, zk = dv[idx], z[idx]
    org, tau = _secular_roots(dk, zk * zk)
    lam[idx] = dk[org] + tau
    U = _secular_vectors(dk, zk, org, tau)
    Q[:, idx] = Q[:, idx] @ U
    return lam, Q


def eigen_rank_one_update(
    decomp: EigenDecomp,
    xi,
    sign: int = 1,
    check: bool = True,
    check_tol: float = 1e-6,
) -> EigenDecomp:
    """Decomposition of ``R + sign * xi xi'``.

    Negative eigenvalues produced by a downdate are clamped to zero (the
    updated matrix is positive semi-definite by construction).  With
    ``check`` the result is validated on a probe vector in ``O(d^2)`` and
    :class:`EigenUpdateError` is raised when the relative residual exceeds
    ``check_tol``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    xi = np.asarray(xi, dtype=float)
    Q, Pi = decomp.Q, decomp.Pi
    z = Q.T @ xi
    if not np.any(z):
        return decomp.copy()

    if sign > 0:
        # ascending order for the secular solver
        lam, Qn = _update_ascending(Pi[::-1].copy(), Q[:, ::-1], z[::-1].copy())
    else:
        # D - zz' = -((-D) + zz'); -Pi is already ascending
        lam, Qn = _update_ascending(-Pi, Q, z)
        lam = -lam
    order = np.argsort(lam, kind="stable")[::-1]
    lam, Qn = lam[order], Qn[:, order]
    if sign < 0:
        lam = np.maximum(lam, 0.0)
    out = EigenDecomp(np.ascontiguousarray(Qn), lam)

    if check:
        probe = np.ones_like(xi) + xi
        expect = Q @ (Pi * (Q.T @ probe)) + sign * xi * (xi @ probe)
        got = out.Q @ (out.Pi * (out.Q.T @ probe))
        scale = max(np.abs(Pi).max(initial=0.0), xi @ xi) * np.linalg.norm(probe)
        if scale > 0 and np.linalg.norm(got - expect) > check_tol * scale:
            raise EigenUpdateError("eigen-update failed: reconstruction residual too large")
    return out
