"""Numba kernels for the two hot loops: RK4 Lindblad stepping and
grid evaluation of the displaced-parity Wigner function.

Both kernels are deterministic (no threading inside a call is allowed to
change results: the Wigner kernel writes one independent output per grid
point, the RK4 kernel is sequential).
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def rk4_lindblad(rho, duration, steps, chi, gamma):
    """Fixed-step RK4 for drho/dt = -i chi/2 [n(n-1), rho] + damping.

    The generator acts elementwise plus a single superdiagonal shift:
        rhs[m,n] = A[m,n] rho[m,n] + gamma sqrt((m+1)(n+1)) rho[m+1,n+1]
    with A[m,n] = -i chi/2 (m(m-1) - n(n-1)) - gamma/2 (m+n).

    Returns (rho, ok); ok is False when an entry exceeded 1e6 (divergence).
    """
    d = rho.shape[0]
    A = np.empty((d, d), dtype=np.complex128)
    for m in range(d):
        for n in range(d):
            A[m, n] = complex(-0.5 * gamma * (m + n),
                              -0.5 * chi * (m * (m - 1) - n * (n - 1)))
    J = np.empty((d - 1, d - 1))
    for m in range(d - 1):
        for n in range(d - 1):
            J[m, n] = gamma * math.sqrt((m + 1.0) * (n + 1.0))
    h = duration / steps
    k1 = np.empty_like(rho)
    k2 = np.empty_like(rho)
    k3 = np.empty_like(rho)
    k4 = np.empty_like(rho)
    tmp = np.empty_like(rho)
    for s in range(steps):
        for m in range(d):
            for n in range(d):
                v = A[m, n] * rho[m, n]
                if m < d - 1 and n < d - 1:
                    v += J[m, n] * rho[m + 1, n + 1]
                k1[m, n] = v
                tmp[m, n] = rho[m, n] + 0.5 * h * v
        for m in range(d):
            for n in range(d):
                v = A[m, n] * tmp[m, n]
                if m < d - 1 and n < d - 1:
                    v += J[m, n] * tmp[m + 1, n + 1]
                k2[m, n] = v
        for m in range(d):
            for n in range(d):
                tmp[m, n] = rho[m, n] + 0.5 * h * k2[m, n]
        for m in range(d):
            for n in range(d):
                v = A[m, n] * tmp[m, n]
                if m < d - 1 and n < d - 1:
                    v += J[m, n] * tmp[m + 1, n + 1]
                k3[m, n] = v
        for m in range(d):
            for n in range(d):
                tmp[m, n] = rho[m, n] + h * k3[m, n]
        for m in range(d):
            for n in range(d):
                v = A[m, n] * tmp[m, n]
                if m < d - 1 and n < d - 1:
                    v += J[m, n] * tmp[m + 1, n + 1]
                k4[m, n] = v
        mx = 0.0
        for m in range(d):
            for n in range(d):
                rho[m, n] = rho[m, n] + (h / 6.0) * (k1[m, n] + 2.0 * k2[m, n]
                                                     + 2.0 * k3[m, n] + k4[m, n])
                av = abs(rho[m, n].real) + abs(rho[m, n].imag)
                if av > mx:
                    mx = av
        if mx > 1e6 or not math.isfinite(mx):
            return rho, False
    return rho, True


@numba.njit(cache=True)
def wigner_points(rho, bx, by, sqa, sqb, keep):
    """W at phase-space points alpha: bx/by hold B = 2*alpha components.

    Evaluates (2/pi) Re sum_{m,n} rho_mn (-1)^m <n|D(B)|m> exactly, using
    the modulus-phase split of the displacement matrix elements: for
    offset k = n - m >= 0,

        <m+k|D(B)|m> = u^k f_m^{(k)}(x),   u = B/|B|,  x = |B|^2,
        f_m^{(k)}(x) = sqrt(m!/(m+k)!) x^{k/2} e^{-x/2} L_m^{(k)}(x),

    where the Laguerre functions f are bounded unitary matrix elements and
    follow a numerically benign three-term recurrence in m.  Terms with
    k < 0 are the conjugates of the k > 0 terms, so only the upper
    triangle of rho is read (rho must be Hermitian).

    sqa[k*N+m] = sqrt(m(m+k)) and sqb[k*N+m] = 1/sqrt((m+1)(m+1+k)) are
    precomputed recurrence coefficients.  keep[k] = False skips offset k
    (the caller guarantees its coherences are negligible).
    """
    npts = bx.size
    N = rho.shape[0]
    out = np.empty(npts)
    for p in range(npts):
        x = bx[p] * bx[p] + by[p] * by[p]
        if x > 0.0:
            r = math.sqrt(x)
            ur = bx[p] / r
            ui = by[p] / r
            lx = math.log(x)
        else:
            ur = 1.0
            ui = 0.0
            lx = 0.0
        s = 0.0
        ukr = 1.0  # u^k, updated per offset
        uki = 0.0
        for k in range(N):
            if keep[k]:
                f_prev = 0.0
                if x > 0.0:
                    f = math.exp(0.5 * (k * lx - math.lgamma(k + 1.0) - x))
                else:
                    f = 1.0 if k == 0 else 0.0
                acc_r = 0.0
                acc_i = 0.0
                sign = 1.0
                base = k * N
                for m in range(N - k):
                    rr = rho[m, m + k]
                    acc_r += sign * rr.real * f
                    acc_i += sign * rr.imag * f
                    f_next = ((2.0 * m + k + 1.0 - x) * f
                              - sqa[base + m] * f_prev) * sqb[base + m]
                    f_prev = f
                    f = f_next
                    sign = -sign
                tr = ukr * acc_r - uki * acc_i
                s += tr if k == 0 else 2.0 * tr
            t = ukr * ur - uki * ui
            uki = ukr * ui + uki * ur
            ukr = t
        out[p] = (2.0 / math.pi) * s
    return out


def laguerre_tables(N: int):
    """Recurrence coefficient tables for `wigner_points` at matrix size N."""
    k = np.arange(N)[:, None]
    m = np.arange(N)[None, :]
    sqa = np.sqrt((m * (m + k)).astype(np.float64))
    sqb = 1.0 / np.sqrt((m + 1.0) * (m + 1.0 + k))
    return sqa.ravel(), sqb.ravel()
