"""Compiled RK4 kernel for the cavity + spin-bin equations of motion.

The program is a list of segments.  Inside a segment the cavity detuning and
the drive are constant and ``n`` equal steps of size ``h`` are taken.  The
collective sum over bins is a plain sequential loop, so results do not depend
on threading.
"""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _collective(w, g, s):
    acc = 0j
    for j in range(s.size):
        acc += w[j] * g[j] * s[j]
    return acc


@numba.njit(cache=True, nogil=True)
def integrate_segments(a0, s, z, delta, g, w, gam2, gam1, zeq, half_kappa,
                       seg_h, seg_n, seg_det, seg_eps, seg_rec, out):
    """Advance (a, s, z) in place over all segments.

    ``out[0]`` receives a0 and every segment with ``seg_rec`` set appends the
    field at its end.  Returns (a, status) with status -1 on success or the
    index of the segment where a non-finite value appeared.
    """
    nb = s.size
    ks = np.empty(nb, np.complex128)
    kz = np.empty(nb)
    st = np.empty(nb, np.complex128)
    zt = np.empty(nb)
    a = a0
    out[0] = a
    r = 1
    for i in range(seg_h.size):
        h = seg_h[i]
        damp = half_kappa + 1j * seg_det[i]
        eps = seg_eps[i]
        for _ in range(seg_n[i]):
            # stage 1
            ka = -damp * a - 1j * _collective(w, g, s) + eps
            acc = ka
            for j in range(nb):
                ds = -(gam2 + 1j * delta[j]) * s[j] + 2j * g[j] * a * z[j]
                dz = -(z[j] - zeq) * gam1 - 2.0 * g[j] * (np.conj(a) * s[j]).imag
                ks[j] = ds
                kz[j] = dz
                st[j] = s[j] + 0.5 * h * ds
                zt[j] = z[j] + 0.5 * h * dz
            at = a + 0.5 * h * ka
            # stages 2-4
            for stage in range(3):
                kb = -damp * at - 1j * _collective(w, g, st) + eps
                c = 2.0 if stage < 2 else 1.0
                acc += c * kb
                fac = 0.5 * h if stage == 0 else h
                for j in range(nb):
                    ds = -(gam2 + 1j * delta[j]) * st[j] + 2j * g[j] * at * zt[j]
                    dz = -(zt[j] - zeq) * gam1 - 2.0 * g[j] * (np.conj(at) * st[j]).imag
                    ks[j] += c * ds
                    kz[j] += c * dz
                    if stage < 2:
                        st[j] = s[j] + fac * ds
                        zt[j] = z[j] + fac * dz
                if stage < 2:
                    at = a + fac * kb
            a = a + h / 6.0 * acc
            for j in range(nb):
                s[j] += h / 6.0 * ks[j]
                z[j] += h / 6.0 * kz[j]
        if not (np.isfinite(a.real) and np.isfinite(a.imag)):
            return a, i
        if seg_rec[i]:
            out[r] = a
            r += 1
    return a, -1
