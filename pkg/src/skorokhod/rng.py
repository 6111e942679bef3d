"""Counter-based random streams for reproducible parallel Monte Carlo.

Every path owns a 64-bit key derived from ``(master_seed, path_index)``;
its k-th raw draw is a pure hash of ``(key, k)``. Results therefore do not
depend on how paths are distributed over workers. The hash is the
SplitMix64 finaliser; normals come from a 128-layer ziggurat driven by
the same stream.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

__all__ = ["path_key", "uniform", "normal", "uniforms", "normals"]

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_LOW7 = np.uint64(127)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

_ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3


def _ziggurat_tables():
    # Marsaglia & Tsang layout with 31-bit integer acceptance thresholds
    m1 = 2147483648.0
    dn = tn = _ZIG_R
    kn = np.zeros(128, np.int64)
    wn = np.zeros(128)
    fn = np.zeros(128)
    q = _ZIG_V / math.exp(-0.5 * dn * dn)
    kn[0] = int((dn / q) * m1)
    wn[0] = q / m1
    wn[127] = dn / m1
    fn[0] = 1.0
    fn[127] = math.exp(-0.5 * dn * dn)
    for i in range(126, 0, -1):
        dn = math.sqrt(-2.0 * math.log(_ZIG_V / dn + math.exp(-0.5 * dn * dn)))
        kn[i + 1] = int((dn / tn) * m1)
        tn = dn
        fn[i] = math.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


_KN, _WN, _FN = _ziggurat_tables()


@nb.njit(inline="always", nogil=True, cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(nogil=True, cache=True)
def path_key(master_seed, index):
    """Stream key of path ``index`` under ``master_seed``."""
    return _mix(np.uint64(master_seed) ^ _mix(np.uint64(index) + _GOLDEN))


@nb.njit(inline="always", nogil=True, cache=True)
def _raw(key, ctr):
    return _mix(key + ctr * _GOLDEN)


@nb.njit(inline="always", nogil=True, cache=True)
def _to_unit(z):
    # strictly inside (0, 1)
    return (np.float64(z >> _S11) + 0.5) * _INV53


@nb.njit(nogil=True, cache=True)
def uniform(key, ctr):
    """Next uniform on ``(0, 1)``; returns ``(value, new_counter)``."""
    ctr = ctr + _ONE
    return _to_unit(_raw(key, ctr)), ctr


@nb.njit(nogil=True, cache=True)
def normal(key, ctr):
    """Next standard normal; returns ``(value, new_counter)``."""
    while True:
        ctr = ctr + _ONE
        z = _raw(key, ctr)
        iz = np.int64(z & _LOW7)
        hz = np.int64(np.int32(np.uint32(z >> _S32)))
        if abs(hz) < _KN[iz]:
            return hz * _WN[iz], ctr
        if iz == 0:
            # tail beyond R by exponential rejection
            while True:
                ctr = ctr + _ONE
                x = -math.log(_to_unit(_raw(key, ctr))) / _ZIG_R
                ctr = ctr + _ONE
                y = -math.log(_to_unit(_raw(key, ctr)))
                if y + y >= x * x:
                    if hz > 0:
                        return _ZIG_R + x, ctr
                    return -(_ZIG_R + x), ctr
        x = hz * _WN[iz]
        ctr = ctr + _ONE
        f = _FN[iz] + _to_unit(_raw(key, ctr)) * (_FN[iz - 1] - _FN[iz])
        if f < math.exp(-0.5 * x * x):
            return x, ctr


@nb.njit(nogil=True, cache=True)
def uniforms(master_seed, index, n):
    """First ``n`` uniforms of one path stream (testing aid)."""
    key = path_key(master_seed, index)
    ctr = np.uint64(0)
    out = np.empty(n)
    for k in range(n):
        out[k], ctr = uniform(key, ctr)
    return out


@nb.njit(nogil=True, cache=True)
def normals(master_seed, index, n):
    """First ``n`` normals of one path stream (testing aid)."""
    key = path_key(master_seed, index)
    ctr = np.uint64(0)
    out = np.empty(n)
    for k in range(n):
        out[k], ctr = normal(key, ctr)
    return out
