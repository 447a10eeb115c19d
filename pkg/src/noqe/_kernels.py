"""Compiled per-snapshot kernels.

Everything here operates on plain arrays so the hot loops (uniform tableau
sampling, tableau -> dense unitary, Born sampling, noisy density-matrix
evolution) run at native speed. The module-level wrappers in clifford.py,
shadows.py and noise.py are the public faces; tests pin these kernels against
independent numpy oracles.

Tableau layout: M is (2N, 2N) uint8 over GF(2) with columns [x-block|z-block];
row q is the conjugated image of X_q, row N+q the image of Z_q; r holds one
sign bit per row. A row (x, z, r) encodes the Pauli (-1)^r i^(x.z) X^x Z^z
(Hermitian convention). Bit masks below use basis-index bit order, i.e. bit
(N-1-q) belongs to qubit q.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# synthesized-gate opcodes
OP_H = 0
OP_S = 1
OP_CNOT = 2
OP_CZ = 3
OP_X = 4
OP_Z = 5

_U64 = np.uint64


# ---------------------------------------------------------------- PRNG

@njit(cache=True, inline="always")
def _splitmix_next(s):
    s = (s + _U64(0x9E3779B97F4A7C15)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = s
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)) & _U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)) & _U64(0xFFFFFFFFFFFFFFFF)
    return s, z ^ (z >> _U64(31))


@njit(cache=True, inline="always")
def _rotl(x, k):
    return ((x << _U64(k)) | (x >> _U64(64 - k))) & _U64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True)
def _xo_init(seed, st):
    s = _U64(seed)
    for i in range(4):
        s, z = _splitmix_next(s)
        st[i] = z


@njit(cache=True, inline="always")
def _xo_next(st):
    # xoshiro256++
    result = (_rotl((st[0] + st[3]) & _U64(0xFFFFFFFFFFFFFFFF), 23) + st[0]) & _U64(
        0xFFFFFFFFFFFFFFFF
    )
    t = (st[1] << _U64(17)) & _U64(0xFFFFFFFFFFFFFFFF)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return result


@njit(cache=True, inline="always")
def _xo_double(st):
    return float(_xo_next(st) >> _U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _xo_below(st, n):
    # unbiased bounded draw via bitmask rejection
    if n <= 1:
        return 0
    span = _U64(n - 1)
    mask = _U64(1)
    while mask < span:
        mask = (mask << _U64(1)) | _U64(1)
    while True:
        x = _xo_next(st) & mask
        if x < _U64(n):
            return np.int64(x)


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> _U64(1)) & _U64(0x5555555555555555))
    x = (x & _U64(0x3333333333333333)) + ((x >> _U64(2)) & _U64(0x3333333333333333))
    x = (x + (x >> _U64(4))) & _U64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * _U64(0x0101010101010101)) >> _U64(56))


# ------------------------------------------- uniform symplectic sampling

@njit(cache=True)
def _sinner(v, w, m):
    # symplectic inner product, interleaved (x0, z0, x1, z1, ...) pairing
    t = 0
    for i in range(m // 2):
        t += v[2 * i] * w[2 * i + 1] + w[2 * i] * v[2 * i + 1]
    return t & 1


@njit(cache=True)
def _transvect(k, v, m):
    c = _sinner(k, v, m)
    if c:
        for i in range(m):
            v[i] ^= k[i]


@njit(cache=True)
def _find_transvection(x, y, h0, h1, z, m):
    """Fill h0, h1 with transvection vectors mapping x to y (both nonzero)."""
    for i in range(m):
        h0[i] = 0
        h1[i] = 0
        z[i] = 0
    same = True
    for i in range(m):
        if x[i] != y[i]:
            same = False
            break
    if same:
        return
    if _sinner(x, y, m) == 1:
        for i in range(m):
            h0[i] = x[i] ^ y[i]
        return
    # look for a qubit pair where both vectors are nonzero
    for i in range(m // 2):
        ii = 2 * i
        if (x[ii] | x[ii + 1]) and (y[ii] | y[ii + 1]):
            z[ii] = x[ii] ^ y[ii]
            z[ii + 1] = x[ii + 1] ^ y[ii + 1]
            if z[ii] == 0 and z[ii + 1] == 0:
                z[ii + 1] = 1
                if x[ii] != x[ii + 1]:
                    z[ii] = 1
            for j in range(m):
                h0[j] = x[j] ^ z[j]
                h1[j] = y[j] ^ z[j]
            return
    # otherwise one vector is zero on every pair where the other is not
    for i in range(m // 2):
        ii = 2 * i
        if (x[ii] | x[ii + 1]) and not (y[ii] | y[ii + 1]):
            if x[ii] == x[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = x[ii]
                z[ii] = x[ii + 1]
            break
    for i in range(m // 2):
        ii = 2 * i
        if not (x[ii] | x[ii + 1]) and (y[ii] | y[ii + 1]):
            if y[ii] == y[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = y[ii]
                z[ii] = y[ii + 1]
            break
    for j in range(m):
        h0[j] = x[j] ^ z[j]
        h1[j] = y[j] ^ z[j]


@njit(cache=True)
def _random_symplectic(n, st, g, scratch):
    """Uniform 2n x 2n symplectic matrix (interleaved pairing), rows = images.

    Built inside-out: at level j a fresh (e1, f1) hyperbolic pair is drawn,
    the lower-dimensional block is embedded, and the level's transvections are
    applied to every row. Each level's choice count multiplies to the group
    order, so the draw is exactly uniform.
    """
    f1 = scratch[0]
    e1 = scratch[1]
    t0 = scratch[2]
    t1 = scratch[3]
    h0 = scratch[4]
    ztmp = scratch[5]
    ep = scratch[6]

    for a in range(2 * n):
        for b in range(2 * n):
            g[a, b] = 0

    size = 0  # current block dimension
    for level in range(1, n + 1):
        m = 2 * level
        # embed previous block at the bottom-right of the new one
        if size > 0:
            for a in range(size - 1, -1, -1):
                for b in range(size - 1, -1, -1):
                    g[a + 2, b + 2] = g[a, b]
            for a in range(2):
                for b in range(m):
                    g[a, b] = 0
                for b in range(2, m):
                    g[b, a] = 0
        g[0, 0] = 1
        g[1, 1] = 1

        # random nonzero f1 and auxiliary bits
        k = _xo_below(st, (1 << m) - 1) + 1
        for i in range(m):
            f1[i] = (k >> i) & 1
            e1[i] = 0
        e1[0] = 1
        _find_transvection(e1, f1, t0, t1, ztmp, m)
        bits = _xo_next(st)
        for i in range(m):
            ep[i] = 0
        ep[0] = 1
        for j in range(2, m):
            ep[j] = (bits >> _U64(j - 1)) & _U64(1)
        _transvect(t0, ep, m)
        _transvect(t1, ep, m)
        for i in range(m):
            h0[i] = ep[i]
        if (bits & _U64(1)) == _U64(1):
            for i in range(m):
                f1[i] = 0
        for a in range(m):
            row = g[a]
            _transvect(t0, row, m)
            _transvect(t1, row, m)
            _transvect(h0, row, m)
            _transvect(f1, row, m)
        size = m


@njit(cache=True)
def _sample_tableau(n, seed, M, r):
    """Uniform Clifford tableau: uniform symplectic part plus uniform signs."""
    st = np.empty(4, dtype=np.uint64)
    _xo_init(seed, st)
    g = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    scratch = np.zeros((7, 2 * n), dtype=np.uint8)
    _random_symplectic(n, st, g, scratch)
    # interleaved pairing -> [x-block | z-block] columns; row 2q is the image
    # of X_q, row 2q+1 the image of Z_q
    for q in range(n):
        for j in range(n):
            M[q, j] = g[2 * q, 2 * j]
            M[q, n + j] = g[2 * q, 2 * j + 1]
            M[n + q, j] = g[2 * q + 1, 2 * j]
            M[n + q, n + j] = g[2 * q + 1, 2 * j + 1]
    bits = _xo_next(st)
    for i in range(2 * n):
        r[i] = (bits >> _U64(i)) & _U64(1)
    return st  # caller may keep drawing (Born sampling) from the same stream


# ------------------------------------------- tableau conjugation updates

@njit(cache=True, inline="always")
def _row_h(M, r, i, q, n):
    r[i] ^= M[i, q] & M[i, n + q]
    tmp = M[i, q]
    M[i, q] = M[i, n + q]
    M[i, n + q] = tmp


@njit(cache=True, inline="always")
def _row_s(M, r, i, q, n):
    r[i] ^= M[i, q] & M[i, n + q]
    M[i, n + q] ^= M[i, q]


@njit(cache=True, inline="always")
def _row_cnot(M, r, i, c, t, n):
    r[i] ^= M[i, c] & M[i, n + t] & (M[i, t] ^ M[i, n + c] ^ 1)
    M[i, t] ^= M[i, c]
    M[i, n + c] ^= M[i, n + t]


@njit(cache=True, inline="always")
def _row_cz(M, r, i, c, t, n):
    r[i] ^= M[i, c] & M[i, t] & (M[i, n + c] ^ M[i, n + t])
    M[i, n + c] ^= M[i, t]
    M[i, n + t] ^= M[i, c]


@njit(cache=True)
def _apply_op(M, r, op, a, b, n):
    rows = 2 * n
    if op == OP_H:
        for i in range(rows):
            _row_h(M, r, i, a, n)
    elif op == OP_S:
        for i in range(rows):
            _row_s(M, r, i, a, n)
    elif op == OP_CNOT:
        for i in range(rows):
            _row_cnot(M, r, i, a, b, n)
    elif op == OP_CZ:
        for i in range(rows):
            _row_cz(M, r, i, a, b, n)
    elif op == OP_X:
        for i in range(rows):
            r[i] ^= M[i, n + a]
    elif op == OP_Z:
        for i in range(rows):
            r[i] ^= M[i, a]


@njit(cache=True)
def _synthesize(M, r, n, ops):
    """Emit a circuit for the tableau (M, r), destroying the inputs.

    Left-multiplies gates until the tableau is the identity, then returns the
    reversed, daggered sequence (S-dagger expanded as S then Z) so the output
    builds the represented unitary from |0..0> conventions. Returns the gate
    count, or -1 if reduction fails (non-symplectic input).
    """
    work = np.empty((ops.shape[0], 3), dtype=np.int32)
    nw = 0
    for q in range(n):
        # X-row pivot on column q
        if M[q, q] == 0:
            j = -1
            for jj in range(q, n):
                if M[q, jj] == 1:
                    j = jj
                    break
            if j == -1:
                for jj in range(q, n):
                    if M[q, n + jj] == 1:
                        j = jj
                        break
                if j == -1:
                    return -1
                _apply_op(M, r, OP_H, j, 0, n)
                work[nw, 0] = OP_H
                work[nw, 1] = j
                work[nw, 2] = 0
                nw += 1
            if j != q:
                _apply_op(M, r, OP_CNOT, j, q, n)
                work[nw, 0] = OP_CNOT
                work[nw, 1] = j
                work[nw, 2] = q
                nw += 1
        # clear the rest of the X row
        for j in range(q + 1, n):
            if M[q, j]:
                _apply_op(M, r, OP_CNOT, q, j, n)
                work[nw, 0] = OP_CNOT
                work[nw, 1] = q
                work[nw, 2] = j
                nw += 1
        if M[q, n + q]:
            _apply_op(M, r, OP_S, q, 0, n)
            work[nw, 0] = OP_S
            work[nw, 1] = q
            work[nw, 2] = 0
            nw += 1
        for j in range(q + 1, n):
            if M[q, n + j]:
                _apply_op(M, r, OP_CZ, q, j, n)
                work[nw, 0] = OP_CZ
                work[nw, 1] = q
                work[nw, 2] = j
                nw += 1
        # Z row: work in the X picture, then flip back. Skip the whole
        # H-sandwich when the row is already reduced (H..H would cancel).
        zdone = M[n + q, n + q] == 1
        if zdone:
            for j in range(q, n):
                if M[n + q, j] != 0:
                    zdone = False
                    break
        if zdone:
            for j in range(n + q + 1, 2 * n):
                if M[n + q, j] != 0:
                    zdone = False
                    break
        if not zdone:
            _apply_op(M, r, OP_H, q, 0, n)
            work[nw, 0] = OP_H
            work[nw, 1] = q
            work[nw, 2] = 0
            nw += 1
            for j in range(q + 1, n):
                if M[n + q, j]:
                    _apply_op(M, r, OP_CNOT, q, j, n)
                    work[nw, 0] = OP_CNOT
                    work[nw, 1] = q
                    work[nw, 2] = j
                    nw += 1
            if M[n + q, n + q]:
                _apply_op(M, r, OP_S, q, 0, n)
                work[nw, 0] = OP_S
                work[nw, 1] = q
                work[nw, 2] = 0
                nw += 1
            for j in range(q + 1, n):
                if M[n + q, n + j]:
                    _apply_op(M, r, OP_CZ, q, j, n)
                    work[nw, 0] = OP_CZ
                    work[nw, 1] = q
                    work[nw, 2] = j
                    nw += 1
            _apply_op(M, r, OP_H, q, 0, n)
            work[nw, 0] = OP_H
            work[nw, 1] = q
            work[nw, 2] = 0
            nw += 1
    for q in range(n):
        if r[q]:
            _apply_op(M, r, OP_Z, q, 0, n)
            work[nw, 0] = OP_Z
            work[nw, 1] = q
            work[nw, 2] = 0
            nw += 1
        if r[n + q]:
            _apply_op(M, r, OP_X, q, 0, n)
            work[nw, 0] = OP_X
            work[nw, 1] = q
            work[nw, 2] = 0
            nw += 1
    # verify full reduction
    for a in range(2 * n):
        if r[a]:
            return -1
        for b in range(2 * n):
            want = 1 if a == b else 0
            if M[a, b] != want:
                return -1
    # reverse and dagger
    k = 0
    for i in range(nw - 1, -1, -1):
        op = work[i, 0]
        if op == OP_S:
            ops[k, 0] = OP_S
            ops[k, 1] = work[i, 1]
            ops[k, 2] = 0
            k += 1
            ops[k, 0] = OP_Z
            ops[k, 1] = work[i, 1]
            ops[k, 2] = 0
            k += 1
        else:
            ops[k, 0] = op
            ops[k, 1] = work[i, 1]
            ops[k, 2] = work[i, 2]
            k += 1
    return k


# --------------------------------------------- dense unitary from tableau

@njit(cache=True)
def _row_mask(M, r, i, n):
    """Row i as (phase exponent k of i^k, x index-mask, z index-mask)."""
    x = _U64(0)
    z = _U64(0)
    for q in range(n):
        bit = _U64(1) << _U64(n - 1 - q)
        if M[i, q]:
            x |= bit
        if M[i, n + q]:
            z |= bit
    k = (2 * np.int64(r[i]) + _popcount(x & z)) & 3
    return k, x, z


_IPOW_RE = np.array([1.0, 0.0, -1.0, 0.0])
_IPOW_IM = np.array([0.0, 1.0, 0.0, -1.0])


@njit(cache=True)
def _stabilizer_ket(M, r, n, psi0):
    """The state stabilized by the Z-image rows: U|0..0> up to global phase."""
    d = 1 << n
    kg = np.empty(n, dtype=np.int64)
    xg = np.empty(n, dtype=np.uint64)
    zg = np.empty(n, dtype=np.uint64)
    for q in range(n):
        k, x, z = _row_mask(M, r, n + q, n)
        kg[q] = k
        xg[q] = x
        zg[q] = z
    # pure-Z subgroup elements via gray-code sweep over all products
    nz = 0
    kz = np.empty(d, dtype=np.int64)
    zz = np.empty(d, dtype=np.uint64)
    kc = 0
    xc = _U64(0)
    zc = _U64(0)
    kz[0] = 0
    zz[0] = _U64(0)
    nz = 1
    for v in range(1, d):
        t = 0
        vv = v
        while vv & 1 == 0:
            vv >>= 1
            t += 1
        kc = (kc + kg[t] + 2 * (_popcount(zc & xg[t]) & 1)) & 3
        xc ^= xg[t]
        zc ^= zg[t]
        if xc == _U64(0):
            kz[nz] = kc
            zz[nz] = zc
            nz += 1
    # pivot column: first basis state with nonzero weight in the ket
    j0 = -1
    for j in range(d):
        acc = 0.0
        for t in range(nz):
            sgn = 1.0 - 2.0 * (_popcount(zz[t] & _U64(j)) & 1)
            acc += _IPOW_RE[kz[t]] * sgn
        if acc > 1e-9:
            j0 = j
            break
    # accumulate the pivot column of the group-average projector
    for j in range(d):
        psi0[j] = 0.0 + 0.0j
    kc = 0
    xc = _U64(0)
    zc = _U64(0)
    psi0[j0] += 1.0
    for v in range(1, d):
        t = 0
        vv = v
        while vv & 1 == 0:
            vv >>= 1
            t += 1
        kc = (kc + kg[t] + 2 * (_popcount(zc & xg[t]) & 1)) & 3
        xc ^= xg[t]
        zc ^= zg[t]
        sgn = 1.0 - 2.0 * (_popcount(zc & _U64(j0)) & 1)
        amp = complex(_IPOW_RE[kc], _IPOW_IM[kc]) * sgn
        psi0[j0 ^ np.int64(xc)] += amp
    norm = 0.0
    for j in range(d):
        norm += psi0[j].real ** 2 + psi0[j].imag ** 2
    norm = np.sqrt(norm)
    for j in range(d):
        psi0[j] /= norm


@njit(cache=True)
def _dense_unitary(M, r, n, psi0, U):
    """Fill U with the represented unitary (canonical global phase)."""
    d = 1 << n
    _stabilizer_ket(M, r, n, psi0)
    kx = np.empty(n, dtype=np.int64)
    xx = np.empty(n, dtype=np.uint64)
    zx = np.empty(n, dtype=np.uint64)
    for q in range(n):
        k, x, z = _row_mask(M, r, q, n)
        kx[q] = k
        xx[q] = x
        zx[q] = z
    # column b is (image of X^b) applied to U|0..0>; sweep b in gray order
    kc = 0
    xc = _U64(0)
    zc = _U64(0)
    for idx in range(d):
        U[idx, 0] = psi0[idx]
    b = 0
    for v in range(1, d):
        t = 0
        vv = v
        while vv & 1 == 0:
            vv >>= 1
            t += 1
        q = n - 1 - t  # flipped qubit for index-bit t
        kc = (kc + kx[q] + 2 * (_popcount(zc & xx[q]) & 1)) & 3
        xc ^= xx[q]
        zc ^= zx[q]
        b ^= 1 << t
        ph = complex(_IPOW_RE[kc], _IPOW_IM[kc])
        for idx in range(d):
            sgn = 1.0 - 2.0 * (_popcount(zc & _U64(idx)) & 1)
            U[idx ^ np.int64(xc), b] = ph * sgn * psi0[idx]


@njit(cache=True)
def _pullback_vector(M, r, n, b, psi0, out):
    """U^dagger |b> without building the full unitary: conj of row b."""
    d = 1 << n
    _stabilizer_ket(M, r, n, psi0)
    kx = np.empty(n, dtype=np.int64)
    xx = np.empty(n, dtype=np.uint64)
    zx = np.empty(n, dtype=np.uint64)
    for q in range(n):
        k, x, z = _row_mask(M, r, q, n)
        kx[q] = k
        xx[q] = x
        zx[q] = z
    kc = 0
    xc = _U64(0)
    zc = _U64(0)
    out[0] = np.conj(psi0[b])
    col = 0
    for v in range(1, d):
        t = 0
        vv = v
        while vv & 1 == 0:
            vv >>= 1
            t += 1
        q = n - 1 - t
        kc = (kc + kx[q] + 2 * (_popcount(zc & xx[q]) & 1)) & 3
        xc ^= xx[q]
        zc ^= zx[q]
        col ^= 1 << t
        idx = b ^ np.int64(xc)
        sgn = 1.0 - 2.0 * (_popcount(zc & _U64(idx)) & 1)
        ph = complex(_IPOW_RE[kc], _IPOW_IM[kc])
        out[col] = np.conj(ph * sgn * psi0[idx])


# ----------------------------------------------------- snapshot packing

@njit(cache=True)
def _pack_tableau(M, r, b, n, tab_words, i):
    nb = 2 * n
    t = 0
    w = _U64(0)
    word = 0
    for a in range(nb):
        for c in range(nb):
            if M[a, c]:
                w |= _U64(1) << _U64(t)
            t += 1
            if t == 64:
                tab_words[i, word] = w
                word += 1
                w = _U64(0)
                t = 0
    if t > 0:
        tab_words[i, word] = w
    srt = _U64(b)
    for a in range(nb):
        if r[a]:
            srt |= _U64(1) << _U64(n + a)
    return srt


@njit(cache=True)
def _unpack_tableau(tab_words, srt, n, i, M, r):
    nb = 2 * n
    t = 0
    for a in range(nb):
        for c in range(nb):
            word = t >> 6
            bit = t & 63
            M[a, c] = (tab_words[i, word] >> _U64(bit)) & _U64(1)
            t += 1
    for a in range(nb):
        r[a] = (srt[i] >> _U64(n + a)) & _U64(1)
    return np.int64(srt[i] & ((_U64(1) << _U64(n)) - _U64(1)))


# ----------------------------------------------------- acquisition kernels

@njit(cache=True)
def _acquire_ideal_chunk(n, psi, seeds, tab_words, srt, svecs):
    d = 1 << n
    M = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    psi0 = np.empty(d, dtype=np.complex128)
    U = np.empty((d, d), dtype=np.complex128)
    phi = np.empty(d, dtype=np.complex128)
    for i in range(seeds.shape[0]):
        st = _sample_tableau(n, seeds[i], M, r)
        _dense_unitary(M, r, n, psi0, U)
        ptot = 0.0
        for a in range(d):
            acc = 0.0 + 0.0j
            for c in range(d):
                acc += U[a, c] * psi[c]
            phi[a] = acc
            ptot += acc.real**2 + acc.imag**2
        u = _xo_double(st) * ptot
        b = d - 1
        acc2 = 0.0
        for a in range(d):
            acc2 += phi[a].real ** 2 + phi[a].imag ** 2
            if u < acc2:
                b = a
                break
        for c in range(d):
            svecs[i, c] = np.conj(U[b, c])
        srt[i] = _pack_tableau(M, r, b, n, tab_words, i)


@njit(cache=True)
def _pullback_chunk(n, tab_words, srt, svecs):
    d = 1 << n
    M = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    psi0 = np.empty(d, dtype=np.complex128)
    for i in range(srt.shape[0]):
        b = _unpack_tableau(tab_words, srt, n, i, M, r)
        _pullback_vector(M, r, n, b, psi0, svecs[i])


# --------------------------------------------- density-matrix primitives
#
# Per gate: conjugate by the unitary, then apply the enabled channels in the
# fixed order depolarizing -> amplitude damping -> phase damping. Both steps
# act inside the gate's local row/column block, so they are fused into one
# load/store pass per block. The combined 1q channel reduces to a 2x2 mixing
# of the block diagonal plus a scale on the off-diagonal entries:
#   c00 = (1-p/2) + ga*p/2     c01 = p/2 + ga*(1-p/2)
#   c10 = (1-ga)*p/2           c11 = (1-ga)*(1-p/2)
#   foff = (1-p) * sqrt(1-ga) * sqrt(1-gp)
# with p/ga/gp the depolarizing/amplitude/phase rates (zero = disabled).


@njit(cache=True, inline="always")
def _chan1q_consts(p, ga, gp):
    c00 = (1.0 - 0.5 * p) + ga * 0.5 * p
    c01 = 0.5 * p + ga * (1.0 - 0.5 * p)
    c10 = (1.0 - ga) * 0.5 * p
    c11 = (1.0 - ga) * (1.0 - 0.5 * p)
    foff = (1.0 - p) * np.sqrt(1.0 - ga) * np.sqrt(1.0 - gp)
    return c00, c01, c10, c11, foff


@njit(cache=True)
def _fused_1q(rho, u, bp, d, c00, c01, c10, c11, foff):
    bit = 1 << bp
    u00 = u[0, 0]
    u01 = u[0, 1]
    u10 = u[1, 0]
    u11 = u[1, 1]
    v00 = np.conj(u00)
    v01 = np.conj(u01)
    v10 = np.conj(u10)
    v11 = np.conj(u11)
    for hi in range(0, d, bit << 1):
        for i0 in range(hi, hi + bit):
            i1 = i0 | bit
            for hj in range(0, d, bit << 1):
                for j0 in range(hj, hj + bit):
                    j1 = j0 | bit
                    a = rho[i0, j0]
                    b = rho[i0, j1]
                    c = rho[i1, j0]
                    e = rho[i1, j1]
                    t00 = u00 * a + u01 * c
                    t01 = u00 * b + u01 * e
                    t10 = u10 * a + u11 * c
                    t11 = u10 * b + u11 * e
                    q00 = t00 * v00 + t01 * v01
                    q01 = t00 * v10 + t01 * v11
                    q10 = t10 * v00 + t11 * v01
                    q11 = t10 * v10 + t11 * v11
                    rho[i0, j0] = c00 * q00 + c01 * q11
                    rho[i1, j1] = c10 * q00 + c11 * q11
                    rho[i0, j1] = foff * q01
                    rho[i1, j0] = foff * q10


@njit(cache=True, inline="always")
def _quad_amp(t4, bit, g, s):
    # amplitude damping on one qubit of a local 4x4 gate block
    for m in range(4):
        if m & bit:
            continue
        for mm in range(4):
            if mm & bit:
                continue
            t4[m, mm] += g * t4[m | bit, mm | bit]
    for m in range(4):
        for mm in range(4):
            rb = 1 if m & bit else 0
            cb = 1 if mm & bit else 0
            if rb == 1 and cb == 1:
                t4[m, mm] *= 1.0 - g
            elif rb != cb:
                t4[m, mm] *= s


@njit(cache=True, inline="always")
def _quad_pha(t4, bit, s):
    for m in range(4):
        for mm in range(4):
            if (1 if m & bit else 0) != (1 if mm & bit else 0):
                t4[m, mm] *= s


@njit(cache=True)
def _fused_2q(rho, u, uc, bpa, bpb, d, p2, ga, gp, t4, s4):
    bita = 1 << bpa
    bitb = 1 << bpb
    hib = bita if bita > bitb else bitb
    lob = bitb if bita > bitb else bita
    sa = np.sqrt(1.0 - ga)
    sp = np.sqrt(1.0 - gp)
    q = 1.0 - p2
    off0 = 0
    off1 = bitb
    off2 = bita
    off3 = bita | bitb
    for xr in range(0, d, hib << 1):
        for yr in range(xr, xr + hib, lob << 1):
            for zr in range(yr, yr + lob):
                r0 = zr + off0
                r1 = zr + off1
                r2 = zr + off2
                r3 = zr + off3
                for xc in range(0, d, hib << 1):
                    for yc in range(xc, xc + hib, lob << 1):
                        for zc in range(yc, yc + lob):
                            c0 = zc + off0
                            c1 = zc + off1
                            c2 = zc + off2
                            c3 = zc + off3
                            t4[0, 0] = rho[r0, c0]
                            t4[0, 1] = rho[r0, c1]
                            t4[0, 2] = rho[r0, c2]
                            t4[0, 3] = rho[r0, c3]
                            t4[1, 0] = rho[r1, c0]
                            t4[1, 1] = rho[r1, c1]
                            t4[1, 2] = rho[r1, c2]
                            t4[1, 3] = rho[r1, c3]
                            t4[2, 0] = rho[r2, c0]
                            t4[2, 1] = rho[r2, c1]
                            t4[2, 2] = rho[r2, c2]
                            t4[2, 3] = rho[r2, c3]
                            t4[3, 0] = rho[r3, c0]
                            t4[3, 1] = rho[r3, c1]
                            t4[3, 2] = rho[r3, c2]
                            t4[3, 3] = rho[r3, c3]
                            # s4 = u @ t4; t4 = s4 @ u^dagger
                            for m in range(4):
                                for mm in range(4):
                                    acc = 0.0 + 0.0j
                                    for k in range(4):
                                        acc += u[m, k] * t4[k, mm]
                                    s4[m, mm] = acc
                            for m in range(4):
                                for mm in range(4):
                                    acc = 0.0 + 0.0j
                                    for k in range(4):
                                        acc += s4[m, k] * uc[mm, k]
                                    t4[m, mm] = acc
                            # two-qubit depolarizing
                            diag = t4[0, 0] + t4[1, 1] + t4[2, 2] + t4[3, 3]
                            for m in range(4):
                                for mm in range(4):
                                    t4[m, mm] *= q
                            add = 0.25 * p2 * diag
                            t4[0, 0] += add
                            t4[1, 1] += add
                            t4[2, 2] += add
                            t4[3, 3] += add
                            # per-qubit damping, first qubit then second
                            _quad_amp(t4, 2, ga, sa)
                            _quad_amp(t4, 1, ga, sa)
                            _quad_pha(t4, 2, sp)
                            _quad_pha(t4, 1, sp)
                            rho[r0, c0] = t4[0, 0]
                            rho[r0, c1] = t4[0, 1]
                            rho[r0, c2] = t4[0, 2]
                            rho[r0, c3] = t4[0, 3]
                            rho[r1, c0] = t4[1, 0]
                            rho[r1, c1] = t4[1, 1]
                            rho[r1, c2] = t4[1, 2]
                            rho[r1, c3] = t4[1, 3]
                            rho[r2, c0] = t4[2, 0]
                            rho[r2, c1] = t4[2, 1]
                            rho[r2, c2] = t4[2, 2]
                            rho[r2, c3] = t4[2, 3]
                            rho[r3, c0] = t4[3, 0]
                            rho[r3, c1] = t4[3, 1]
                            rho[r3, c2] = t4[3, 2]
                            rho[r3, c3] = t4[3, 3]


@njit(cache=True)
def _evolve_dm(rho, arity, qa, qb, mats, r1, r2, n):
    """Noisy evolution: per gate, unitary then channels at the gate's arity.

    r1/r2 are (dep, amp, phase) rate triples for 1q/2q gates; zero disables.
    """
    d = 1 << n
    c00, c01, c10, c11, foff = _chan1q_consts(r1[0], r1[1], r1[2])
    t4 = np.empty((4, 4), dtype=np.complex128)
    s4 = np.empty((4, 4), dtype=np.complex128)
    uc = np.empty((4, 4), dtype=np.complex128)
    for g in range(arity.shape[0]):
        if arity[g] == 1:
            bp = n - 1 - qa[g]
            _fused_1q(rho, mats[g, :2, :2], bp, d, c00, c01, c10, c11, foff)
        else:
            bpa = n - 1 - qa[g]
            bpb = n - 1 - qb[g]
            for m in range(4):
                for mm in range(4):
                    uc[m, mm] = np.conj(mats[g, m, mm])
            _fused_2q(rho, mats[g], uc, bpa, bpb, d, r2[0], r2[1], r2[2], t4, s4)


# gate matrices for synthesized measurement circuits, indexed by opcode
_SQ2 = 1.0 / np.sqrt(2.0)
_OP_MATS = np.zeros((6, 4, 4), dtype=np.complex128)
_OP_MATS[OP_H, :2, :2] = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]])
_OP_MATS[OP_S, :2, :2] = np.array([[1.0, 0.0], [0.0, 1.0j]])
_OP_MATS[OP_CNOT] = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
_OP_MATS[OP_CZ] = np.diag(np.array([1, 1, 1, -1], dtype=np.complex128))
_OP_MATS[OP_X, :2, :2] = np.array([[0.0, 1.0], [1.0, 0.0]])
_OP_MATS[OP_Z, :2, :2] = np.array([[1.0, 0.0], [0.0, -1.0]])

_OP_ARITY = np.array([1, 1, 2, 2, 1, 1], dtype=np.int64)


@njit(cache=True)
def _acquire_noisy_chunk(n, rho_prep, seeds, r1, r2, tab_words, srt, svecs):
    d = 1 << n
    M = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    Mw = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    rw = np.zeros(2 * n, dtype=np.uint8)
    psi0 = np.empty(d, dtype=np.complex128)
    rho = np.empty((d, d), dtype=np.complex128)
    maxg = 8 * n * n + 8 * n + 8
    ops = np.empty((maxg, 3), dtype=np.int32)
    c00, c01, c10, c11, foff = _chan1q_consts(r1[0], r1[1], r1[2])
    t4 = np.empty((4, 4), dtype=np.complex128)
    s4 = np.empty((4, 4), dtype=np.complex128)
    ucs = np.conj(_OP_MATS)
    for i in range(seeds.shape[0]):
        st = _sample_tableau(n, seeds[i], M, r)
        for a in range(2 * n):
            rw[a] = r[a]
            for c in range(2 * n):
                Mw[a, c] = M[a, c]
        ng = _synthesize(Mw, rw, n, ops)
        for a in range(d):
            for c in range(d):
                rho[a, c] = rho_prep[a, c]
        for g in range(ng):
            op = ops[g, 0]
            if _OP_ARITY[op] == 1:
                bp = n - 1 - ops[g, 1]
                _fused_1q(rho, _OP_MATS[op, :2, :2], bp, d, c00, c01, c10, c11, foff)
            else:
                bpa = n - 1 - ops[g, 1]
                bpb = n - 1 - ops[g, 2]
                _fused_2q(rho, _OP_MATS[op], ucs[op], bpa, bpb, d, r2[0], r2[1], r2[2], t4, s4)
        ptot = 0.0
        for a in range(d):
            pv = rho[a, a].real
            if pv > 0.0:
                ptot += pv
        u = _xo_double(st) * ptot
        b = d - 1
        acc = 0.0
        for a in range(d):
            pv = rho[a, a].real
            if pv > 0.0:
                acc += pv
            if u < acc:
                b = a
                break
        _pullback_vector(M, r, n, b, psi0, svecs[i])
        srt[i] = _pack_tableau(M, r, b, n, tab_words, i)


# --------------------------------------------- Pauli-basis density matrices
#
# The same noisy density-matrix evolution, stored as the real coefficient
# vector v_j = Tr(P_j rho) over the 4^N Pauli strings (qubit 0's letter in
# the most significant base-4 digit). Clifford gates become signed
# permutations of the coefficients and every channel is diagonal except for
# amplitude damping's Z <- I gain, so a gate plus its noise is one cheap
# pass. This is a basis change of the computational-basis kernels above,
# equal to them to rounding, and is the fast path for noisy acquisition.


def _build_ptm_tables():
    eye = np.array([[1, 0], [0, 1]], dtype=np.complex128)
    px = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    py = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    pz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    p2 = (eye, px, py, pz)
    perm1 = np.zeros((6, 4), dtype=np.int64)
    sign1 = np.ones((6, 4), dtype=np.float64)
    perm2 = np.zeros((6, 16), dtype=np.int64)
    sign2 = np.ones((6, 16), dtype=np.float64)
    for op in range(6):
        if _OP_ARITY[op] == 1:
            u = _OP_MATS[op, :2, :2]
            for p in range(4):
                q = u @ p2[p] @ u.conj().T
                hit = False
                for cand in range(4):
                    if np.allclose(q, p2[cand], atol=1e-12):
                        perm1[op, p] = cand
                        sign1[op, p] = 1.0
                        hit = True
                    elif np.allclose(q, -p2[cand], atol=1e-12):
                        perm1[op, p] = cand
                        sign1[op, p] = -1.0
                        hit = True
                if not hit:
                    raise AssertionError("opcode is not Clifford")
        else:
            u = _OP_MATS[op]
            for pa in range(4):
                for pb in range(4):
                    q = u @ np.kron(p2[pa], p2[pb]) @ u.conj().T
                    hit = False
                    for ca in range(4):
                        for cb in range(4):
                            c = np.kron(p2[ca], p2[cb])
                            if np.allclose(q, c, atol=1e-12):
                                perm2[op, 4 * pa + pb] = 4 * ca + cb
                                sign2[op, 4 * pa + pb] = 1.0
                                hit = True
                            elif np.allclose(q, -c, atol=1e-12):
                                perm2[op, 4 * pa + pb] = 4 * ca + cb
                                sign2[op, 4 * pa + pb] = -1.0
                                hit = True
                    if not hit:
                        raise AssertionError("opcode is not Clifford")
    return perm1, sign1, perm2, sign2


_PTM_PERM1, _PTM_SIGN1, _PTM_PERM2, _PTM_SIGN2 = _build_ptm_tables()


@njit(cache=True)
def _pauli_run(v, ops, ng, n, r1, r2, perm1, sign1, perm2, sign2):
    # fused per-gate channel constants (depolarizing -> amplitude -> phase)
    cxy1 = (1.0 - r1[0]) * np.sqrt(1.0 - r1[1]) * np.sqrt(1.0 - r1[2])
    czz1 = (1.0 - r1[0]) * (1.0 - r1[1])
    ga1 = r1[1]
    q2 = 1.0 - r2[0]
    sxy2 = np.sqrt(1.0 - r2[1]) * np.sqrt(1.0 - r2[2])
    ca2 = 1.0 - r2[1]
    ga2 = r2[1]
    o = np.empty(4, dtype=np.float64)
    t = np.empty((4, 4), dtype=np.float64)
    for g in range(ng):
        op = ops[g, 0]
        if _OP_ARITY[op] == 1:
            bp = n - 1 - ops[g, 1]
            s = 1 << (2 * bp)
            for hi in range(0, v.shape[0], s << 2):
                for lo in range(hi, hi + s):
                    o[perm1[op, 0]] = v[lo]
                    o[perm1[op, 1]] = sign1[op, 1] * v[lo + s]
                    o[perm1[op, 2]] = sign1[op, 2] * v[lo + 2 * s]
                    o[perm1[op, 3]] = sign1[op, 3] * v[lo + 3 * s]
                    v[lo] = o[0]
                    v[lo + s] = cxy1 * o[1]
                    v[lo + 2 * s] = cxy1 * o[2]
                    v[lo + 3 * s] = czz1 * o[3] + ga1 * o[0]
        else:
            bpa = n - 1 - ops[g, 1]
            bpb = n - 1 - ops[g, 2]
            sa = 1 << (2 * bpa)
            sb = 1 << (2 * bpb)
            shi = sa if sa > sb else sb
            slo = sb if sa > sb else sa
            for x in range(0, v.shape[0], shi << 2):
                for y in range(x, x + shi, slo << 2):
                    for z in range(y, y + slo):
                        for ka in range(4):
                            for kb in range(4):
                                j = 4 * ka + kb
                                dst = perm2[op, j]
                                t[dst >> 2, dst & 3] = (
                                    sign2[op, j] * v[z + ka * sa + kb * sb]
                                )
                        # two-qubit depolarizing scales every non-identity string
                        for ka in range(4):
                            for kb in range(4):
                                if ka != 0 or kb != 0:
                                    t[ka, kb] *= q2
                        # per-qubit amplitude + phase damping, first then second
                        for kb in range(4):
                            t[1, kb] *= sxy2
                            t[2, kb] *= sxy2
                            t[3, kb] = ca2 * t[3, kb] + ga2 * t[0, kb]
                        for ka in range(4):
                            t[ka, 1] *= sxy2
                            t[ka, 2] *= sxy2
                            t[ka, 3] = ca2 * t[ka, 3] + ga2 * t[ka, 0]
                        for ka in range(4):
                            for kb in range(4):
                                v[z + ka * sa + kb * sb] = t[ka, kb]


@njit(cache=True)
def _acquire_pauli_chunk(
    n, vprep, seeds, r1, r2, tab_words, srt, svecs, perm1, sign1, perm2, sign2
):
    d = 1 << n
    dd = 1 << (2 * n)
    M = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    Mw = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    rw = np.zeros(2 * n, dtype=np.uint8)
    psi0 = np.empty(d, dtype=np.complex128)
    v = np.empty(dd, dtype=np.float64)
    wz = np.empty(d, dtype=np.float64)
    maxg = 8 * n * n + 8 * n + 8
    ops = np.empty((maxg, 3), dtype=np.int32)
    # index of the pure-Z Pauli string for every Z mask
    jz = np.zeros(d, dtype=np.int64)
    for zm in range(d):
        acc = 0
        for tpos in range(n):
            if (zm >> tpos) & 1:
                acc += 3 * (1 << (2 * tpos))
        jz[zm] = acc
    for i in range(seeds.shape[0]):
        st = _sample_tableau(n, seeds[i], M, r)
        for a in range(2 * n):
            rw[a] = r[a]
            for c in range(2 * n):
                Mw[a, c] = M[a, c]
        ng = _synthesize(Mw, rw, n, ops)
        for a in range(dd):
            v[a] = vprep[a]
        _pauli_run(v, ops, ng, n, r1, r2, perm1, sign1, perm2, sign2)
        # diagonal of rho via a Walsh transform of the pure-Z coefficients
        for zm in range(d):
            wz[zm] = v[jz[zm]]
        bsz = 1
        while bsz < d:
            for hi in range(0, d, bsz << 1):
                for lo in range(hi, hi + bsz):
                    a0 = wz[lo]
                    a1 = wz[lo | bsz]
                    wz[lo] = a0 + a1
                    wz[lo | bsz] = a0 - a1
            bsz <<= 1
        ptot = 0.0
        for a in range(d):
            if wz[a] > 0.0:
                ptot += wz[a]
        u = _xo_double(st) * ptot
        b = d - 1
        acc2 = 0.0
        for a in range(d):
            if wz[a] > 0.0:
                acc2 += wz[a]
            if u < acc2:
                b = a
                break
        _pullback_vector(M, r, n, b, psi0, svecs[i])
        srt[i] = _pack_tableau(M, r, b, n, tab_words, i)
