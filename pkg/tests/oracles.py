"""Dense reference assemblies used as independent oracles by the tests.

Everything here builds the implicit operators entry by entry from the
scheme definition and solves with LAPACK, never touching the factored
fast paths under test.
"""

import numpy as np


def upwind_matrix(basis):
    """2 D^T M - e_p e_p^T, the advective part of the single-cell operator."""
    p = basis.p
    cx = basis.D.T * basis.weights[None, :]
    cx[p, p] -= 1.0
    return cx


def block_1d(basis, lam, shift=0.0):
    """Diagonal block of the 1D system acting on one cell's DOFs."""
    p = basis.p
    m = np.diag(basis.mass)
    return (1.0 + shift) * m - lam * upwind_matrix(basis)


def global_1d(basis, n_cells, lam, shift=0.0, periodic=True):
    """Full 1D system matrix; ``lam`` is per-cell."""
    p = basis.p
    w = p + 1
    a = np.zeros((n_cells * w, n_cells * w))
    for i in range(n_cells):
        a[i * w:(i + 1) * w, i * w:(i + 1) * w] = block_1d(basis, lam[i], shift)
        j = i - 1 if i > 0 else (n_cells - 1 if periodic else None)
        if j is not None:
            a[i * w, j * w + p] += -lam[i]
    return a


def block_2d(basis, lx, ly, d=0.0, shift=0.0):
    """Dense 2D diagonal block including graph viscosity."""
    p = basis.p
    n = p + 1
    m = np.diag(basis.mass)
    cx = upwind_matrix(basis)
    a = (1.0 + shift) * np.kron(m, m) - lx * np.kron(m, cx) - ly * np.kron(cx, m)
    if d > 0:
        lam = lx + ly
        wv = 0.5 * basis.weights
        w1 = np.outer(wv, np.ones(n))
        eye = np.eye(n)
        visc = 2 * d * (lam * np.eye(n * n) - lx * np.kron(eye, w1)
                        - ly * np.kron(w1, eye)) @ np.kron(m, m)
        a = a + visc
    return a


def global_2d(basis, nx, ny, lx, ly, d=0.0, shift=0.0, periodic=True):
    p = basis.p
    n = p + 1
    npb = n * n
    diag = block_2d(basis, lx, ly, d, shift)
    m = np.diag(basis.mass)
    ex = np.zeros((n, n))
    ex[0, p] = 1.0
    cxo = np.kron(m, ex)
    cyo = np.kron(ex, m)
    a = np.zeros((nx * ny * npb, nx * ny * npb))
    for j in range(ny):
        for i in range(nx):
            c = (j * nx + i) * npb
            a[c:c + npb, c:c + npb] = diag
            iw = i - 1 if i > 0 else (nx - 1 if periodic else None)
            jw = j - 1 if j > 0 else (ny - 1 if periodic else None)
            if iw is not None:
                cc = (j * nx + iw) * npb
                a[c:c + npb, cc:cc + npb] += -lx * cxo
            if jw is not None:
                cc = (jw * nx + i) * npb
                a[c:c + npb, cc:cc + npb] += -ly * cyo
    return a


def block_3d(basis, lx, ly, lz, d=0.0, shift=0.0):
    p = basis.p
    n = p + 1
    m = np.diag(basis.mass)
    cx = upwind_matrix(basis)
    a = ((1.0 + shift) * np.kron(m, np.kron(m, m))
         - lx * np.kron(m, np.kron(m, cx))
         - ly * np.kron(m, np.kron(cx, m))
         - lz * np.kron(cx, np.kron(m, m)))
    if d > 0:
        lam = lx + ly + lz
        wv = 0.5 * basis.weights
        w1 = np.outer(wv, np.ones(n))
        eye = np.eye(n)
        visc = 2 * d * (lam * np.eye(n**3)
                        - lx * np.kron(eye, np.kron(eye, w1))
                        - ly * np.kron(eye, np.kron(w1, eye))
                        - lz * np.kron(w1, np.kron(eye, eye))) @ np.kron(m, np.kron(m, m))
        a = a + visc
    return a


def global_3d(basis, counts, lams, d=0.0, periodic=True):
    p = basis.p
    n = p + 1
    npb = n**3
    nx, ny, nz = counts
    diag = block_3d(basis, *lams, d)
    m = np.diag(basis.mass)
    ex = np.zeros((n, n))
    ex[0, p] = 1.0
    ups = [np.kron(m, np.kron(m, ex)), np.kron(m, np.kron(ex, m)), np.kron(ex, np.kron(m, m))]
    a = np.zeros((nx * ny * nz * npb, nx * ny * nz * npb))
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                c = ((k * ny + j) * nx + i) * npb
                a[c:c + npb, c:c + npb] = diag
                for axis, (ii, jj, kk) in enumerate([(i - 1, j, k),
                                                     (i, j - 1, k),
                                                     (i, j, k - 1)]):
                    if min(ii, jj, kk) < 0:
                        if not periodic:
                            continue
                        ii, jj, kk = ii % nx, jj % ny, kk % nz
                    cc = ((kk * ny + jj) * nx + ii) * npb
                    a[c:c + npb, cc:cc + npb] += -lams[axis] * ups[axis]
    return a
