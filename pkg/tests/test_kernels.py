import os
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qloop import kernels
from qloop.builders import model
from qloop.scalars import PrimePoint, eval_mod_p

PRIMES = [2 ** 62 - 57, 2 ** 63 - 25]


@contextmanager
def backend(name):
    old = os.environ.get("QLOOP_KERNELS")
    os.environ["QLOOP_KERNELS"] = name
    try:
        yield
    finally:
        if old is None:
            del os.environ["QLOOP_KERNELS"]
        else:
            os.environ["QLOOP_KERNELS"] = old


def both(fn):
    with backend("numba"):
        fast = fn()
    with backend("numpy"):
        slow = fn()
    return fast, slow


def random_csr(rng, n, density, p):
    dense = rng.integers(0, p, size=(n, n), dtype=np.int64)
    mask = rng.random((n, n)) < density
    indptr, indices, data = [0], [], []
    for i in range(n):
        for j in np.nonzero(mask[i])[0]:
            indices.append(int(j))
            data.append(int(dense[i, j]))
        indptr.append(len(indices))
    return (np.asarray(indptr, dtype=np.int64), np.asarray(indices, dtype=np.int64), data), mask, dense


def test_backend_selection(monkeypatch):
    monkeypatch.setenv("QLOOP_KERNELS", "numpy")
    assert kernels.backend_name() == "numpy"
    monkeypatch.setenv("QLOOP_KERNELS", "numba")
    assert kernels.backend_name() == ("numba" if kernels.HAVE_NUMBA else "numpy")


def test_montgomery_rejects_even_modulus():
    with pytest.raises(ValueError):
        kernels.mont_ctx(2 ** 62)


@given(st.sampled_from(PRIMES), st.integers(0, 2 ** 32))
def test_spgemm_backends_agree(p, seed):
    rng = np.random.default_rng(seed)
    a, ma, da = random_csr(rng, 7, 0.4, p)
    b, mb, db = random_csr(rng, 7, 0.4, p)
    A = [[int(da[i, j]) if ma[i, j] else 0 for j in range(7)] for i in range(7)]
    B = [[int(db[i, j]) if mb[i, j] else 0 for j in range(7)] for i in range(7)]
    want = {}
    for i in range(7):
        for j in range(7):
            v = sum(A[i][k] * B[k][j] for k in range(7)) % p
            if v:
                want[(i, j)] = v
    for name in ("numba", "numpy"):
        with backend(name):
            cp, ci, cx = kernels.spgemm(7, 7, a, b, p)
        got = {(i, int(ci[k])): int(cx[k]) for i in range(7) for k in range(cp[i], cp[i + 1])}
        assert got == want


def test_spmv_backends_agree():
    p = PRIMES[0]
    rng = np.random.default_rng(3)
    a, mask, dense = random_csr(rng, 9, 0.5, p)
    x = [int(v) for v in rng.integers(0, p, size=9, dtype=np.int64)]
    fast, slow = both(lambda: kernels.spmv(9, a, x, p))
    want = [sum(int(dense[i, j]) * x[j] for j in range(9) if mask[i, j]) % p for i in range(9)]
    assert list(map(int, fast)) == want == list(map(int, slow))


def test_polynomial_evaluation_backends_agree():
    m = model(2)
    R = m.R()
    rng = np.random.default_rng(11)
    for p in PRIMES:
        pt = PrimePoint(p, [int(v) for v in rng.integers(2, p, size=8, dtype=np.int64)])
        scalars = [v for _, v in R.items()]
        fast, slow = both(lambda: [eval_mod_p(x, pt) for x in scalars])
        assert fast == slow
        fast, slow = both(lambda: R.eval_mod(pt).entries())
        assert fast == slow
