import numpy as np
import pytest

from vempc.ckks import (CkksContext, Decryptor, Encryptor, Evaluator, dumps, embed,
                        embed_inverse, find_primes, is_prime, keygen, loads, make_params,
                        ntt_stack)
from vempc.ckks.params import MAX_PRIME_BITS
from vempc.errors import LevelUnderflow, MissingKey, ScaleMismatch, SerializationError


def negacyclic_schoolbook(a, b, q):
    """Rows of ``a * b mod (X^N + 1, q)`` computed term by term."""
    n = a.shape[-1]
    prod = (a[:, :, None] * b[:, None, :]) % q
    out = np.zeros(a.shape, dtype=np.int64)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    k, wrap = (i + j) % n, (i + j) >= n
    for ii, jj in zip(i.ravel(), j.ravel()):
        term = prod[:, ii, jj]
        if wrap[ii, jj]:
            out[:, k[ii, jj]] -= term
        else:
            out[:, k[ii, jj]] += term
        out[:, k[ii, jj]] %= q
    return out


@pytest.mark.parametrize("n", [16, 32])
def test_ntt_matches_schoolbook(n):
    q = find_primes(30, 1, n)[0]
    rng = np.random.default_rng(n)
    pairs = 1000
    a = rng.integers(0, q, size=(pairs, n), dtype=np.int64)
    b = rng.integers(0, q, size=(pairs, n), dtype=np.int64)
    st = ntt_stack((q,) * pairs, n)
    fa, fb = st.forward(a.astype(np.uint64)), st.forward(b.astype(np.uint64))
    got = st.inverse((fa * fb) % np.uint64(q))
    np.testing.assert_array_equal(got.astype(np.int64), negacyclic_schoolbook(a, b, q))


def test_ntt_inverse_roundtrip():
    st = ntt_stack(tuple(find_primes(30, 3, 1024)), 1024)
    a = np.random.default_rng(0).integers(0, 2 ** 29, size=(3, 1024)).astype(np.uint64)
    np.testing.assert_array_equal(st.inverse(st.forward(a)), a)


def test_prime_chain():
    p = make_params(13, 4)
    primes = p.chain + p.special_primes
    assert len(set(primes)) == len(primes)
    for q in primes:
        assert is_prime(q) and q < 2 ** MAX_PRIME_BITS and (q - 1) % (2 * p.n) == 0
    for q in p.scaling_primes:
        assert abs(np.log2(q) - 30) < 0.01
    assert not is_prime(2 ** 31 - 3) and is_prime(2 ** 31 - 1)


def test_canonical_embedding_roundtrip():
    n = 64
    rng = np.random.default_rng(1)
    z = rng.normal(size=n // 2) + 1j * rng.normal(size=n // 2)
    c = embed_inverse(z, n)
    assert np.isrealobj(c) or np.max(np.abs(np.imag(c))) < 1e-12
    np.testing.assert_allclose(embed(np.real(c), n), z, atol=1e-10)


@pytest.fixture(scope="module")
def small():
    params = make_params(10, 3)
    ctx = CkksContext(params)
    keys = keygen(params, seed=3, rotations=[1, 2, 3], ctx=ctx)
    return (params, ctx, keys, Encryptor(ctx, keys.secret, seed=4),
            Decryptor(ctx, keys.secret), Evaluator(ctx, keys.evaluation))


def test_roundtrip_logn13(ckks13):
    v = np.random.default_rng(2).uniform(-1, 1, ckks13.slots)
    err = np.max(np.abs(ckks13.decrypt(ckks13.encrypt(v)) - v))
    assert err <= 2.0 ** -18


def test_arithmetic(small):
    params, ctx, keys, enc, dec, ev = small
    rng = np.random.default_rng(5)
    x, y = rng.uniform(-1, 1, params.slots), rng.uniform(-1, 1, params.slots)
    cx, cy = enc.encrypt_values(x), enc.encrypt_values(y)
    np.testing.assert_allclose(dec.decrypt_values(ev.add(cx, cy)).real, x + y, atol=2e-6)
    prod = ev.multiply(cx, cy)
    assert prod.level == params.depth - 1
    np.testing.assert_allclose(dec.decrypt_values(prod).real, x * y, atol=1e-4)
    np.testing.assert_allclose(dec.decrypt_values(ev.mul_const(cx, 0.5)).real, 0.5 * x, atol=1e-5)
    np.testing.assert_allclose(dec.decrypt_values(ev.mul_plain(cx, y)).real, x * y, atol=1e-4)


def test_addition_is_exact_on_residues(small):
    params, ctx, keys, enc, dec, ev = small
    v = np.random.default_rng(6).uniform(-1, 1, params.slots)
    a, b = enc.encrypt_values(v), enc.encrypt_values(-v)
    s = ev.add(a, b)
    q = ctx.qvec(a.level)[:, None]
    np.testing.assert_array_equal(s.c0, (a.c0 + b.c0) % q)
    np.testing.assert_array_equal(dec.decrypt(s).data,
                                  (dec.decrypt(a).data + dec.decrypt(b).data) % q)


def test_rotation(small):
    params, ctx, keys, enc, dec, ev = small
    v = np.zeros(params.slots)
    v[:4] = [1, 2, 3, 4]
    out = dec.decrypt_values(ev.rotate(enc.encrypt_values(v), 1)).real
    expect = np.roll(v, -1)
    np.testing.assert_allclose(out, expect, atol=1e-5)
    assert out[:3] == pytest.approx([2, 3, 4], abs=1e-5) and out[-1] == pytest.approx(1, abs=1e-5)
    with pytest.raises(MissingKey):
        ev.rotate(enc.encrypt_values(v), 5)


def test_levels_and_failures(small):
    params, ctx, keys, enc, dec, ev = small
    v = np.full(params.slots, 0.5)
    ct = enc.encrypt_values(v)
    for _ in range(params.depth):
        ct = ev.multiply(ct, ct)
    np.testing.assert_allclose(dec.decrypt_values(ct).real, 0.5 ** (2 ** params.depth), atol=1e-3)
    with pytest.raises(LevelUnderflow):
        ev.multiply(ct, ct)
    with pytest.raises(LevelUnderflow):
        ev.rescale(ct)
    odd = enc.encrypt(ctx.encode(v, scale=params.scale * 3))
    with pytest.raises(ScaleMismatch):
        ev.add(enc.encrypt_values(v), odd)
    with pytest.raises(MissingKey):
        Evaluator(ctx).multiply(ct, ct)


def test_public_key_encryption(small):
    params, ctx, keys, enc, dec, ev = small
    v = np.random.default_rng(7).uniform(-1, 1, params.slots)
    pk_enc = Encryptor(ctx, keys.public, seed=8)
    np.testing.assert_allclose(dec.decrypt_values(pk_enc.encrypt_values(v)).real, v, atol=1e-4)


def test_larger_scale_reduces_error(ckks13):
    ctx, enc, dec = ckks13.ctx, ckks13._encryptor, ckks13._decryptor
    v = np.random.default_rng(9).uniform(-1, 1, ckks13.slots)
    err = {b: np.max(np.abs(dec.decrypt_values(enc.encrypt(ctx.encode(v, scale=2.0 ** b))).real - v))
           for b in (30, 40)}
    assert err[30] / err[40] >= 2 ** 8


def test_serialization_bitwise(small):
    params, ctx, keys, enc, dec, ev = small
    ct = enc.encrypt_values(np.arange(params.slots) / params.slots)
    blob = dumps(ct)
    back = loads(blob)
    np.testing.assert_array_equal(back.c0, ct.c0)
    np.testing.assert_array_equal(back.c1, ct.c1)
    assert back.level == ct.level and back.scale == ct.scale
    assert dumps(back) == blob
    for obj in (keys.public, keys.secret, ctx.encode(np.ones(params.slots))):
        assert dumps(loads(dumps(obj))) == dumps(obj)


def test_serialization_rejects_corruption(small):
    params, ctx, keys, enc, dec, ev = small
    blob = dumps(enc.encrypt_values(np.ones(params.slots)))
    with pytest.raises(SerializationError):
        loads(b"XXXX" + blob[4:])
    with pytest.raises(SerializationError):
        loads(blob[:-1])
    with pytest.raises(SerializationError):
        loads(blob[:10])
