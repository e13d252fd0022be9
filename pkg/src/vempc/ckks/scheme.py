"""Leveled RNS-CKKS: keys, encryption, and homomorphic evaluation.

Polynomials are stored as ``(limbs, N)`` residue stacks in the NTT
(evaluation) domain.  A ciphertext at level ``l`` lives modulo
``params.moduli(l)``; rescaling removes the last of those limbs.

Key switching is the hybrid special-modulus method with one digit per chain
limb: the input is decomposed into its centered residues, each digit is
lifted to the level's limbs plus the special limbs, multiplied with the
matching key row, and the sum is divided by the special modulus ``P`` with
rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import CryptoError, LevelUnderflow, MissingKey, ScaleMismatch
from . import rns
from .encoding import embed, encode_integer
from .ntt import NttStack, ntt_stack
from .params import CkksParams

SCALE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Plaintext:
    data: np.ndarray
    level: int
    scale: float


@dataclass(frozen=True, eq=False)
class Ciphertext:
    c0: np.ndarray
    c1: np.ndarray
    level: int
    scale: float

    @property
    def limbs(self) -> int:
        return self.c0.shape[0]


@dataclass(frozen=True, eq=False)
class SecretKey:
    """Ternary secret in coefficient form and over every chain and special limb."""

    coeffs: np.ndarray
    ntt: np.ndarray


@dataclass(frozen=True, eq=False)
class PublicKey:
    b: np.ndarray
    a: np.ndarray


@dataclass(frozen=True, eq=False)
class SwitchingKey:
    """Rows ``(b_i, a_i)`` over all limbs, one per chain digit ``i``.

    ``galois`` is 0 for the relinearization key.
    """

    b: np.ndarray
    a: np.ndarray
    galois: int = 0

    @property
    def digits(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True, eq=False)
class EvaluationKeys:
    """Public material the evaluating party needs; deliberately holds no secret."""

    relin: SwitchingKey
    rotations: dict = field(default_factory=dict)

    def require(self, galois_elements) -> None:
        missing = [g for g in galois_elements if g not in self.rotations]
        if missing:
            raise MissingKey(f"no rotation key for Galois element(s) {missing}")


@dataclass(frozen=True, eq=False)
class KeyBundle:
    secret: SecretKey
    public: PublicKey
    evaluation: EvaluationKeys

    @property
    def relin(self) -> SwitchingKey:
        return self.evaluation.relin

    @property
    def rotations(self) -> dict:
        return self.evaluation.rotations


class CkksContext:
    """Parameter-derived tables shared by every role (immutable)."""

    def __init__(self, params: CkksParams):
        if len(params.special_primes) > 2:
            raise CryptoError("at most two special primes are supported")
        self.params = params
        self.n = params.n
        self.all_primes = params.chain + params.special_primes
        self.n_special = len(params.special_primes)
        self._perm_cache: dict = {}
        self._exp_index = self._evaluation_exponents()

    # -- bases -----------------------------------------------------------------
    def limbs(self, level: int) -> int:
        return len(self.params.base_primes) + level

    def moduli(self, level: int) -> tuple:
        return self.params.moduli(level)

    def stack(self, level: int) -> NttStack:
        return ntt_stack(self.moduli(level), self.n)

    def key_rows(self, level: int) -> np.ndarray:
        """Indices into the full limb list used when switching keys at ``level``."""
        total = len(self.all_primes)
        return np.r_[np.arange(self.limbs(level)), np.arange(total - self.n_special, total)]

    def key_stack(self, level: int) -> NttStack:
        return ntt_stack(self.moduli(level) + self.params.special_primes, self.n)

    def full_stack(self) -> NttStack:
        return ntt_stack(self.all_primes, self.n)

    def qvec(self, level: int) -> np.ndarray:
        return np.array(self.moduli(level), dtype=np.uint64)

    # -- encoding --------------------------------------------------------------
    def encode(self, values, level: Optional[int] = None, scale: Optional[float] = None) -> Plaintext:
        level = self.params.depth if level is None else level
        scale = self.params.scale if scale is None else float(scale)
        values = np.asarray(values)
        if values.shape != (self.params.slots,):
            raise CryptoError(f"expected {self.params.slots} slots, got shape {values.shape}")
        coeffs = encode_integer(values, self.n, scale)
        peak = float(np.max(np.abs(coeffs), initial=0))
        if peak >= math.prod(self.moduli(level)) / 4:
            raise CryptoError("encoded message exceeds the modulus headroom at this level")
        data = self.stack(level).forward(rns.reduce_signed(coeffs, self.moduli(level)))
        return Plaintext(data, level, scale)

    def decode(self, pt: Plaintext) -> np.ndarray:
        coeffs = self.stack(pt.level).inverse(pt.data)
        real = rns.garner_to_float(coeffs, self.moduli(pt.level))
        return embed(real / pt.scale, self.n)

    # -- automorphisms ---------------------------------------------------------
    def _evaluation_exponents(self) -> np.ndarray:
        """NTT output position of the evaluation point ``r**e``, indexed by odd ``e``.

        The transform of ``X`` lists the evaluation points themselves; they are the
        odd powers of any one of them, ``r``.  Every limb uses the same ordering.
        """
        st = ntt_stack(self.all_primes[:1], self.n)
        x = np.zeros((1, self.n), dtype=np.uint64)
        x[0, 1] = 1
        points = st.forward(x)[0]
        q = self.all_primes[0]
        r = int(points[0])
        sq = r * r % q
        exponent_of = {}
        cur = r
        for e in range(1, 2 * self.n, 2):
            exponent_of[cur] = e
            cur = cur * sq % q
        index = np.full(2 * self.n, -1, dtype=np.int64)
        for k, v in enumerate(points):
            index[exponent_of[int(v)]] = k
        return index

    def galois_element(self, steps: int) -> int:
        """Element ``5**steps mod 2N`` realizing an upward cyclic shift by ``steps`` slots."""
        return pow(5, steps % self.params.slots, 2 * self.n)

    def automorphism_perm(self, galois: int) -> np.ndarray:
        perm = self._perm_cache.get(galois)
        if perm is None:
            if galois % 2 == 0:
                raise CryptoError(f"Galois element {galois} must be odd")
            idx = self._exp_index
            exps = np.empty(self.n, dtype=np.int64)
            exps[idx[1::2]] = np.arange(1, 2 * self.n, 2)
            perm = idx[(exps * galois) % (2 * self.n)]
            self._perm_cache[galois] = perm
        return perm


# -- sampling ------------------------------------------------------------------
def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _ternary(rng, n, hamming_weight=None) -> np.ndarray:
    if hamming_weight is None:
        return rng.integers(-1, 2, size=n).astype(np.int64)
    s = np.zeros(n, dtype=np.int64)
    idx = rng.choice(n, size=hamming_weight, replace=False)
    s[idx] = rng.choice(np.array([-1, 1]), size=hamming_weight)
    return s


def _gaussian(rng, n, sigma) -> np.ndarray:
    return np.rint(rng.normal(0.0, sigma, size=n)).astype(np.int64)


def _uniform(rng, primes, n) -> np.ndarray:
    return np.stack([rng.integers(0, q, size=n, dtype=np.uint64) for q in primes])


# -- key generation ------------------------------------------------------------
def _switching_key(ctx: CkksContext, rng, s_ntt: np.ndarray, target_ntt: np.ndarray,
                   galois: int = 0) -> SwitchingKey:
    p = ctx.params
    primes = ctx.all_primes
    q = np.array(primes, dtype=np.uint64)
    full = ctx.full_stack()
    P = math.prod(p.special_primes)
    digits = len(p.chain)
    B = np.empty((digits, len(primes), ctx.n), dtype=np.uint64)
    A = np.empty_like(B)
    for i in range(digits):
        a = _uniform(rng, primes, ctx.n)
        e = full.forward(rns.reduce_signed(_gaussian(rng, ctx.n, p.sigma), primes))
        b = rns.sub(e, rns.mul(a, s_ntt, q), q)
        # P * g_i * target, where g_i is 1 mod q_i and 0 mod every other limb
        row = np.zeros((1,), dtype=np.uint64)
        row[0] = P % primes[i]
        bi = rns.mul_scalar(target_ntt[i:i + 1], row, q[i:i + 1])
        b[i] = rns.add(b[i:i + 1], bi, q[i:i + 1])[0]
        B[i], A[i] = b, a
    return SwitchingKey(B, A, galois)


def keygen(params: CkksParams, seed: Optional[int] = None, rotations=(),
           ctx: Optional[CkksContext] = None) -> KeyBundle:
    """Secret, public, relinearization and rotation keys.

    ``rotations`` lists slot shifts; each gets a key for its Galois element.
    The same seed always yields the same bundle.
    """
    ctx = ctx or CkksContext(params)
    rng = _rng(seed)
    primes = ctx.all_primes
    q = np.array(primes, dtype=np.uint64)
    full = ctx.full_stack()
    s = _ternary(rng, ctx.n, params.hamming_weight)
    s_ntt = full.forward(rns.reduce_signed(s, primes))
    secret = SecretKey(s.astype(np.int8), s_ntt)

    top = ctx.limbs(params.depth)
    qt = q[:top]
    a = _uniform(rng, primes[:top], ctx.n)
    e = ctx.stack(params.depth).forward(
        rns.reduce_signed(_gaussian(rng, ctx.n, params.sigma), primes[:top]))
    public = PublicKey(rns.sub(e, rns.mul(a, s_ntt[:top], qt), qt), a)

    relin = _switching_key(ctx, rng, s_ntt, rns.mul(s_ntt, s_ntt, q))
    rot = {}
    for steps in sorted({int(r) % params.slots for r in rotations} - {0}):
        g = ctx.galois_element(steps)
        target = s_ntt[:, ctx.automorphism_perm(g)]
        rot[g] = _switching_key(ctx, rng, s_ntt, target, g)
    return KeyBundle(secret, public, EvaluationKeys(relin, rot))


# -- encryption ----------------------------------------------------------------
class Encryptor:
    """Encrypts with the secret key (default) or, if only given one, the public key."""

    def __init__(self, ctx: CkksContext, key, seed: Optional[int] = None):
        if not isinstance(key, (SecretKey, PublicKey)):
            raise TypeError("Encryptor needs a SecretKey or PublicKey")
        self.ctx = ctx
        self.key = key
        self._rng = _rng(seed)

    def encrypt(self, pt: Plaintext) -> Ciphertext:
        ctx, p = self.ctx, self.ctx.params
        moduli = ctx.moduli(pt.level)
        L = len(moduli)
        q = ctx.qvec(pt.level)
        st = ctx.stack(pt.level)
        rng = self._rng

        def err():
            return st.forward(rns.reduce_signed(_gaussian(rng, ctx.n, p.sigma), moduli))

        if isinstance(self.key, SecretKey):
            a = _uniform(rng, moduli, ctx.n)
            c0 = rns.add(rns.sub(err(), rns.mul(a, self.key.ntt[:L], q), q), pt.data, q)
            return Ciphertext(c0, a, pt.level, pt.scale)
        u = st.forward(rns.reduce_signed(_ternary(rng, ctx.n), moduli))
        c0 = rns.add(rns.add(rns.mul(u, self.key.b[:L], q), err(), q), pt.data, q)
        c1 = rns.add(rns.mul(u, self.key.a[:L], q), err(), q)
        return Ciphertext(c0, c1, pt.level, pt.scale)

    def encrypt_values(self, values, level: Optional[int] = None,
                       scale: Optional[float] = None) -> Ciphertext:
        return self.encrypt(self.ctx.encode(values, level, scale))


class Decryptor:
    def __init__(self, ctx: CkksContext, secret: SecretKey):
        self.ctx = ctx
        self.secret = secret

    def decrypt(self, ct: Ciphertext) -> Plaintext:
        q = self.ctx.qvec(ct.level)
        m = rns.add(ct.c0, rns.mul(ct.c1, self.secret.ntt[:ct.limbs], q), q)
        return Plaintext(m, ct.level, ct.scale)

    def decrypt_values(self, ct: Ciphertext) -> np.ndarray:
        return self.ctx.decode(self.decrypt(ct))


# -- evaluation ----------------------------------------------------------------
class Evaluator:
    """Homomorphic operations using only public evaluation keys."""

    def __init__(self, ctx: CkksContext, keys: Optional[EvaluationKeys] = None):
        if keys is not None and not isinstance(keys, EvaluationKeys):
            raise TypeError("Evaluator accepts EvaluationKeys only")
        self.ctx = ctx
        self.keys = keys

    # level / scale bookkeeping
    def _check_scale(self, a: float, b: float) -> None:
        if abs(a - b) > SCALE_RTOL * max(a, b):
            raise ScaleMismatch(f"scales differ: {a!r} vs {b!r}")

    def drop_level(self, ct: Ciphertext, level: int) -> Ciphertext:
        if level > ct.level:
            raise LevelUnderflow(f"cannot raise level {ct.level} to {level}")
        if level == ct.level:
            return ct
        L = self.ctx.limbs(level)
        return Ciphertext(ct.c0[:L].copy(), ct.c1[:L].copy(), level, ct.scale)

    def _align(self, a: Ciphertext, b: Ciphertext):
        level = min(a.level, b.level)
        return self.drop_level(a, level), self.drop_level(b, level)

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check_scale(a.scale, b.scale)
        a, b = self._align(a, b)
        q = self.ctx.qvec(a.level)
        return Ciphertext(rns.add(a.c0, b.c0, q), rns.add(a.c1, b.c1, q), a.level, a.scale)

    def sub(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check_scale(a.scale, b.scale)
        a, b = self._align(a, b)
        q = self.ctx.qvec(a.level)
        return Ciphertext(rns.sub(a.c0, b.c0, q), rns.sub(a.c1, b.c1, q), a.level, a.scale)

    def add_plain(self, a: Ciphertext, pt: Plaintext) -> Ciphertext:
        self._check_scale(a.scale, pt.scale)
        if pt.level < a.level:
            a = self.drop_level(a, pt.level)
        q = self.ctx.qvec(a.level)
        data = pt.data[:a.limbs]
        return Ciphertext(rns.add(a.c0, data, q), a.c1.copy(), a.level, a.scale)

    def add_const(self, a: Ciphertext, c: float) -> Ciphertext:
        """Add the real constant ``c`` to every slot (encoded at ``a.scale``)."""
        moduli = self.ctx.moduli(a.level)
        k = int(round(c * a.scale))
        res = np.array([k % qi for qi in moduli], dtype=np.uint64)[:, None]
        q = self.ctx.qvec(a.level)
        c0 = rns.add(a.c0, np.ascontiguousarray(np.broadcast_to(res, a.c0.shape)), q)
        return Ciphertext(c0, a.c1.copy(), a.level, a.scale)

    def mul_const(self, a: Ciphertext, c: float, rescale: bool = True) -> Ciphertext:
        """Multiply by a real constant quantized at the scale of the limb to be dropped."""
        if rescale and a.level == 0:
            raise LevelUnderflow("no level left for a rescale")
        moduli = self.ctx.moduli(a.level)
        factor = float(moduli[-1]) if rescale else 1.0
        k = int(round(c * factor))
        s = np.array([k % qi for qi in moduli], dtype=np.uint64)
        q = self.ctx.qvec(a.level)
        out = Ciphertext(rns.mul_scalar(a.c0, s, q), rns.mul_scalar(a.c1, s, q),
                         a.level, a.scale * factor)
        return self.rescale(out) if rescale else out

    def mul_plain(self, a: Ciphertext, values, rescale: bool = True) -> Ciphertext:
        """Slotwise product with a cleartext vector; the scale is preserved on rescale."""
        return self.linear_combination_plain([a], [values], rescale=rescale)

    def linear_combination_plain(self, cts, vectors, rescale: bool = True) -> Ciphertext:
        """``sum_j cts[j] * vectors[j]`` with a single rescale at the end."""
        if len(cts) != len(vectors) or not cts:
            raise CryptoError("need matching, nonempty ciphertext and vector lists")
        level = min(c.level for c in cts)
        if rescale and level == 0:
            raise LevelUnderflow("no level left for a rescale")
        cts = [self.drop_level(c, level) for c in cts]
        for c in cts[1:]:
            self._check_scale(cts[0].scale, c.scale)
        moduli = self.ctx.moduli(level)
        pscale = float(moduli[-1]) if rescale else self.ctx.params.scale
        q = self.ctx.qvec(level)
        acc0 = np.zeros_like(cts[0].c0)
        acc1 = np.zeros_like(cts[0].c1)
        for c, v in zip(cts, vectors):
            pt = self.ctx.encode(np.asarray(v), level, pscale)
            rns.mul_acc(acc0, c.c0, pt.data, q)
            rns.mul_acc(acc1, c.c1, pt.data, q)
        out = Ciphertext(acc0, acc1, level, cts[0].scale * pscale)
        return self.rescale(out) if rescale else out

    def multiply(self, a: Ciphertext, b: Ciphertext, rescale: bool = True) -> Ciphertext:
        """Tensor, relinearize, and (by default) rescale."""
        if self.keys is None:
            raise MissingKey("relinearization key not loaded")
        a, b = self._align(a, b)
        if rescale and a.level == 0:
            raise LevelUnderflow("no level left for a rescale")
        q = self.ctx.qvec(a.level)
        d0 = rns.mul(a.c0, b.c0, q)
        d1 = rns.mul(a.c0, b.c1, q)
        rns.mul_acc(d1, a.c1, b.c0, q)
        d2 = rns.mul(a.c1, b.c1, q)
        k0, k1 = self._key_switch(d2, a.level, self.keys.relin)
        out = Ciphertext(rns.add(d0, k0, q), rns.add(d1, k1, q), a.level, a.scale * b.scale)
        return self.rescale(out) if rescale else out

    def square(self, a: Ciphertext, rescale: bool = True) -> Ciphertext:
        return self.multiply(a, a, rescale)

    def rescale(self, ct: Ciphertext) -> Ciphertext:
        if ct.level == 0:
            raise LevelUnderflow("ciphertext is at level 0; nothing left to rescale")
        moduli = self.ctx.moduli(ct.level)
        top = moduli[-1]
        lower = moduli[:-1]
        st_top = ntt_stack((top,), self.ctx.n)
        st_low = self.ctx.stack(ct.level - 1)
        q = self.ctx.qvec(ct.level - 1)
        inv = np.array([pow(top, -1, qi) for qi in lower], dtype=np.uint64)
        parts = []
        for c in (ct.c0, ct.c1):
            r = st_top.inverse(c[-1:])[0]
            r_low = st_low.forward(rns.lift_centered(r, top, lower))
            parts.append(rns.mul_scalar(rns.sub(c[:-1], r_low, q), inv, q))
        scale = ct.scale / top
        nominal = self.ctx.params.scale
        if not nominal / 2 <= scale <= nominal * 2:
            raise ScaleMismatch(f"scale {scale:.6g} after rescale is outside 2^+-1 of {nominal:.6g}")
        return Ciphertext(parts[0], parts[1], ct.level - 1, scale)

    def rotate(self, ct: Ciphertext, steps: int) -> Ciphertext:
        """Cyclic upward shift: slot ``j`` of the result holds slot ``j + steps``."""
        steps %= self.ctx.params.slots
        if steps == 0:
            return ct
        g = self.ctx.galois_element(steps)
        if self.keys is None or g not in self.keys.rotations:
            raise MissingKey(f"no rotation key for Galois element {g} (shift {steps})")
        perm = self.ctx.automorphism_perm(g)
        c0 = ct.c0[:, perm]
        c1 = np.ascontiguousarray(ct.c1[:, perm])
        k0, k1 = self._key_switch(c1, ct.level, self.keys.rotations[g])
        q = self.ctx.qvec(ct.level)
        return Ciphertext(rns.add(c0, k0, q), k1, ct.level, ct.scale)

    def _key_switch(self, d: np.ndarray, level: int, key: SwitchingKey):
        """Return ``(u0, u1)`` with ``u0 + u1 s ~ d * s'`` for the key's target ``s'``."""
        ctx = self.ctx
        moduli = ctx.moduli(level)
        L = len(moduli)
        rows = ctx.key_rows(level)
        ext_primes = moduli + ctx.params.special_primes
        kst = ctx.key_stack(level)
        qk = np.array(ext_primes, dtype=np.uint64)
        coeffs = ctx.stack(level).inverse(d)
        acc0 = np.zeros((len(ext_primes), ctx.n), dtype=np.uint64)
        acc1 = np.zeros_like(acc0)
        for i in range(L):
            digit = kst.forward(rns.lift_centered(coeffs[i], moduli[i], ext_primes))
            rns.mul_acc(acc0, digit, np.ascontiguousarray(key.b[i][rows]), qk)
            rns.mul_acc(acc1, digit, np.ascontiguousarray(key.a[i][rows]), qk)
        return self._mod_down(acc0, level), self._mod_down(acc1, level)

    def _mod_down(self, acc: np.ndarray, level: int) -> np.ndarray:
        """Divide by the special modulus with rounding, returning limbs at ``level``."""
        ctx = self.ctx
        moduli = ctx.moduli(level)
        L = len(moduli)
        specials = ctx.params.special_primes
        sp = ntt_stack(specials, ctx.n).inverse(acc[L:])
        if len(specials) == 1:
            v = rns.lift_centered(sp[0], specials[0], moduli)
        else:
            v = rns.lift_crt2(sp[0], sp[1], specials[0], specials[1], moduli)
        v = ctx.stack(level).forward(v)
        P = math.prod(specials)
        inv = np.array([pow(P % qi, -1, qi) for qi in moduli], dtype=np.uint64)
        q = ctx.qvec(level)
        return rns.mul_scalar(rns.sub(acc[:L], v, q), inv, q)
