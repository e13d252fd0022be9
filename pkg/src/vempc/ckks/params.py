"""CKKS parameter sets and modulus-chain construction."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..errors import ConfigurationError
from .ntt import MAX_PRIME_BITS, find_primes, is_prime


@dataclass(frozen=True)
class CkksParams:
    """Leveled RNS-CKKS parameters.

    The ciphertext modulus at level ``l`` is the product of ``base_primes`` and
    the first ``l`` entries of ``scaling_primes``; rescaling drops the last
    scaling prime in use.  ``special_primes`` only appear inside key switching.
    ``security_bits`` is recorded metadata and is not validated.
    """

    log_n: int
    scale_bits: float
    base_primes: tuple
    scaling_primes: tuple
    special_primes: tuple
    hamming_weight: Optional[int] = None
    sigma: float = 3.2
    security_bits: int = 128
    label: str = field(default="", compare=False)

    def __post_init__(self):
        for name in ("base_primes", "scaling_primes", "special_primes"):
            object.__setattr__(self, name, tuple(int(q) for q in getattr(self, name)))
        if not 1 <= self.log_n <= 17:
            raise ConfigurationError("log_n must be in [1, 17]")
        if not self.base_primes or not self.special_primes:
            raise ConfigurationError("need at least one base and one special prime")
        primes = self.chain + self.special_primes
        if len(set(primes)) != len(primes):
            raise ConfigurationError("moduli must be distinct")
        two_n = 2 * self.n
        for q in primes:
            if q >= 1 << MAX_PRIME_BITS:
                raise ConfigurationError(f"modulus {q} exceeds {MAX_PRIME_BITS} bits")
            if not is_prime(q):
                raise ConfigurationError(f"modulus {q} is not prime")
            if (q - 1) % two_n:
                raise ConfigurationError(f"modulus {q} is not NTT-friendly (q != 1 mod {two_n})")
        max_digit = max(self.chain)
        if math.prod(self.special_primes) <= max_digit:
            raise ConfigurationError("special modulus must exceed every chain prime")
        if self.hamming_weight is not None and not 0 < self.hamming_weight <= self.n:
            raise ConfigurationError("hamming_weight must be in (0, N]")

    @property
    def n(self) -> int:
        return 1 << self.log_n

    @property
    def slots(self) -> int:
        return self.n // 2

    @property
    def scale(self) -> float:
        return float(2.0 ** self.scale_bits)

    @property
    def depth(self) -> int:
        """Maximum level, i.e. number of rescales a fresh ciphertext admits."""
        return len(self.scaling_primes)

    @property
    def chain(self) -> tuple:
        return self.base_primes + self.scaling_primes

    def moduli(self, level: int) -> tuple:
        if not 0 <= level <= self.depth:
            raise ConfigurationError(f"level {level} outside [0, {self.depth}]")
        return self.base_primes + self.scaling_primes[:level]

    def log_q(self, level: Optional[int] = None) -> float:
        level = self.depth if level is None else level
        return sum(math.log2(q) for q in self.moduli(level))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("label")
        for key in ("base_primes", "scaling_primes", "special_primes"):
            d[key] = list(d[key])
        return d

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_dict(cls, d: dict) -> "CkksParams":
        return cls(**{k: v for k, v in d.items() if k != "label"})


def make_params(log_n: int = 13, depth: int = 4, scale_bits: float = 30,
                n_base: int = 2, n_special: int = 2,
                hamming_weight: Optional[int] = None) -> CkksParams:
    """Default chain: ``n_base`` base primes and ``n_special`` special primes just
    under 2**31, plus ``depth`` scaling primes closest to ``2**scale_bits``."""
    n = 1 << log_n
    scaling_bits = min(scale_bits, MAX_PRIME_BITS - 0.5)
    scaling = find_primes(scaling_bits, depth, n, below=False)
    large = find_primes(MAX_PRIME_BITS, n_base + n_special, n, exclude=scaling)
    return CkksParams(log_n=log_n, scale_bits=scale_bits,
                      base_primes=tuple(large[:n_base]),
                      scaling_primes=tuple(scaling),
                      special_primes=tuple(large[n_base:]),
                      hamming_weight=hamming_weight,
                      label=f"logN={log_n},depth={depth},delta=2^{scale_bits}")
