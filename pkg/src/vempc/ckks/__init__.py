"""From-scratch leveled RNS-CKKS engine."""

from .budget import ErrorBudget, calibrate_primitives, compute_budget
from .encoding import embed, embed_inverse
from .ntt import NttStack, find_primes, is_prime, ntt_stack
from .params import CkksParams, make_params
from .scheme import (Ciphertext, CkksContext, Decryptor, Encryptor, EvaluationKeys,
                     Evaluator, KeyBundle, Plaintext, PublicKey, SecretKey, SwitchingKey,
                     keygen)
from .serialize import (dump_evaluation_keys, dumps, load_evaluation_keys, loads,
                        loads_prefix)

__all__ = [
    "Ciphertext", "CkksContext", "CkksParams", "Decryptor", "Encryptor", "ErrorBudget",
    "EvaluationKeys", "Evaluator", "KeyBundle", "NttStack", "Plaintext", "PublicKey",
    "SecretKey", "SwitchingKey", "calibrate_primitives", "compute_budget",
    "dump_evaluation_keys", "dumps", "embed", "embed_inverse", "find_primes", "is_prime",
    "keygen", "load_evaluation_keys", "loads", "loads_prefix", "make_params", "ntt_stack",
]
