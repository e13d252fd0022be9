"""Variational MPC with encrypted sampling.

Subpackages: ``mpc_core`` (plaintext control math), ``ckks`` (leveled RNS-CKKS),
``he_backend`` (backend contract and adapters), ``protocol`` (client/cloud
roles and transport) and ``harness_cli`` (configs, simulation, ``vempc`` CLI).
"""

__version__ = "0.1.0"
