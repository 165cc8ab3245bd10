"""Bounded model checker for concurrent programs under weak memory models.

Programs (litmus tests or a small C-like language) are translated to guarded
SSA plus a symbolic event structure; communication and architecture relations
become partial-order constraints over per-event clock variables; an external
SMT solver decides reachability.  A brute-force axiomatic oracle and an SC
interleaving executor cross-validate the encoder on small instances.
"""

__version__ = "0.1.0"
