"""symphase: controlled-Hamiltonian latent world models on toy physics.

Learned phase-space dynamics with symplectic rollouts, an invariance-by-
construction energy network, contrastive viewpoint-robust encoding,
symmetry-probing intrinsic exploration, and a pretrain/adapt pipeline, all
checked against closed-form mechanics.
"""

__version__ = "0.1.0"
