"""Multi-modal molecular property prediction with disentangled
shared/private latent spaces and gated attention fusion.
"""

__version__ = "0.1.0"
