"""
Latent Plan Transformer: trajectory-return modeling with a latent plan,
Langevin posterior sampling, and planning as inference.
"""

__version__ = "0.1.0"
