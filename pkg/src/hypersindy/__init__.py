"""HyperSINDy: discovery of sparse stochastic governing equations.

An encoder maps state/derivative pairs to a latent code, a hypernetwork turns
latent draws into coefficient matrices over a polynomial library, and a
trainable hard-concrete mask keeps those matrices sparse.
"""

__version__ = "0.1.0"
