"""Link-level simulation toolkit for LDPC-coded BICM over the uncorrelated
flat Rayleigh fading channel with unknown CSI.

Provides exact channel LLRs, Taylor-series LLR approximations, their
analytic densities, a quantized density-evolution threshold engine, and a
Monte Carlo BER harness.
"""

__version__ = "0.1.0"
