"""Numerics for the one-dimensional Edwards model of self-repellent motion.

Modules
-------
airy        Airy functions, zeros, orthonormal Airy eigenbasis
sturm       principal eigenvalue rho(a) of the singular Sturm-Liouville family
constants   the six critical constants (a*, b*, c*, a**, b**, rho(a**))
rate        moment generating functions and the large-deviation rate function
spectral    overshoot kernel y_a, spectral expansion of w, heat flow, Green kernel
besselsim   squared-Bessel Monte Carlo estimators cross-validating the above
edwardsmc   direct polymer Monte Carlo (weighted Brownian paths)
cli         command line front end
"""

__version__ = "0.1.0"
