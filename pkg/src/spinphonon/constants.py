"""Physical constants in wavenumber units.

All energies in this package are expressed in cm^-1. Phonon frequencies,
crystal-field parameters and Zeeman splittings share that unit, so the
only conversions needed are temperature (K) and external field (T) on the
way in, and absolute rates (s^-1) on the way out.
"""

import math

# Bohr magneton, cm^-1 per tesla
MU_B_CM1_PER_T = 0.46686

# Boltzmann constant, cm^-1 per kelvin
KB_CM1_PER_K = 0.69503

# Speed of light, cm/s (exact)
C_CM_S = 2.99792458e10

# Angular-frequency equivalent of 1 cm^-1: omega = 2*pi*c*nu_tilde.
# Rates computed in cm^-1 multiply by this to land in s^-1.
CM1_TO_RAD_S = 2.0 * math.pi * C_CM_S
