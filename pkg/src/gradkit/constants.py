"""Physical constants (CODATA 2018) and unit conversions used across gradkit."""

MU0 = 1.25663706212e-6  # vacuum permeability, N/A^2
EPS0 = 8.8541878128e-12  # vacuum permittivity, F/m
E_CHARGE = 1.602176634e-19  # elementary charge, C
AMU = 1.66053906660e-27  # atomic mass unit, kg
MU_B_OVER_H_MHZ_PER_G = 1.39962449361  # Bohr magneton / Planck, MHz/G

# amu
MASS_SR88 = 87.9056121
MASS_CA40 = 39.962590863

UM = 1e-6
MA = 1e-3
TESLA_TO_GAUSS = 1e4
# T/m -> G/mm
TPM_TO_GPMM = 10.0

DEFAULT_SEED = 20090301
