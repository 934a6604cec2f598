"""cryobudget - heat-load and noise budgets for dilution-refrigerator wiring."""

__version__ = "0.1.0"
__package_name__ = "cryobudget"
__description__ = (
    "Passive, active and radiative heat loads, thermal photon budgets and "
    "attenuator placement for dilution-refrigerator qubit wiring"
)
