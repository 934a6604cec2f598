"""Shared fixtures: bundled catalog, the five-plate fridge and the canonical lines."""

import pytest

from cryobudget.config import build_fridge, load_preset, validate_config
from cryobudget.fridge import Component, ComponentKind, LineKind, LineSpec, Segment, Thermalization
from cryobudget.materials import load_catalog

STAGES = ("50K", "4K", "Still", "CP", "MXC")


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def fridge():
    return build_fridge(validate_config(load_preset("basefridge")).fridge)


@pytest.fixture(scope="session")
def ss_cable(catalog):
    return catalog.cable("UT085-SS-SS")


@pytest.fixture(scope="session")
def nbti_cable(catalog):
    return catalog.cable("UT085-NbTi-NbTi")


def attenuators(plan):
    return {stage: (Component(ComponentKind.ATTENUATOR, db),) if db else () for stage, db in plan.items()}


def coax_line(cable, plan, name="drive", kind=LineKind.DRIVE, count=1):
    parts = attenuators(plan)
    return LineSpec(
        name=name,
        kind=kind,
        segments=tuple(Segment(stage, cable, components=parts.get(stage, ())) for stage in STAGES),
        count=count,
    )


@pytest.fixture
def drive_line(ss_cable):
    """Stainless drive line with 20 dB at 4K, CP and MXC."""
    return coax_line(ss_cable, {"50K": 0, "4K": 20, "Still": 0, "CP": 20, "MXC": 20})


@pytest.fixture
def flux_line(ss_cable):
    return LineSpec(
        name="flux",
        kind=LineKind.FLUX,
        segments=(
            Segment("50K", ss_cable),
            Segment("4K", ss_cable, components=(Component(ComponentKind.ATTENUATOR, 20),)),
            Segment("Still", ss_cable),
            Segment("CP", ss_cable, center_thermalization=Thermalization.NONE),
            Segment("MXC", ss_cable, components=(Component(ComponentKind.LOWPASS),)),
        ),
    )


@pytest.fixture
def output_line(nbti_cable):
    return LineSpec(
        name="output",
        kind=LineKind.OUTPUT_NBTI,
        top="4K",
        segments=(
            Segment("Still", nbti_cable),
            Segment("CP", nbti_cable),
            Segment("MXC", nbti_cable, components=(Component(ComponentKind.AMPLIFIER),)),
        ),
    )
