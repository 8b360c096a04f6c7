"""Driver registry for the fit loop."""

from __future__ import annotations

from ..errors import ConfigurationError
from .base import Driver
from .deterministic import (
    AemDriver,
    AitkenDriver,
    CemDriver,
    EcmDriver,
    EcmeDriver,
    EmDriver,
    GemDriver,
    IncrementalDriver,
    SageDriver,
    SparseDriver,
    SparseState,
    aem_step,
    aitken_step,
    cem_step,
    ecm_step,
    ecme_step,
    gem_step,
    incremental_em_step,
    sage_cycle,
    sparse_em_step,
)
from .expansion import (
    ExpandedModel,
    LatentScaleExpansion,
    NullExpansion,
    PxEmDriver,
    px_em_step,
)
from .stochastic import (
    SAEM2_DEFAULT,
    SAEM_DEFAULT,
    AnnealingSchedule,
    DaDriver,
    McemDriver,
    Saem2Driver,
    SaemDriver,
    SemDriver,
    da_step,
    mcem_step,
    mh_label_chain,
    saem2_step,
    saem_hybrid_step,
    sem_step,
)

DRIVERS = {
    cls.tag: cls
    for cls in (
        EmDriver,
        GemDriver,
        CemDriver,
        AitkenDriver,
        AemDriver,
        EcmDriver,
        EcmeDriver,
        SageDriver,
        PxEmDriver,
        IncrementalDriver,
        SparseDriver,
        SemDriver,
        DaDriver,
        SaemDriver,
        McemDriver,
        Saem2Driver,
    )
}


def make_driver(model, config, rng) -> Driver:
    try:
        cls = DRIVERS[config.variant]
    except KeyError:
        raise ConfigurationError(f"unknown variant {config.variant!r}") from None
    return cls(model, config.options, rng)


__all__ = [
    "AnnealingSchedule",
    "DRIVERS",
    "Driver",
    "ExpandedModel",
    "LatentScaleExpansion",
    "NullExpansion",
    "SAEM2_DEFAULT",
    "SAEM_DEFAULT",
    "SparseState",
    "make_driver",
    "aem_step",
    "aitken_step",
    "cem_step",
    "da_step",
    "ecm_step",
    "ecme_step",
    "gem_step",
    "incremental_em_step",
    "mcem_step",
    "mh_label_chain",
    "px_em_step",
    "saem2_step",
    "saem_hybrid_step",
    "sage_cycle",
    "sem_step",
    "sparse_em_step",
]
