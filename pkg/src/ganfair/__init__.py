"""Group-rate bias of adversarially trained generators, with conditional and boosted-ensemble mitigations."""

__version__ = "0.1.0"
