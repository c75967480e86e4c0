from .networks import DRC, DRD, EBL2SH, Eb2shOutputs, HdrFramework, sample_grids

__all__ = ["DRC", "DRD", "EBL2SH", "Eb2shOutputs", "HdrFramework", "sample_grids"]
